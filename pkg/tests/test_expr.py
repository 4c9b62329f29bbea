import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from keplaw import expr as ex
from keplaw import search as sr
from keplaw.errors import ExpressionSyntaxError, UnboundVariableError

ORBIT_LAW = "1.51977 / (1.00625 + 0.0932972 * cos(x0 + 0.544536))"


def test_orbit_law_at_perihelion():
    # the cosine is 1 there, so r = 1.51977 / (1.00625 + 0.0932972) = 1.51977 / 1.0995472
    r = ex.evaluate(ex.parse(ORBIT_LAW), [-0.544536])
    assert r == pytest.approx(1.51977 / 1.0995472, rel=1e-15)
    assert r == pytest.approx(1.38218, abs=5e-6)


def test_evaluate_basics():
    assert ex.evaluate(ex.Constant(2.5), [1.0, 2.0]) == 2.5
    assert ex.evaluate(ex.Constant(2.5), []) == 2.5
    assert ex.is_fault(ex.evaluate(ex.div(ex.Constant(1.0), ex.Constant(0.0)), []))
    out = ex.evaluate(ex.parse("1 / x0"), [np.array([1.0, 0.0, 2.0])])
    assert ex.is_fault(out).tolist() == [False, True, False]
    with pytest.raises(UnboundVariableError):
        ex.evaluate(ex.parse("x1"), [1.0])


@pytest.mark.parametrize(
    "text,size",
    [
        ("1.54329+0.0130577*x", 5),
        ("1.45537+0.021878*x*x", 7),
        ("x", 1),
        ("cos(x)", 5),
        ("1/x", 4),
    ],
)
def test_size(text, size):
    assert ex.size(ex.parse(text, ["x"])) == size


def test_fold_constants():
    assert ex.fold_constants(ex.add(ex.Constant(1), ex.Constant(2))) == ex.Constant(3.0)
    unchanged = ex.mul(ex.Variable(0), ex.Constant(1.0))
    assert ex.fold_constants(unchanged) == unchanged
    assert ex.fold_constants(ex.cos(ex.Constant(0.0))) == ex.Constant(1.0)
    faulty = ex.div(ex.Constant(1.0), ex.Constant(0.0))
    assert ex.fold_constants(faulty) == faulty


def test_parse_and_print():
    e = ex.parse(ORBIT_LAW)
    assert ex.parse(ex.to_text(e)) == e
    assert ex.parse("x0") == ex.Variable(0)
    assert ex.parse("theta * 2", ["theta"]) == ex.mul(ex.Variable(0), ex.Constant(2.0))
    assert ex.parse("2 - -3") == ex.sub(ex.Constant(2.0), ex.Constant(-3.0))
    assert ex.parse("-x0") == ex.mul(ex.Constant(-1.0), ex.Variable(0))
    assert ex.parse("1 - (2 - x0)") != ex.parse("1 - 2 - x0")
    assert ex.pretty(e, ["theta"]) == "1.51977 / (1.00625 + 0.0932972 * cos(theta + 0.544536))"


@pytest.mark.parametrize("text,pos", [("(x0 + 1", 7), ("x0 + ", 4), ("x0 $ 1", 3), ("foo(x0)", 0), ("x0 x1", 3)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ExpressionSyntaxError) as info:
        ex.parse(text)
    assert info.value.position == pos


def _random_trees(n, seed, max_depth=6):
    cfg = sr.SearchConfig(ops=("add", "sub", "mul", "div", "cos", "sin"))
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield sr.random_tree(rng, cfg, 3, max_depth=max_depth)


def test_print_parse_evaluate_round_trip_10k():
    grid = [np.linspace(-3, 3, 13), np.linspace(0.5, 2, 13), np.linspace(-1, 4, 13)]
    for e in _random_trees(10_000, seed=0):
        assert ex.depth(e) <= 6
        again = ex.parse(ex.to_text(e))
        assert again == e
        a = np.broadcast_to(ex.evaluate(e, grid), (13,))
        b = np.broadcast_to(ex.evaluate(again, grid), (13,))
        assert np.array_equal(a, b, equal_nan=True)


def test_fold_never_grows():
    for e in _random_trees(2000, seed=1):
        folded = ex.fold_constants(e)
        n_before = len(list(sr._nodes(e)))
        n_after = len(list(sr._nodes(folded)))
        if n_after == n_before:
            assert ex.size(folded) == ex.size(e)
        else:
            assert ex.size(folded) < ex.size(e)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False))
def test_evaluate_is_pure(a, b):
    e = ex.parse("x0 * cos(x1) / (1.5 + x0 * x0)")
    assert ex.evaluate(e, [a, b]) == ex.evaluate(e, [a, b]) or math.isnan(ex.evaluate(e, [a, b]))


def test_constants_and_with_constants():
    e = ex.parse(ORBIT_LAW)
    assert ex.constants(e) == [1.51977, 1.00625, 0.0932972, 0.544536]
    assert ex.constants(ex.with_constants(e, [1, 2, 3, 4])) == [1.0, 2.0, 3.0, 4.0]
    assert ex.variables(e) == {0}
