import math

import numpy as np
import pytest

from keplaw import ephemeris as eph
from keplaw import network as nn
from keplaw.errors import DataError, DivergenceError


def _samples(f, n=25):
    xs = np.linspace(0.0, 1.0, n)
    return [eph.NormalizedSample(float(x), float(f(x)), i) for i, x in enumerate(xs)]


def test_split_sizes():
    samples = _samples(lambda x: x, 28)
    train, val = nn.split(samples, 3, seed=0)
    assert (len(train), len(val)) == (25, 3)
    assert nn.split(samples, 0, seed=0) == (samples, [])
    assert nn.split(samples, 3, seed=5) == nn.split(samples, 3, seed=5)
    with pytest.raises(DataError):
        nn.split(samples, 28, seed=0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    widths = (1, 6, 5, 1)
    weights, biases = nn.init_params(widths, rng)
    biases = [rng.normal(0.0, 0.3, b.shape) for b in biases]
    x = rng.uniform(0.0, 1.0, (9, 1))
    y = rng.uniform(0.0, 1.0, (9, 1))
    _, gw, gb = nn.loss_and_grad(weights, biases, x, y)
    h = 1e-6
    for params, grads in ((weights, gw), (biases, gb)):
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = nn.loss_and_grad(weights, biases, x, y)[0]
                p[idx] = old - h
                down = nn.loss_and_grad(weights, biases, x, y)[0]
                p[idx] = old
                numeric = (up - down) / (2 * h)
                assert abs(numeric - g[idx]) <= 1e-4 * max(abs(numeric), abs(g[idx]), 1e-6)


def test_constant_dataset_is_fit_exactly():
    # a single affine layer represents a constant exactly
    data = _samples(lambda x: 0.5)
    cfg = nn.TrainConfig(epochs=20000, lr=1e-2, lr_final=1e-9, log_every=20000)
    model, trace = nn.train(data, [], cfg, widths=(1, 1))
    assert trace[-1][1] < 1e-12


@pytest.mark.slow
def test_line_is_reproduced():
    data = _samples(lambda x: 0.3 * x + 0.2)
    model, trace = nn.train(data, [], nn.TrainConfig(epochs=50000, log_every=1000))
    grid = np.linspace(0.0, 1.0, 1001)
    assert np.max(np.abs(model.predict(grid) - (0.3 * grid + 0.2))) < 1e-4
    first = dict((e, tr) for e, tr, _ in trace)
    assert trace[-1][1] <= first[1000]


@pytest.fixture(scope="module")
def small_model():
    data = _samples(lambda x: math.sin(3 * x) * 0.4 + 0.5)
    train, val = nn.split(data, 3, seed=0)
    model, trace = nn.train(train, val, nn.TrainConfig(epochs=3000, log_every=500),
                            input_scaling=eph.Scaling(0.0, 2.0), target_scaling=eph.Scaling(1.0, 3.0))
    return model, trace, train


def test_trace_rows(small_model):
    _, trace, _ = small_model
    assert [row[0] for row in trace] == [500, 1000, 1500, 2000, 2500, 3000]
    assert all(math.isfinite(v) for row in trace for v in row[1:])


def test_predict_near_training_targets(small_model):
    model, trace, train = small_model
    tol = 3 * math.sqrt(trace[-1][1])
    for s in train:
        assert abs(model.predict(s.x) - s.y) <= tol + 1e-15


def test_predict_is_deterministic(small_model):
    model, _, _ = small_model
    x = np.linspace(0, 1, 101)
    assert np.array_equal(model.predict(x), model.predict(x))
    assert model.predict(0.3) == model.predict(np.array([0.3]))[0]


def test_physical_call_uses_scalings(small_model):
    model, _, _ = small_model
    u = np.array([0.0, 1.0, 2.0])
    assert np.array_equal(model(u), model.predict(u / 2.0) * 3.0 + 1.0)
    assert model.extrapolating(np.array([-0.1, 0.5, 1.2])).tolist() == [True, False, True]


def test_checkpoint_round_trip(small_model, tmp_path):
    model, _, _ = small_model
    path = tmp_path / "m.json"
    model.save(path)
    again = nn.NetworkModel.load(path)
    x = np.linspace(-0.2, 1.2, 57)
    assert np.array_equal(again.predict(x, physical=True), model.predict(x, physical=True))
    assert again.widths == model.widths


def test_checkpoint_version_is_checked(small_model):
    d = small_model[0].to_dict()
    d["version"] = 99
    with pytest.raises(DataError):
        nn.NetworkModel.from_dict(d)


def test_training_is_reproducible():
    data = _samples(lambda x: x * x)
    cfg = nn.TrainConfig(epochs=200, log_every=100)
    a, _ = nn.train(data, [], cfg)
    b, _ = nn.train(data, [], cfg)
    assert all(np.array_equal(p, q) for p, q in zip(a.weights + a.biases, b.weights + b.biases))


def test_divergence_names_epoch():
    data = [eph.NormalizedSample(0.0, 1e300), eph.NormalizedSample(1.0, -1e300)]
    with pytest.raises(DivergenceError) as info:
        nn.train(data, [], nn.TrainConfig(epochs=10, log_every=5))
    assert info.value.epoch == 1


def test_config_validation():
    with pytest.raises(ValueError):
        nn.TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        nn.TrainConfig(n_val=-1)
