import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from keplaw import ephemeris as eph
from keplaw.errors import DegenerateRangeError, ParseError, UnsupportedEraError


def test_parse_line():
    (ob,) = eph.parse_catalog("1587/03/10 11:30,177.59833,1.64382,0,0\n")
    assert ob.theta_deg == 177.59833
    assert ob.r_au == 1.64382
    assert ob.residual_arcsec == 0.0
    assert ob.date_old_style == dt.date(1587, 3, 10)
    assert ob.clock == dt.time(11, 30)


def test_parse_empty_and_comments():
    assert eph.parse_catalog("") == []
    assert eph.parse_catalog("# only a comment\n\n") == []


@pytest.mark.parametrize(
    "line",
    [
        "1587/03/10 11:30,177.59833,-1.0,0,0",
        "1587/03/10 11:30,177.59833,0,0,0",
        "1587/03/10 11:30,360.0,1.6,0,0",
        "1587/13/10 11:30,177.59833,1.6,0,0",
        "1587/03/10 11:30,abc,1.6,0,0",
        "1587/03/10 11:30,177.59833,1.6,0",
    ],
)
def test_parse_errors_name_the_line(line):
    with pytest.raises(ParseError) as info:
        eph.parse_catalog("# header\n" + line + "\n")
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_negative_residual_fields():
    (ob,) = eph.parse_catalog("1590/01/01 00:00,10.0,1.5,-1,-30\n")
    assert ob.residual_arcsec == -90.0


def test_tycho_catalog():
    obs = eph.load_tycho()
    assert len(obs) == 28
    assert min(o.r_au for o in obs) == 1.38376
    assert max(o.r_au for o in obs) == 1.664
    # row 13 carries the corrected date, the verbatim table keeps the printed one
    assert obs[12].date_old_style == dt.date(1589, 3, 8)
    assert eph.load_tycho(verbatim=True)[12].date_old_style == dt.date(1589, 5, 8)


def test_validation_flags_only_the_verbatim_row():
    assert eph.validate(eph.load_tycho()) == []
    warnings = eph.validate(eph.load_tycho(verbatim=True))
    assert warnings and any("13" in w for w in warnings)


def test_epoch_days():
    obs = eph.load_tycho()
    assert eph.old_style_to_epoch_days(obs[0], obs[0]).days == 0.0
    # 1582/11/23 16:00 -> 1582/12/26 08:30 is 33 days less 7.5 hours
    assert obs[1].stamp == dt.datetime(1582, 12, 26, 8, 30)
    assert eph.old_style_to_epoch_days(obs[1], obs[0]).days == 32.6875


def test_gregorian_shift():
    assert eph.to_gregorian(dt.date(1582, 11, 23)) == dt.date(1582, 12, 3)


def test_unsupported_era():
    early = eph.Observation(dt.date(1582, 10, 1), dt.time(0, 0), 10.0, 1.5)
    with pytest.raises(UnsupportedEraError):
        eph.old_style_to_epoch_days(early, early)
    late = eph.Observation(dt.date(1700, 3, 1), dt.time(0, 0), 10.0, 1.5)
    with pytest.raises(UnsupportedEraError):
        eph.to_gregorian(late.date_old_style)


@pytest.mark.parametrize("t,expected", [(0.0, 0.0), (687.0, 0.0), (343.5, 0.5)])
def test_fold_examples(t, expected):
    assert eph.fold_to_period(t, 687.0) == expected


@given(st.floats(0.0, 1e4), st.integers(0, 20))
def test_fold_periodic(t, k):
    a = eph.fold_to_period(t, 687.0)
    b = eph.fold_to_period(t + k * 687.0, 687.0)
    assert 0.0 <= a < 1.0
    assert min(abs(a - b), 1.0 - abs(a - b)) < 1e-9
    assert eph.fold_to_period(a * 687.0, 687.0) == pytest.approx(a, abs=1e-12)


def test_unwrap_example():
    out = eph.unwrap_longitudes([344.62083, 6.32750])
    # 344.62083 * pi/180 and (6.32750 + 360) * pi/180, evaluated independently
    assert out == pytest.approx([6.0147682, 6.3936210], abs=1e-7)
    assert eph.unwrap_longitudes([1.0, 2.0, 3.0]) == pytest.approx(np.radians([1.0, 2.0, 3.0]), abs=0)
    assert eph.unwrap_longitudes([5.0]) == pytest.approx([math.radians(5.0)], abs=0)


@given(st.lists(st.floats(0.0, 359.999), min_size=1, max_size=40))
def test_unwrap_adds_whole_turns(deg):
    out = eph.unwrap_longitudes(deg)
    turns = (out - np.radians(deg)) / (2 * math.pi)
    assert np.allclose(turns, np.round(turns), atol=1e-9)
    assert np.all(np.diff(out) >= -math.pi - 1e-12)


def test_normalize():
    samples, rec = eph.normalize([0.0, math.pi, 2 * math.pi], [1.0, 2.0, 3.0],
                                 input_scaling=eph.Scaling(0.0, 2 * math.pi))
    assert samples[-1].x == 1.0
    assert [s.y for s in samples] == [0.0, 0.5, 1.0]
    assert rec.target.inverse(0.5) == 2.0
    with pytest.raises(DegenerateRangeError):
        eph.normalize([1.0, 1.0], [1.0, 2.0])


@given(st.integers(0, 27), st.integers(0, 27))
def test_day_differences_ignore_the_calendar_shift(i, j):
    obs = eph.load_tycho()
    a, b = obs[i], obs[j]
    plain = (a.stamp - b.stamp).total_seconds() / 86400.0
    assert eph.old_style_to_epoch_days(a, b).days == plain


def test_catalog_round_trip():
    text = eph.tycho_path().read_text()
    obs = eph.parse_catalog(text)
    again = eph.parse_catalog(eph.format_catalog(obs))
    assert again == obs


def test_theta_of_t_task_is_monotone():
    _, folded, theta, order = eph.theta_of_t_task(eph.load_tycho())
    assert np.all(np.diff(folded) >= 0)
    assert np.all(np.diff(theta) > 0)
    assert sorted(order.tolist()) == list(range(28))
