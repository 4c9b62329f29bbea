"""Mars observation catalog: parsing, calendar handling, folding, scaling.

Catalog rows look like::

    1587/03/10 11:30,177.59833,1.64382,0,0

i.e. ``YYYY/MM/DD HH:MM,theta_deg,r_au,residual_min,residual_sec`` with
old-style (Julian) dates. Both residual fields carry the sign of the
residual, so ``-0'10"`` is written ``0,-10``.
"""

import datetime as dt
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from keplaw.errors import DegenerateRangeError, ParseError, UnsupportedEraError

MARS_PERIOD_DAYS = 687.0
GREGORIAN_OFFSET_DAYS = 10

# Old-style dates for which Gregorian = Julian + 10 days.
_ERA_START = dt.date(1582, 10, 5)
_ERA_END = dt.date(1700, 2, 28)


@dataclass(frozen=True)
class Observation:
    date_old_style: dt.date
    clock: dt.time
    theta_deg: float
    r_au: float
    residual_arcsec: float = 0.0
    line: int = field(default=0, compare=False)

    @property
    def stamp(self):
        return dt.datetime.combine(self.date_old_style, self.clock)


@dataclass(frozen=True)
class EpochTime:
    days: float


@dataclass(frozen=True)
class NormalizedSample:
    x: float
    y: float
    provenance: object = "augmented"


@dataclass(frozen=True)
class Scaling:
    """Affine map ``x = (u - offset) / scale`` and its inverse."""

    offset: float = 0.0
    scale: float = 1.0

    def forward(self, u):
        return (np.asarray(u, dtype=float) - self.offset) / self.scale

    def inverse(self, x):
        return np.asarray(x, dtype=float) * self.scale + self.offset

    @classmethod
    def min_max(cls, values):
        values = np.asarray(values, dtype=float)
        lo, hi = float(values.min()), float(values.max())
        if not hi > lo:
            raise DegenerateRangeError(f"zero range: all values equal {lo!r}")
        return cls(lo, hi - lo)

    def to_dict(self):
        return {"offset": self.offset, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["offset"]), float(d["scale"]))


@dataclass(frozen=True)
class ScalingRecord:
    input: Scaling
    target: Scaling


def _parse_stamp(text, line):
    try:
        stamp = dt.datetime.strptime(text.strip(), "%Y/%m/%d %H:%M")
    except ValueError:
        raise ParseError(f"malformed date {text.strip()!r}", line) from None
    return stamp


def _parse_float(text, what, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"malformed {what} {text.strip()!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what}", line)
    return value


def parse_catalog(text):
    """Parse catalog text into a list of :class:`Observation` in file order."""
    observations = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", lineno)
        stamp = _parse_stamp(parts[0], lineno)
        theta = _parse_float(parts[1], "angle", lineno)
        if not 0.0 <= theta < 360.0:
            raise ParseError(f"angle {theta} outside [0, 360)", lineno)
        r = _parse_float(parts[2], "distance", lineno)
        if r <= 0.0:
            raise ParseError(f"non-positive distance {r}", lineno)
        minutes = _parse_float(parts[3], "residual minutes", lineno)
        seconds = _parse_float(parts[4], "residual seconds", lineno)
        observations.append(
            Observation(stamp.date(), stamp.time(), theta, r, 60.0 * minutes + seconds, lineno)
        )
    return observations


def read_catalog(path):
    with open(path) as fh:
        return parse_catalog(fh.read())


def format_catalog(observations, decimals=5, header=None):
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for ob in observations:
        res = ob.residual_arcsec
        sign = -1 if res < 0 else 1
        m, s = divmod(round(abs(res)), 60)
        lines.append(
            f"{ob.stamp:%Y/%m/%d %H:%M},{ob.theta_deg:.{decimals}f},{ob.r_au:.{decimals}f},"
            f"{sign * m},{sign * s}"
        )
    return "\n".join(lines) + "\n"


def load_tycho(verbatim=False):
    """The 28-row Mars catalog that ships with the package.

    The default file corrects the date of the row printed as 1589/05/08 to
    1589/03/08: the printed date puts that row 61 days out of orbital phase,
    while the corrected one makes it the one-period partner of the
    1587/04/21 row, as its near-identical longitude requires. ``verbatim``
    returns the table exactly as printed.
    """
    name = "tycho_mars_verbatim.csv" if verbatim else "tycho_mars.csv"
    text = resources.files("keplaw.data").joinpath(name).read_text()
    return parse_catalog(text)


def tycho_path(verbatim=False):
    name = "tycho_mars_verbatim.csv" if verbatim else "tycho_mars.csv"
    return resources.files("keplaw.data").joinpath(name)


def _check_era(date):
    if not _ERA_START <= date <= _ERA_END:
        raise UnsupportedEraError(
            f"old-style date {date:%Y/%m/%d} outside supported era "
            f"{_ERA_START:%Y/%m/%d}..{_ERA_END:%Y/%m/%d}"
        )


def to_gregorian(date):
    _check_era(date)
    return date + dt.timedelta(days=GREGORIAN_OFFSET_DAYS)


def old_style_to_epoch_days(obs, epoch):
    """Fractional days from ``epoch`` to ``obs``; both converted to Gregorian first."""
    a = dt.datetime.combine(to_gregorian(obs.date_old_style), obs.clock)
    b = dt.datetime.combine(to_gregorian(epoch.date_old_style), epoch.clock)
    return EpochTime((a - b).total_seconds() / 86400.0)


def fold_to_period(t, period_days=MARS_PERIOD_DAYS):
    days = getattr(t, "days", t)
    frac = (days % period_days) / period_days
    return 0.0 if frac >= 1.0 else frac


def unwrap_longitudes(theta_deg):
    """Degrees in orbital order -> radians with +-2pi added so no step drops below -pi."""
    return np.unwrap(np.radians(np.asarray(theta_deg, dtype=float)))


def normalize(inputs, targets, input_scaling=None, target_scaling=None, provenance=None):
    """Scale inputs (and targets) onto [0, 1]; returns ``(samples, ScalingRecord)``.

    Without an explicit ``input_scaling`` the inputs are min-max scaled. The
    r(theta) task passes ``Scaling(0, 2*pi)``; folded time is already in
    [0, 1] and uses the identity.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.size == 0:
        raise DegenerateRangeError("no samples to normalize")
    if inputs.shape != targets.shape:
        raise ValueError("inputs and targets differ in length")
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
        raise DegenerateRangeError("non-finite values")
    input_scaling = input_scaling or Scaling.min_max(inputs)
    target_scaling = target_scaling or Scaling.min_max(targets)
    x = input_scaling.forward(inputs)
    y = target_scaling.forward(targets)
    if provenance is None:
        provenance = range(len(x))
    samples = [NormalizedSample(float(a), float(b), p) for a, b, p in zip(x, y, provenance)]
    return samples, ScalingRecord(input_scaling, target_scaling)


def r_of_theta_task(observations):
    """(theta_rad, r_au, row index) arrays in file order."""
    theta = np.radians([ob.theta_deg for ob in observations])
    r = np.array([ob.r_au for ob in observations])
    return theta, r, np.arange(len(observations))


def theta_of_t_task(observations, period_days=MARS_PERIOD_DAYS):
    """Fold times into one period and unwrap longitudes.

    Returns ``(t_days, t_fold, theta_rad, row index)`` sorted by folded
    time; the epoch is the first catalog row.
    """
    epoch = observations[0]
    days = np.array([old_style_to_epoch_days(ob, epoch).days for ob in observations])
    folded = np.array([fold_to_period(d, period_days) for d in days])
    order = np.argsort(folded, kind="stable")
    theta = unwrap_longitudes([observations[i].theta_deg for i in order])
    return days[order], folded[order], theta, order


def validate(observations, period_days=MARS_PERIOD_DAYS):
    """Soft checks; returns a list of human-readable warnings."""
    warnings = []
    for i, ob in enumerate(observations, start=1):
        if not 1.3 < ob.r_au < 1.8:
            warnings.append(f"row {i}: distance {ob.r_au} AU outside the Mars range (1.3, 1.8)")
        if abs(ob.residual_arcsec) >= 600:
            warnings.append(f"row {i}: residual {ob.residual_arcsec}\" exceeds six arc-minutes")
    if len(observations) >= 2:
        _, folded, theta, order = theta_of_t_task(observations, period_days)
        for k in range(1, len(theta)):
            drop = theta[k - 1] - theta[k]
            if drop > 0:
                a, b = order[k - 1] + 1, order[k] + 1
                warnings.append(
                    f"rows {a} -> {b}: longitude decreases by {math.degrees(drop):.3f} deg "
                    f"with orbital phase {folded[k - 1]:.4f} -> {folded[k]:.4f}; "
                    "check the date of one of them"
                )
    return warnings
