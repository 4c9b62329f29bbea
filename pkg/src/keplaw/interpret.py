"""Physical reading of selected expressions: conics, power laws, constants."""

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from keplaw import expr as ex
from keplaw.errors import DataError, NotAConicError, NotAnEllipseError

KEPLER_ECCENTRICITY = 0.09264
MODERN_ECCENTRICITY = 0.09341233
MODERN_SEMI_MAJOR_AXIS = 1.52366231
GM_SUN = 2.96e-4  # AU^3 / day^2
KEPLER3_KEPLER = 7.5e-6
KEPLER3_MODERN = 7.495e-6

# Relative deviation allowed between the cosine's frequency and 1.
FREQUENCY_TOL = 1e-2

CAVEAT = (
    "c/(4 pi^2) is a constant of the Mars orbit alone; one planet cannot show that "
    "a^3/T^2 is shared by all planets, so this is not a derivation of Kepler's third law."
)


def rel_error(value, reference):
    return abs(value - reference) / abs(reference)


@dataclass(frozen=True)
class ConicFit:
    """``r = l / (1 + eps*cos(theta + phi0))``."""

    l: float
    eps: float
    phi0: float

    def __post_init__(self):
        if not self.l > 0.0:
            raise NotAConicError(f"semi-latus rectum {self.l} is not positive")
        if self.eps < 0.0:
            raise NotAConicError(f"negative eccentricity {self.eps}")
        if self.eps >= 1.0:
            raise NotAnEllipseError(f"eccentricity {self.eps} >= 1 is not an ellipse")

    def radius(self, theta):
        return self.l / (1.0 + self.eps * np.cos(np.asarray(theta, dtype=float) + self.phi0))

    def to_expr(self):
        return ex.div(
            ex.Constant(self.l),
            ex.add(ex.Constant(1.0), ex.mul(ex.Constant(self.eps),
                                            ex.cos(ex.add(ex.Variable(0), ex.Constant(self.phi0))))),
        )


def normalize_angle(phi):
    """Map to (-pi, pi]."""
    phi = math.remainder(phi, 2.0 * math.pi)
    return math.pi if phi == -math.pi else phi


def _is_const(e):
    return not ex.variables(e)


def _value(e):
    return float(ex.evaluate(e, ()))


def _affine(e, target):
    """``(p, q)`` with ``e == p + q*target`` structurally, or None."""
    if e == target:
        return 0.0, 1.0
    if _is_const(e):
        return _value(e), 0.0
    if isinstance(e, ex.Binary):
        a = _affine(e.left, target)
        b = _affine(e.right, target)
        if e.op == "add" and a and b:
            return a[0] + b[0], a[1] + b[1]
        if e.op == "sub" and a and b:
            return a[0] - b[0], a[1] - b[1]
        if e.op == "mul" and a and b:
            if a[1] == 0.0:
                return a[0] * b[0], a[0] * b[1]
            if b[1] == 0.0:
                return a[0] * b[0], a[1] * b[0]
        if e.op == "div" and a and b and b[1] == 0.0 and b[0] != 0.0:
            return a[0] / b[0], a[1] / b[0]
    return None


def _cos_nodes(e):
    found = []

    def walk(n):
        if isinstance(n, ex.Unary):
            if n.op == "cos":
                found.append(n)
            walk(n.arg)
        elif isinstance(n, ex.Binary):
            walk(n.left)
            walk(n.right)

    walk(e)
    return found


def _reciprocal_affine(e, u):
    """``(N, p, q)`` with ``e == N / (p + q*u)``, or None."""
    if isinstance(e, ex.Binary):
        if e.op == "div" and _is_const(e.left):
            den = _affine(e.right, u)
            if den:
                return _value(e.left), den[0], den[1]
        if e.op == "div" and _is_const(e.right):
            inner = _reciprocal_affine(e.left, u)
            k = _value(e.right)
            if inner and k != 0.0:
                return inner[0] / k, inner[1], inner[2]
        if e.op == "mul":
            for a, b in ((e.left, e.right), (e.right, e.left)):
                if _is_const(a):
                    inner = _reciprocal_affine(b, u)
                    if inner:
                        return _value(a) * inner[0], inner[1], inner[2]
    return None


def to_standard_conic(expr):
    """Read ``A / (B + C*cos(x + D))`` (in any equivalent arrangement) as a ConicFit.

    The tree is constant-folded first. Matching is structural: the
    denominator must be affine in a single cosine whose argument is
    ``+-x + D``; sums, differences, commuted operands, constant factors and
    an implicit ``C = 1`` are all accepted.
    """
    e = ex.fold_constants(expr)
    cosines = _cos_nodes(e)
    if len(cosines) != 1:
        raise NotAConicError(f"expected one cosine, found {len(cosines)}")
    u = cosines[0]
    if len(ex.variables(u.arg)) != 1:
        raise NotAConicError("cosine argument must depend on exactly one variable")
    (index,) = ex.variables(u.arg)
    lin = _affine(u.arg, ex.Variable(index))
    if lin is None:
        raise NotAConicError("cosine argument is not linear in its variable")
    phase, freq = lin
    if abs(abs(freq) - 1.0) > FREQUENCY_TOL:
        raise NotAConicError(f"cosine frequency {freq} is not 1")
    if freq < 0:
        phase = -phase
    rec = _reciprocal_affine(e, u)
    if rec is None:
        raise NotAConicError("expression is not a constant over an affine cosine term")
    a, b, c = rec
    if b == 0.0:
        raise NotAConicError("denominator has no constant term")
    l, eps = a / b, c / b
    if eps < 0:
        eps, phase = -eps, phase + math.pi
    if l <= 0:
        raise NotAConicError(f"semi-latus rectum {l} is not positive")
    return ConicFit(l, eps, normalize_angle(phase))


@dataclass(frozen=True)
class Comparison:
    name: str
    value: float
    reference: float
    source: str

    @property
    def rel_error(self):
        return rel_error(self.value, self.reference)


def eccentricity_report(fit):
    return [
        Comparison("eccentricity", fit.eps, KEPLER_ECCENTRICITY, "Kepler"),
        Comparison("eccentricity", fit.eps, MODERN_ECCENTRICITY, "modern"),
    ]


def semi_major_axis(fit):
    if fit.eps >= 1.0:
        raise NotAnEllipseError(f"eccentricity {fit.eps} >= 1 has no semi-major axis")
    return fit.l / (1.0 - fit.eps**2)


def perihelion_season(fit, days_per_year=365.0):
    """Perihelion offset ``|phi0|`` expressed in days of the year.

    The sign convention puts perihelion ``|phi0|`` of longitude ahead of
    the fall equinox direction, so this is the lead in days.
    """
    return abs(fit.phi0) / (2.0 * math.pi) * days_per_year


def season_month(days_before_fall_equinox):
    """Month of the date that many days before 23 September."""
    day = dt.date(2001, 9, 23) - dt.timedelta(days=round(days_before_fall_equinox))
    return day.strftime("%B")


@dataclass(frozen=True)
class PowerLaw:
    """``omega^2 = c / r^power``, i.e. ``r^power * omega^2 = c``."""

    c: float
    power: int = 3
    dispersion: float = 0.0
    areal_dispersion: float = 0.0
    areal_mean: float = float("nan")

    def __post_init__(self):
        if not self.c > 0.0:
            raise DataError(f"power-law constant {self.c} is not positive")


def _rel_std(values):
    values = np.asarray(values, dtype=float)
    return float(np.std(values) / abs(np.mean(values)))


def power_law_constant(points, power=3):
    """Mean of ``r^power * omega^2`` over the points, with its relative spread.

    Also reports the spread of ``r^2 * omega``, which is the quantity an
    exact ellipse conserves.
    """
    if not points:
        raise DataError("no kinematic points")
    r = np.array([p.r for p in points], dtype=float)
    w = np.array([p.omega for p in points], dtype=float)
    if np.any(r <= 0) or np.any(w <= 0):
        raise DataError("power law needs r > 0 and omega > 0")
    k = r**power * w * w
    areal = r * r * w
    return PowerLaw(float(np.mean(k)), power, _rel_std(k), _rel_std(areal), float(np.mean(areal)))


def monomial(expr):
    """``(c, {var: exponent})`` when ``expr`` is a constant times a product of powers."""
    e = ex.fold_constants(expr)
    if _is_const(e):
        return _value(e), {}
    if isinstance(e, ex.Variable):
        return 1.0, {e.index: 1}
    if isinstance(e, ex.Binary) and e.op in ("mul", "div"):
        a, b = monomial(e.left), monomial(e.right)
        if a is None or b is None:
            return None
        sign = 1 if e.op == "mul" else -1
        powers = dict(a[1])
        for k, v in b[1].items():
            powers[k] = powers.get(k, 0) + sign * v
        powers = {k: v for k, v in powers.items() if v}
        if e.op == "div" and b[0] == 0.0:
            return None
        return (a[0] * b[0] if e.op == "mul" else a[0] / b[0]), powers
    return None


def power_law_from_expr(expr, feature_powers):
    """Read ``c * prod(feature_k ** e_k)`` as ``c / r^p``.

    ``feature_powers[k]`` is the power of r carried by variable ``k``
    (e.g. ``[1, 2, 3]`` for the ``r, r2, r3`` features). Returns
    ``(c, p)`` or None when the expression is not a pure power of r.
    """
    m = monomial(expr)
    if m is None:
        return None
    c, powers = m
    total = sum(feature_powers[k] * v for k, v in powers.items())
    if not powers:
        return None
    return c, -total


def centripetal_form(pl, radii=()):
    """``a = r*omega^2 = c / r^(power-1)`` at the given radii.

    ``pl`` is a PowerLaw or a bare constant (taken with power 3).
    """
    c = getattr(pl, "c", pl)
    exponent = getattr(pl, "power", 3) - 1
    return [(float(r), c / float(r) ** exponent) for r in radii]


def kepler3_bridge(pl):
    """``c / (4 pi^2)`` with its comparisons."""
    k = pl.c / (4.0 * math.pi**2)
    return k, [
        Comparison("c/(4pi^2)", k, KEPLER3_KEPLER, "Kepler"),
        Comparison("c/(4pi^2)", k, KEPLER3_MODERN, "modern"),
    ]


def constants_rows(fit=None, pl=None, knee_c=None, knee_power=None):
    """Rows ``(name, value, reference, rel_error)`` for the constants CSV."""
    rows = []
    if fit is not None:
        for comp in eccentricity_report(fit):
            rows.append((f"eps_vs_{comp.source.lower()}", comp.value, comp.reference, comp.rel_error))
        rows.append(("l_au", fit.l, float("nan"), float("nan")))
        rows.append(("phi0_rad", fit.phi0, float("nan"), float("nan")))
        a = semi_major_axis(fit)
        rows.append(("a_au", a, MODERN_SEMI_MAJOR_AXIS, rel_error(a, MODERN_SEMI_MAJOR_AXIS)))
        rows.append(("perihelion_days_before_fall_equinox", perihelion_season(fit),
                     float("nan"), float("nan")))
    if pl is not None:
        rows.append(("c_point_mean", pl.c, GM_SUN, rel_error(pl.c, GM_SUN)))
        rows.append(("c_dispersion", pl.dispersion, float("nan"), float("nan")))
        rows.append(("r2w_dispersion", pl.areal_dispersion, float("nan"), float("nan")))
        k, comps = kepler3_bridge(pl)
        for comp in comps:
            rows.append((f"c_over_4pi2_vs_{comp.source.lower()}", comp.value, comp.reference,
                         comp.rel_error))
    if knee_c is not None:
        rows.append(("c_knee", knee_c, GM_SUN, rel_error(knee_c, GM_SUN)))
        rows.append(("knee_power", float(knee_power), 3.0, rel_error(knee_power, 3.0)))
    return rows


def write_constants(rows, path):
    with open(path, "w") as fh:
        fh.write("name,value,reference,rel_error\n")
        for name, value, ref, err in rows:
            fh.write(f"{name},{value!r},{ref!r},{err!r}\n")
