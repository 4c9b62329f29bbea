"""Exact two-body time/angle relation and synthetic catalogs.

For an orbit of eccentricity ``eps`` and period ``T``, the time since
perihelion at true anomaly ``theta`` satisfies::

    2*pi*t/T = 2*atan(sqrt((1-eps)/(1+eps)) * tan(theta/2))
               - eps*sqrt(1-eps**2)*sin(theta) / (1 + eps*cos(theta))

The arctangent is evaluated with ``atan2`` on the half angle so that ``t``
is continuous and increasing over whole revolutions.
"""

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from keplaw.ephemeris import Observation
from keplaw.errors import ConvergenceError

TWO_PI = 2.0 * math.pi
SYNTH_EPOCH = dt.datetime(1582, 11, 23)


@dataclass(frozen=True)
class OrbitSpec:
    """Orbit with ``r = l / (1 + eps*cos(theta - phi0))`` in catalog longitude.

    ``phi0`` is the longitude of perihelion, so a conic fitted as
    ``A / (B + C*cos(theta + D))`` has ``D = -phi0``.
    """

    eps: float
    l: float
    period: float
    phi0: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"eccentricity {self.eps} outside [0, 1)")
        if self.period <= 0.0:
            raise ValueError("period must be positive")
        if self.l <= 0.0:
            raise ValueError("semi-latus rectum must be positive")

    @classmethod
    def from_semi_major_axis(cls, a, eps, period, phi0=0.0):
        return cls(eps, a * (1.0 - eps * eps), period, phi0)

    @property
    def a(self):
        return self.l / (1.0 - self.eps**2)

    def radius(self, anomaly):
        return self.l / (1.0 + self.eps * np.cos(anomaly))


MARS = OrbitSpec.from_semi_major_axis(1.52366231, 0.09341233, 686.971, -0.544536)


def time_of_angle(theta, spec):
    """Days since perihelion at true anomaly ``theta`` (radians, any revolution)."""
    theta = np.asarray(theta, dtype=float)
    revs = np.floor(theta / TWO_PI)
    f = theta - revs * TWO_PI
    e = spec.eps
    half = 0.5 * f
    ecc_anom = 2.0 * np.arctan2(math.sqrt(1.0 - e) * np.sin(half), math.sqrt(1.0 + e) * np.cos(half))
    ecc_anom = np.where(ecc_anom < 0.0, ecc_anom + TWO_PI, ecc_anom)
    # eps*sin(E) equals eps*sqrt(1-eps^2)*sin(f)/(1+eps*cos(f)).
    mean_anom = ecc_anom - e * math.sqrt(1.0 - e * e) * np.sin(f) / (1.0 + e * np.cos(f))
    t = (revs + mean_anom / TWO_PI) * spec.period
    return float(t) if t.ndim == 0 else t


def _rate(theta, spec):
    """dt/dtheta."""
    e = spec.eps
    return spec.period / TWO_PI * (1.0 - e * e) ** 1.5 / (1.0 + e * math.cos(theta)) ** 2


def angle_of_time(t, spec, tol=1e-12, max_iter=200):
    """Invert :func:`time_of_angle` by Newton steps safeguarded with bisection."""
    if np.ndim(t):
        return np.array([angle_of_time(v, spec, tol, max_iter) for v in np.ravel(t)]).reshape(np.shape(t))
    t = float(t)
    revs = math.floor(t / spec.period)
    target = t - revs * spec.period
    lo, hi = 0.0, TWO_PI
    theta = TWO_PI * target / spec.period
    for _ in range(max_iter):
        g = time_of_angle(theta, spec) - target
        if abs(g) <= tol * spec.period * 1e-3:
            break
        if g > 0:
            hi = theta
        else:
            lo = theta
        step = g / _rate(theta, spec)
        nxt = theta - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - theta) <= 1e-15 * max(1.0, abs(theta)):
            theta = nxt
            break
        theta = nxt
    else:
        raise ConvergenceError(f"angle_of_time did not converge for t={t}")
    if abs(time_of_angle(theta, spec) - target) > tol * spec.period:
        raise ConvergenceError(f"angle_of_time residual too large for t={t}")
    return theta + revs * TWO_PI


def synth_catalog(spec, n, noise_arcsec=0.0, noise_rel=0.0, seed=0, epoch=SYNTH_EPOCH):
    """``n`` observation rows of the orbit, in time order.

    Times are uniform in [0, T) after perihelion and rounded to whole
    minutes (the catalog's clock resolution) before positions are computed.
    ``noise_arcsec`` is the standard deviation of longitude noise and
    ``noise_rel`` the relative standard deviation of distance noise.
    """
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, spec.period, n))
    times = np.round(times * 1440.0) / 1440.0
    rows = []
    for t in times:
        anomaly = angle_of_time(t, spec)
        lon = anomaly + spec.phi0
        r = float(spec.radius(anomaly))
        lon_deg = math.degrees(lon) + noise_arcsec / 3600.0 * rng.normal()
        r *= 1.0 + noise_rel * rng.normal()
        stamp = epoch + dt.timedelta(minutes=round(t * 1440.0))
        lon_deg %= 360.0
        if lon_deg >= 360.0:
            lon_deg = 0.0
        rows.append(Observation(stamp.date(), stamp.time(), lon_deg, r, 0.0))
    return rows
