"""Dense samples and finite-difference kinematics from trained models."""

from dataclasses import dataclass

import numpy as np

from keplaw.ephemeris import MARS_PERIOD_DAYS
from keplaw.errors import DomainError

DELTA_DAYS = 1.0 / 32.0
KINEMATICS_HEADER = ("t", "theta_rad", "r_au", "omega_radday", "r2", "r3", "w2", "w3")


def augment(model, n, seed=0):
    """Draw ``n`` sorted inputs uniformly from [0, 1] and pair them with the model.

    Returns ``(x, y)``: normalized inputs and de-normalized (physical)
    outputs. Map ``x`` back to physical inputs with
    ``model.input_scaling.inverse(x)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, n))
    return x, model.predict(x, physical=True)


def angular_velocity(theta_of_t, t, delta_days=DELTA_DAYS, period_days=MARS_PERIOD_DAYS):
    """Central-difference angular velocity in rad/day.

    ``theta_of_t`` maps normalized time (fraction of ``period_days``) to
    longitude in radians. The half-step is ``delta_days`` of physical time.
    """
    t = np.asarray(t, dtype=float)
    h = delta_days / period_days
    if np.any(t - h < 0.0) or np.any(t + h > 1.0):
        raise DomainError("difference stencil leaves the normalized time range [0, 1]")
    return (np.asarray(theta_of_t(t + h)) - np.asarray(theta_of_t(t - h))) / (2.0 * delta_days)


@dataclass(frozen=True)
class AugmentedPoint:
    t: float
    theta: float
    r: float
    omega: float

    @property
    def r2(self):
        return self.r * self.r

    @property
    def r3(self):
        return self.r * self.r * self.r

    @property
    def w2(self):
        return self.omega * self.omega

    @property
    def w3(self):
        return self.omega * self.omega * self.omega

    def row(self):
        return (self.t, self.theta, self.r, self.omega, self.r2, self.r3, self.w2, self.w3)


def sample_kinematics(theta_of_t, r_of_theta, n=28, lo=0.1, hi=0.9, seed=0,
                      delta_days=DELTA_DAYS, period_days=MARS_PERIOD_DAYS):
    """``n`` random times in [lo, hi] with longitude, distance and angular velocity.

    Distances come from ``r_of_theta`` (the selected orbit formula); times
    are sorted.
    """
    t = np.sort(np.random.default_rng(seed).uniform(lo, hi, n))
    theta = np.asarray(theta_of_t(t), dtype=float)
    omega = angular_velocity(theta_of_t, t, delta_days, period_days)
    r = np.asarray(r_of_theta(theta), dtype=float)
    return [AugmentedPoint(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(t, theta, r, omega)]


def kinematics_columns(points):
    """Dict of column name -> array, keyed by :data:`KINEMATICS_HEADER`."""
    rows = np.array([p.row() for p in points], dtype=float).reshape(-1, len(KINEMATICS_HEADER))
    return {name: rows[:, k] for k, name in enumerate(KINEMATICS_HEADER)}


def write_kinematics(points, path):
    with open(path, "w") as fh:
        fh.write(",".join(KINEMATICS_HEADER) + "\n")
        for p in points:
            fh.write(",".join(repr(v) for v in p.row()) + "\n")


def read_kinematics(path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float, ndmin=1)
    return [AugmentedPoint(float(r["t"]), float(r["theta_rad"]), float(r["r_au"]), float(r["omega_radday"]))
            for r in data]
