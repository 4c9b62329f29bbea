"""PNG figures for the pipeline report (matplotlib, non-interactive)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_orbit_fit(theta_obs, r_obs, theta_aug, r_aug, path, law=None):
    """Catalog points, network samples and (optionally) the selected law r(theta)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(theta_aug, r_aug, ".", ms=2, color="0.6", label="network samples")
    if law is not None:
        grid = np.linspace(0.0, 2.0 * np.pi, 400)
        ax.plot(grid, law(grid), "-", lw=1, color="C1", label="selected law")
    ax.plot(theta_obs, r_obs, "o", ms=4, color="C0", label="catalog")
    ax.set_xlabel("longitude (rad)")
    ax.set_ylabel("r (AU)")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_pareto(series, path, knee_size=None):
    """``series`` of (size, -ln rmse) pairs, knee highlighted."""
    sizes, scores = zip(*series) if series else ((), ())
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sizes, scores, "o-", ms=4, color="C0")
    if knee_size is not None:
        for s, v in series:
            if s == knee_size:
                ax.plot([s], [v], "o", ms=9, mfc="none", mec="C3", label=f"knee (size {s})")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("size")
    ax.set_ylabel("-ln(rmse)")
    _save(fig, path)


def plot_longitude(t_obs, theta_obs, t_aug, theta_aug, path):
    """Unwrapped longitude against folded time."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t_aug, theta_aug, ".", ms=2, color="0.6", label="network samples")
    ax.plot(t_obs, theta_obs, "o", ms=4, color="C0", label="catalog")
    ax.set_xlabel("time (fraction of period)")
    ax.set_ylabel("longitude (rad)")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_power_law(r, w2, path, c=None, power=3):
    """omega^2 against r with ``c / r^power`` overlaid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r, w2, "o", ms=4, color="C0", label="kinematic points")
    if c is not None:
        grid = np.linspace(min(r), max(r), 200)
        ax.plot(grid, c / grid**power, "-", lw=1, color="C1", label=f"c / r^{power}")
    ax.set_xlabel("r (AU)")
    ax.set_ylabel("omega^2 (rad^2/day^2)")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
