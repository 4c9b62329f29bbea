"""Pipeline stages shared by the CLI, plus the one-shot end-to-end run.

Every stage reads and writes plain files so that the end-to-end run is the
composition of the standalone commands. All stages take the same global
seed, which makes a run reproducible from its manifest.
"""

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from keplaw import augment as aug
from keplaw import ephemeris as eph
from keplaw import expr as ex
from keplaw import interpret as interp
from keplaw import network as nn
from keplaw import search as sr
from keplaw.errors import DataError, KeplawError, NotAConicError

log = logging.getLogger(__name__)

R_FEATURES = ("r_au", "r2", "r3")
R_FEATURE_POWERS = (1, 2, 3)


@dataclass
class RunConfig:
    catalog: str = ""  # empty: bundled catalog
    out: str = "run"
    seed: int = 0
    epochs: int = 200_000
    n_val: int = 3
    n_augment: int = 1000
    n_kinematics: int = 28
    period: float = eph.MARS_PERIOD_DAYS
    delta_days: float = aug.DELTA_DAYS
    ops: str = "add,sub,mul,div,cos"
    budget: int = 3000
    workers: int = 3
    decay: float = 0.99
    restart_after: int = 30
    parsimony: float = 0.05
    max_size: int = 30
    figures: bool = True

    def search_config(self, seed=None):
        return sr.SearchConfig(
            ops=tuple(o.strip() for o in self.ops.split(",") if o.strip()),
            max_size=self.max_size,
            budget=self.budget,
            decay=self.decay,
            restart_after=self.restart_after,
            parsimony=self.parsimony,
            seed=self.seed if seed is None else seed,
            workers=self.workers,
        )

    def train_config(self):
        return nn.TrainConfig(epochs=self.epochs, seed=self.seed, n_val=self.n_val,
                              log_every=max(1, min(1000, self.epochs // 100)))


def _convert(field, text):
    kind = field.type if isinstance(field.type, type) else type(field.default)
    if kind is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{field.name}: expected a boolean, got {text!r}")
    return kind(text)


def parse_config_text(text):
    """``key = value`` lines (``#`` comments) into a dict of typed values."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise DataError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(fields[key], value)
        except ValueError as err:
            raise DataError(f"config line {lineno}: {err}") from None
    return values


# --- small table I/O ----------------------------------------------------------


def write_table(path, columns, meta=None):
    """CSV with ``# key: value`` metadata lines, a header row and float columns."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    with open(path, "w") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*data):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_table(path):
    """Returns ``(columns, meta)`` for a file written by :func:`write_table`."""
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if ":" in line:
                    k, v = line[1:].split(":", 1)
                    meta[k.strip()] = v.strip()
                continue
            parts = line.split(",")
            if header is None:
                header = parts
                continue
            if len(parts) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric field") from None
    if header is None:
        raise DataError(f"{path}: no header row")
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: arr[:, k] for k, name in enumerate(header)}, meta


def _scaling_text(s):
    return f"{s.offset!r},{s.scale!r}"


def _scaling_from_text(text):
    a, b = text.split(",")
    return eph.Scaling(float(a), float(b))


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- stages -------------------------------------------------------------------


def load_catalog(path=""):
    obs = eph.read_catalog(path) if path else eph.load_tycho()
    if not obs:
        raise DataError(f"empty catalog: {path or 'bundled'}")
    return obs


def ingest(observations, out_dir, period=eph.MARS_PERIOD_DAYS):
    """Write the two normalized task datasets and a validation summary.

    Returns ``{"r_of_theta": path, "theta_of_t": path, "warnings": [...]}``.
    """
    os.makedirs(out_dir, exist_ok=True)
    theta, r, idx = eph.r_of_theta_task(observations)
    samples, rec = eph.normalize(theta, r, input_scaling=eph.Scaling(0.0, 2.0 * math.pi), provenance=idx)
    r_path = os.path.join(out_dir, "r_of_theta.csv")
    write_table(
        r_path,
        {"row": idx + 1, "theta_rad": theta, "r_au": r,
         "x": [s.x for s in samples], "y": [s.y for s in samples]},
        {"input": "theta_rad", "target": "r_au",
         "input_scaling": _scaling_text(rec.input), "target_scaling": _scaling_text(rec.target)},
    )
    days, folded, lon, order = eph.theta_of_t_task(observations, period)
    samples, rec = eph.normalize(folded, lon, input_scaling=eph.Scaling(0.0, 1.0), provenance=order)
    t_path = os.path.join(out_dir, "theta_of_t.csv")
    write_table(
        t_path,
        {"row": order + 1, "t_days": days, "t_fold": folded, "theta_rad": lon,
         "x": [s.x for s in samples], "y": [s.y for s in samples]},
        {"input": "t_fold", "target": "theta_rad", "period_days": repr(period),
         "input_scaling": _scaling_text(rec.input), "target_scaling": _scaling_text(rec.target)},
    )
    warnings = eph.validate(observations, period)
    with open(os.path.join(out_dir, "validation.txt"), "w") as fh:
        fh.write(f"rows: {len(observations)}\n")
        fh.write(f"warnings: {len(warnings)}\n")
        for w in warnings:
            fh.write(w + "\n")
    return {"r_of_theta": r_path, "theta_of_t": t_path, "warnings": warnings}


def fit_network(dataset_path, model_path, config, trace_path=None):
    """Train on a dataset written by :func:`ingest`; returns ``(model, trace, train, val)``."""
    cols, meta = read_table(dataset_path)
    samples = [eph.NormalizedSample(float(x), float(y), int(row))
               for x, y, row in zip(cols["x"], cols["y"], cols["row"])]
    train, val = nn.split(samples, config.n_val, config.seed)
    model, trace = nn.train(
        train, val, config,
        input_scaling=_scaling_from_text(meta["input_scaling"]),
        target_scaling=_scaling_from_text(meta["target_scaling"]),
        input_name=meta.get("input", "x"),
        target_name=meta.get("target", "y"),
    )
    model.save(model_path)
    if trace_path:
        nn.write_trace(trace, trace_path)
    return model, trace, train, val


def augment_samples(model, n, seed, path):
    """Dense samples in physical units; columns named after the model's variables."""
    x, y = aug.augment(model, n, seed)
    u = model.input_scaling.inverse(x)
    write_table(path, {model.input_name: u, model.target_name: y}, {"seed": seed, "n": n})
    return u, y


def law_from_archive(archive_path):
    """The knee expression of a saved archive, as a callable of one variable."""
    archive, _ = sr.read_archive(archive_path)
    entry = sr.select_law(archive)
    return entry, (lambda theta: np.broadcast_to(ex.evaluate(entry.expr, [np.asarray(theta, dtype=float)]),
                                                 np.shape(theta)))


def kinematics(theta_model, r_law, n, seed, path, delta_days=aug.DELTA_DAYS, period=eph.MARS_PERIOD_DAYS):
    points = aug.sample_kinematics(lambda t: theta_model.predict(t, physical=True), r_law, n,
                                   seed=seed, delta_days=delta_days, period_days=period)
    aug.write_kinematics(points, path)
    return points


def symreg(X, y, names, config, archive_path, progress_path=None, series_path=None):
    """Search, save the archive (and progress / size-error series); returns ``(archive, knee)``."""
    result = sr.search(X, y, config)
    sr.write_archive(result.archive, archive_path, names)
    if progress_path:
        sr.write_progress(result.progress, progress_path)
    if series_path:
        write_series(result.archive, series_path)
    return result.archive, sr.select_law(result.archive)


def write_series(archive, path):
    with open(path, "w") as fh:
        fh.write("size,neg_log_error\n")
        for s, v in sr.knee_scores(archive):
            fh.write(f"{s},{v!r}\n")


def load_columns(path, names):
    cols, _ = read_table(path)
    missing = [n for n in names if n not in cols]
    if missing:
        raise DataError(f"{path}: missing columns {', '.join(missing)}")
    return [cols[n] for n in names]


# --- report -------------------------------------------------------------------


def _pct(x):
    return f"{100.0 * x:.3f}%"


def conic_section(knee_entry, names=("theta",)):
    """Report lines and fit (or None) for the r(theta) knee expression."""
    lines = [f"selected r(theta) law (size {knee_entry.size}, rmse {knee_entry.rmse:.6g}):",
             f"  r = {ex.pretty(knee_entry.expr, list(names))}"]
    try:
        fit = interp.to_standard_conic(knee_entry.expr)
    except (NotAConicError, interp.NotAnEllipseError) as err:
        lines.append(f"  not a conic: {err}")
        return lines, None
    days = interp.perihelion_season(fit)
    lines += [
        f"  standard form: r = {fit.l:.6g} / (1 + {fit.eps:.6g} * cos(theta + {fit.phi0:.6g}))",
        f"  semi-latus rectum l = {fit.l:.6g} AU",
        f"  semi-major axis a = {interp.semi_major_axis(fit):.6g} AU"
        f" (modern {interp.MODERN_SEMI_MAJOR_AXIS}, rel. error "
        f"{_pct(interp.rel_error(interp.semi_major_axis(fit), interp.MODERN_SEMI_MAJOR_AXIS))})",
    ]
    for comp in interp.eccentricity_report(fit):
        lines.append(f"  eccentricity {fit.eps:.6g} vs {comp.source} {comp.reference}: "
                     f"rel. error {_pct(comp.rel_error)}")
    lines.append(f"  perihelion phase phi0 = {fit.phi0:.6g} rad ({math.degrees(fit.phi0):.3f} deg): "
                 f"{days:.1f} days before the fall equinox ({interp.season_month(days)})")
    return lines, fit


def power_section(points, knee_entry, names=R_FEATURES):
    pl = interp.power_law_constant(points)
    lines = [f"selected omega^2 law (size {knee_entry.size}, rmse {knee_entry.rmse:.6g}):",
             f"  omega^2 = {ex.pretty(knee_entry.expr, list(names))}"]
    read = interp.power_law_from_expr(knee_entry.expr, R_FEATURE_POWERS)
    if read is None:
        lines.append("  not a pure power of r")
    else:
        c, p = read
        lines.append(f"  reads as omega^2 = {c:.6g} / r^{p:g}")
        if p == 3:
            lines.append(f"  knee constant c = {c:.6g} vs GM {interp.GM_SUN}: "
                         f"rel. error {_pct(interp.rel_error(c, interp.GM_SUN))}")
    lines += [
        f"  point mean of r^3 omega^2: c = {pl.c:.6g} AU^3/day^2 (relative spread {_pct(pl.dispersion)})",
        f"  vs GM {interp.GM_SUN}: rel. error {_pct(interp.rel_error(pl.c, interp.GM_SUN))}",
        f"  r^2 omega = {pl.areal_mean:.6g} AU^2/day (relative spread {_pct(pl.areal_dispersion)})",
    ]
    r = np.array([p.r for p in points])
    lines.append("  centripetal acceleration a = r omega^2 = c / r^2 (inverse square):")
    for rad, acc in interp.centripetal_form(pl, (r.min(), r.max())):
        lines.append(f"    r = {rad:.5f} AU: a = {acc:.6g} AU/day^2")
    k, comps = interp.kepler3_bridge(pl)
    lines.append(f"  c/(4 pi^2) = {k:.6g} AU^3/day^2")
    for comp in comps:
        lines.append(f"    vs {comp.source} {comp.reference}: rel. error {_pct(comp.rel_error)}")
    lines.append(f"  note: {interp.CAVEAT}")
    return lines, pl, read


# --- end to end ---------------------------------------------------------------


class StageError(KeplawError):
    def __init__(self, stage, err):
        self.stage = stage
        self.cause = err
        super().__init__(f"stage {stage!r} failed: {err}")


def run(config):
    """Full reproduction; returns a dict with the report text and key results."""
    out = config.out
    os.makedirs(out, exist_ok=True)
    p = lambda name: os.path.join(out, name)  # noqa: E731
    results = {}
    stage = "ingest"
    try:
        obs = load_catalog(config.catalog)
        ing = ingest(obs, out, config.period)

        stage = "fit-nn r(theta)"
        tc = config.train_config()
        r_model, r_trace, _, _ = fit_network(ing["r_of_theta"], p("r_model.json"), tc, p("r_trace.csv"))

        stage = "augment r(theta)"
        theta_aug, r_aug = augment_samples(r_model, config.n_augment, config.seed, p("r_augmented.csv"))

        stage = "symreg r(theta)"
        r_archive, r_knee = symreg(theta_aug[None, :], r_aug, ["theta_rad"], config.search_config(),
                                   p("r_archive.csv"), p("r_progress.csv"), p("r_pareto.csv"))
        conic_lines, fit = conic_section(r_knee, ["theta_rad"])
        r_law = lambda th: np.broadcast_to(  # noqa: E731
            ex.evaluate(r_knee.expr, [np.asarray(th, dtype=float)]), np.shape(th))

        stage = "fit-nn theta(t)"
        t_model, t_trace, _, _ = fit_network(ing["theta_of_t"], p("theta_model.json"), tc, p("theta_trace.csv"))

        stage = "augment theta(t)"
        n_t = int(round(2 * config.period))
        t_aug, th_aug = augment_samples(t_model, n_t, config.seed, p("theta_augmented.csv"))

        stage = "kinematics"
        points = kinematics(t_model, r_law, config.n_kinematics, config.seed, p("kinematics.csv"),
                            config.delta_days, config.period)
        cols = aug.kinematics_columns(points)

        stage = "symreg omega^2"
        X = np.vstack([cols["r_au"], cols["r2"], cols["r3"]])
        w_archive, w_knee = symreg(X, cols["w2"], list(R_FEATURES), config.search_config(),
                                   p("w2_archive.csv"), p("w2_progress.csv"), p("w2_pareto.csv"))
        stage = "interpret"
        power_lines, pl, read = power_section(points, w_knee)

        lines = ["Mars orbit law report", "",
                 f"catalog rows: {len(obs)}; validation warnings: {len(ing['warnings'])}"]
        lines += [f"  {w}" for w in ing["warnings"]]
        lines += ["", "network fits (normalized MSE, final epoch):",
                  f"  r(theta): train {r_trace[-1][1]:.3g}, validation {r_trace[-1][2]:.3g}",
                  f"  theta(t): train {t_trace[-1][1]:.3g}, validation {t_trace[-1][2]:.3g}", ""]
        lines += conic_lines + [""] + power_lines
        report = "\n".join(lines) + "\n"
        with open(p("report.txt"), "w") as fh:
            fh.write(report)
        rows = interp.constants_rows(fit, pl, *(read if read else (None, None)))
        interp.write_constants(rows, p("constants.csv"))

        if config.figures:
            stage = "figures"
            from keplaw import plotting

            th_obs, r_obs, _ = eph.r_of_theta_task(obs)
            plotting.plot_orbit_fit(th_obs, r_obs, theta_aug, r_aug, p("fig_orbit.png"), law=r_law)
            plotting.plot_pareto(sr.knee_scores(r_archive), p("fig_r_pareto.png"), r_knee.size)
            _, folded, lon, _ = eph.theta_of_t_task(obs, config.period)
            plotting.plot_longitude(folded, lon, t_aug, th_aug, p("fig_longitude.png"))
            plotting.plot_pareto(sr.knee_scores(w_archive), p("fig_w2_pareto.png"), w_knee.size)
            plotting.plot_power_law(cols["r_au"], cols["w2"], p("fig_power_law.png"), c=pl.c)
    except KeplawError as err:
        raise StageError(stage, err) from err

    write_manifest(config, out)
    results.update(report=report, fit=fit, power_law=pl, knee_power=read, r_knee=r_knee, w_knee=w_knee,
                   points=points, r_trace=r_trace, t_trace=t_trace, r_model=r_model, t_model=t_model)
    return results


def write_manifest(config, out, name="manifest.json"):
    """Config echo plus sha256 of every file in ``out`` (except the manifest)."""
    files = sorted(f for f in os.listdir(out) if f != name and os.path.isfile(os.path.join(out, f)))
    manifest = {
        "config": dataclasses.asdict(config),
        "seed": config.seed,
        "artifacts": {f: sha256(os.path.join(out, f)) for f in files},
    }
    with open(os.path.join(out, name), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
