"""Command line: ``keplaw <stage> ...`` or ``keplaw pipeline``.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

import argparse
import dataclasses
import logging
import math
import os
import sys

import numpy as np

from keplaw import augment as aug
from keplaw import ephemeris as eph
from keplaw import expr as ex
from keplaw import interpret as interp
from keplaw import network as nn
from keplaw import oracle
from keplaw import pipeline as pl
from keplaw import search as sr
from keplaw.errors import DataError, KeplawError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("keplaw")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_search_flags(p):
    d = pl.RunConfig()
    p.add_argument("--ops", default=d.ops, help="comma-separated operations (default: %(default)s)")
    p.add_argument("--budget", type=int, default=d.budget, help="proposals per chain")
    p.add_argument("--workers", type=int, default=d.workers, help="independent chains (processes)")
    p.add_argument("--decay", type=float, default=d.decay, help="temperature factor per accepted move")
    p.add_argument("--restart-after", type=int, default=d.restart_after,
                   help="rejections before restarting from the archive")
    p.add_argument("--parsimony", type=float, default=d.parsimony,
                   help="energy = rmse * exp(parsimony * size)")
    p.add_argument("--max-size", type=int, default=d.max_size)


def build_parser():
    parser = _Parser(prog="keplaw", description="Orbit laws from the Mars catalog.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("ingest", "parse a catalog and write the two normalized task datasets")
    p.add_argument("--catalog", default="", help="catalog CSV (default: bundled Mars catalog)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--period", type=float, default=eph.MARS_PERIOD_DAYS)

    p = add("fit-nn", "train the regressor on an ingested dataset")
    p.add_argument("--data", required=True, help="r_of_theta.csv or theta_of_t.csv")
    p.add_argument("--model", required=True, help="output checkpoint (JSON)")
    p.add_argument("--trace", help="training trace CSV")
    p.add_argument("--epochs", type=int, default=nn.TrainConfig.epochs)
    p.add_argument("--n-val", type=int, default=nn.TrainConfig.n_val)

    p = add("augment", "sample a trained model densely, or compute kinematic points")
    p.add_argument("--model", required=True, help="checkpoint; the theta(t) model with --kinematics")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--n", type=int, help="number of samples (default 1000, or 28 with --kinematics)")
    p.add_argument("--kinematics", action="store_true", help="t, theta, r, omega and power features")
    law = p.add_mutually_exclusive_group()
    law.add_argument("--law", help="r(theta) expression in x0 (with --kinematics)")
    law.add_argument("--law-archive", help="archive CSV whose knee is the r(theta) law")
    p.add_argument("--delta-days", type=float, default=aug.DELTA_DAYS)
    p.add_argument("--period", type=float, default=eph.MARS_PERIOD_DAYS)

    p = add("symreg", "annealing symbolic regression on a CSV")
    p.add_argument("--input", required=True, help="CSV with feature and target columns")
    p.add_argument("--target", required=True)
    p.add_argument("--features", type=_csv_list, help="comma-separated feature columns (default: all others)")
    p.add_argument("--archive", help="output archive CSV (default: <input>_archive.csv)")
    p.add_argument("--progress", help="progress CSV")
    p.add_argument("--series", help="size,neg_log_error CSV")
    _add_search_flags(p)

    p = add("interpret", "report orbital parameters and power-law constants")
    p.add_argument("--r-archive", help="r(theta) archive CSV")
    p.add_argument("--w2-archive", help="omega^2 archive CSV (needs --kinematics)")
    p.add_argument("--kinematics", help="kinematics CSV")
    p.add_argument("--constants", help="constants CSV output")
    p.add_argument("--report", help="report text output (default: stdout)")

    p = add("oracle", "write a synthetic catalog from an exact two-body orbit")
    p.add_argument("--eps", type=float, default=oracle.MARS.eps)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--l", type=float, help="semi-latus rectum, AU")
    size.add_argument("--a", type=float, help="semi-major axis, AU")
    p.add_argument("--period", type=float, default=oracle.MARS.period)
    p.add_argument("--phi0", type=float, default=oracle.MARS.phi0, help="perihelion longitude, rad")
    p.add_argument("--n", type=int, default=28)
    p.add_argument("--noise-arcsec", type=float, default=0.0)
    p.add_argument("--noise-rel", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add("pipeline", "run every stage and write one consolidated report")
    d = pl.RunConfig()
    p.add_argument("--catalog", default=d.catalog)
    p.add_argument("--out", default=d.out)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--n-val", type=int, default=d.n_val)
    p.add_argument("--n-augment", type=int, default=d.n_augment)
    p.add_argument("--n-kinematics", type=int, default=d.n_kinematics)
    p.add_argument("--period", type=float, default=d.period)
    p.add_argument("--delta-days", type=float, default=d.delta_days)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    _add_search_flags(p)
    return parser


def parse_args(argv):
    """Parse twice: once to find ``--config``, then with its values as defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                values = pl.parse_config_text(fh.read())
        except OSError as err:
            raise DataError(f"cannot read config {args.config}: {err.strerror}") from None
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise DataError(f"config keys not used by {args.command}: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _checked(make, *a, **kw):
    """Construct a config object; invalid values are usage errors."""
    try:
        return make(*a, **kw)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _search_config(args):
    return _checked(sr.SearchConfig, ops=tuple(_csv_list(args.ops)), max_size=args.max_size,
                    budget=args.budget, decay=args.decay, restart_after=args.restart_after,
                    parsimony=args.parsimony, seed=args.seed, workers=args.workers)


def cmd_ingest(args):
    obs = pl.load_catalog(args.catalog)
    res = pl.ingest(obs, args.out, args.period)
    print(f"{len(obs)} rows -> {res['r_of_theta']}, {res['theta_of_t']}")
    for w in res["warnings"]:
        print(f"warning: {w}")


def cmd_fit_nn(args):
    cfg = _checked(nn.TrainConfig, epochs=args.epochs, seed=args.seed, n_val=args.n_val,
                   log_every=max(1, min(1000, args.epochs // 100)))
    _, trace, _, _ = pl.fit_network(args.data, args.model, cfg, args.trace)
    epoch, tr, va = trace[-1]
    print(f"epoch {epoch}: train mse {tr:.4g}, validation mse {va:.4g} -> {args.model}")


def cmd_augment(args):
    model = nn.NetworkModel.load(args.model)
    if not args.kinematics:
        if args.law or args.law_archive:
            raise UsageError("--law/--law-archive only apply with --kinematics")
        n = 1000 if args.n is None else args.n
        pl.augment_samples(model, n, args.seed, args.out)
        print(f"{n} samples -> {args.out}")
        return
    if args.law:
        law_expr = ex.parse(args.law)
    elif args.law_archive:
        law_expr = sr.select_law(sr.read_archive(args.law_archive)[0]).expr
    else:
        raise UsageError("--kinematics needs --law or --law-archive")
    r_law = lambda th: np.broadcast_to(  # noqa: E731
        ex.evaluate(law_expr, [np.asarray(th, dtype=float)]), np.shape(th))
    n = 28 if args.n is None else args.n
    pl.kinematics(model, r_law, n, args.seed, args.out, args.delta_days, args.period)
    print(f"{n} kinematic points -> {args.out}")


def cmd_symreg(args):
    cols, _ = pl.read_table(args.input)
    if args.target not in cols:
        raise DataError(f"{args.input}: no column {args.target!r}")
    features = args.features or [c for c in cols if c != args.target]
    missing = [f for f in features if f not in cols]
    if missing:
        raise DataError(f"{args.input}: no columns {', '.join(missing)}")
    X = np.vstack([cols[f] for f in features])
    archive = args.archive or os.path.splitext(args.input)[0] + "_archive.csv"
    arch, knee = pl.symreg(X, cols[args.target], features, _search_config(args), archive,
                           args.progress, args.series)
    print(f"{len(arch)} archive entries -> {archive}")
    print(f"knee: size {knee.size}, rmse {knee.rmse:.6g}: {ex.pretty(knee.expr, features)}")


def cmd_interpret(args):
    if not (args.r_archive or args.w2_archive):
        raise UsageError("give --r-archive and/or --w2-archive")
    if args.w2_archive and not args.kinematics:
        raise UsageError("--w2-archive needs --kinematics")
    lines, fit, power, read = [], None, None, None
    if args.r_archive:
        archive, names = sr.read_archive(args.r_archive)
        section, fit = pl.conic_section(sr.select_law(archive), names or ["theta"])
        lines += section
    if args.w2_archive:
        archive, names = sr.read_archive(args.w2_archive)
        points = aug.read_kinematics(args.kinematics)
        if lines:
            lines.append("")
        section, power, read = pl.power_section(points, sr.select_law(archive), names or pl.R_FEATURES)
        lines += section
    text = "\n".join(lines) + "\n"
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.constants:
        interp.write_constants(interp.constants_rows(fit, power, *(read or (None, None))), args.constants)


def cmd_oracle(args):
    try:
        if args.a is not None:
            spec = oracle.OrbitSpec.from_semi_major_axis(args.a, args.eps, args.period, args.phi0)
        else:
            l = args.l if args.l is not None else oracle.MARS.a * (1.0 - args.eps**2)
            spec = oracle.OrbitSpec(args.eps, l, args.period, args.phi0)
    except ValueError as err:
        raise UsageError(str(err)) from None
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    rows = oracle.synth_catalog(spec, args.n, args.noise_arcsec, args.noise_rel, args.seed)
    header = (f"synthetic two-body catalog: eps={spec.eps!r} l={spec.l!r} period={spec.period!r} "
              f"phi0={spec.phi0!r} seed={args.seed} noise_arcsec={args.noise_arcsec} "
              f"noise_rel={args.noise_rel}")
    with open(args.out, "w") as fh:
        fh.write(eph.format_catalog(rows, decimals=9, header=header))
    print(f"{len(rows)} rows -> {args.out}")


def cmd_pipeline(args):
    fields = {f.name for f in dataclasses.fields(pl.RunConfig)}
    cfg = pl.RunConfig(**{k: v for k, v in vars(args).items() if k in fields})
    if cfg.catalog and not os.path.exists(cfg.catalog):
        raise DataError(f"catalog not found: {cfg.catalog}")
    _checked(cfg.search_config)
    _checked(cfg.train_config)
    try:
        res = pl.run(cfg)
    except pl.StageError as err:
        log.error("%s (partial artifacts kept in %s)", err, cfg.out)
        raise err.cause from None
    sys.stdout.write(res["report"])


COMMANDS = {
    "ingest": cmd_ingest,
    "fit-nn": cmd_fit_nn,
    "augment": cmd_augment,
    "symreg": cmd_symreg,
    "interpret": cmd_interpret,
    "oracle": cmd_oracle,
    "pipeline": cmd_pipeline,
}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except DataError as err:
        sys.stderr.write(f"keplaw: error: {err}\n")
        return EXIT_DATA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as err:
        sys.stderr.write(f"keplaw {args.command}: error: {err}\n")
        return EXIT_USAGE
    except FileNotFoundError as err:
        sys.stderr.write(f"keplaw: error: no such file: {err.filename}\n")
        return EXIT_DATA
    except OSError as err:
        sys.stderr.write(f"keplaw: error: {err.filename}: {err.strerror}\n")
        return EXIT_DATA
    except DataError as err:
        sys.stderr.write(f"keplaw: error: {err}\n")
        return EXIT_DATA
    except (NumericError, FloatingPointError) as err:
        sys.stderr.write(f"keplaw: numeric failure: {err}\n")
        return EXIT_NUMERIC
    except KeplawError as err:
        sys.stderr.write(f"keplaw: error: {err}\n")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
