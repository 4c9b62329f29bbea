"""Simulated-annealing symbolic regression with a size/error Pareto archive."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from keplaw import expr as ex
from keplaw.errors import DataError

log = logging.getLogger(__name__)

DEFAULT_OPS = ("add", "sub", "mul", "div", "cos")
OP_ALIASES = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


@dataclass
class SearchConfig:
    ops: tuple = DEFAULT_OPS
    max_size: int = 30
    budget: int = 4000
    t0: float = None
    decay: float = 0.999
    restart_after: int = 5000
    const_scale: float = 0.1
    seed: int = 0
    workers: int = 1
    refine: bool = True
    refine_points: int = 200
    refine_nfev: int = 60
    polish: bool = True
    log_every: int = 100
    parsimony: float = 0.0

    def __post_init__(self):
        self.ops = tuple(OP_ALIASES.get(o, o) for o in self.ops)
        unknown = [o for o in self.ops if o not in ex.BINARY_OPS and o not in ex.UNARY_OPS]
        if unknown:
            raise ValueError(f"unknown operations: {', '.join(unknown)}")
        if self.budget < 1:
            raise ValueError("search budget must be >= 1")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if self.max_size < 1:
            raise ValueError("max_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def binary_ops(self):
        return [o for o in self.ops if o in ex.BINARY_OPS]

    @property
    def unary_ops(self):
        return [o for o in self.ops if o in ex.UNARY_OPS]


@dataclass(frozen=True)
class ParetoEntry:
    size: int
    rmse: float
    expr: object = field(compare=False)

    def dominates(self, other):
        return (
            self.size <= other.size
            and self.rmse <= other.rmse
            and (self.size < other.size or self.rmse < other.rmse)
        )


class ParetoArchive:
    """Non-dominated (size, rmse) entries, kept sorted by size.

    An entry that ties an existing one on both size and rmse is rejected,
    so the incumbent wins ties.
    """

    def __init__(self, entries=()):
        self.entries = []
        for e in entries:
            self.insert(e)

    def insert(self, entry):
        for e in self.entries:
            if e.size <= entry.size and e.rmse <= entry.rmse:
                return False
        self.entries = [e for e in self.entries if not entry.dominates(e)]
        self.entries.append(entry)
        self.entries.sort(key=lambda e: e.size)
        return True

    def best(self):
        return min(self.entries, key=lambda e: e.rmse) if self.entries else None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def pareto_insert(archive, entry):
    """Insert ``entry`` into ``archive`` (in place); returns the archive."""
    archive.insert(entry)
    return archive


def knee(entries):
    """Entry with the steepest gain in -ln(rmse) per unit of size.

    Consecutive pairs (sorted by size) are scored by
    ``(ln rmse_prev - ln rmse_this) / (size_this - size_prev)``; ties go to
    the smaller size. An exact zero rmse is floored at the smallest normal
    double so it still scores.
    """
    pts = sorted((e for e in entries if math.isfinite(e.rmse)), key=lambda e: e.size)
    if len(pts) < 2:
        raise DataError("knee selection needs at least two finite archive entries")
    tiny = np.finfo(float).tiny
    best, best_score = None, -math.inf
    for prev, this in zip(pts, pts[1:]):
        gain = math.log(max(prev.rmse, tiny)) - math.log(max(this.rmse, tiny))
        score = gain / (this.size - prev.size)
        if score > best_score:
            best, best_score = this, score
    return best


def select_law(entries):
    """The knee, or the only finite entry of a one-entry archive."""
    finite = [e for e in entries if math.isfinite(e.rmse)]
    if len(finite) == 1:
        return finite[0]
    return knee(finite)


def knee_scores(entries):
    """(size, neg_log_error) series used for the size/error figure."""
    pts = sorted((e for e in entries if math.isfinite(e.rmse)), key=lambda e: e.size)
    tiny = np.finfo(float).tiny
    return [(e.size, -math.log(max(e.rmse, tiny))) for e in pts]


# --- fitness ------------------------------------------------------------------


def _as_dataset(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise DataError("dataset is empty")
    if X.shape[1] != y.size:
        raise DataError("feature columns and target differ in length")
    return X, y


def rmse(expr, X, y):
    """Root mean square error; any domain fault gives +inf."""
    X, y = _as_dataset(X, y)
    pred = ex.evaluate(expr, X)
    return _rmse_from_pred(pred, y)


def _rmse_from_pred(pred, y):
    pred = np.broadcast_to(pred, y.shape)
    if not np.all(np.isfinite(pred)):
        return math.inf
    with np.errstate(over="ignore"):
        value = math.sqrt(float(np.mean((y - pred) ** 2)))
    return value if math.isfinite(value) else math.inf


def _div(a, b):
    bad = np.abs(b) < ex.DIV_FLOOR
    if np.any(bad):
        return np.where(bad, np.nan, a / np.where(bad, 1.0, b))
    return a / b


_NS = {"np": np, "_div": _div}


def compile_expr(expr):
    """Return ``(f, c0)`` with ``f(c, X)`` evaluating ``expr`` for constants ``c``.

    Agrees exactly with :func:`keplaw.expr.evaluate` given ``c0``.
    """
    consts = []

    def emit(e):
        if isinstance(e, ex.Binary):
            a, b = emit(e.left), emit(e.right)
            if e.op == "div":
                return f"_div({a}, {b})"
            return f"({a} {ex.BINARY_OPS[e.op]} {b})"
        if isinstance(e, ex.Unary):
            return f"np.{e.op}({emit(e.arg)})"
        if isinstance(e, ex.Variable):
            return f"X[{e.index}]"
        consts.append(e.value)
        return f"c[{len(consts) - 1}]"

    src = emit(expr)
    f = eval(f"lambda c, X: {src}", _NS)
    return f, np.array(consts, dtype=float)


def _solve(a, b):
    """Gaussian elimination with partial pivoting on a small dense system.

    Plain float arithmetic, so results do not depend on memory alignment
    (LAPACK/BLAS kernels can differ in the last bits between calls).
    """
    n = len(b)
    m = [list(map(float, row)) + [float(v)] for row, v in zip(a, b)]
    for i in range(n):
        p = max(range(i, n), key=lambda r: abs(m[r][i]))
        if m[p][i] == 0.0:
            raise np.linalg.LinAlgError("singular system")
        m[i], m[p] = m[p], m[i]
        pivot = m[i]
        for r in range(i + 1, n):
            row = m[r]
            f = row[i] / pivot[i]
            if f:
                for k in range(i, n + 1):
                    row[k] -= f * pivot[k]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        row = m[i]
        acc = row[n]
        for k in range(i + 1, n):
            acc -= row[k] * x[k]
        x[i] = acc / row[i]
    return np.array(x)


def levenberg_marquardt(resid, c0, max_nfev=400, ftol=1e-12, resid_batch=None):
    """Minimise ``sum(resid(c)**2)`` from ``c0``; returns ``(c, cost)``.

    Forward-difference Jacobian with Marquardt's diagonal damping.
    ``resid_batch(C)`` may evaluate the residuals for the columns of a
    ``(k, m)`` parameter matrix in one call (rows of the result).
    Deterministic for fixed inputs.
    """
    c = np.array(c0, dtype=float)
    r = resid(c)
    cost = float(np.sum(r * r))
    nfev = 1
    lam = 1e-3
    step = math.sqrt(np.finfo(float).eps)
    k = c.size
    while nfev < max_nfev and cost > 0.0:
        h = step * np.maximum(np.abs(c), 1.0)
        if resid_batch is not None:
            jac = (resid_batch(c[:, None] + np.diag(h)) - r) / h[:, None]
        else:
            jac = np.empty((k, r.size))
            for j in range(k):
                cj = c.copy()
                cj[j] += h[j]
                jac[j] = (resid(cj) - r) / h[j]
        nfev += k
        jtj = (jac[:, None, :] * jac[None, :, :]).sum(-1)
        grad = (jac * r).sum(-1)
        diag = np.maximum(np.diag(jtj), 1e-300)
        improved = False
        while nfev < max_nfev and lam < 1e16:
            try:
                delta = _solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = c + delta
            rt = resid(trial)
            nfev += 1
            cost_t = float(np.sum(rt * rt))
            if cost_t < cost:
                improved = True
                gain = cost - cost_t
                c, r, cost = trial, rt, cost_t
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if not improved or gain <= ftol * cost:
            break
    return c, cost


def refine_constants(expr, X, y, max_nfev=60, ftol=1e-12):
    """Least-squares fit of the constants of ``expr`` (Levenberg-Marquardt).

    ``max_nfev`` is per constant. Returns the original expression when the
    fit does not help.
    """
    f, c0 = compile_expr(expr)
    if c0.size == 0 or c0.size > y.size:
        return expr

    def resid(c):
        with np.errstate(all="ignore"):
            r = np.broadcast_to(f(c, X), y.shape) - y
        return np.where(np.isfinite(r), r, 1e150)

    def resid_batch(cs):
        with np.errstate(all="ignore"):
            r = np.broadcast_to(f(cs[:, :, None], X), (cs.shape[1], y.size)) - y
        return np.where(np.isfinite(r), r, 1e150)

    with np.errstate(all="ignore"):
        start = resid(c0)
        c, cost = levenberg_marquardt(resid, c0, max_nfev * (c0.size + 1), ftol, resid_batch)
        if not np.all(np.isfinite(c)) or not cost < float(np.sum(start * start)):
            return expr
    return ex.with_constants(expr, c)


# --- moves --------------------------------------------------------------------


def _nodes(e, path=()):
    yield path, e
    if isinstance(e, ex.Binary):
        yield from _nodes(e.left, path + (0,))
        yield from _nodes(e.right, path + (1,))
    elif isinstance(e, ex.Unary):
        yield from _nodes(e.arg, path + (0,))


def _replace(e, path, new):
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(e, ex.Binary):
        if head == 0:
            return ex.Binary(e.op, _replace(e.left, rest, new), e.right)
        return ex.Binary(e.op, e.left, _replace(e.right, rest, new))
    return ex.Unary(e.op, _replace(e.arg, rest, new))


def random_constant(rng):
    return ex.Constant(float(rng.normal(0.0, 1.0)))


def random_leaf(rng, n_vars):
    if rng.random() < 0.5:
        return ex.Variable(int(rng.integers(n_vars)))
    return random_constant(rng)


def random_tree(rng, config, n_vars, max_depth=2, keep=None):
    """Random subtree of depth <= ``max_depth``; ``keep`` may be reused as a leaf."""
    if max_depth == 0 or rng.random() < 0.3:
        if keep is not None and rng.random() < 0.5:
            return keep
        return random_leaf(rng, n_vars)
    n_bin, n_un = len(config.binary_ops), len(config.unary_ops)
    k = int(rng.integers(n_bin + n_un))
    if k < n_bin:
        op = config.binary_ops[k]
        left = random_tree(rng, config, n_vars, max_depth - 1, keep)
        right = random_tree(rng, config, n_vars, max_depth - 1, keep if left is not keep else None)
        return ex.Binary(op, left, right)
    return ex.Unary(config.unary_ops[k - n_bin], random_tree(rng, config, n_vars, max_depth - 1, keep))


MOVES = ("perturb", "replace", "graft", "prune")


def perturb_constant(value, config, rng):
    """Multiplicative log-normal jitter; keeps the sign of ``value``."""
    return value * math.exp(config.const_scale * rng.normal())


def mutate(expr, config, rng, n_vars):
    """One annealing move; returns ``None`` when the proposal is oversize."""
    nodes = list(_nodes(expr))
    move = MOVES[int(rng.integers(len(MOVES)))]
    if move == "perturb":
        consts = [(p, n) for p, n in nodes if isinstance(n, ex.Constant)]
        if consts:
            path, node = consts[int(rng.integers(len(consts)))]
            return _replace(expr, path, ex.Constant(perturb_constant(node.value, config, rng)))
        move = "replace"
    path, node = nodes[int(rng.integers(len(nodes)))]
    if move == "replace":
        new_node = _replace_op(node, config, rng, n_vars)
    elif move == "graft":
        new_node = _graft(node, config, rng, n_vars)
    else:
        children = []
        if isinstance(node, ex.Binary):
            children = [node.left, node.right]
        elif isinstance(node, ex.Unary):
            children = [node.arg]
        if children and rng.random() < 0.5:
            new_node = children[int(rng.integers(len(children)))]
        else:
            new_node = random_leaf(rng, n_vars)
    new = _replace(expr, path, new_node)
    if ex.size(new) > config.max_size:
        return None
    return new


def _graft(node, config, rng, n_vars):
    """Depth <= 2 subtree in place of ``node``; half the time it wraps ``node``."""
    if rng.random() < 0.5:
        return random_tree(rng, config, n_vars, 2, keep=node)
    n_bin, n_un = len(config.binary_ops), len(config.unary_ops)
    k = int(rng.integers(n_bin + n_un))
    if k >= n_bin:
        return ex.Unary(config.unary_ops[k - n_bin], node)
    leaf = random_constant(rng) if rng.random() < 0.7 else random_leaf(rng, n_vars)
    if rng.random() < 0.5:
        return ex.Binary(config.binary_ops[k], node, leaf)
    return ex.Binary(config.binary_ops[k], leaf, node)


def _replace_op(node, config, rng, n_vars):
    if isinstance(node, ex.Binary):
        choices = [o for o in config.binary_ops if o != node.op] or [node.op]
        return ex.Binary(choices[int(rng.integers(len(choices)))], node.left, node.right)
    if isinstance(node, ex.Unary):
        choices = [o for o in config.unary_ops if o != node.op] or [node.op]
        return ex.Unary(choices[int(rng.integers(len(choices)))], node.arg)
    if isinstance(node, ex.Variable):
        if n_vars > 1 and rng.random() < 0.7:
            other = [k for k in range(n_vars) if k != node.index]
            return ex.Variable(other[int(rng.integers(len(other)))])
        return random_constant(rng)
    return ex.Variable(int(rng.integers(n_vars)))


# --- annealing ----------------------------------------------------------------


@dataclass
class SearchResult:
    archive: ParetoArchive
    progress: list  # (iteration, temperature, best_rmse)


def _shape(expr):
    """Tree structure with constant values erased."""
    if isinstance(expr, ex.Binary):
        return (expr.op, _shape(expr.left), _shape(expr.right))
    if isinstance(expr, ex.Unary):
        return (expr.op, _shape(expr.arg))
    if isinstance(expr, ex.Variable):
        return expr.index
    return "c"


def _energy(err, size, config):
    """Annealing energy: rmse, optionally inflated by ``exp(parsimony * size)``."""
    if config.parsimony:
        return err * math.exp(config.parsimony * size)
    return err


def _chain(X, y, config, seed_seq):
    rng = np.random.default_rng(seed_seq)
    n_vars = X.shape[0]
    if config.refine and y.size > config.refine_points:
        sub = np.sort(rng.choice(y.size, config.refine_points, replace=False))
        Xr, yr = X[:, sub], y[sub]
    else:
        Xr, yr = X, y

    archive = ParetoArchive()
    current = ex.Constant(float(np.mean(y)))
    cur_err = rmse(current, X, y)
    archive.insert(ParetoEntry(1, cur_err, current))
    cur_energy = _energy(cur_err, 1, config)
    temperature = config.t0 if config.t0 is not None else max(cur_err, 1e-300)
    rejects = 0
    progress = []
    for it in range(1, config.budget + 1):
        cand = mutate(current, config, rng, n_vars)
        if cand is not None:
            cand = ex.fold_constants(cand)
            if config.refine:
                cand = refine_constants(cand, Xr, yr, config.refine_nfev, ftol=1e-8)
            f, c = compile_expr(cand)
            with np.errstate(all="ignore"):
                err = _rmse_from_pred(f(c, X), y)
            size = ex.size(cand)
            archive.insert(ParetoEntry(size, err, cand))
            energy = _energy(err, size, config)
            delta = energy - cur_energy
            # A refit that lands back on the current state is not a move:
            # accepting it would cool the chain without going anywhere.
            if abs(delta) <= 1e-6 * cur_energy and _shape(cand) == _shape(current):
                rejects += 1
            elif delta <= 0 or (math.isfinite(delta) and rng.random() < math.exp(-delta / temperature)):
                current, cur_err, cur_energy = cand, err, energy
                temperature *= config.decay
                rejects = 0
            else:
                rejects += 1
        else:
            rejects += 1
        if rejects >= config.restart_after:
            pick = archive[int(rng.integers(len(archive)))]
            current, cur_err = pick.expr, pick.rmse
            cur_energy = _energy(cur_err, pick.size, config)
            rejects = 0
        if it % config.log_every == 0 or it == config.budget:
            progress.append((it, temperature, archive.best().rmse))
    return archive, progress


def _prunes(expr):
    """Every tree obtained by pruning one subtree to a constant or to one of its children."""
    for path, node in _nodes(expr):
        if isinstance(node, ex.Binary):
            yield _replace(expr, path, node.left)
            yield _replace(expr, path, node.right)
        elif isinstance(node, ex.Unary):
            yield _replace(expr, path, node.arg)
        if not isinstance(node, ex.Constant):
            yield _replace(expr, path, ex.Constant(1.0))


def polish_archive(archive, X, y, max_nfev=400, sweeps=10, refine_points=200, seed=0):
    """Refit constants of every archive entry on the full data, then simplify.

    Each sweep offers every one-node prune of every archive entry (constants
    refit) to the archive, so a bloated form of a good formula can collapse
    to its compact form. Stops early once a sweep adds nothing.
    """
    out = ParetoArchive()
    for e in archive:
        out.insert(e)
    for e in archive:
        tuned = refine_constants(e.expr, X, y, max_nfev)
        if tuned is not e.expr:
            out.insert(ParetoEntry(e.size, rmse(tuned, X, y), tuned))
    if y.size > refine_points:
        sub = np.sort(np.random.default_rng(seed).choice(y.size, refine_points, replace=False))
        Xr, yr = X[:, sub], y[sub]
    else:
        Xr, yr = X, y
    seen = set()
    for _ in range(sweeps):
        added = False
        for e in list(out):
            key = ex.to_text(e.expr)
            if key in seen:
                continue
            seen.add(key)
            for cand in _prunes(e.expr):
                cand = ex.fold_constants(cand)
                cand = refine_constants(cand, Xr, yr, 60)
                cand = refine_constants(cand, X, y, max_nfev)
                added |= out.insert(ParetoEntry(ex.size(cand), rmse(cand, X, y), cand))
        if not added:
            break
    return out


def search(X, y, config=None):
    """Run ``config.workers`` annealing chains and merge their archives.

    ``X`` has one row per input variable. Chains are seeded from
    ``SeedSequence(config.seed)``; the merged archive is the same whether
    chains run in worker processes or serially.
    """
    config = config or SearchConfig()
    X, y = _as_dataset(X, y)
    seeds = np.random.SeedSequence(config.seed).spawn(config.workers)
    if config.workers == 1:
        results = [_chain(X, y, config, seeds[0])]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_chain, [X] * config.workers, [y] * config.workers,
                                    [config] * config.workers, seeds))
    archive = ParetoArchive()
    progress = []
    for chain_archive, chain_progress in results:
        for e in chain_archive:
            archive.insert(e)
        progress.extend(chain_progress)
    if config.workers > 1:
        progress = _merge_progress(progress)
    if config.polish:
        archive = polish_archive(archive, X, y, refine_points=config.refine_points, seed=config.seed)
    return SearchResult(archive, progress)


def _merge_progress(rows):
    by_it = {}
    for it, temp, best in rows:
        t0, b0 = by_it.get(it, (temp, best))
        by_it[it] = (max(t0, temp), min(b0, best))
    return [(it, t, b) for it, (t, b) in sorted(by_it.items())]


# --- I/O ----------------------------------------------------------------------


def write_archive(archive, path, names=None):
    with open(path, "w") as fh:
        if names:
            fh.write("# variables: " + ",".join(f"x{k}={n}" for k, n in enumerate(names)) + "\n")
        fh.write("size,rmse,expression\n")
        for e in archive:
            fh.write(f"{e.size},{e.rmse!r},{ex.to_text(e.expr)}\n")


def read_archive(path):
    """Returns ``(ParetoArchive, names)``; names come from the header comment."""
    names = None
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# variables:"):
                pairs = line.split(":", 1)[1].strip().split(",")
                names = [p.split("=", 1)[1] for p in pairs]
                continue
            if line.startswith("#") or line.startswith("size,"):
                continue
            s, r, text = line.split(",", 2)
            entries.append(ParetoEntry(int(s), float(r), ex.parse(text)))
    archive = ParetoArchive()
    archive.entries = sorted(entries, key=lambda e: e.size)
    return archive, names


def write_progress(progress, path):
    with open(path, "w") as fh:
        fh.write("iteration,temperature,best_rmse\n")
        for it, temp, best in progress:
            fh.write(f"{it},{temp!r},{best!r}\n")
