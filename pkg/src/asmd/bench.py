"""Experiment runner: configs in, trace CSVs and a manifest out.

A config is an INI file. Every section other than ``DEFAULT`` describes one
run; keys in ``DEFAULT`` are shared by all runs. Example::

    [DEFAULT]
    dataset = synthetic
    N = 1000
    D = 10
    seed = 0
    lambda = 0.1

    [asmd-II]
    solver = asmd
    variant = II
    stages = 50

    [apg]
    solver = apg
    iterations = 150
"""

import configparser
import io
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import optimize

from . import baselines
from .data import build_group_lasso_problem, build_lasso_problem, generate_synthetic_lasso, load_libsvm
from .problem import FiniteSumProblem, L1Norm, LeastSquares, OverlapGroupNorm, Zero
from .solver import AlphaSchedule, Asmd, AsmdConfig, EpsilonSchedule
from .trace import GAP_FLOOR, SolverTrace, read_trace_csv

SOLVERS = ("asmd", "apg", "fista", "pgd", "spgd")
PENALTIES = ("l1", "overlap", "none")
VALID_KEYS = {
    "solver", "dataset", "n", "d", "seed", "lambda", "penalty", "m", "nu", "alpha3",
    "variant", "xtilde_rule", "epsilon_kind", "epsilon0", "epsilon_p", "stages", "sampling",
    "iterations", "step0", "reference_tol",
}
DEFAULTS = {
    "dataset": "synthetic", "n": "1000", "d": "10", "seed": "0", "lambda": "0.1",
    "penalty": "l1", "nu": "2", "alpha3": "1/3", "variant": "II", "xtilde_rule": "average",
    "epsilon_kind": "exact", "epsilon0": "0.001", "epsilon_p": "0", "stages": "50",
    "sampling": "uniform", "iterations": "100", "reference_tol": "1e-10",
}


class ConfigError(ValueError):
    pass


class ReferenceNotConverged(RuntimeError):
    """Reference solver did not converge; ``best`` holds the lowest value seen."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


# -- config ------------------------------------------------------------------

def _number(text, key):
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} = {text!r} is not a number") from None


def _integer(text, key):
    val = _number(text, key)
    if val != int(val):
        raise ConfigError(f"{key} = {text!r} is not an integer")
    return int(val)


def load_config(path):
    """Parse a config file into a list of ``(name, settings)`` pairs."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))
    runs = []
    for name in parser.sections():
        raw = dict(DEFAULTS)
        raw.update(parser[name])
        runs.append((name, parse_run(name, raw, base)))
    return runs


def parse_run(name, raw, base="."):
    unknown = sorted(set(raw) - VALID_KEYS)
    if unknown:
        raise ConfigError(f"[{name}] unknown keys {unknown}; valid keys are {sorted(VALID_KEYS)}")
    if "solver" not in raw:
        raise ConfigError(f"[{name}] missing 'solver'; valid solvers are {list(SOLVERS)}")
    run = {"name": name}
    run["solver"] = raw["solver"].strip().lower()
    if run["solver"] not in SOLVERS:
        raise ConfigError(f"[{name}] unknown solver {raw['solver']!r}; valid solvers are {list(SOLVERS)}")
    dataset = raw["dataset"].strip()
    if dataset != "synthetic":
        dataset = os.path.normpath(os.path.join(base, dataset))
        if not os.path.isfile(dataset):
            raise ConfigError(f"[{name}] dataset {raw['dataset']!r} is neither 'synthetic' nor a libsvm file")
    run["dataset"] = dataset
    run["penalty"] = raw["penalty"].strip().lower()
    if run["penalty"] not in PENALTIES:
        raise ConfigError(f"[{name}] unknown penalty {raw['penalty']!r}; valid penalties are {list(PENALTIES)}")
    for key in ("n", "d", "seed", "stages", "iterations"):
        run[key] = _integer(raw[key], key)
    if "m" in raw:
        run["m"] = _integer(raw["m"], "m")
    for key in ("lambda", "nu", "alpha3", "epsilon0", "epsilon_p", "reference_tol"):
        run[key] = _number(raw[key], key)
    if "step0" in raw:
        run["step0"] = _number(raw["step0"], "step0")
    for key in ("variant", "xtilde_rule", "epsilon_kind", "sampling"):
        run[key] = raw[key].strip()
    if run["epsilon_kind"] not in ("exact", "fixed", "power"):
        raise ConfigError(f"[{name}] unknown epsilon_kind {run['epsilon_kind']!r}; "
                          "valid kinds are ['exact', 'fixed', 'power']")
    return run


# -- data and references -----------------------------------------------------

_dataset_cache = {}
_reference_cache = {}
_cache_lock = threading.Lock()
_key_locks = {}


def _key_lock(key):
    with _cache_lock:
        return _key_locks.setdefault(key, threading.Lock())


def dataset_key(run):
    if run["dataset"] == "synthetic":
        return ("synthetic", run["n"], run["d"], run["seed"])
    return (run["dataset"],)


def get_dataset(run):
    key = dataset_key(run)
    with _key_lock(("data",) + key):
        if key not in _dataset_cache:
            if run["dataset"] == "synthetic":
                data, _ = generate_synthetic_lasso(run["n"], run["d"], run["seed"])
            else:
                data = load_libsvm(run["dataset"])
            _dataset_cache[key] = data
        return _dataset_cache[key]


def build_problem(run):
    data = get_dataset(run)
    if run["penalty"] == "l1":
        return build_lasso_problem(data, run["lambda"])
    if run["penalty"] == "overlap":
        return build_group_lasso_problem(data, run["lambda"])
    return FiniteSumProblem(LeastSquares(data.features, data.labels), Zero())


def lasso_coordinate_descent(A, b, lam, x0=None, tol=1e-14, max_sweeps=100_000):
    """Cyclic coordinate descent for ``(1/2N)||Ax - b||^2 + lam ||x||_1``.

    Works on the Gram matrix, so each sweep costs ``O(D^2)``. Stops when the
    largest coordinate move in a sweep falls below ``tol * (1 + ||x||_inf)``.
    """
    N, D = A.shape
    H = A.T @ A / N
    c = A.T @ b / N
    x = np.zeros(D) if x0 is None else np.array(x0, dtype=float)
    diag = np.diag(H).copy()
    for _ in range(max_sweeps):
        move = 0.0
        for j in range(D):
            if diag[j] == 0:
                continue
            r = c[j] - H[j] @ x + diag[j] * x[j]
            new = math.copysign(max(abs(r) - lam, 0.0), r) / diag[j]
            move = max(move, abs(new - x[j]))
            x[j] = new
        if move <= tol * (1.0 + np.abs(x).max()):
            return x
    raise ReferenceNotConverged("coordinate descent did not converge", None)


def _group_block_min(Q, evals, evecs, g, lam):
    """``argmin_w 0.5 w'Qw + g'w + lam ||w||`` for a positive semidefinite ``Q``.

    Zero when ``||g|| <= lam``; otherwise ``w = -(Q + nu I)^{-1} g`` with
    ``nu = lam / ||w||`` the root of ``sum_k (gh_k nu / (l_k + nu))^2 = lam^2``.
    """
    gn = float(np.linalg.norm(g))
    if gn <= lam:
        return np.zeros_like(g)
    gh = evecs.T @ g

    def secular(nu):
        return float(np.sum((gh * nu / (evals + nu)) ** 2)) - lam * lam

    hi = 1.0
    while secular(hi) < 0:
        hi *= 2.0
    nu = optimize.brentq(secular, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return -(evecs @ (gh / (evals + nu)))


def latent_group_lasso(A, b, lam, groups, tol=1e-12, max_sweeps=100_000):
    """Solve least squares plus the overlapping group norm in its latent form.

    Each group gets its own copy ``w_r`` of its coordinates with ``x = sum_r w_r``,
    so the penalty is a sum of norms over disjoint blocks. Cyclic exact block
    minimisation runs until the optimality residual of every block is at most
    ``tol * max(1, lam)``. Returns ``x``.
    """
    N, D = A.shape
    H = A.T @ A / N
    c = A.T @ b / N
    blocks = []
    for g in groups.groups:
        Q = H[np.ix_(g, g)]
        evals, evecs = np.linalg.eigh(Q)
        blocks.append((g, Q, np.maximum(evals, 0.0), evecs))
    W = [np.zeros(g.size) for g in groups.groups]
    x = np.zeros(D)
    for _ in range(max_sweeps):
        for r, (g, Q, evals, evecs) in enumerate(blocks):
            grad = (H[g] @ x - c[g]) - Q @ W[r]
            new = _group_block_min(Q, evals, evecs, grad, lam)
            x[g] += new - W[r]
            W[r] = new
        # optimality: grad_r = -lam w_r/||w_r|| on active blocks, ||grad_r|| <= lam otherwise
        resid = 0.0
        full = H @ x - c
        for r, (g, _, _, _) in enumerate(blocks):
            gr = full[g]
            wn = np.linalg.norm(W[r])
            if wn > 0:
                resid = max(resid, float(np.linalg.norm(gr + lam * W[r] / wn)))
            else:
                resid = max(resid, float(np.linalg.norm(gr)) - lam)
        if resid <= tol * max(1.0, lam):
            return x
    raise ReferenceNotConverged(f"latent group solver stopped with residual {resid:.3g}", None)


def reference_optimum(problem, tolerance=1e-10, max_iter=200_000, polish=True):
    """Approximate ``(f*, x*)`` by a long accelerated run.

    Accelerated proximal gradient (momentum reset whenever the step and the
    momentum point in opposite directions) runs until the objective changes
    by less than ``tolerance`` on three successive iterations. For least
    squares with an l1 penalty the point is then polished by coordinate
    descent unless ``polish`` is false. The lowest objective seen is returned.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    reg = problem.regularizer
    eps = 0.0 if reg.exact_prox else max(0.1 * tolerance, 1e-12)
    warm = {}
    L = baselines.mean_lipschitz(problem)
    x = np.zeros(problem.dim)
    y, t = x.copy(), 1.0
    prev = best = problem.objective(x)
    best_x = x.copy()
    quiet = 0
    converged = False
    for k in range(max_iter):
        g = problem.full_gradient(y)
        x_new = reg.prox(g, L, y, epsilon=eps, warm=warm).point
        if (y - x_new) @ (x_new - x) > 0:
            t = 1.0
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
        val = problem.objective(x)
        if val < best:
            best, best_x = val, x.copy()
        quiet = quiet + 1 if abs(val - prev) < tolerance else 0
        prev = val
        if quiet >= 3:
            converged = True
            break
    if polish and isinstance(reg, L1Norm) and isinstance(problem.family, LeastSquares):
        fam = problem.family
        xc = lasso_coordinate_descent(fam.A, fam.b, reg.lam, x0=best_x)
        vc = problem.objective(xc)
        if vc <= best:
            best, best_x = vc, xc
        converged = True
    if not converged:
        raise ReferenceNotConverged(f"reference solver did not converge in {max_iter} iterations; "
                                    f"best value {best!r}", best)
    return best, best_x


def cached_reference(run, problem):
    key = dataset_key(run) + (run["lambda"], run["penalty"], run["reference_tol"])
    with _key_lock(("ref",) + key):
        if key not in _reference_cache:
            _reference_cache[key] = reference_optimum(problem, run["reference_tol"])
        return _reference_cache[key]


# -- runs --------------------------------------------------------------------

def execute_run(run):
    """Run one configured solver and return its trace."""
    problem = build_problem(run)
    fstar, _ = cached_reference(run, problem)
    solver = run["solver"]
    if solver == "asmd":
        eps = EpsilonSchedule(run["epsilon_kind"], run["epsilon0"], run["epsilon_p"]) \
            if run["epsilon_kind"] != "exact" else EpsilonSchedule.exact()
        cfg = AsmdConfig(m=run.get("m", problem.n), stages=run["stages"],
                         schedule=AlphaSchedule(run["nu"], run["alpha3"]), epsilon=eps,
                         sampling=run["sampling"], variant=run["variant"],
                         xtilde_rule=run["xtilde_rule"], seed=run["seed"], reference_value=fstar)
        return Asmd(problem, cfg).run(np.zeros(problem.dim))
    if solver == "spgd":
        return baselines.run_spgd(problem, run["iterations"], step0=run.get("step0"),
                                  seed=run["seed"], reference_value=fstar)
    fn = {"apg": baselines.run_apg, "fista": baselines.run_fista, "pgd": baselines.run_pgd}[solver]
    return fn(problem, run["iterations"], reference_value=fstar)


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _safe_name(name):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def run_experiment(config_path, out_dir, threads=1, timing=False):
    """Run every section of ``config_path``; returns ``{name: csv path}``.

    With ``timing=False`` the ``wall_ms`` column is written as 0 so that a
    rerun of the same config produces byte-identical files.
    """
    runs = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    names = [_safe_name(name) for name, _ in runs]
    if len(set(names)) != len(names):
        raise ConfigError("run names collide after sanitising; rename the sections")

    def job(item):
        fname, (name, run) = item
        trace = execute_run(run)
        path = os.path.join(out_dir, fname + ".csv")
        write_atomic(path, trace.to_csv(timing=timing))
        return name, path, trace

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(job, zip(names, runs)))

    manifest = configparser.ConfigParser(interpolation=None)
    for (name, run), (_, path, trace) in zip(runs, results):
        entry = {k: repr(v) if isinstance(v, float) else str(v) for k, v in sorted(run.items()) if k != "name"}
        if run["solver"] == "asmd":
            entry["m"] = str(run.get("m", trace.n))
        entry["trace"] = os.path.basename(path)
        entry["reference_value"] = repr(float(trace.reference_value))
        entry["final_objective"] = repr(float(trace.records[-1].objective))
        manifest[name] = entry
    write_atomic(os.path.join(out_dir, "manifest.ini"), _render(manifest))
    return {name: path for name, path, _ in results}


def reference_report(config_path):
    """``(name, f*)`` for each run in a config, computing references once per key."""
    out = []
    for name, run in load_config(config_path):
        fstar, _ = cached_reference(run, build_problem(run))
        out.append((name, fstar))
    return out


def _render(parser):
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# -- rate fitting ------------------------------------------------------------

def fit_rate(trace, window):
    """Least-squares slope of ``log(gap)`` against ``log(stage)`` over ``window = (a, b)``.

    ``trace`` is a :class:`SolverTrace` or the column dict from
    :func:`read_trace_csv`. Gaps clamped at the floor count as positive; a
    non-positive or missing gap, or an objective below the reference by more
    than rounding, means the reference optimum is too loose and raises.
    """
    a, b = window
    if isinstance(trace, SolverTrace):
        stages = trace.stages.astype(float)
        gaps = trace.gaps
        if trace.reference_value is not None:
            raw = trace.objectives - trace.reference_value
            slack = 64 * np.finfo(float).eps * max(1.0, abs(trace.reference_value))
            sel = (stages >= a) & (stages <= b)
            if np.any(raw[sel] < -slack):
                raise ValueError("objective below the reference optimum; the reference is too loose")
    else:
        stages = np.asarray(trace["stage_or_iter"], dtype=float)
        gaps = np.asarray(trace["gap"], dtype=float)
    sel = (stages >= a) & (stages <= b) & (stages > 0)
    if sel.sum() < 5:
        raise ValueError(f"need at least 5 points in window {a}:{b}, found {int(sel.sum())}")
    g = gaps[sel]
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("non-positive or missing gaps in the window; the reference optimum is too loose")
    slope, _ = np.polyfit(np.log(stages[sel]), np.log(g), 1)
    return float(slope)


def fit_rate_file(path, window):
    return fit_rate(read_trace_csv(path), window)


def parse_window(text):
    try:
        a, b = text.split(":")
        a, b = int(a), int(b)
    except ValueError:
        raise ValueError(f"window must look like a:b, got {text!r}") from None
    if not 0 < a < b:
        raise ValueError(f"window {text!r} must satisfy 0 < a < b")
    return a, b


__all__ = [
    "ConfigError", "ReferenceNotConverged", "SOLVERS", "VALID_KEYS", "load_config", "parse_run", "build_problem",
    "reference_optimum", "lasso_coordinate_descent", "execute_run", "run_experiment",
    "reference_report", "fit_rate", "fit_rate_file", "parse_window", "write_atomic", "GAP_FLOOR",
]
