"""Deterministic and stochastic proximal-gradient baselines.

All solvers charge gradients the same way as ASMD (``n`` per full gradient,
one per component gradient) so traces are comparable on a gradients/n axis.
The deterministic methods use ``L_A``, the mean component Lipschitz constant,
as their smoothness constant.
"""

import math
import time

import numpy as np

from .bregman import Euclidean
from .solver import IndexSampler
from .trace import SolverTrace


def _start(problem, x0):
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"x0 must have dimension {problem.dim}")
    return x


def _default_eps(problem, prox_epsilon):
    if prox_epsilon is None:
        return 0.0 if problem.regularizer.exact_prox else 1e-9
    return prox_epsilon


def mean_lipschitz(problem):
    return float(problem.lipschitz.sum() / problem.n)


def run_pgd(problem, steps, step=None, x0=None, reference_value=None, prox_epsilon=None):
    """Proximal gradient descent with constant step ``1 / L_A`` unless given."""
    L = 1.0 / step if step is not None else mean_lipschitz(problem)
    eps = _default_eps(problem, prox_epsilon)
    warm = {}
    reg = problem.regularizer
    x = _start(problem, x0)
    trace = SolverTrace("pgd", problem.n, reference_value=reference_value)
    t0 = time.perf_counter()
    trace.add(0, 0, problem.objective(x))
    for k in range(1, steps + 1):
        g = problem.full_gradient(x)
        x = reg.prox(g, L, x, epsilon=eps, warm=warm).point
        trace.add(k, k * problem.n, problem.objective(x), 1000.0 * (time.perf_counter() - t0))
    trace.final_point = x
    return trace


def run_spgd(problem, steps, step0=None, seed=0, x0=None, reference_value=None,
             record_every=None, prox_epsilon=None):
    """Stochastic proximal gradient with ``gamma_k = gamma_0 / sqrt(k)``.

    Indices are uniform. The trace reports the running average of the
    iterates every ``record_every`` steps (default ``n``).
    """
    gamma0 = step0 if step0 is not None else 1.0 / float(problem.lipschitz.max())
    every = record_every or problem.n
    eps = _default_eps(problem, prox_epsilon)
    warm = {}
    reg = problem.regularizer
    sampler = IndexSampler(np.full(problem.n, 1.0 / problem.n), seed)
    x = _start(problem, x0)
    avg = x.copy()
    trace = SolverTrace("spgd", problem.n, reference_value=reference_value)
    t0 = time.perf_counter()
    trace.add(0, 0, problem.objective(avg))
    picks = sampler.draw(steps)
    for k in range(1, steps + 1):
        g = problem.component_grad(int(picks[k - 1]), x)
        x = reg.prox(g, math.sqrt(k) / gamma0, x, epsilon=eps, warm=warm).point
        avg += (x - avg) / k
        if k % every == 0 or k == steps:
            trace.add(k, k, problem.objective(avg), 1000.0 * (time.perf_counter() - t0))
    trace.final_point = avg
    trace.notes["last_iterate"] = x
    return trace


def fista_t_sequence(k):
    """First ``k`` momentum weights ``t_1 = 1, t_{j+1} = (1 + sqrt(1 + 4 t_j^2)) / 2``."""
    t = [1.0]
    while len(t) < k:
        t.append((1 + math.sqrt(1 + 4 * t[-1] ** 2)) / 2)
    return t[:k]


def run_fista(problem, steps, x0=None, reference_value=None, prox_epsilon=None, lipschitz=None):
    L = lipschitz or mean_lipschitz(problem)
    eps = _default_eps(problem, prox_epsilon)
    warm = {}
    reg = problem.regularizer
    x = _start(problem, x0)
    y = x.copy()
    t = 1.0
    trace = SolverTrace("fista", problem.n, reference_value=reference_value)
    t0 = time.perf_counter()
    trace.add(0, 0, problem.objective(x))
    for k in range(1, steps + 1):
        g = problem.full_gradient(y)
        x_new = reg.prox(g, L, y, epsilon=eps, warm=warm).point
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
        trace.add(k, k * problem.n, problem.objective(x), 1000.0 * (time.perf_counter() - t0))
    trace.final_point = x
    return trace


def run_apg(problem, steps, x0=None, reference_value=None, prox_epsilon=None,
            generator=None, lipschitz=None):
    """Three-sequence accelerated proximal gradient with ``theta_k = 2 / (k + 2)``.

    ``y = (1-theta) x + theta z``; ``z`` takes a Bregman prox step with weight
    ``theta * L`` from the full gradient at ``y``; ``x = (1-theta) x + theta z``.
    No restarts.
    """
    L = lipschitz or mean_lipschitz(problem)
    eps = _default_eps(problem, prox_epsilon)
    warm = {}
    gen = generator or Euclidean()
    reg = problem.regularizer
    x = _start(problem, x0)
    z = x.copy()
    zmax = float(np.linalg.norm(z))
    trace = SolverTrace("apg", problem.n, reference_value=reference_value)
    t0 = time.perf_counter()
    trace.add(0, 0, problem.objective(x), 0.0, zmax)
    for k in range(steps):
        theta = 2.0 / (k + 2)
        y = (1 - theta) * x + theta * z
        g = problem.full_gradient(y)
        z = reg.prox(g, theta * L, z, gen, epsilon=eps, warm=warm).point
        x = (1 - theta) * x + theta * z
        zmax = max(zmax, float(np.linalg.norm(z)))
        trace.add(k + 1, (k + 1) * problem.n, problem.objective(x),
                  1000.0 * (time.perf_counter() - t0), zmax)
    trace.final_point = x
    return trace
