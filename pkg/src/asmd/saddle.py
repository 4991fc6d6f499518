"""Specialised ASMD for ``min_x (1/n) sum_i max_{z_i} g_i(x, z_i)``.

The max-type components are replaced by their smoothed versions and the
problem is solved with a Euclidean distance, no regularizer and the fixed
schedule ``alpha3 = 1/3``, ``alpha2_s = 2/(s+2)``. The ``u`` sequence takes a
plain gradient step with step ``1 / (alpha2_s L_bar)``; when the outer set is
not the whole space that step is followed by a Euclidean projection.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .problem import FiniteSumProblem, lipschitz_summary
from .sets import FullSpace
from .smoothing import SmoothedMaxFamily
from .solver import AlphaSchedule, IndexSampler, reduced_gradient, sampling_distribution
from .trace import SolverTrace

SADDLE_SCHEDULE = AlphaSchedule(nu=2.0, alpha3=1.0 / 3.0)


@dataclass
class SaddleProblem:
    components: list
    outer_set: object = field(default_factory=FullSpace)

    def __post_init__(self):
        self.family = SmoothedMaxFamily(self.components)
        mus = {c.mu for c in self.components}
        self.mu = mus.pop() if len(mus) == 1 else None
        # the smoothed finite sum; its regularizer is zero on the whole space
        self.smoothed = FiniteSumProblem(self.family)

    @property
    def n(self):
        return self.family.n

    @property
    def dim(self):
        return self.family.dim

    @property
    def lipschitz(self):
        return self.family.lipschitz

    def smoothed_objective(self, x):
        return self.smoothed.smooth_value(x)

    def original_objective(self, x):
        """``(1/n) sum_i max_z g_i(x, z)`` without smoothing."""
        return float(np.add.accumulate(self.family.original_values(x))[-1] / self.n)

    @property
    def bias(self):
        """Mean ``K_i``: the original objective exceeds the smoothed one by at most ``bias * mu``."""
        return self.family.bias_bounds[1]


def run_saddle(problem: SaddleProblem, m, S, seed=0, q="uniform", x0=None, u0=None,
               reference_value=None, record_iterates=False):
    """Run ``S`` stages with ``m`` inner steps each.

    ``reference_value`` is an optimum of the smoothed problem; the recorded
    gap is measured on the smoothed objective and the nonsmooth objective is
    kept alongside each record.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    prob = problem.smoothed
    X = problem.outer_set
    qv = sampling_distribution(q, problem.lipschitz)
    _, _, l_bar = lipschitz_summary(problem.lipschitz, qv, SADDLE_SCHEDULE.alpha3)
    sampler = IndexSampler(qv, seed)

    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    u = x.copy() if u0 is None else np.array(u0, dtype=float)
    xt = x.copy()
    grads = 0
    unorm = float(np.linalg.norm(u))
    trace = SolverTrace("saddle", problem.n, reference_value=reference_value)
    trace.notes["l_bar"] = l_bar
    if record_iterates:
        trace.iterates = []
    start = time.perf_counter()
    trace.add(0, 0, problem.smoothed_objective(xt), 0.0, unorm, problem.original_objective(xt))
    trace.stage_points.append(xt.copy())

    for s in range(1, S + 1):
        a1, a2, a3 = SADDLE_SCHEDULE.at(s)
        theta = a2 * l_bar
        vt = prob.full_gradient(xt)
        grads += problem.n
        picks = sampler.draw(m)
        acc = np.zeros_like(x)
        for k in range(m):
            i = int(picks[k])
            y = a1 * x + a2 * u + a3 * xt
            v = reduced_gradient(prob, y, xt, vt, i, qv)
            grads += 2
            if theta > 0:
                u = u - v / theta
            elif np.any(v != 0):
                # L_bar = 0: every component is affine in x, so no step size exists
                raise ValueError("components have zero curvature but a nonzero gradient")
            if X.kind != "full":
                u = X.project(u)
            x = a1 * x + a2 * u + a3 * xt
            acc += x
            unorm = max(unorm, float(np.linalg.norm(u)))
            if record_iterates:
                trace.iterates.append({"stage": s, "k": k + 1, "i": i, "y": y, "z": u, "x": x})
        xt = acc / m
        trace.stage_points.append(xt.copy())
        trace.add(s, grads, problem.smoothed_objective(xt), 1000.0 * (time.perf_counter() - start),
                  unorm, problem.original_objective(xt))

    trace.final_point = xt.copy()
    return trace
