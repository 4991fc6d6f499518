"""Accelerated stochastic mirror descent with variance reduction.

Each stage takes one full gradient at the snapshot ``xt`` and then ``m``
stochastic steps. A step interpolates the three sequences into ``y``, forms
the variance-reduced estimate ``v``, takes a (possibly inexact) Bregman prox
step for ``z`` with weight ``theta_s = alpha2_s * L_bar`` and finally picks
``x`` by one of the admissible update rules.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .bregman import Entropy, Euclidean, DistanceGenerator
from .problem import FiniteSumProblem, lipschitz_summary
from .sets import FullSpace
from .trace import SolverTrace


@dataclass(frozen=True)
class AlphaSchedule:
    """``alpha2_s = 2/(s + nu)``, ``alpha1_s = 1 - alpha3 - alpha2_s``."""

    nu: float = 2.0
    alpha3: float = 1.0 / 3.0

    def __post_init__(self):
        if self.nu < 2:
            raise ValueError(f"nu must be >= 2, got {self.nu}")
        bound = (self.nu - 1) / (self.nu + 1)
        if not 0 < self.alpha3 <= bound + 1e-12:
            raise ValueError(f"alpha3 must lie in (0, {bound:.6g}] for nu={self.nu}, got {self.alpha3}")

    def at(self, s):
        if s < 1:
            raise ValueError("stages are numbered from 1")
        a2 = 2.0 / (s + self.nu)
        # summing a2 + alpha3 first makes a1 exactly 0 when the two add up to 1
        a1 = max(0.0, 1.0 - (a2 + self.alpha3))
        return a1, a2, self.alpha3


def alpha_at(schedule, s):
    return schedule.at(s)


def schedule_slack(schedule, s):
    """Slacks of the three coupling conditions between stage ``s`` and ``s+1``.

    The first two must be non-negative; the third is ``|a1 + a2 + a3 - 1|``.
    """
    a1, a2, a3 = schedule.at(s)
    _, b2, _ = schedule.at(s + 1)
    first = (1 - a1) / a2 ** 2 - a3 / b2 ** 2
    second = 1 / a2 ** 2 - (1 - b2) / b2 ** 2
    return first, second, abs(a1 + a2 + a3 - 1)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Prox accuracy per stage: ``exact``, ``fixed`` (eps0) or ``power`` (eps0 / s^p)."""

    kind: str = "exact"
    eps0: float = 0.0
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact", "fixed", "power"):
            raise ValueError(f"unknown epsilon schedule {self.kind!r}")
        if self.kind != "exact" and not self.eps0 > 0:
            raise ValueError("inexact schedules need eps0 > 0")

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def fixed(cls, eps0):
        return cls("fixed", eps0)

    @classmethod
    def power(cls, eps0, p):
        return cls("power", eps0, p)

    def at(self, s):
        if self.kind == "exact":
            return 0.0
        if self.kind == "fixed":
            return self.eps0
        return self.eps0 / s ** self.p

    @property
    def is_exact(self):
        return self.kind == "exact"

    @property
    def summable(self):
        """Whether ``sum_s sqrt(eps_s / alpha2_s)`` converges (alpha2_s ~ 2/s)."""
        return self.kind == "exact" or (self.kind == "power" and self.p > 3)


def sampling_distribution(kind, lipschitz):
    """``uniform``, ``lipschitz`` (q_i proportional to L_i) or an explicit vector."""
    L = np.asarray(lipschitz, dtype=float)
    n = L.size
    if isinstance(kind, str):
        if kind == "uniform":
            return np.full(n, 1.0 / n)
        if kind == "lipschitz":
            if np.any(L <= 0):
                raise ValueError("Lipschitz-proportional sampling needs every L_i > 0")
            return L / L.sum()
        raise ValueError(f"unknown sampling {kind!r}; expected 'uniform' or 'lipschitz'")
    q = np.asarray(kind, dtype=float)
    if q.shape != (n,) or np.any(q <= 0) or abs(q.sum() - 1) > 1e-9:
        raise ValueError("custom sampling must be a positive probability vector of length n")
    return q


class IndexSampler:
    """Inverse-CDF sampling of component indices from a Philox stream."""

    def __init__(self, q, seed):
        self.q = np.asarray(q, dtype=float)
        self.cdf = np.cumsum(self.q)
        self.rng = np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))

    def draw(self, size=None):
        u = self.rng.random(size)
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, self.q.size - 1)


def reduced_gradient(problem, y, xt, vt, i, q):
    """Variance-reduced estimate ``vt + (grad f_i(y) - grad f_i(xt)) / (q_i n)``."""
    diff = problem.component_grad(i, y) - problem.component_grad(i, xt)
    return vt + diff / (q[i] * problem.n)


def rate_hypotheses_unmet(generator, epsilon):
    """Rate hypotheses (generator smoothness, summable eps) that a configuration breaks."""
    if epsilon.is_exact:
        return []
    unmet = []
    if not generator.is_smooth:
        unmet.append(f"{generator.name} distance generator is not L_h-smooth")
    if not epsilon.summable:
        unmet.append(f"epsilon schedule {epsilon.kind} does not make sum sqrt(eps_s/alpha2_s) converge")
    return unmet


@dataclass
class AsmdConfig:
    m: int
    stages: int
    schedule: AlphaSchedule = field(default_factory=AlphaSchedule)
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    sampling: Union[str, np.ndarray] = "uniform"
    variant: str = "I"           # "I", "II" or "blend"
    blend: float = 0.5           # weight on the variant-I point when variant == "blend"
    xtilde_rule: str = "average"  # or "best"
    seed: int = 0
    generator: DistanceGenerator = field(default_factory=Euclidean)
    constraint: object = field(default_factory=FullSpace)
    debug: bool = False
    record_iterates: bool = False
    reference_value: Optional[float] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.stages < 0:
            raise ValueError("stages must be >= 0")
        if self.variant not in ("I", "II", "blend"):
            raise ValueError(f"unknown x-update variant {self.variant!r}")
        if not 0 <= self.blend <= 1:
            raise ValueError("blend weight must lie in [0, 1]")
        if self.xtilde_rule not in ("average", "best"):
            raise ValueError(f"unknown snapshot rule {self.xtilde_rule!r}")


@dataclass
class AsmdState:
    x: np.ndarray
    z: np.ndarray
    xt: np.ndarray
    vt: Optional[np.ndarray] = None
    # per-prox warm starts for inexact regularizers
    warm_z: dict = field(default_factory=dict)
    warm_x: dict = field(default_factory=dict)


class ChooseXViolation(AssertionError):
    pass


class Asmd:
    """Solver bound to one problem and configuration."""

    def __init__(self, problem: FiniteSumProblem, config: AsmdConfig):
        self.problem = problem
        self.config = config
        if not problem.regularizer.exact_prox and config.epsilon.is_exact:
            raise ValueError(f"{problem.regularizer!r} has no exact prox; use an inexact epsilon schedule")
        if isinstance(config.generator, Entropy) and config.constraint.kind != "simplex":
            raise ValueError("the entropy generator needs a simplex constraint")
        self.q = sampling_distribution(config.sampling, problem.lipschitz)
        self.l_a, self.l_q, self.l_bar = lipschitz_summary(problem.lipschitz, self.q, config.schedule.alpha3)
        self.sampler = IndexSampler(self.q, config.seed)
        self.gradients = 0
        self.unmet_hypotheses = rate_hypotheses_unmet(config.generator, config.epsilon)
        self._euclid = Euclidean()

    # one stochastic step -----------------------------------------------------
    def inner_step(self, state: AsmdState, s, i=None):
        """Advance ``state`` by one stochastic step of stage ``s``; returns ``(y, z, x)``."""
        cfg, prob = self.config, self.problem
        reg = prob.regularizer
        a1, a2, a3 = cfg.schedule.at(s)
        eps = cfg.epsilon.at(s)
        theta = a2 * self.l_bar
        if i is None:
            i = int(self.sampler.draw())

        y = a1 * state.x + a2 * state.z + a3 * state.xt
        v = reduced_gradient(prob, y, state.xt, state.vt, i, self.q)
        self.gradients += 2
        z = reg.prox(v, theta, state.z, cfg.generator, cfg.constraint, eps, warm=state.warm_z).point
        xhat = a1 * state.x + a2 * z + a3 * state.xt

        if cfg.variant == "I":
            x = xhat
        else:
            xl = reg.prox(v, self.l_bar, y, self._euclid, cfg.constraint, eps, warm=state.warm_x).point
            x = xl if cfg.variant == "II" else cfg.blend * xhat + (1 - cfg.blend) * xl

        if cfg.debug:
            self._check_step(v, y, x, xhat, z, eps)
        state.x, state.z = x, z
        return y, z, x

    def _model(self, v, y, x):
        d = x - y
        return float(v @ x) + 0.5 * self.l_bar * float(d @ d) + self.problem.regularizer.value(x)

    def _check_step(self, v, y, x, xhat, z, eps):
        lhs, rhs = self._model(v, y, x), self._model(v, y, xhat)
        # an eps-accurate second prox is only eps-optimal for the model
        if lhs > rhs + 1e-9 * max(1.0, abs(rhs)) + eps:
            raise ChooseXViolation(f"x-update rule violated: {lhs!r} > {rhs!r}")
        reg, cset = self.problem.regularizer, self.config.constraint
        for name, p in (("y", y), ("z", z), ("xhat", xhat), ("x", x)):
            if not np.all(np.isfinite(p)) or not reg.contains(p) or not cset.contains(p, 1e-9):
                raise ChooseXViolation(f"iterate {name} left the feasible set")

    # outer loop --------------------------------------------------------------
    def run(self, x0, z0=None, xt0=None):
        cfg, prob = self.config, self.problem
        x0 = np.array(x0, dtype=float)
        state = AsmdState(x=x0.copy(),
                          z=x0.copy() if z0 is None else np.array(z0, dtype=float),
                          xt=x0.copy() if xt0 is None else np.array(xt0, dtype=float))
        if isinstance(cfg.generator, Entropy):
            cfg.generator.check_point(state.z, interior=True)

        trace = SolverTrace(solver=f"asmd-{cfg.variant}", n=prob.n, reference_value=cfg.reference_value)
        trace.notes.update(l_a=self.l_a, l_q=self.l_q, l_bar=self.l_bar,
                           unmet_hypotheses=list(self.unmet_hypotheses))
        if cfg.record_iterates:
            trace.iterates = []
        start = time.perf_counter()
        zmax = float(np.linalg.norm(state.z))
        trace.add(0, 0, prob.objective(state.xt), 0.0, zmax)
        trace.stage_points.append(state.xt.copy())

        for s in range(1, cfg.stages + 1):
            state.vt = prob.full_gradient(state.xt)
            self.gradients += prob.n
            picks = self.sampler.draw(cfg.m)
            acc = np.zeros_like(state.x)
            best, best_val = None, math.inf
            for k in range(cfg.m):
                i = int(picks[k])
                y, z, x = self.inner_step(state, s, i)
                zmax = max(zmax, float(np.linalg.norm(z)))
                if cfg.xtilde_rule == "average":
                    acc += x
                else:
                    val = prob.objective(x)
                    if val < best_val or best is None:
                        best, best_val = x, val
                if cfg.record_iterates:
                    trace.iterates.append({"stage": s, "k": k + 1, "i": i, "y": y, "z": z, "x": x})
            state.xt = acc / cfg.m if cfg.xtilde_rule == "average" else best.copy()
            trace.stage_points.append(state.xt.copy())
            trace.add(s, self.gradients, prob.objective(state.xt),
                      1000.0 * (time.perf_counter() - start), zmax)

        trace.final_point = state.xt.copy()
        trace.notes["final_state"] = state
        return trace


def run(problem, config, x0, z0=None, xt0=None):
    """Run ASMD for ``config.stages`` stages from the given initial points."""
    return Asmd(problem, config).run(x0, z0, xt0)
