"""Composite finite-sum problems ``f^P(x) = (1/n) sum_i f_i(x) + P(x)``.

Components are grouped in *families* that can evaluate one component or all of
them at once; the batched path must agree bit-for-bit with the per-component
path so that a full gradient is exactly the ascending-order mean of the
component gradients.
"""

import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import prox as _prox
from .bregman import Entropy, Euclidean
from .sets import FullSpace


class ComponentFamily:
    """``n`` smooth convex components sharing dimension ``dim``.

    Subclasses implement ``value`` and ``grad``; ``values``/``grads`` may be
    overridden with vectorised versions that reproduce the scalar path exactly.
    """

    n: int
    dim: int
    lipschitz: np.ndarray

    def value(self, i, x):
        raise NotImplementedError

    def grad(self, i, x):
        raise NotImplementedError

    def values(self, x):
        return np.array([self.value(i, x) for i in range(self.n)])

    def grads(self, x):
        return np.stack([self.grad(i, x) for i in range(self.n)])


class LeastSquares(ComponentFamily):
    """``f_i(x) = 0.5 * (<a_i, x> - b_i)^2`` with ``L_i = ||a_i||_2^2``."""

    def __init__(self, A, b):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValueError("need A of shape (n, dim) and b of shape (n,)")
        self.n, self.dim = self.A.shape
        self.lipschitz = np.einsum("ij,ij->i", self.A, self.A)

    def residual(self, i, x):
        return (self.A[i] * x).sum() - self.b[i]

    def residuals(self, x):
        return (self.A * x).sum(axis=1) - self.b

    def value(self, i, x):
        r = self.residual(i, x)
        return 0.5 * r * r

    def grad(self, i, x):
        return self.residual(i, x) * self.A[i]

    def values(self, x):
        r = self.residuals(x)
        return 0.5 * r * r

    def grads(self, x):
        return self.residuals(x)[:, None] * self.A


@dataclass
class ComponentFunction:
    """A single component given by plain callables."""

    value: Callable
    grad: Callable
    lipschitz: float


class CallableFamily(ComponentFamily):
    def __init__(self, components: Sequence[ComponentFunction], dim):
        if not components:
            raise ValueError("need at least one component")
        self.components = list(components)
        self.n = len(self.components)
        self.dim = int(dim)
        self.lipschitz = np.array([c.lipschitz for c in self.components], dtype=float)

    def value(self, i, x):
        return float(self.components[i].value(x))

    def grad(self, i, x):
        g = np.asarray(self.components[i].grad(x), dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(f"component {i} returned gradient of shape {g.shape}")
        return g


# -- regularizers ------------------------------------------------------------

class Regularizer:
    """Closed convex ``P`` with a prox step against a distance generator."""

    exact_prox = True

    def value(self, x):
        raise NotImplementedError

    def contains(self, x):
        return True

    def prox(self, v, theta, anchor, generator=None, constraint=None, epsilon=0.0, warm=None):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


def _unsupported(reg, generator, constraint):
    return ValueError(f"no prox for {type(reg).__name__} with {type(generator).__name__} "
                      f"generator over {constraint!r}")


class Zero(Regularizer):
    def value(self, x):
        return 0.0

    def prox(self, v, theta, anchor, generator=None, constraint=None, epsilon=0.0, warm=None):
        generator = generator or Euclidean()
        constraint = constraint or FullSpace()
        if isinstance(generator, Entropy) and constraint.kind == "simplex":
            return _prox.prox_entropy_simplex(v, theta, anchor, constraint.radius)
        if isinstance(generator, Euclidean):
            return _prox.prox_indicator(v, theta, anchor, constraint)
        raise _unsupported(self, generator, constraint)

    def __repr__(self):
        return "Zero()"


class L1Norm(Regularizer):
    def __init__(self, lam):
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.lam = float(lam)

    def value(self, x):
        return self.lam * float(np.abs(x).sum())

    def prox(self, v, theta, anchor, generator=None, constraint=None, epsilon=0.0, warm=None):
        generator = generator or Euclidean()
        constraint = constraint or FullSpace()
        if not isinstance(generator, Euclidean) or constraint.kind not in ("full", "box"):
            raise _unsupported(self, generator, constraint)
        res = _prox.prox_l1(v, theta, anchor, self.lam)
        if constraint.kind == "box":
            # separable 1-D problems: clipping the unconstrained minimiser is exact
            res.point = constraint.project(res.point)
        return res

    def __repr__(self):
        return f"L1Norm({self.lam})"


class Indicator(Regularizer):
    """``P = 0`` on ``cset`` and ``+inf`` outside."""

    def __init__(self, cset, tol=1e-9):
        self.cset = cset
        self.tol = tol

    def value(self, x):
        return 0.0 if self.contains(x) else math.inf

    def contains(self, x):
        return self.cset.contains(x, self.tol)

    def prox(self, v, theta, anchor, generator=None, constraint=None, epsilon=0.0, warm=None):
        if constraint is not None and constraint.kind != "full" and constraint is not self.cset:
            raise ValueError("intersecting two different constraint sets is not supported")
        return Zero().prox(v, theta, anchor, generator, self.cset, epsilon)

    def __repr__(self):
        return f"Indicator({self.cset!r})"


class OverlapGroupNorm(Regularizer):
    """``lam * Omega_overlap(x)`` for a fixed collection of groups."""

    exact_prox = False

    def __init__(self, lam, groups, dim=None, value_tol=1e-8, max_iter=100_000):
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.lam = float(lam)
        if not isinstance(groups, _prox.OverlapGroups):
            groups = _prox.OverlapGroups(groups, dim)
        self.groups = groups
        self.value_tol = value_tol
        self.max_iter = max_iter

    def value(self, x):
        if self.lam == 0:
            return 0.0
        return self.lam * _prox.overlap_penalty_value(x, self.groups, tol=self.value_tol)

    def contains(self, x):
        return not np.any(np.asarray(x)[~self.groups.covered] != 0)

    def prox(self, v, theta, anchor, generator=None, constraint=None, epsilon=0.0, warm=None):
        generator = generator or Euclidean()
        constraint = constraint or FullSpace()
        if not isinstance(generator, Euclidean) or constraint.kind != "full":
            raise _unsupported(self, generator, constraint)
        if epsilon <= 0:
            raise ValueError("the overlapping group prox is inexact; pass epsilon > 0")
        # ``warm`` is a caller-owned dict carrying the latent split between calls
        init = None if warm is None else warm.get("split")
        res = _prox.prox_overlap_group(v, theta, anchor, self.lam, self.groups, epsilon, self.max_iter,
                                       init_split=init)
        if warm is not None:
            warm["split"] = res.split
        if res.penalty_bound is not None:
            res.penalty_bound *= self.lam
        return res

    def __repr__(self):
        return f"OverlapGroupNorm({self.lam}, {self.groups!r})"


# -- the problem -------------------------------------------------------------

class FiniteSumProblem:
    """``F(x) = (1/n) sum f_i(x)`` plus a regularizer, with gradient accounting.

    ``gradient_evaluations`` counts component gradients (a full gradient costs
    ``n``). The counter is guarded by a lock so concurrent solver runs over the
    same problem keep it exact.
    """

    def __init__(self, family: ComponentFamily, regularizer: Regularizer = None):
        self.family = family
        self.regularizer = regularizer if regularizer is not None else Zero()
        self.n = family.n
        self.dim = family.dim
        self.lipschitz = np.asarray(family.lipschitz, dtype=float)
        if self.n < 1:
            raise ValueError("need at least one component")
        if np.any(self.lipschitz < 0):
            raise ValueError("Lipschitz constants must be non-negative")
        self._count = 0
        self._lock = threading.Lock()

    @property
    def gradient_evaluations(self):
        return self._count

    def _charge(self, k):
        with self._lock:
            self._count += k

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x

    def component(self, i):
        fam = self.family
        return ComponentFunction(lambda x: fam.value(i, x), lambda x: fam.grad(i, x), float(self.lipschitz[i]))

    def component_value(self, i, x):
        return self.family.value(i, self._check(x))

    def component_grad(self, i, x):
        x = self._check(x)
        self._charge(1)
        return self.family.grad(i, x)

    def full_gradient(self, x):
        x = self._check(x)
        self._charge(self.n)
        # axis-0 reduction adds rows in ascending order
        return np.add.reduce(self.family.grads(x), axis=0) / self.n

    def smooth_value(self, x):
        x = self._check(x)
        return float(np.add.accumulate(self.family.values(x))[-1] / self.n)

    def objective(self, x):
        x = self._check(x)
        if not self.regularizer.contains(x):
            return math.inf
        return self.smooth_value(x) + self.regularizer.value(x)

    __call__ = objective


def lipschitz_summary(lipschitz, q, alpha3):
    """Return ``(L_A, L_Q, L_bar)`` for Lipschitz constants and sampling ``q``.

    ``L_A`` is the mean constant, ``L_Q = max L_i / (q_i n)`` and
    ``L_bar = L_A + L_Q / alpha3``.
    """
    if isinstance(lipschitz, FiniteSumProblem):
        lipschitz = lipschitz.lipschitz
    L = np.asarray(lipschitz, dtype=float)
    q = np.asarray(q, dtype=float)
    n = L.size
    if q.shape != (n,):
        raise ValueError(f"sampling vector has shape {q.shape}, expected ({n},)")
    if np.any(q <= 0):
        raise ValueError("every sampling probability must be positive")
    if abs(q.sum() - 1.0) > 1e-9:
        raise ValueError(f"sampling probabilities sum to {q.sum()}, not 1")
    if not 0 < alpha3 < 1:
        raise ValueError("alpha3 must lie in (0, 1)")
    l_a = float(L.sum() / n)
    l_q = float(np.max(L / (q * n)))
    return l_a, l_q, l_a + l_q / alpha3
