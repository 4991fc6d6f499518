"""Smooth surrogates for max-type components.

Two families are provided:

* scalar smoothers of ``[t]_+`` (the square-root and softplus forms), used to
  build smoothed hinge losses;
* smoothed max functions ``g_mu(x) = max_{z in Z} g(x, z) - mu R(z)`` with a
  closed-form inner maximiser, whose gradient is ``grad_x g(x, z*(x))`` and
  whose gradient is ``(2 A2^2 / (mu a) + A1)``-Lipschitz.
"""

import math

import numpy as np

from .problem import ComponentFamily, ComponentFunction


class ScalarSmoother:
    """Smooth upper approximation of ``max(t, 0)``.

    ``kind='sqrt'`` is ``(t + sqrt(t^2 + 4 mu^2)) / 2`` with bias at most ``mu``;
    ``kind='neural'`` is ``mu * log(1 + exp(t / mu))`` with bias at most
    ``mu log 2``. Both have derivative Lipschitz constant ``1 / (4 mu)``.
    """

    def __init__(self, kind, mu):
        if kind not in ("sqrt", "neural"):
            raise ValueError(f"unknown smoother {kind!r}")
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.kind = kind
        self.mu = float(mu)

    @property
    def bias(self):
        """``K`` such that ``[t]_+ <= f_mu(t) <= [t]_+ + K mu``."""
        return 1.0 if self.kind == "sqrt" else math.log(2.0)

    @property
    def lipschitz(self):
        return 1.0 / (4.0 * self.mu)

    def value_grad(self, t):
        t = np.asarray(t, dtype=float)
        mu = self.mu
        # value = [t]_+ + excess keeps the lower sandwich exact in floating point
        val = np.maximum(t, 0.0) + self.excess(t)
        if self.kind == "sqrt":
            h = np.hypot(t, 2.0 * mu)
            with np.errstate(divide="ignore", invalid="ignore"):
                # rationalised branch for t < 0 avoids cancellation in h + t
                der = np.where(t < 0, 2.0 * mu * mu / h / (h - t), 0.5 * (1.0 + t / h))
            return val, der
        e = np.exp(-np.abs(t) / mu)
        der = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return val, der

    def excess(self, t):
        """``f_mu(t) - [t]_+`` computed without cancellation."""
        t = np.asarray(t, dtype=float)
        mu = self.mu
        if self.kind == "sqrt":
            return 2.0 * mu * mu / (np.hypot(t, 2.0 * mu) + np.abs(t))
        return mu * np.log1p(np.exp(-np.abs(t) / mu))


def scalar_smooth_value_grad(sm, t):
    """Value and derivative of the scalar smoother ``sm`` at ``t``."""
    val, der = sm.value_grad(t)
    return (float(val), float(der)) if np.ndim(val) == 0 else (val, der)


class SmoothedHinge(ComponentFamily):
    """Components ``f_mu(1 - b_i <a_i, x>)`` with ``L_i = ||a_i||^2 / (4 mu)``."""

    def __init__(self, A, b, smoother):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValueError("need A of shape (n, dim) and b of shape (n,)")
        self.n, self.dim = self.A.shape
        self.smoother = smoother
        self.lipschitz = np.einsum("ij,ij->i", self.A, self.A) * smoother.lipschitz

    def margin(self, i, x):
        return 1.0 - self.b[i] * (self.A[i] * x).sum()

    def margins(self, x):
        return 1.0 - self.b * (self.A * x).sum(axis=1)

    def value(self, i, x):
        return float(self.smoother.value_grad(self.margin(i, x))[0])

    def grad(self, i, x):
        d = self.smoother.value_grad(self.margin(i, x))[1]
        return (-self.b[i] * d) * self.A[i]

    def values(self, x):
        return self.smoother.value_grad(self.margins(x))[0]

    def grads(self, x):
        d = self.smoother.value_grad(self.margins(x))[1]
        return (-self.b * d)[:, None] * self.A

    def hinge_values(self, x):
        return np.maximum(self.margins(x), 0.0)

    @property
    def bias_bounds(self):
        """``(K_lower, K_upper)``: ``f_mu - K_lower mu <= hinge <= f_mu + K_upper mu``."""
        return self.smoother.bias, 0.0


def smoothed_hinge_component(a, b, mu, kind="neural"):
    """``f_mu(1 - b <a, x>)`` as a standalone component."""
    fam = SmoothedHinge(np.asarray(a, dtype=float)[None, :], np.array([b], dtype=float),
                        ScalarSmoother(kind, mu))
    return ComponentFunction(lambda x: fam.value(0, x), lambda x: fam.grad(0, x),
                             float(fam.lipschitz[0]))


class SmoothedMax:
    """``g_mu(x) = max_{z in Z} g(x, z) - mu R(z)`` for a built-in inner problem.

    Subclasses define ``argmax``, ``coupling``, ``coupling_grad``, ``prox_term``
    and the constants ``A1``, ``A2``, ``a`` (strong convexity of ``R``) and
    ``K`` (``max_Z R`` with ``R >= 0``).
    """

    A1 = 0.0
    A2 = 0.0
    a = 1.0
    K = 0.0

    def __init__(self, mu):
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.mu = float(mu)

    def argmax(self, x):
        raise NotImplementedError

    def coupling(self, x, z):
        raise NotImplementedError

    def coupling_grad(self, x, z):
        raise NotImplementedError

    def prox_term(self, z):
        raise NotImplementedError

    def original_value(self, x):
        """``max_{z in Z} g(x, z)`` (the unsmoothed component)."""
        raise NotImplementedError

    def value_grad(self, x):
        z = self.argmax(x)
        val = self.coupling(x, z) - self.mu * self.prox_term(z)
        return float(val), self.coupling_grad(x, z), z

    @property
    def lipschitz(self):
        return smoothed_lipschitz(self)


def smoothed_max_value_grad(sm, x):
    """``(g_mu(x), grad g_mu(x), z*(x))`` for a smoothed max instance."""
    return sm.value_grad(np.asarray(x, dtype=float))


def smoothed_lipschitz(sm):
    return 2.0 * sm.A2 ** 2 / (sm.mu * sm.a) + sm.A1


class BoxQuadraticMax(SmoothedMax):
    """``g(x, z) = z * (c - <d, x>) + ridge/2 ||x||^2`` over ``z in [0, 1]``, ``R = z^2/2``.

    With ``c = 1`` and ``d = b a`` this is a Huber-smoothed hinge term. The
    maximiser is ``clip(t / mu, 0, 1)`` with ``t = c - <d, x>``.
    """

    a = 1.0
    K = 0.5

    def __init__(self, d, c, mu, ridge=0.0):
        super().__init__(mu)
        self.d = np.asarray(d, dtype=float)
        self.c = float(c)
        self.ridge = float(ridge)
        self.A1 = self.ridge
        self.A2 = float(np.linalg.norm(self.d))
        self.dim = self.d.size

    def _t(self, x):
        return self.c - (self.d * x).sum()

    def argmax(self, x):
        return float(np.clip(self._t(x) / self.mu, 0.0, 1.0))

    def coupling(self, x, z):
        return z * self._t(x) + 0.5 * self.ridge * float(x @ x)

    def coupling_grad(self, x, z):
        return -z * self.d + self.ridge * np.asarray(x, dtype=float)

    def prox_term(self, z):
        return 0.5 * z * z

    def original_value(self, x):
        return max(self._t(x), 0.0) + 0.5 * self.ridge * float(x @ x)


class SimplexEntropyMax(SmoothedMax):
    """``g(x, z) = <M x + c, z>`` over the simplex with ``R(z) = sum z log z + log p``.

    The smoothed value is a scaled log-sum-exp and ``z*`` is a softmax; ``R``
    is 1-strongly convex on the simplex and ``K = log p``.
    """

    a = 1.0

    def __init__(self, M, c, mu):
        super().__init__(mu)
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        self.c = np.asarray(c, dtype=float)
        if self.c.shape != (self.M.shape[0],):
            raise ValueError("c must have one entry per row of M")
        p = self.M.shape[0]
        self.K = math.log(p)
        self.A1 = 0.0
        self.A2 = float(np.linalg.norm(self.M, 2))
        self.dim = self.M.shape[1]

    def scores(self, x):
        return self.M @ x + self.c

    def argmax(self, x):
        u = self.scores(x) / self.mu
        u = u - u.max()
        e = np.exp(u)
        return e / e.sum()

    def coupling(self, x, z):
        return float(self.scores(x) @ z)

    def coupling_grad(self, x, z):
        return self.M.T @ z

    def prox_term(self, z):
        pos = z > 0
        return float(np.sum(z[pos] * np.log(z[pos]))) + self.K

    def value_grad(self, x):
        u = self.scores(x)
        um = u.max()
        w = np.exp((u - um) / self.mu)
        z = w / w.sum()
        # log-sum-exp form is exact at ties and avoids z log z round-off
        val = um + self.mu * (math.log(w.sum()) - self.K)
        return float(val), self.M.T @ z, z

    def original_value(self, x):
        return float(self.scores(x).max())


class SmoothedMaxFamily(ComponentFamily):
    """Finite sum of smoothed max components, ``L_i = 2 A2^2 / (mu a) + A1`` per component."""

    def __init__(self, components):
        if not components:
            raise ValueError("need at least one component")
        self.components = list(components)
        self.n = len(self.components)
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop()
        self.lipschitz = np.array([smoothed_lipschitz(c) for c in self.components])

    def value(self, i, x):
        return self.components[i].value_grad(x)[0]

    def grad(self, i, x):
        return self.components[i].value_grad(x)[1]

    def original_values(self, x):
        return np.array([c.original_value(x) for c in self.components])

    @property
    def bias_bounds(self):
        """Mean ``(K_lower, K_upper)``: ``g_mu <= max g <= g_mu + K mu``."""
        return 0.0, float(np.mean([c.K for c in self.components]))
