"""Distance generating functions and their Bregman distances.

Both generators are normalised to be 1-strongly convex with respect to the
Euclidean norm on their domain.
"""

import math

import numpy as np


class DistanceGenerator:
    """Base class for a differentiable, 1-strongly convex ``h``.

    Subclasses provide ``value``, ``grad`` and ``check_point``. ``smoothness``
    is the Lipschitz constant of ``grad`` or ``math.inf`` when unbounded.
    """

    name = "generic"
    smoothness = math.inf
    domain = "full"

    def value(self, x):
        raise NotImplementedError

    def grad(self, y):
        raise NotImplementedError

    def check_point(self, x, interior=False):
        pass

    @property
    def is_smooth(self):
        return math.isfinite(self.smoothness)

    def distance(self, x, y):
        return bregman_distance(self, x, y)


class Euclidean(DistanceGenerator):
    """``h(x) = 0.5 * ||x||^2``, so ``D(x, y) = 0.5 * ||x - y||^2``."""

    name = "euclidean"
    smoothness = 1.0
    domain = "full"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)

    def grad(self, y):
        return np.array(y, dtype=float)


class Entropy(DistanceGenerator):
    """Negative entropy ``h(x) = sum x_i log x_i`` on the probability simplex.

    The first argument of the distance may sit on the boundary (``0 log 0 = 0``);
    the second must be strictly positive.
    """

    name = "entropy"
    smoothness = math.inf
    domain = "simplex"

    def check_point(self, x, interior=False):
        x = np.asarray(x)
        if interior and np.any(x <= 0):
            raise ValueError("entropy generator needs a strictly positive point")
        if np.any(x < 0):
            raise ValueError("entropy generator is undefined for negative coordinates")

    def value(self, x):
        self.check_point(x)
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return float(np.sum(x[pos] * np.log(x[pos])))

    def grad(self, y):
        self.check_point(y, interior=True)
        return np.log(y) + 1.0


def bregman_distance(gen, x, y):
    """``D(x, y) = h(x) - h(y) - <grad h(y), x - y>``.

    Evaluated in closed form for the built-in generators to avoid cancellation;
    other generators fall back to the definition.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if isinstance(gen, Euclidean):
        d = x - y
        return 0.5 * float(d @ d)
    if isinstance(gen, Entropy):
        gen.check_point(y, interior=True)
        gen.check_point(x)
        pos = x > 0
        kl = float(np.sum(x[pos] * np.log(x[pos] / y[pos])))
        # the linear terms cancel on the simplex but not in general
        return kl - float(x.sum()) + float(y.sum())
    gen.check_point(y, interior=True)
    return gen.value(x) - gen.value(y) - float(gen.grad(y) @ (x - y))


def three_point_residual(gen, x, y, z):
    """Residual of ``D(x,y) + D(y,z) = D(x,z) + <x - y, grad h(z) - grad h(y)>``."""
    lhs = bregman_distance(gen, x, y) + bregman_distance(gen, y, z)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rhs = bregman_distance(gen, x, z) + float((x - y) @ (gen.grad(z) - gen.grad(y)))
    return abs(lhs - rhs)
