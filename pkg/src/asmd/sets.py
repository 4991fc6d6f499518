"""Closed convex constraint sets with exact Euclidean projections."""

import numpy as np


class FullSpace:
    """The whole space; projection is the identity."""

    kind = "full"

    def contains(self, x, tol=0.0):
        return bool(np.all(np.isfinite(x)))

    def project(self, x):
        return np.array(x, dtype=float)

    def __repr__(self):
        return "FullSpace()"

    def __eq__(self, other):
        return isinstance(other, FullSpace)

    def __hash__(self):
        return hash("full")


class Box:
    """Axis-aligned box ``lower <= x <= upper``.

    Bounds are broadcast against the iterate, so scalars are allowed.
    """

    kind = "box"

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("empty box: some lower bound exceeds its upper bound")

    def contains(self, x, tol=0.0):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


class Simplex:
    """Scaled probability simplex ``{x >= 0, sum(x) = radius}``."""

    kind = "simplex"

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("simplex radius must be positive")
        self.radius = float(radius)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x)
        return bool(np.all(x >= -tol) and abs(x.sum() - self.radius) <= tol * max(1, x.size))

    def project(self, x):
        # sort-based projection (Held, Wolfe, Crowder)
        x = np.asarray(x, dtype=float)
        u = np.sort(x)[::-1]
        css = np.cumsum(u) - self.radius
        ks = np.arange(1, x.size + 1)
        rho = np.nonzero(u - css / ks > 0)[0][-1]
        tau = css[rho] / (rho + 1)
        return np.maximum(x - tau, 0.0)

    def __repr__(self):
        return f"Simplex({self.radius})"
