"""Synthetic Lasso data, libsvm text I/O and problem builders."""

import math
import os
from dataclasses import dataclass

import numpy as np

from .problem import FiniteSumProblem, L1Norm, LeastSquares, OverlapGroupNorm
from .prox import OverlapGroups


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    scaled: bool = False

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2 or min(self.features.shape) < 1:
            raise ValueError("features must be a non-empty N x D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("need one label per row")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.labels))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def shape(self):
        return self.features.shape


def generate_synthetic_lasso(N, D, seed):
    """Rows uniform on ``[0, 10]^D``, a 0/1 target with ``ceil(D/2)`` ones and
    labels ``<a_i, x*> + N(0, 0.01^2)`` noise.

    Returns ``(dataset, x_true)``.
    """
    if N < 1 or D < 1:
        raise ValueError("N and D must be positive")
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 10.0, size=(N, D))
    x_true = np.zeros(D)
    x_true[rng.choice(D, size=math.ceil(D / 2), replace=False)] = 1.0
    b = A @ x_true + rng.normal(0.0, 0.01, size=N)
    return Dataset(A, b, name=f"synthetic-N{N}-D{D}-seed{seed}"), x_true


class LibsvmFormatError(ValueError):
    pass


def load_libsvm(path, dim=None):
    """Parse ``<label> <index>:<value> ...`` lines into a dense dataset.

    Indices are 1-based and must increase within a line; missing entries are
    zero. ``dim`` forces the width, otherwise it is the largest index seen.
    """
    labels, rows = [], []
    max_index = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise LibsvmFormatError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            entries = []
            prev = 0
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    j, x = int(idx), float(val)
                except ValueError:
                    raise LibsvmFormatError(f"{path}:{lineno}: malformed entry {tok!r}") from None
                if j <= prev:
                    raise LibsvmFormatError(f"{path}:{lineno}: indices must be 1-based and ascending")
                if not math.isfinite(x):
                    raise LibsvmFormatError(f"{path}:{lineno}: non-finite value {val!r}")
                prev = j
                entries.append((j, x))
            max_index = max(max_index, prev)
            labels.append(label)
            rows.append(entries)
    if not rows:
        raise LibsvmFormatError(f"{path}: no data")
    D = max_index if dim is None else int(dim)
    if D < max_index:
        raise LibsvmFormatError(f"{path}: index {max_index} exceeds requested dimension {D}")
    X = np.zeros((len(rows), max(D, 1)))
    for r, entries in enumerate(rows):
        for j, x in entries:
            X[r, j - 1] = x
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(X, np.array(labels), name=name, scaled="scale" in name)


def save_libsvm(dataset, path):
    """Write a dataset in libsvm format with 17 significant digits, zeros omitted."""
    with open(path, "w", newline="\n") as fh:
        for label, row in zip(dataset.labels, dataset.features):
            items = [f"{j + 1}:{x:.17g}" for j, x in enumerate(row) if x != 0]
            fh.write(" ".join([f"{label:.17g}", *items]) + "\n")


def chain_groups(D):
    """Groups ``{1,2,3}, {3,4,5}, {5,6,7}, ...`` (0-based internally) covering ``1..D``.

    The last group is truncated at ``D``.
    """
    if D < 1:
        raise ValueError("D must be positive")
    groups = [list(range(s, min(s + 3, D))) for s in range(0, max(D - 1, 1), 2)]
    return OverlapGroups(groups, D)


def build_lasso_problem(data, lam):
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return FiniteSumProblem(LeastSquares(data.features, data.labels), L1Norm(lam))


def build_group_lasso_problem(data, lam, groups=None, value_tol=1e-10):
    groups = chain_groups(data.shape[1]) if groups is None else groups
    reg = OverlapGroupNorm(lam, groups, dim=data.shape[1], value_tol=value_tol)
    return FiniteSumProblem(LeastSquares(data.features, data.labels), reg)
