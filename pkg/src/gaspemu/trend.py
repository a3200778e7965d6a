"""Mean-function basis evaluation.

Supported trends: zero mean (no basis), constant, linear in the inputs,
or an explicit user-supplied basis matrix.  With an explicit matrix the
fit-time matrix is stored on the trend; predictions then require a
matching testing trend matrix from the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegreesOfFreedomError, InvalidArgumentError, MissingTrendError
from .kernels import as_design

ZERO = "zero"
CONSTANT = "constant"
LINEAR = "linear"
MATRIX = "matrix"
KINDS = (ZERO, CONSTANT, LINEAR, MATRIX)


@dataclass(frozen=True)
class TrendBasis:
    kind: str = CONSTANT
    matrix: np.ndarray | None = None  # fit-time basis values when kind == MATRIX

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown trend kind {self.kind!r}")
        if self.kind == MATRIX:
            if self.matrix is None:
                raise InvalidArgumentError("matrix trend requires a basis matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim == 1:
                m = m[:, None]
            if m.ndim != 2 or m.shape[1] < 1:
                raise InvalidArgumentError("trend matrix must be 2-D with q >= 1")
            if not np.all(np.isfinite(m)):
                raise InvalidArgumentError("trend matrix contains non-finite entries")
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise InvalidArgumentError(f"trend kind {self.kind!r} takes no matrix")

    def q(self, p):
        """Number of basis functions for input dimension ``p``."""
        if self.kind == ZERO:
            return 0
        if self.kind == CONSTANT:
            return 1
        if self.kind == LINEAR:
            return p + 1
        return self.matrix.shape[1]


def eval_basis(trend, points, testing_trend=None):
    """Basis matrix H for the given points (rows = points, cols = q).

    For a matrix trend the fit-time call returns the stored matrix
    (row count must match); any other point set requires an explicit
    ``testing_trend``.  A zero-mean trend yields a (n, 0) matrix and all
    trend terms downstream vanish.
    """
    x = as_design(points)
    n, p = x.shape
    if testing_trend is not None:
        h = np.asarray(testing_trend, dtype=float)
        if h.ndim == 1:
            h = h[:, None]
        if h.shape != (n, trend.q(p)):
            raise InvalidArgumentError(
                f"testing trend has shape {h.shape}, expected ({n}, {trend.q(p)})"
            )
        if not np.all(np.isfinite(h)):
            raise InvalidArgumentError("testing trend contains non-finite entries")
        return h
    if trend.kind == ZERO:
        return np.zeros((n, 0))
    if trend.kind == CONSTANT:
        return np.ones((n, 1))
    if trend.kind == LINEAR:
        return np.hstack([np.ones((n, 1)), x])
    if trend.matrix.shape[0] == n:
        return trend.matrix
    raise MissingTrendError(
        "matrix trend: supply a testing trend matrix for point sets other "
        "than the fit design"
    )


def check_dof(n, q):
    """Require positive residual degrees of freedom n - q."""
    if q >= n:
        raise DegreesOfFreedomError(
            f"trend has q={q} basis functions but only n={n} observations; "
            "need q < n"
        )
