"""One-dimensional correlation families and their product composition.

Each input dimension gets its own correlation function; the correlation
between two points is the product of the per-dimension factors.  Range
parameters enter as inverse ranges ``beta = 1/gamma``, the parameterization
used everywhere in fitting.  Products over many dimensions are accumulated
as sums of logarithms and exponentiated once, so large ``p`` cannot
underflow the product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError

MATERN_5_2 = "matern_5_2"
MATERN_3_2 = "matern_3_2"
POW_EXP = "pow_exp"
FAMILIES = (MATERN_5_2, MATERN_3_2, POW_EXP)

_SQRT5 = np.sqrt(5.0)
_SQRT3 = np.sqrt(3.0)
# beyond this scaled distance the correlation has underflown to 0 anyway
_U_BIG = 1e8


@dataclass(frozen=True)
class KernelSpec:
    """Per-dimension correlation family and roughness.

    Parameters
    ----------
    families : tuple of str
        One family name per input dimension, each in ``FAMILIES``.
    alpha : tuple of float
        Roughness exponents, used only by the power-exponential family
        (``0 < alpha <= 2``).  Ignored entries still need valid values.
    """

    families: tuple
    alpha: tuple

    def __post_init__(self):
        families = tuple(self.families)
        alpha = tuple(float(a) for a in self.alpha)
        if len(families) < 1:
            raise InvalidArgumentError("kernel spec needs at least one dimension")
        if len(alpha) != len(families):
            raise InvalidArgumentError(
                f"alpha has length {len(alpha)}, expected {len(families)}"
            )
        for fam in families:
            if fam not in FAMILIES:
                raise InvalidArgumentError(f"unknown correlation family {fam!r}")
        for fam, a in zip(families, alpha):
            if fam == POW_EXP and not (0.0 < a <= 2.0):
                raise InvalidArgumentError(
                    f"power-exponential roughness must be in (0, 2], got {a}"
                )
        object.__setattr__(self, "families", families)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def default(cls, p, family=MATERN_5_2, alpha=1.9):
        """Same family in every one of ``p`` dimensions."""
        return cls(families=(family,) * p, alpha=(float(alpha),) * p)

    @property
    def p(self):
        return len(self.families)


def _log_corr(family, alpha, u):
    """log c(u) for scaled distance u = d * beta >= 0."""
    u = np.asarray(u, dtype=float)
    if family == MATERN_5_2:
        s = _SQRT5 * u
        small = np.minimum(s, _U_BIG)
        poly = np.log1p(small + small * small / 3.0)
        big = s > _U_BIG
        if np.any(big):
            poly = np.where(big, 2.0 * np.log(np.maximum(s, 1.0)) - np.log(3.0), poly)
        return poly - s
    if family == MATERN_3_2:
        s = _SQRT3 * u
        return np.log1p(np.minimum(s, 1e300)) - s
    if family == POW_EXP:
        with np.errstate(over="ignore"):
            t = u**alpha
        return -t
    raise InvalidArgumentError(f"unknown correlation family {family!r}")


def _dlog_corr_dbeta(family, alpha, d, beta):
    """d log c / d beta, elementwise over distances d.

    Only ever multiplied by the correlation itself, so the value at
    scaled distances where the correlation has underflown is irrelevant;
    those entries are computed from the asymptotic form to stay finite.
    """
    d = np.asarray(d, dtype=float)
    if family == MATERN_5_2:
        u = np.minimum(_SQRT5 * d * beta, _U_BIG)
        ratio = -(5.0 / 3.0) * d * d * beta * (1.0 + u) / (1.0 + u + u * u / 3.0)
        return np.where(_SQRT5 * d * beta > _U_BIG, -_SQRT5 * d, ratio)
    if family == MATERN_3_2:
        u = np.minimum(_SQRT3 * d * beta, _U_BIG)
        ratio = -3.0 * d * d * beta / (1.0 + u)
        return np.where(_SQRT3 * d * beta > _U_BIG, -_SQRT3 * d, ratio)
    if family == POW_EXP:
        with np.errstate(over="ignore"):
            t = np.minimum((d * beta) ** alpha, 1e300)
        return -alpha * t / beta
    raise InvalidArgumentError(f"unknown correlation family {family!r}")


def corr_1d(family, d, gamma, alpha=1.9):
    """One-dimensional correlation at distance ``d`` with range ``gamma``.

    Returns a value in (0, 1]; exactly 1 at ``d = 0``.  ``alpha`` is the
    roughness exponent of the power-exponential family and is ignored by
    the Matern families.
    """
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InvalidArgumentError("distances must be finite and non-negative")
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidArgumentError(f"range parameter must be positive, got {gamma}")
    if family == POW_EXP and not (0.0 < alpha <= 2.0):
        raise InvalidArgumentError(
            f"power-exponential roughness must be in (0, 2], got {alpha}"
        )
    out = np.exp(_log_corr(family, alpha, d / gamma))
    return out if out.ndim else float(out)


def as_design(x):
    """Coerce to a finite 2-D float array (one row per point)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"design must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("design contains non-finite entries")
    return arr


def dist_tensor(xa, xb):
    """Per-dimension absolute coordinate differences, shape (p, n, m)."""
    xa = as_design(xa)
    xb = as_design(xb)
    if xa.shape[1] != xb.shape[1]:
        raise InvalidArgumentError(
            f"point sets have dimensions {xa.shape[1]} and {xb.shape[1]}"
        )
    return np.abs(xa.T[:, :, None] - xb.T[:, None, :])


def corr_matrix(xa, xb, spec, beta):
    """Product-correlation matrix between two point sets.

    Entry (i, j) is the product over dimensions of the one-dimensional
    correlations at ``|xa[i, l] - xb[j, l]|`` with inverse range
    ``beta[l]``.  The square self-correlation case is exactly symmetric
    with unit diagonal.
    """
    dists = dist_tensor(xa, xb)
    beta = np.asarray(beta, dtype=float).ravel()
    p = dists.shape[0]
    if spec.p != p:
        raise InvalidArgumentError(f"kernel spec has p={spec.p}, design has p={p}")
    if beta.shape != (p,):
        raise InvalidArgumentError(f"beta has shape {beta.shape}, expected ({p},)")
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        raise InvalidArgumentError("inverse range parameters must be positive")
    log_r = np.zeros(dists.shape[1:])
    for l in range(p):
        log_r += _log_corr(spec.families[l], spec.alpha[l], dists[l] * beta[l])
    return np.exp(log_r)


def corr_matrix_deriv(x, spec, beta, l, corr=None):
    """Entrywise derivative of the self-correlation matrix w.r.t. ``beta[l]``.

    ``l`` is a 0-based dimension index.  Pass ``corr`` to reuse an already
    computed ``corr_matrix(x, x, spec, beta)``.  The result is symmetric
    with an exactly zero diagonal (the diagonal of the correlation matrix
    is constant 1).
    """
    x = as_design(x)
    beta = np.asarray(beta, dtype=float).ravel()
    if not 0 <= l < spec.p:
        raise InvalidArgumentError(f"dimension index {l} out of range for p={spec.p}")
    if corr is None:
        corr = corr_matrix(x, x, spec, beta)
    d = np.abs(x[:, l][:, None] - x[:, l][None, :])
    g = _dlog_corr_dbeta(spec.families[l], spec.alpha[l], d, beta[l])
    out = corr * g
    np.fill_diagonal(out, 0.0)
    return out
