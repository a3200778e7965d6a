"""Priors on the correlation parameters.

Two families are provided, both defined on robust parameterizations of
the per-dimension ranges:

* the jointly robust (JR) prior on inverse ranges ``beta``, with density
  proportional to ``t^a * exp(-b * (t + eta))`` where ``t = sum(C_l * beta_l)``
  and ``C_l`` is the mean absolute pairwise coordinate distance in
  dimension ``l``; it has closed-form gradients and is the default, and
* the reference prior, proportional to the square-root determinant of
  the expected Fisher information after the trend coefficients and the
  variance are integrated out, expressed in either the range ('gamma')
  or log-inverse-range ('xi') parameterization; its gradients are
  numerical.

A flat choice (log-prior identically zero) exists to reproduce plain
maximum-marginal-likelihood behavior for comparison experiments.

Log-densities are unnormalized; only posterior modes matter here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .exceptions import InvalidArgumentError, NumericalError, ZeroScaleError
from .kernels import as_design, corr_matrix, corr_matrix_deriv
from .marginal import build_state

JR = "jr"
REF_GAMMA = "ref_gamma"
REF_XI = "ref_xi"
FLAT = "flat"
PRIOR_CHOICES = (JR, REF_GAMMA, REF_XI, FLAT)


@dataclass(frozen=True)
class JRPriorParams:
    """Hyperparameters (a, b, C) of the jointly robust prior."""

    a: float
    b: float
    C: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.C, dtype=float).ravel()
        if self.b <= 0:
            raise InvalidArgumentError(f"rate b must be positive, got {self.b}")
        if self.a <= -(len(c) + 1):
            raise InvalidArgumentError(
                f"exponent a must exceed -(p+1) = {-(len(c) + 1)}, got {self.a}"
            )
        if np.any(c <= 0):
            raise InvalidArgumentError("scale constants C must be positive")
        object.__setattr__(self, "C", c)


def mean_pairwise_distance(design):
    """Per-dimension mean of |x_il - x_jl| over all pairs i != j."""
    x = as_design(design)
    n, p = x.shape
    if n < 2:
        raise InvalidArgumentError(f"need at least two design points, got {n}")
    out = np.empty(p)
    for l in range(p):
        d = np.abs(x[:, l][:, None] - x[:, l][None, :])
        out[l] = d.sum() / (n * (n - 1))
    return out


def default_jr_params(design, estimate_nugget=False):
    """Default (a, b, C) computed from the design.

    a = 0.2, b = n^(-1/p) * (a + p), C_l the mean absolute pairwise
    coordinate distance.  The same formula applies with or without an
    estimated nugget.  A dimension whose coordinates are all equal has
    C_l = 0 and is rejected.
    """
    x = as_design(design)
    n, p = x.shape
    c = mean_pairwise_distance(x)
    zero = np.nonzero(c <= 0)[0]
    if zero.size:
        raise ZeroScaleError(
            f"dimension {zero[0] + 1} has no spread: all coordinates equal"
        )
    a = 0.2
    b = n ** (-1.0 / p) * (a + p)
    return JRPriorParams(a=a, b=b, C=c)


def log_jr_prior(beta, eta, params):
    """Unnormalized JR log-density at (beta, eta).

    Pass ``eta = 0`` for the noise-free form.  Returns -inf in the
    limiting case t = 0.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    if np.any(beta < 0):
        raise InvalidArgumentError("inverse ranges must be non-negative")
    if eta < 0:
        raise InvalidArgumentError(f"nugget-variance ratio must be >= 0, got {eta}")
    t = float(params.C @ beta)
    if t == 0.0:
        return -np.inf
    return params.a * np.log(t) - params.b * (t + eta)


def log_jr_prior_grad(beta, eta, params, include_eta=False):
    """Gradient of the JR log-density in (log beta, [log eta])."""
    beta = np.asarray(beta, dtype=float).ravel()
    t = float(params.C @ beta)
    grad_beta = beta * params.C * (params.a / t - params.b)
    if not include_eta:
        return grad_beta
    return np.append(grad_beta, -params.b * eta)


def _fisher_blocks(design, trend, spec, beta, eta, include_eta):
    """W_l = dR/dbeta_l * Q for each dimension (plus Q itself for eta).

    Q = Rt^-1 (I - H (H' Rt^-1 H)^-1 H' Rt^-1) is formed densely here;
    the reference prior is the one place that cost is accepted.
    """
    x = as_design(design)
    n, p = x.shape
    state = build_state(design, np.zeros(n), trend, spec, beta, eta)
    rt_inv = cho_solve(state.chol, np.eye(n))
    if state.q > 0:
        q_mat = rt_inv - state.RinvH @ cho_solve(state.G_chol, state.RinvH.T)
    else:
        q_mat = rt_inv
    r = corr_matrix(x, x, spec, beta)
    blocks = [
        corr_matrix_deriv(x, spec, beta, l, corr=r) @ q_mat for l in range(p)
    ]
    if include_eta:
        blocks.append(q_mat)
    return blocks, state


def log_ref_prior(design, trend, spec, beta, eta=0.0, parameterization="gamma",
                  include_eta=False):
    """Reference log-prior: half the log-determinant of the Fisher matrix.

    The matrix has leading entry n - q, first row and column tr(W_l), and
    (l, m) entries tr(W_l W_m), with W_l the correlation derivative in the
    requested parameterization times Q.  The nugget, when present, enters
    in its own (untransformed) coordinate.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    if parameterization not in ("gamma", "xi"):
        raise InvalidArgumentError(
            f"parameterization must be 'gamma' or 'xi', got {parameterization!r}"
        )
    blocks, state = _fisher_blocks(design, trend, spec, beta, eta, include_eta)
    # chain-rule scale from d beta / d parameterization, per dimension
    if parameterization == "gamma":
        scale = -(beta**2)
    else:
        scale = beta
    if include_eta:
        scale = np.append(scale, 1.0)
    m = len(blocks)
    info = np.empty((m + 1, m + 1))
    info[0, 0] = state.n - state.q
    for i, w in enumerate(blocks):
        info[0, i + 1] = info[i + 1, 0] = scale[i] * np.trace(w)
        for j in range(i, m):
            val = scale[i] * scale[j] * float(np.sum(w * blocks[j].T))
            info[i + 1, j + 1] = info[j + 1, i + 1] = val
    if not np.all(np.isfinite(info)):
        raise NumericalError("expected Fisher information has non-finite entries")
    sign, logdet = np.linalg.slogdet(info)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError(
            "expected Fisher information is not positive definite"
        )
    return 0.5 * float(logdet)


def log_ref_prior_num_grad(design, trend, spec, beta, eta=0.0,
                           parameterization="gamma", include_eta=False):
    """Central-difference gradient of the reference log-prior.

    Taken in (log beta, [log eta]) with step 1e-4 * max(1, |omega|)
    per coordinate.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    omega = np.log(beta)
    if include_eta:
        omega = np.append(omega, np.log(eta))

    def value(w):
        b = np.exp(w[: beta.size])
        e = float(np.exp(w[beta.size])) if include_eta else eta
        return log_ref_prior(design, trend, spec, b, e, parameterization,
                             include_eta)

    grad = np.empty(omega.size)
    for i in range(omega.size):
        h = 1e-4 * max(1.0, abs(omega[i]))
        up = omega.copy()
        dn = omega.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (value(up) - value(dn)) / (2.0 * h)
    return grad
