"""Profile log-likelihood of the correlation parameters.

The trend coefficients and the process variance are integrated out under
the objective prior 1/sigma^2, leaving a function of the inverse ranges
``beta`` and the nugget-variance ratio ``eta`` alone:

    log L = -1/2 log|Rt| - 1/2 log|H' Rt^-1 H| - (n-q)/2 log S^2,

with Rt = R + eta*I, S^2 the generalized-least-squares residual quadratic
form, up to an additive constant that does not depend on the parameters.
All determinants and quadratic forms come from one Cholesky factorization
of Rt per parameter point; the inverse is never formed explicitly.

The same state supports a matrix of response columns sharing one
correlation matrix: S^2, the trend coefficients and the residual solves
are then per column, which is what the multi-output emulator pools.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .exceptions import (
    DataError,
    DegenerateResponseError,
    InvalidArgumentError,
    NearSingularCorrelationError,
)
from .kernels import as_design, corr_matrix, corr_matrix_deriv
from .trend import check_dof, eval_basis


@dataclass
class MarginalState:
    """Shared matrix state at one (beta, eta) point.

    Response data is held as an (n, k) matrix; the scalar-output model is
    the k = 1 case.  ``Qy`` is Rt^-1 (y - H theta) per column and ``S2``
    the per-column residual quadratic form.
    """

    beta: np.ndarray
    eta: float
    n: int
    q: int
    k: int
    chol: tuple = field(repr=False)  # cho_factor of Rt
    H: np.ndarray = field(repr=False)
    RinvH: np.ndarray = field(repr=False)
    G_chol: tuple | None = field(repr=False)
    logdet_R: float = 0.0
    logdet_G: float = 0.0
    theta: np.ndarray = field(default=None, repr=False)  # (q, k)
    resid: np.ndarray = field(default=None, repr=False)  # (n, k)
    Qy: np.ndarray = field(default=None, repr=False)  # (n, k)
    S2: np.ndarray = field(default=None)  # (k,)

    @property
    def theta_hat(self):
        """Trend coefficients as a vector (requires k = 1)."""
        return self.theta[:, 0]

    @property
    def S2_scalar(self):
        return float(self.S2[0])

    @property
    def Qy_vec(self):
        return self.Qy[:, 0]


def _as_response_matrix(response):
    y = np.asarray(response, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise InvalidArgumentError(f"response must be 1-D or 2-D, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("response contains non-finite entries")
    return y


def build_state(design, response, trend, spec, beta, eta):
    """Factorize Rt = R + eta*I and assemble every derived quantity.

    Raises :class:`NearSingularCorrelationError` when the factorization
    fails (no silent jitter) and a rank-deficiency error when the trend
    matrix has linearly dependent columns.
    """
    x = as_design(design)
    y = _as_response_matrix(response)
    n, p = x.shape
    if y.shape[0] != n:
        raise InvalidArgumentError(
            f"response has {y.shape[0]} rows, design has {n}"
        )
    beta = np.asarray(beta, dtype=float).ravel()
    eta = float(eta)
    if eta < 0 or not np.isfinite(eta):
        raise InvalidArgumentError(f"nugget-variance ratio must be >= 0, got {eta}")

    h = eval_basis(trend, x)
    q = h.shape[1]
    check_dof(n, q)

    r = corr_matrix(x, x, spec, beta)
    if eta > 0:
        r = r + eta * np.eye(n)
    try:
        chol = cho_factor(r, lower=True)
    except LinAlgError as exc:
        raise NearSingularCorrelationError(
            "correlation matrix factorization failed at "
            f"beta={np.array2string(beta, precision=4)}, eta={eta:g}; "
            "the fit is too close to a singular correlation -- consider "
            "estimating a nugget",
            beta=beta,
            eta=eta,
        ) from exc
    logdet_r = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))

    rinv_y = cho_solve(chol, y)
    if q > 0:
        rinv_h = cho_solve(chol, h)
        g = h.T @ rinv_h
        try:
            g_chol = cho_factor(g, lower=True)
        except LinAlgError as exc:
            raise DataError(
                "trend matrix is rank deficient: H' Rt^-1 H could not be "
                "factorized"
            ) from exc
        logdet_g = 2.0 * float(np.sum(np.log(np.diag(g_chol[0]))))
        theta = cho_solve(g_chol, h.T @ rinv_y)
        resid = y - h @ theta
        qy = rinv_y - rinv_h @ theta
    else:
        rinv_h = np.zeros((n, 0))
        g_chol = None
        logdet_g = 0.0
        theta = np.zeros((0, y.shape[1]))
        resid = y
        qy = rinv_y
    s2 = np.einsum("ij,ij->j", resid, qy)

    return MarginalState(
        beta=beta,
        eta=eta,
        n=n,
        q=q,
        k=y.shape[1],
        chol=chol,
        H=h,
        RinvH=rinv_h,
        G_chol=g_chol,
        logdet_R=logdet_r,
        logdet_G=logdet_g,
        theta=theta,
        resid=resid,
        Qy=qy,
        S2=s2,
    )


def pooled_log_marginal_lik(state):
    """Sum of the per-column profile log-likelihoods under the shared Rt."""
    if np.any(state.S2 <= 0):
        bad = int(np.argmax(state.S2 <= 0))
        raise DegenerateResponseError(
            f"residual quadratic form S^2 is not positive (column {bad}); "
            "the response is in the trend's column space"
        )
    half_df = 0.5 * (state.n - state.q)
    return float(
        -0.5 * state.k * (state.logdet_R + state.logdet_G)
        - half_df * np.sum(np.log(state.S2))
    )


def log_marginal_lik(state):
    """Profile log-likelihood for a scalar response (k = 1 state)."""
    if state.k != 1:
        raise InvalidArgumentError(
            f"state holds {state.k} response columns; use the pooled form"
        )
    return pooled_log_marginal_lik(state)


def _trace_rinv(state):
    """tr(Rt^-1) via the Frobenius norm of the inverse Cholesky factor."""
    l_inv = solve_triangular(state.chol[0], np.eye(state.n), lower=True)
    return float(np.sum(l_inv * l_inv)), l_inv


def _grad_component(state, rdot):
    """Directional derivative of the pooled log-likelihood along dRt = rdot."""
    t1 = -0.5 * float(np.trace(cho_solve(state.chol, rdot)))
    if state.q > 0:
        m = state.RinvH.T @ rdot @ state.RinvH
        t2 = 0.5 * float(np.trace(cho_solve(state.G_chol, m)))
    else:
        t2 = 0.0
    quad = np.einsum("ij,ij->j", state.Qy, rdot @ state.Qy)
    t3 = 0.5 * (state.n - state.q) * float(np.sum(quad / state.S2))
    return state.k * (t1 + t2) + t3


def _eta_grad_component(state):
    """Same as :func:`_grad_component` for rdot = I, without forming it."""
    tr_rinv, _ = _trace_rinv(state)
    t1 = -0.5 * tr_rinv
    if state.q > 0:
        m = state.RinvH.T @ state.RinvH
        t2 = 0.5 * float(np.trace(cho_solve(state.G_chol, m)))
    else:
        t2 = 0.0
    quad = np.einsum("ij,ij->j", state.Qy, state.Qy)
    t3 = 0.5 * (state.n - state.q) * float(np.sum(quad / state.S2))
    return state.k * (t1 + t2) + t3


def pooled_log_marginal_lik_grad(state, design, spec, include_eta=False):
    """Gradient in (log beta, [log eta]) of the pooled log-likelihood."""
    x = as_design(design)
    p = x.shape[1]
    # derivative matrices are taken of R without the nugget on the diagonal
    r = corr_matrix(x, x, spec, state.beta)
    grad = np.empty(p + (1 if include_eta else 0))
    for l in range(p):
        rdot = corr_matrix_deriv(x, spec, state.beta, l, corr=r)
        grad[l] = state.beta[l] * _grad_component(state, rdot)
    if include_eta:
        grad[p] = state.eta * _eta_grad_component(state)
    return grad


def log_marginal_lik_grad(state, design, spec, include_eta=False):
    """Gradient for a scalar response (k = 1 state)."""
    if state.k != 1:
        raise InvalidArgumentError(
            f"state holds {state.k} response columns; use the pooled form"
        )
    return pooled_log_marginal_lik_grad(state, design, spec, include_eta)
