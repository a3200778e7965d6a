"""Predictive distribution, joint simulation, and cross-validation.

Predictions at new inputs follow a Student-t law with n - q degrees of
freedom.  The reported "sd" is by default the t standard deviation,
scale * sqrt(df / (df - 2)) for df > 2 (falling back to the raw scale,
flagged via ``sd_kind``, otherwise); credible intervals always come from
t quantiles times the scale, so they do not depend on the convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.stats import t as student_t

from .exceptions import (
    DegreesOfFreedomError,
    InvalidArgumentError,
    MissingTrendError,
    NumericalError,
)
from .kernels import as_design, corr_matrix
from .trend import MATRIX, eval_basis

SD_T = "t_sd"
SD_SCALE = "scale"


@dataclass
class PredictiveSummary:
    """Pointwise predictive mean, sd and central 95% interval.

    Arrays are 1-D for scalar-output models and (n_test, k) for
    multi-output models.  ``df`` is the t degrees of freedom and
    ``sd_kind`` records which convention the ``sd`` field uses.
    """

    mean: np.ndarray
    sd: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    df: int
    sd_kind: str = SD_T


def _sd_from_scale(scale, df, sd_kind):
    if sd_kind == SD_SCALE or df <= 2:
        return scale, SD_SCALE
    return scale * np.sqrt(df / (df - 2.0)), SD_T


def _cross_terms(model, testing_input, testing_trend):
    """Shared pieces of every prediction: r, Rt^-1 r, h*, trend residue u."""
    xt = as_design(testing_input)
    if xt.shape[1] != model.p:
        raise InvalidArgumentError(
            f"testing input has p={xt.shape[1]}, model expects p={model.p}"
        )
    if model.trend.kind == MATRIX and testing_trend is None:
        raise MissingTrendError(
            "model was fitted with an explicit trend matrix; pass "
            "testing_trend with one row per testing point"
        )
    h_star = eval_basis(model.trend, xt, testing_trend)
    r = corr_matrix(model.design, xt, model.kernel, model.beta_hat)
    rinv_r = cho_solve(model.state.chol, r)
    if model.state.q > 0:
        u = h_star.T - model.state.H.T @ rinv_r  # (q, n_test)
    else:
        u = np.zeros((0, xt.shape[0]))
    return xt, h_star, r, rinv_r, u


def _cstar_diag(model, r, rinv_r, u):
    """Predictive correlation c** at each testing point (clamped at 0)."""
    c = (1.0 + model.eta_hat) - np.einsum("ij,ij->j", r, rinv_r)
    if model.state.q > 0:
        c = c + np.einsum("ij,ij->j", u, cho_solve(model.state.G_chol, u))
    return np.maximum(c, 0.0)


def predict(model, testing_input, testing_trend=None, sd_kind=SD_T):
    """Student-t predictive summary at the testing inputs.

    Works for scalar-output and multi-output models alike; with k output
    columns every summary field is an (n_test, k) matrix.
    """
    _, h_star, r, rinv_r, u = _cross_terms(model, testing_input, testing_trend)
    state = model.state
    df = state.n - state.q
    if df <= 0:
        raise DegreesOfFreedomError(f"predictive degrees of freedom {df} <= 0")
    mean = h_star @ state.theta + r.T @ state.Qy  # (n_test, k)
    cstar = _cstar_diag(model, r, rinv_r, u)
    sigma2 = np.atleast_1d(model.sigma2_hat)
    scale = np.sqrt(cstar[:, None] * sigma2[None, :])
    tq = student_t.ppf(0.975, df)
    lower = mean - tq * scale
    upper = mean + tq * scale
    sd, kind = _sd_from_scale(scale, df, sd_kind)
    if state.k == 1:
        mean, sd, lower, upper = (a[:, 0] for a in (mean, sd, lower, upper))
    return PredictiveSummary(mean=mean, sd=sd, lower95=lower, upper95=upper,
                             df=df, sd_kind=kind)


def _scale_matrix_factor(cov):
    """Factor F with F F' = cov, accepting positive semidefinite inputs.

    Exactly zero predictive variance (testing at a noise-free design
    point) is legitimate; genuinely indefinite matrices are an error.
    """
    try:
        return cholesky(cov, lower=True)
    except LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    floor = -1e-8 * max(1.0, float(vals[-1]))
    if vals[0] < floor:
        raise NumericalError(
            "joint predictive scale matrix is not positive semidefinite; "
            "separate near-duplicate testing points or estimate a nugget"
        )
    return vecs * np.sqrt(np.maximum(vals, 0.0))


def simulate(model, testing_input, num_sample, seed, testing_trend=None):
    """Draws from the joint multivariate-t predictive distribution.

    Returns an (n_test, num_sample) matrix; scalar-output models only.
    Bit-identical across runs for a fixed seed.
    """
    if model.state.k != 1:
        raise InvalidArgumentError("simulate supports scalar-output models")
    if num_sample < 1:
        raise InvalidArgumentError("num_sample must be >= 1")
    xt, h_star, r, rinv_r, u = _cross_terms(model, testing_input, testing_trend)
    state = model.state
    df = state.n - state.q
    mean = (h_star @ state.theta + r.T @ state.Qy)[:, 0]
    cov = corr_matrix(xt, xt, model.kernel, model.beta_hat)
    if model.eta_hat > 0:
        cov = cov + model.eta_hat * np.eye(xt.shape[0])
    cov = cov - r.T @ rinv_r
    if state.q > 0:
        cov = cov + u.T @ cho_solve(state.G_chol, u)
    factor = _scale_matrix_factor(model.sigma2_hat * cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((xt.shape[0], num_sample))
    w = rng.chisquare(df, size=num_sample)
    return mean[:, None] + (factor @ z) * np.sqrt(df / w)[None, :]


def leave_one_out(model):
    """Leave-one-out predictive mean and sd at every design point.

    Kernel parameters stay fixed at the full-fit estimates; the trend
    coefficients and the variance are re-estimated per fold through a
    closed-form downdate of the cached factorization.  Returns
    ``(loo_mean, loo_sd)``; the sd follows the model's convention with
    per-fold degrees of freedom n - 1 - q.
    """
    state = model.state
    if state.k != 1:
        raise InvalidArgumentError("leave_one_out supports scalar-output models")
    n, q = state.n, state.q
    if n < 3:
        raise InvalidArgumentError(f"leave-one-out needs n >= 3, got n={n}")
    if n - 1 <= q:
        raise DegreesOfFreedomError(
            f"leave-one-out folds have n-1={n - 1} points but q={q} trend "
            "columns"
        )
    from scipy.linalg import solve_triangular

    l_inv = solve_triangular(state.chol[0], np.eye(n), lower=True)
    diag_rinv = np.einsum("ki,ki->i", l_inv, l_inv)
    if q > 0:
        a = cho_solve(state.G_chol, state.RinvH.T)  # (q, n)
        diag_q = diag_rinv - np.einsum("iq,qi->i", state.RinvH, a)
    else:
        diag_q = diag_rinv
    qy = state.Qy_vec
    y = model.response
    loo_mean = y - qy / diag_q
    df = n - 1 - q
    s2_fold = state.S2_scalar - qy**2 / diag_q
    # tiny negatives from cancellation when the model is exact
    s2_fold = np.maximum(s2_fold, 0.0)
    scale = np.sqrt(s2_fold / df / diag_q)
    sd, _ = _sd_from_scale(scale, df, SD_T)
    return loo_mean, sd


def metrics(predictions, truth):
    """(rmse, p_ci95, l_ci95) of a predictive summary against held-out truth.

    Multi-output summaries are averaged over outputs and testing points.
    """
    truth = np.asarray(truth, dtype=float)
    mean = np.asarray(predictions.mean)
    if mean.shape != truth.shape:
        raise InvalidArgumentError(
            f"truth has shape {truth.shape}, predictions have {mean.shape}"
        )
    if truth.size == 0:
        raise InvalidArgumentError("empty inputs")
    rmse = float(np.sqrt(np.mean((mean - truth) ** 2)))
    covered = (predictions.lower95 <= truth) & (truth <= predictions.upper95)
    p_ci = float(np.mean(covered))
    l_ci = float(np.mean(predictions.upper95 - predictions.lower95))
    return rmse, p_ci, l_ci
