"""Kalman filter, forward-filtering backward-sampling and the integrated likelihood.

Generic linear-Gaussian system with time-varying offsets::

    x_0 ~ N(init_mean, init_cov)
    x_t = trans x_{t-1} + trans_offset_t + w_t,   w_t ~ N(0, trans_noise)
    o_t = obs_loading x_t + obs_offset_t + v_t,   v_t ~ N(0, obs_noise)

``obs_noise`` is either a full SPD matrix or a vector of diagonal variances
in which zeros mark rows observed without error.  Exact rows are absorbed
first by a Joseph-form conditioning step; the noisy rows then use a
factored update (``P = L L'``, ``P+ = L (I + L'Z'V^-1 Z L)^-1 L'``) that keeps
the covariance PSD by construction and stays accurate when the noise is
many orders of magnitude below the state variance.  ``trans_noise`` and the
filtered covariances may be singular; the backward pass conditions on the
next state through a pseudo-inverse restricted to the non-degenerate
directions, which is exact for Gaussian vectors.

For the FAVAR the state is the companion vector ``x_t = (y_t, ..., y_{t-Q+1})``
with ``y_t = (F_t, M_t)``.  The aggregates are observation rows with zero
noise, so ``M_t`` is conditioned on exactly, and ``Lambda^M M_t`` enters the
regional rows as a known offset.  ``x_0`` holds the presample lags
``y_0, ..., y_{1-Q}`` with prior ``N(0, 10 I)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import backward_kernel, filter_kernel
from .errors import DataError, NumericalError, ShapeError
from .model import FavarParams, PanelData, build_companion

LOG2PI = np.log(2.0 * np.pi)
INIT_VARIANCE = 10.0


@dataclass(frozen=True)
class StateSpaceSystem:
    obs_loading: np.ndarray
    obs_noise: np.ndarray
    trans: np.ndarray
    trans_noise: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    obs_intercept_terms: Optional[np.ndarray] = None
    trans_offset: Optional[np.ndarray] = None

    @property
    def state_dim(self) -> int:
        return self.trans.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.obs_loading.shape[0]


@dataclass(frozen=True)
class FilterOutput:
    pred_mean: np.ndarray
    pred_cov: np.ndarray
    filt_mean: np.ndarray
    filt_cov: np.ndarray
    loglik: float
    init_mean: np.ndarray
    init_cov: np.ndarray


def _prepare_obs(Z, noise, obs, d):
    """Split rows into noise-free and noisy blocks; whiten the noisy block."""
    Z = np.asarray(Z, dtype=float)
    noise = np.asarray(noise, dtype=float)
    p = Z.shape[0]
    resid = obs - d
    if noise.ndim == 1:
        if noise.shape != (p,):
            raise ShapeError("diagonal obs_noise must have one entry per observation row")
        if np.any(noise < 0) or not np.all(np.isfinite(noise)):
            raise DataError("obs_noise variances must be finite and nonnegative")
        exact = noise == 0.0
        sd = np.sqrt(noise[~exact])
        Zs = Z[~exact] / sd[:, None]
        ys = resid[:, ~exact] / sd
        logdet_v = float(np.sum(np.log(noise[~exact])))
        Z0, y0 = Z[exact], resid[:, exact]
    else:
        if noise.shape != (p, p):
            raise ShapeError("obs_noise must be p x p")
        try:
            Lv = np.linalg.cholesky(0.5 * (noise + noise.T))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("full obs_noise must be positive definite") from exc
        Zs = solve_triangular(Lv, Z, lower=True)
        ys = solve_triangular(Lv, resid.T, lower=True).T
        logdet_v = 2.0 * float(np.sum(np.log(np.diag(Lv))))
        Z0, y0 = np.zeros((0, Z.shape[1])), np.zeros((obs.shape[0], 0))
    const = Zs.shape[0] * LOG2PI + logdet_v
    c = np.ascontiguousarray
    return c(Z0), c(y0), c(Zs), c(ys), const


def _check_inputs(sys: StateSpaceSystem, obs: np.ndarray):
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != sys.obs_dim:
        raise ShapeError(f"observations must be T x {sys.obs_dim}")
    if not np.all(np.isfinite(obs)):
        raise DataError("observations contain non-finite values")
    T = obs.shape[0]
    m = sys.state_dim
    d = sys.obs_intercept_terms
    d = np.zeros((T, sys.obs_dim)) if d is None else np.asarray(d, dtype=float)
    c = sys.trans_offset
    c = np.zeros((T, m)) if c is None else np.asarray(c, dtype=float)
    if d.shape != obs.shape or c.shape != (T, m):
        raise ShapeError("offset arrays must match the observation length")
    for name, arr in (("obs_loading", sys.obs_loading), ("trans", sys.trans), ("trans_noise", sys.trans_noise)):
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{name} contains non-finite values")
    return obs, d, np.ascontiguousarray(c)


def _raise_status(status, t, where):
    if status == 1:
        raise NumericalError(f"{where}: covariance lost positive semi-definiteness at t={t + 1}")
    if status == 2:
        raise NumericalError(f"{where}: singular innovation covariance at t={t + 1}")


def kalman_filter(sys: StateSpaceSystem, obs: np.ndarray) -> FilterOutput:
    obs, d, c = _check_inputs(sys, obs)
    Z0, y0, Zs, ys, const = _prepare_obs(sys.obs_loading, sys.obs_noise, obs, d)
    f = np.ascontiguousarray
    init_mean = f(sys.init_mean, dtype=float)
    init_cov = f(sys.init_cov, dtype=float)
    pm, pc, fm, fc, loglik, status, t = filter_kernel(
        f(sys.trans, dtype=float), f(sys.trans_noise, dtype=float), c, init_mean, init_cov, Z0, y0, Zs, ys, const
    )
    _raise_status(status, t, "kalman_filter")
    if not np.isfinite(loglik):
        raise NumericalError("log-likelihood is not finite")
    return FilterOutput(pm, pc, fm, fc, float(loglik), init_mean, init_cov)


def backward_sample(sys: StateSpaceSystem, out: FilterOutput, rng: np.random.Generator, trans_offset=None) -> np.ndarray:
    """Draw ``x_0, ..., x_T`` jointly from the smoothing distribution."""
    T, m = out.filt_mean.shape
    c = np.zeros((T, m)) if trans_offset is None else np.ascontiguousarray(trans_offset, dtype=float)
    eps = rng.standard_normal((T + 1, m))
    f = np.ascontiguousarray
    states, status, t = backward_kernel(
        f(sys.trans, dtype=float), f(sys.trans_noise, dtype=float), c, out.filt_mean, out.filt_cov, out.init_mean, out.init_cov, eps
    )
    _raise_status(status, t, "backward sampling")
    return states


def ffbs_draw(sys: StateSpaceSystem, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Forward filter then backward sample; returns the (T+1) x m state path including x_0."""
    obs, _, c = _check_inputs(sys, obs)
    out = kalman_filter(sys, obs)
    return backward_sample(sys, out, rng, trans_offset=c)


def build_system(params: FavarParams, data: PanelData) -> tuple[StateSpaceSystem, np.ndarray]:
    """State-space form of the FAVAR; returns the system and the T x (R+K) observations."""
    R, S = params.LambdaF.shape
    K = params.K
    if data.R != R or data.K != K:
        raise ShapeError(f"data has R={data.R}, K={data.K}; parameters expect R={R}, K={K}")
    n = S + K
    comp = build_companion(params.A)
    Q = comp.Q
    m = n * Q
    T = data.T

    Z = np.zeros((R + K, m))
    Z[:R, :S] = params.LambdaF
    Z[R:, S:n] = np.eye(K)
    d = np.zeros((T, R + K))
    d[:, :R] = data.M @ params.LambdaM.T
    noise = np.concatenate([params.sigma2, np.zeros(K)])
    Qn = np.zeros((m, m))
    Qn[:n, :n] = params.SigmaU
    c = None
    if data.z is not None and params.zeta is not None:
        c = np.zeros((T, m))
        c[:, :n] = np.outer(data.z, params.zeta)
    sys = StateSpaceSystem(
        obs_loading=Z,
        obs_noise=noise,
        trans=comp.Phi,
        trans_noise=Qn,
        init_mean=np.zeros(m),
        init_cov=INIT_VARIANCE * np.eye(m),
        obs_intercept_terms=d,
        trans_offset=c,
    )
    return sys, np.hstack([data.H, data.M])


def integrated_loglik(params: FavarParams, data: PanelData) -> float:
    """log p(H, M | params) with the factor path integrated out."""
    sys, obs = build_system(params, data)
    return kalman_filter(sys, obs).loglik
