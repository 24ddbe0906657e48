"""Brute-force reference computations used as independent test oracles."""

import numpy as np
from scipy.stats import multivariate_normal


def joint_gaussian(sys, T):
    """Mean and covariance of (x_0, ..., x_T, o_1, ..., o_T) built from the base shocks."""
    m = sys.trans.shape[0]
    p = sys.obs_loading.shape[0]
    c = np.zeros((T, m)) if sys.trans_offset is None else sys.trans_offset
    d = np.zeros((T, p)) if sys.obs_intercept_terms is None else sys.obs_intercept_terms
    V = np.asarray(sys.obs_noise, float)
    V = np.diag(V) if V.ndim == 1 else V
    # base vector: x_0, w_1..w_T, v_1..v_T
    nb = m + T * m + T * p
    base_cov = np.zeros((nb, nb))
    base_cov[:m, :m] = sys.init_cov
    for t in range(T):
        i = m + t * m
        base_cov[i : i + m, i : i + m] = sys.trans_noise
        j = m + T * m + t * p
        base_cov[j : j + p, j : j + p] = V
    base_mean = np.zeros(nb)
    base_mean[:m] = sys.init_mean

    Xmap = np.zeros(((T + 1) * m, nb))
    Xoff = np.zeros((T + 1) * m)
    Xmap[:m, :m] = np.eye(m)
    for t in range(1, T + 1):
        prev = Xmap[(t - 1) * m : t * m]
        Xmap[t * m : (t + 1) * m] = sys.trans @ prev
        Xmap[t * m : (t + 1) * m, m + (t - 1) * m : m + t * m] += np.eye(m)
        Xoff[t * m : (t + 1) * m] = sys.trans @ Xoff[(t - 1) * m : t * m] + c[t - 1]
    Omap = np.zeros((T * p, nb))
    Ooff = np.zeros(T * p)
    for t in range(1, T + 1):
        Omap[(t - 1) * p : t * p] = sys.obs_loading @ Xmap[t * m : (t + 1) * m]
        Omap[(t - 1) * p : t * p, m + T * m + (t - 1) * p : m + T * m + t * p] += np.eye(p)
        Ooff[(t - 1) * p : t * p] = sys.obs_loading @ Xoff[t * m : (t + 1) * m] + d[t - 1]
    Map = np.vstack([Xmap, Omap])
    mean = Map @ base_mean + np.concatenate([Xoff, Ooff])
    cov = Map @ base_cov @ Map.T
    return mean, cov, (T + 1) * m


def condition(mean, cov, n_x, obs_flat, obs_idx=None):
    """Moments of the state block given (a subset of) the observation block."""
    mx, mo = mean[:n_x], mean[n_x:]
    Sxx, Sxo, Soo = cov[:n_x, :n_x], cov[:n_x, n_x:], cov[n_x:, n_x:]
    if obs_idx is not None:
        mo, Sxo, Soo = mo[obs_idx], Sxo[:, obs_idx], Soo[np.ix_(obs_idx, obs_idx)]
        obs_flat = obs_flat[obs_idx]
    K = np.linalg.solve(Soo, Sxo.T).T
    return mx + K @ (obs_flat - mo), Sxx - K @ Sxo.T


def brute_force(sys, obs):
    """Filtered means/covs, smoothed moments of x_0..x_T and the exact log density."""
    T, p = obs.shape
    m = sys.trans.shape[0]
    mean, cov, n_x = joint_gaussian(sys, T)
    flat = obs.reshape(-1)
    filt_mean = np.empty((T, m))
    filt_cov = np.empty((T, m, m))
    for t in range(1, T + 1):
        idx = np.arange(t * p)
        mu, S = condition(mean, cov, n_x, flat, idx)
        filt_mean[t - 1] = mu[t * m : (t + 1) * m]
        filt_cov[t - 1] = S[t * m : (t + 1) * m, t * m : (t + 1) * m]
    smooth_mean, smooth_cov = condition(mean, cov, n_x, flat)
    loglik = multivariate_normal(mean[n_x:], cov[n_x:, n_x:], allow_singular=False).logpdf(flat)
    return dict(filt_mean=filt_mean, filt_cov=filt_cov, smooth_mean=smooth_mean, smooth_cov=smooth_cov, loglik=loglik)


def favar_joint_loglik(params, data):
    """log p(H, M | params) for the FAVAR assembled directly from the model equations.

    Independent of ``build_system``: the joint of (presample y, u_1..u_T, eps_1..eps_T)
    is pushed through the VAR recursion and the measurement equation.
    """
    H, M, z = data.H, data.M, data.z
    T, R = H.shape
    S = params.LambdaF.shape[1]
    K = M.shape[1]
    n = S + K
    Q = params.A.shape[1] // n
    A_blocks = [params.A[:, q * n : (q + 1) * n] for q in range(Q)]
    # base: presample y_0..y_{1-Q} (Q n), u_1..u_T (T n), eps_1..eps_T (T R)
    nb = Q * n + T * n + T * R
    base_cov = np.zeros((nb, nb))
    base_cov[: Q * n, : Q * n] = 10.0 * np.eye(Q * n)
    for t in range(T):
        i = Q * n + t * n
        base_cov[i : i + n, i : i + n] = params.SigmaU
        j = Q * n + T * n + t * R
        base_cov[j : j + R, j : j + R] = np.diag(params.sigma2)
    # y_{t} maps for t = 1-Q .. T; index k = t + Q - 1
    ymap = [None] * (T + Q)
    yoff = [None] * (T + Q)
    for k in range(Q):
        # presample y_{1-Q+k} is block (Q-1-k) of x_0 = (y_0, y_{-1}, ...)
        blk = Q - 1 - k
        mp = np.zeros((n, nb))
        mp[:, blk * n : (blk + 1) * n] = np.eye(n)
        ymap[k], yoff[k] = mp, np.zeros(n)
    for t in range(1, T + 1):
        k = t + Q - 1
        mp = np.zeros((n, nb))
        off = np.zeros(n) if z is None else params.zeta * z[t - 1]
        for q in range(1, Q + 1):
            mp += A_blocks[q - 1] @ ymap[k - q]
            off = off + A_blocks[q - 1] @ yoff[k - q]
        mp[:, Q * n + (t - 1) * n : Q * n + t * n] += np.eye(n)
        ymap[k], yoff[k] = mp, off
    Lam = np.hstack([params.LambdaF, params.LambdaM])
    rows, offs = [], []
    for t in range(1, T + 1):
        k = t + Q - 1
        hm = Lam @ ymap[k]
        hm[:, Q * n + T * n + (t - 1) * R : Q * n + T * n + t * R] += np.eye(R)
        rows.append(hm)
        offs.append(Lam @ yoff[k])
        rows.append(ymap[k][S:])
        offs.append(yoff[k][S:])
    Map = np.vstack(rows)
    off = np.concatenate(offs)
    obs = np.concatenate([np.concatenate([H[t], M[t]]) for t in range(T)])
    cov = Map @ base_cov @ Map.T
    return multivariate_normal(off, cov).logpdf(obs)
