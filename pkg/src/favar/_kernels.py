"""Compiled inner loops for the Kalman filter and backward sampler.

Status codes instead of exceptions: 0 ok, 1 covariance lost PSD,
2 singular innovation covariance.
"""

import numpy as np
from numba import njit

RANK_TOL = 1e-11
PSD_TOL = 1e-8
LOG2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def _sym(P):
    return 0.5 * (P + P.T)


@njit(cache=True)
def _chol(A):
    """Lower Cholesky factor; returns (L, ok)."""
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True)
def _fsolve(L, B):
    """Solve L X = B for lower-triangular L (B is n x k)."""
    n, k = B.shape
    X = np.empty((n, k))
    for c in range(k):
        for i in range(n):
            s = B[i, c]
            for j in range(i):
                s -= L[i, j] * X[j, c]
            X[i, c] = s / L[i, i]
    return X


@njit(cache=True)
def _bsolve_t(L, B):
    """Solve L' X = B for lower-triangular L."""
    n, k = B.shape
    X = np.empty((n, k))
    for c in range(k):
        for i in range(n - 1, -1, -1):
            s = B[i, c]
            for j in range(i + 1, n):
                s -= L[j, i] * X[j, c]
            X[i, c] = s / L[i, i]
    return X


@njit(cache=True)
def filter_kernel(Phi, Qn, c, a0, P0, Z0, y0, Zs, ys, const_noisy):
    T = c.shape[0]
    m = Phi.shape[0]
    k0 = Z0.shape[0]
    kn = Zs.shape[0]
    pred_mean = np.empty((T, m))
    pred_cov = np.empty((T, m, m))
    filt_mean = np.empty((T, m))
    filt_cov = np.empty((T, m, m))
    a = a0.copy()
    P = P0.copy()
    loglik = 0.0
    I = np.eye(m)
    for t in range(T):
        a = Phi @ a + c[t]
        P = _sym(Phi @ P @ Phi.T + Qn)
        pred_mean[t] = a
        pred_cov[t] = P
        if k0 > 0:
            e0 = y0[t] - Z0 @ a
            PZt = P @ Z0.T
            F0 = _sym(Z0 @ PZt)
            cf, ok = _chol(F0)
            if not ok:
                return pred_mean, pred_cov, filt_mean, filt_cov, loglik, 2, t
            Kt = _bsolve_t(cf, _fsolve(cf, PZt.T))
            a = a + Kt.T @ e0
            IKZ = I - Kt.T @ Z0
            P = _sym(IKZ @ P @ IKZ.T)
            w = _fsolve(cf, e0.reshape(-1, 1))[:, 0].copy()
            ld = 0.0
            for i in range(k0):
                ld += np.log(cf[i, i])
            loglik -= 0.5 * (k0 * LOG2PI + 2.0 * ld + w @ w)
        if kn > 0:
            ev, V = np.linalg.eigh(P)
            top = max(ev[m - 1], 0.0)
            if ev[0] < -PSD_TOL * max(top, 1.0):
                return pred_mean, pred_cov, filt_mean, filt_cov, loglik, 1, t
            thr = RANK_TOL * max(top, 1e-300)
            r = 0
            for i in range(m):
                if ev[i] > thr:
                    r += 1
            es = ys[t] - Zs @ a
            if r == 0:
                loglik -= 0.5 * (const_noisy + es @ es)
            else:
                Lf = np.empty((m, r))
                j = 0
                for i in range(m):
                    if ev[i] > thr:
                        Lf[:, j] = V[:, i] * np.sqrt(ev[i])
                        j += 1
                ZL = Zs @ Lf
                Mm = np.eye(r) + ZL.T @ ZL
                cm, ok = _chol(_sym(Mm))
                if not ok:
                    return pred_mean, pred_cov, filt_mean, filt_cov, loglik, 2, t
                b = ZL.T @ es
                u = _fsolve(cm, b.reshape(-1, 1))
                a = a + Lf @ _bsolve_t(cm, u)[:, 0].copy()
                G = _fsolve(cm, np.ascontiguousarray(Lf.T))
                P = G.T @ G
                ld = 0.0
                for i in range(r):
                    ld += np.log(cm[i, i])
                uu = u[:, 0].copy()
                loglik -= 0.5 * (const_noisy + 2.0 * ld + es @ es - uu @ uu)
        filt_mean[t] = a
        filt_cov[t] = P
    return pred_mean, pred_cov, filt_mean, filt_cov, loglik, 0, T


@njit(cache=True)
def _draw_psd(mean, cov, eps):
    ev, V = np.linalg.eigh(_sym(cov))
    m = ev.shape[0]
    top = max(ev[m - 1], 0.0)
    if ev[0] < -PSD_TOL * max(top, 1.0):
        return mean, False
    thr = RANK_TOL * top
    s = np.empty(m)
    for i in range(m):
        s[i] = np.sqrt(ev[i]) * eps[i] if ev[i] > thr else 0.0
    return mean + V @ s, True


@njit(cache=True)
def backward_kernel(Phi, Qn, c, filt_mean, filt_cov, init_mean, init_cov, eps):
    T, m = filt_mean.shape
    states = np.empty((T + 1, m))
    x, ok = _draw_psd(filt_mean[T - 1], filt_cov[T - 1], eps[T])
    if not ok:
        return states, 1, T
    states[T] = x
    for t in range(T - 1, -1, -1):
        if t == 0:
            mt = init_mean
            Pt = init_cov
        else:
            mt = filt_mean[t - 1]
            Pt = filt_cov[t - 1]
        G = _sym(Phi @ Pt @ Phi.T + Qn)
        ev, V = np.linalg.eigh(G)
        thr = RANK_TOL * max(ev[m - 1], 1e-300)
        r = 0
        for i in range(m):
            if ev[i] > thr:
                r += 1
        Vk = np.empty((m, r))
        j = 0
        for i in range(m):
            if ev[i] > thr:
                Vk[:, j] = V[:, i] / np.sqrt(ev[i])
                j += 1
        B = Pt @ Phi.T @ Vk
        resid = states[t + 1] - Phi @ mt - c[t]
        mean = mt + B @ (Vk.T @ resid)
        cov = Pt - B @ B.T
        x, ok = _draw_psd(mean, cov, eps[t])
        if not ok:
            return states, 1, t
        states[t] = x
    return states, 0, -1
