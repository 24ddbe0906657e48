"""Random-variate generators for the Gibbs conditionals.

Every sampler takes an explicit ``numpy.random.Generator`` so a chain is a
deterministic function of its seed.

The generalized inverse Gaussian uses the density

    f(x) ∝ x^(p-1) exp(-(chi / x + psi * x) / 2),   x > 0,

and the three-regime rejection scheme of Hörmann & Leydold (2014): ratio of
uniforms with a mode shift for large ``|p|`` or ``omega``, plain ratio of
uniforms in the intermediate region, and a piecewise constant/power/
exponential hat for small ``|p| < 1`` and small ``omega``.  All regimes are
vectorized over the parameter arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ParameterError

CHI_FLOOR = 1e-30
_OMEGA_TOL = 10 * np.finfo(float).eps


@dataclass(frozen=True)
class GigParams:
    p: float
    chi: float
    psi: float

    def sample(self, rng: np.random.Generator, size=None):
        return sample_gig(self.p, self.chi, self.psi, rng, size=size)

    def moment(self, k: int = 1) -> float:
        """Raw moment E[X^k] via a Bessel-function ratio (requires chi, psi > 0)."""
        from scipy.special import kve

        omega = np.sqrt(self.chi * self.psi)
        return float((self.chi / self.psi) ** (k / 2) * kve(self.p + k, omega) / kve(self.p, omega))


def _gig_mode(lam, omega):
    return np.where(
        lam >= 1.0,
        (np.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega,
        omega / (np.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam)),
    )


def _rou_noshift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + omega**2)) / omega
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)

    out = np.empty(lam.shape)
    todo = np.arange(lam.size)
    while todo.size:
        u = um[todo] * rng.random(todo.size)
        v = rng.random(todo.size)
        x = u / v
        ok = np.log(v) <= t[todo] * np.log(x) - s[todo] * (x + 1.0 / x) - nc[todo]
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _rou_shift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)

    # extrema of (x - xm) sqrt(f(x)) are roots of a cubic
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    pp = b - a * a / 3.0
    qq = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    fi = np.arccos(np.clip(-qq / (2.0 * np.sqrt(-(pp**3) / 27.0)), -1.0, 1.0))
    fak = 2.0 * np.sqrt(-pp / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 / 3.0 * np.pi) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)

    out = np.empty(lam.shape)
    todo = np.arange(lam.size)
    while todo.size:
        lo, hi = uminus[todo], uplus[todo]
        u = lo + rng.random(todo.size) * (hi - lo)
        v = rng.random(todo.size)
        x = u / v + xm[todo]
        with np.errstate(invalid="ignore", divide="ignore"):
            logf = t[todo] * np.log(x) - s[todo] * (x + 1.0 / x) - nc[todo]
        ok = (x > 0) & (np.log(v) <= logf)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _hat_small(lam, omega, rng):
    """Rejection from a three-piece hat; valid for 0 <= lam < 1, small omega."""
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    A0 = k0 * x0

    far = x0 >= 2.0 / omega
    k1 = np.where(far, 0.0, np.exp(-omega))
    with np.errstate(divide="ignore", invalid="ignore"):
        A1_mid = np.where(
            lam == 0.0,
            k1 * np.log(2.0 / (omega * omega)),
            k1 / lam * ((2.0 / omega) ** lam - x0**lam),
        )
    A1 = np.where(far, 0.0, A1_mid)
    k2 = np.where(far, x0 ** (lam - 1.0), (2.0 / omega) ** (lam - 1.0))
    A2 = np.where(far, k2 * 2.0 * np.exp(-omega * x0 / 2.0) / omega, k2 * 2.0 * np.exp(-1.0) / omega)
    start3 = np.maximum(x0, 2.0 / omega)
    Atot = A0 + A1 + A2

    out = np.empty(lam.shape)
    todo = np.arange(lam.size)
    while todo.size:
        la, om = lam[todo], omega[todo]
        v = Atot[todo] * rng.random(todo.size)
        x = np.empty(todo.size)
        hx = np.empty(todo.size)

        seg0 = v <= A0[todo]
        x[seg0] = x0[todo][seg0] * v[seg0] / A0[todo][seg0]
        hx[seg0] = k0[todo][seg0]

        v1 = v - A0[todo]
        seg1 = ~seg0 & (v1 <= A1[todo])
        if seg1.any():
            l1, o1, w1, kk1 = la[seg1], om[seg1], v1[seg1], k1[todo][seg1]
            zero = l1 == 0.0
            xs = np.empty(l1.size)
            with np.errstate(divide="ignore", invalid="ignore"):
                xs[zero] = o1[zero] * np.exp(np.exp(o1[zero]) * w1[zero])
                nz = ~zero
                xs[nz] = (x0[todo][seg1][nz] ** l1[nz] + l1[nz] / kk1[nz] * w1[nz]) ** (1.0 / l1[nz])
            x[seg1] = xs
            hx[seg1] = kk1 * xs ** (l1 - 1.0)

        seg2 = ~seg0 & ~seg1
        if seg2.any():
            o2 = om[seg2]
            w2 = v1[seg2] - A1[todo][seg2]
            kk2 = k2[todo][seg2]
            arg = np.exp(-o2 / 2.0 * start3[todo][seg2]) - o2 / (2.0 * kk2) * w2
            xs = -2.0 / o2 * np.log(np.maximum(arg, np.finfo(float).tiny))
            x[seg2] = xs
            hx[seg2] = kk2 * np.exp(-o2 / 2.0 * xs)

        u = rng.random(todo.size) * hx
        with np.errstate(divide="ignore"):
            ok = np.log(u) <= (la - 1.0) * np.log(x) - om / 2.0 * (x + 1.0 / x)
        ok &= np.isfinite(x) & (x > 0)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def sample_gig(p, chi, psi, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Draw from GIG(p, chi, psi); parameters broadcast against ``size``."""
    p, chi, psi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p, chi, psi)))
    if size is not None:
        shape = (size,) if np.isscalar(size) else tuple(size)
        p, chi, psi = (np.broadcast_to(a, shape) for a in (p, chi, psi))
    shape = p.shape
    p, chi, psi = (np.array(a, dtype=float).reshape(-1) for a in (p, chi, psi))

    if np.any(~np.isfinite(p)) or np.any(chi < 0) or np.any(psi < 0) or np.any(~np.isfinite(chi + psi)):
        raise ParameterError("GIG requires finite p and chi, psi >= 0")
    if np.any((chi == 0) & (p <= 0)) or np.any((psi == 0) & (p >= 0)):
        raise ParameterError("GIG requires chi > 0 when p <= 0 and psi > 0 when p >= 0")

    out = np.empty(p.size)
    gamma_lim = (chi == 0) | ((np.sqrt(chi * psi) < _OMEGA_TOL) & (p > 0))
    invgamma_lim = ~gamma_lim & ((psi == 0) | ((np.sqrt(chi * psi) < _OMEGA_TOL) & (p < 0)))
    if gamma_lim.any():
        out[gamma_lim] = rng.gamma(p[gamma_lim], 2.0 / psi[gamma_lim])
    if invgamma_lim.any():
        g = rng.gamma(-p[invgamma_lim], 1.0)
        out[invgamma_lim] = 0.5 * chi[invgamma_lim] / g

    rest = ~(gamma_lim | invgamma_lim)
    if rest.any():
        pr, cr, sr = p[rest], chi[rest], psi[rest]
        lam = np.abs(pr)
        omega = np.sqrt(cr * sr)
        alpha = np.sqrt(cr / sr)
        x = np.empty(lam.size)
        shift = (lam > 2.0) | (omega > 3.0)
        noshift = ~shift & ((lam >= 1.0 - 2.25 * omega**2) | (omega > 0.2))
        small = ~shift & ~noshift
        if shift.any():
            x[shift] = _rou_shift(lam[shift], omega[shift], rng)
        if noshift.any():
            x[noshift] = _rou_noshift(lam[noshift], omega[noshift], rng)
        if small.any():
            x[small] = _hat_small(lam[small], omega[small], rng)
        out[rest] = np.where(pr < 0, alpha / x, alpha * x)

    return float(out[0]) if shape == () else out.reshape(shape)


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ParameterError("Gamma requires shape > 0 and rate > 0")
    out = rng.gamma(shape, 1.0 / rate, size=size)
    return float(out) if np.ndim(out) == 0 else out


def sample_inverse_gamma(alpha, beta, rng: np.random.Generator, size=None):
    """Density ∝ x^(-alpha-1) exp(-beta / x)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ParameterError("inverse Gamma requires alpha > 0 and beta > 0")
    out = beta / rng.gamma(alpha, 1.0, size=size)
    return float(out) if np.ndim(out) == 0 else out


def sample_inverse_wishart(nu: float, Psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw from IW(nu, Psi) with E[X] = Psi / (nu - d - 1).

    Bartlett construction: with ``Psi = U U'`` and ``W = B B' ~ W(nu, I)``,
    ``X = U W^{-1} U'``.
    """
    Psi = np.atleast_2d(np.asarray(Psi, dtype=float))
    d = Psi.shape[0]
    if Psi.shape != (d, d) or not nu > d - 1:
        raise ParameterError(f"inverse Wishart needs square Psi and nu > d - 1 (nu={nu}, d={d})")
    if np.max(np.abs(Psi - Psi.T)) > 1e-10 * max(1.0, np.max(np.abs(Psi))):
        raise ParameterError("inverse Wishart scale must be symmetric")
    try:
        U = np.linalg.cholesky(0.5 * (Psi + Psi.T))
    except np.linalg.LinAlgError as exc:
        raise ParameterError("inverse Wishart scale must be positive definite") from exc
    B = np.zeros((d, d))
    B[np.diag_indices(d)] = np.sqrt(rng.chisquare(nu - np.arange(d)))
    low = np.tril_indices(d, -1)
    B[low] = rng.standard_normal(len(low[0]))
    # X = (U B^{-T})(U B^{-T})'
    G = solve_triangular(B, U.T, lower=True).T
    X = G @ G.T
    return 0.5 * (X + X.T)


def psd_factor(cov: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return ``L`` with ``L L' = cov``; Cholesky when possible, else eigen.

    Raises ``ParameterError`` when ``cov`` has an eigenvalue below
    ``-tol * max(1, max|eig|)``.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(1.0, float(np.max(np.abs(w))))
    if w.min() < -tol * scale:
        raise ParameterError(f"covariance is not positive semi-definite (min eigenvalue {w.min():.3e})")
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_mvn(
    mean: np.ndarray,
    cov: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    factor: Optional[np.ndarray] = None,
    size: Optional[int] = None,
) -> np.ndarray:
    """Multivariate normal draw; pass ``factor`` (L with L L' = cov) to reuse it."""
    if rng is None:
        raise ParameterError("an explicit random generator is required")
    mean = np.asarray(mean, dtype=float)
    if factor is None:
        if cov is None:
            raise ParameterError("need cov or factor")
        factor = psd_factor(cov)
    d = mean.shape[-1]
    if size is None:
        return mean + factor @ rng.standard_normal(factor.shape[1])
    eps = rng.standard_normal((size, factor.shape[1]))
    return mean + eps @ factor.T if d else np.zeros((size, 0))
