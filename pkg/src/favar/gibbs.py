"""Gibbs sampler for the FAVAR with Normal-Gamma shrinkage.

One iteration runs nine conditional draws in a fixed order:

    (i)    VAR coefficients A (and zeta)   | latent path, SigmaU, tau2_a
    (ii)   latent path (factors, presample) | parameters, data   [FFBS]
    (iii)  SigmaU                           | residuals          [inverse Wishart]
    (iv)   free loading rows                | factors, sigma2, tau2_lambda
    (v)    measurement variances            | residuals          [inverse Gamma]
    (vi)   tau2_a                           | A, xi_a            [GIG]
    (vii)  xi_a                             | tau2_a             [Gamma]
    (viii) tau2_lambda                      | loadings, xi_lambda
    (ix)   xi_lambda                        | tau2_lambda

Local scales are stored on the coefficient-variance scale (see ``model``),
so with ``psi_j = tau2_a[j]`` the hierarchy is ``a_j ~ N(0, psi_j)``,
``psi_j ~ G(vartheta, vartheta xi / 2)`` and ``xi ~ G(shape0, rate0)``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .distributions import (
    CHI_FLOOR,
    sample_gamma,
    sample_gig,
    sample_inverse_gamma,
    sample_inverse_wishart,
)
from .errors import ConfigError, DataError, FavarError, NumericalError
from .model import FavarParams, Hyperparams, ModelDims, PanelData, ShrinkageState, lag_matrix
from .state_space import INIT_VARIANCE, build_system, ffbs_draw

STEP_NAMES = (
    "var_coeffs",
    "factors",
    "sigma_u",
    "loadings",
    "meas_var",
    "tau_a",
    "xi_a",
    "tau_lambda",
    "xi_lambda",
)
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ChainConfig:
    n_draws: int = 20_000
    n_burn: int = 10_000
    thin: int = 1
    seed: int = 0
    store_factors: bool = False

    def __post_init__(self):
        if self.n_draws < 1 or self.n_burn < 0 or self.n_burn >= self.n_draws:
            raise ConfigError(f"need 0 <= n_burn < n_draws (got {self.n_burn}, {self.n_draws})")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")

    @property
    def n_stored(self) -> int:
        return len(range(self.n_burn, self.n_draws, self.thin))

    def keeps(self, it: int) -> bool:
        """Whether 0-based iteration ``it`` is stored."""
        return it >= self.n_burn and (it - self.n_burn) % self.thin == 0


@dataclass(frozen=True)
class LatentPath:
    """Full VAR path: ``Y`` is (Q+T) x n with the Q presample rows first."""

    Y: np.ndarray
    S: int
    Q: int

    @property
    def T(self) -> int:
        return self.Y.shape[0] - self.Q

    @property
    def F(self) -> np.ndarray:
        return self.Y[self.Q :, : self.S]

    def regression(self) -> tuple[np.ndarray, np.ndarray]:
        """``(y, X)``: T x n targets and T x nQ lagged regressors."""
        return lag_matrix(self.Y, self.Q)


# ----------------------------------------------------------------- steps ---


def _var_prior_vector(tau2_a: np.ndarray, n: int, nQ: int, has_proxy: bool) -> np.ndarray:
    """Prior variances reordered to match ``[A | zeta].ravel()``."""
    J = n * nQ
    blocks = tau2_a[:J].reshape(n, nQ)
    if has_proxy:
        blocks = np.hstack([blocks, tau2_a[J:].reshape(n, 1)])
    return blocks.ravel()


def _chol_or_raise(P: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(P)
        raise NumericalError(f"{what}: posterior precision not positive definite (condition number {cond:.3e})") from exc


def var_coeffs_posterior(y, X, z, SigmaU, prior_var):
    """Posterior mean and precision Cholesky factor of ``beta = [A | zeta].ravel()``.

    With ``w_t = (x_t, z_t)`` the precision is ``SigmaU^-1 kron W'W + diag(1/prior_var)``.
    """
    W = X if z is None else np.hstack([X, np.reshape(z, (-1, 1))])
    cu = _chol_or_raise(SigmaU, "SigmaU")
    Sinv = cho_solve((cu, True), np.eye(SigmaU.shape[0]))
    prec = np.kron(Sinv, W.T @ W)
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    rhs = (W.T @ y @ Sinv).T.ravel()
    L = _chol_or_raise(prec, "VAR coefficients")
    return cho_solve((L, True), rhs), L


def draw_var_coeffs(y, X, z, SigmaU, shrink: ShrinkageState, rng):
    """Joint conjugate draw of ``(A, zeta)``; ``zeta`` is ``None`` without a proxy."""
    n, nQ = y.shape[1], X.shape[1]
    pv = _var_prior_vector(shrink.tau2_a, n, nQ, z is not None)
    mean, L = var_coeffs_posterior(y, X, z, SigmaU, pv)
    beta = mean + solve_triangular(L, rng.standard_normal(mean.size), lower=True, trans="T")
    B = beta.reshape(n, -1)
    return B[:, :nQ].copy(), (B[:, nQ].copy() if z is not None else None)


def draw_factors(params: FavarParams, data: PanelData, rng) -> LatentPath:
    """FFBS draw of the factor path and the presample lags."""
    sys, obs = build_system(params, data)
    states = ffbs_draw(sys, obs, rng)
    S, Q, n = params.S, params.Q, params.S + params.K
    Y = np.empty((Q + data.T, n))
    for q in range(Q):
        Y[Q - 1 - q] = states[0, q * n : (q + 1) * n]
    Y[Q:] = states[1:, :n]
    Y[Q:, S:] = data.M  # exact rows; drop filter roundoff
    return LatentPath(Y=Y, S=S, Q=Q)


def draw_sigma_u(resid: np.ndarray, hyper: Hyperparams, rng) -> np.ndarray:
    """IW(v + T, sum_t u_t u_t' + Sigma_bar)."""
    P = resid.T @ resid + hyper.Sigma_bar
    return sample_inverse_wishart(hyper.v + resid.shape[0], P, rng)


def loadings_posterior(H_free, G, sigma2_free, prior_var):
    """Per-row posterior mean and precision Cholesky factors for free loading rows.

    ``H_free`` is T x r, ``G = [F, M]`` is T x n, ``prior_var`` is r x n.
    """
    prec = (G.T @ G)[None] / sigma2_free[:, None, None]
    idx = np.arange(G.shape[1])
    prec[:, idx, idx] += 1.0 / prior_var
    rhs = (H_free.T @ G) / sigma2_free[:, None]
    try:
        L = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("loadings: posterior precision not positive definite") from exc
    mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
    return mean, L


def draw_loadings(data: PanelData, path: LatentPath, params: FavarParams, shrink: ShrinkageState, rng):
    """Independent conjugate row draws for regions S..R-1; frozen rows copied unchanged."""
    S, R = params.S, params.R
    n = S + params.K
    G = np.hstack([path.F, data.M])
    pv = shrink.tau2_lambda.reshape(R, n)[S:]
    mean, L = loadings_posterior(data.H[:, S:], G, params.sigma2[S:], pv)
    eps = rng.standard_normal(mean.shape)
    draw = mean + np.linalg.solve(np.swapaxes(L, 1, 2), eps[..., None])[..., 0]
    LF = params.LambdaF.copy()
    LM = params.LambdaM.copy()
    LF[S:] = draw[:, :S]
    LM[S:] = draw[:, S:]
    return LF, LM


def meas_var_shape_scale(resid: np.ndarray, hyper: Hyperparams):
    """``(alpha, beta)`` with ``alpha = T/2 + e0`` and ``beta = RSS/2 + e1`` per region."""
    alpha = 0.5 * resid.shape[0] + hyper.e0
    beta = 0.5 * np.sum(resid**2, axis=0) + hyper.e1
    return alpha, beta


def draw_meas_var(data: PanelData, path: LatentPath, params: FavarParams, hyper: Hyperparams, rng):
    resid = data.H - path.F @ params.LambdaF.T - data.M @ params.LambdaM.T
    alpha, beta = meas_var_shape_scale(resid, hyper)
    return np.asarray(sample_inverse_gamma(alpha, beta, rng, size=beta.shape))


def draw_local_scales(coefs: np.ndarray, vartheta: float, xi: float, rng) -> np.ndarray:
    """GIG(vartheta - 1/2, coef^2, vartheta xi) per coefficient."""
    chi = np.maximum(np.asarray(coefs, dtype=float) ** 2, CHI_FLOOR)
    return np.asarray(sample_gig(vartheta - 0.5, chi, vartheta * xi, rng))


def global_scale_posterior(tau2: np.ndarray, vartheta: float, shape0: float, rate0: float) -> tuple[float, float]:
    """``(shape, rate) = (shape0 + vartheta N, rate0 + vartheta sum(tau2) / 2)``."""
    return shape0 + vartheta * tau2.size, rate0 + 0.5 * vartheta * float(np.sum(tau2))


def draw_global_scale(tau2: np.ndarray, vartheta: float, shape0: float, rate0: float, rng) -> float:
    return sample_gamma(*global_scale_posterior(tau2, vartheta, shape0, rate0), rng)


def var_coef_vector(A: np.ndarray, zeta: Optional[np.ndarray]) -> np.ndarray:
    return A.ravel() if zeta is None else np.concatenate([A.ravel(), zeta])


def draw_tau_a(A, zeta, shrink: ShrinkageState, hyper: Hyperparams, rng) -> np.ndarray:
    return draw_local_scales(var_coef_vector(A, zeta), hyper.vartheta_a, shrink.xi_a, rng)


def draw_xi_a(shrink: ShrinkageState, hyper: Hyperparams, rng) -> float:
    return draw_global_scale(shrink.tau2_a, hyper.vartheta_a, hyper.d0, hyper.d1, rng)


def draw_tau_lambda(params: FavarParams, shrink: ShrinkageState, hyper: Hyperparams, rng) -> np.ndarray:
    """Length-R(S+K) scales; frozen rows carry no coefficient and are drawn from their prior."""
    S = params.S
    lam = params.loadings()
    n = lam.shape[1]
    out = np.empty(lam.size)
    out[S * n :] = draw_local_scales(lam[S:].ravel(), hyper.vartheta_lambda, shrink.xi_lambda, rng)
    rate = 0.5 * hyper.vartheta_lambda * shrink.xi_lambda
    out[: S * n] = sample_gamma(hyper.vartheta_lambda, rate, rng, size=S * n)
    return out


def draw_xi_lambda(shrink: ShrinkageState, hyper: Hyperparams, S: int, n: int, rng) -> float:
    """Uses only the free scales (rows S..R-1)."""
    return draw_global_scale(shrink.tau2_lambda[S * n :], hyper.vartheta_lambda, hyper.c0, hyper.c1, rng)


# ------------------------------------------------------------ prior draws ---


def sample_prior(dims: ModelDims, hyper: Hyperparams, rng, has_proxy: bool = False):
    """One joint draw of ``(FavarParams, ShrinkageState)`` from the prior."""
    S, K, R, n = dims.S, dims.K, dims.R, dims.n
    nJ = dims.n_var_coefs(has_proxy)
    xi_a = sample_gamma(hyper.d0, hyper.d1, rng)
    xi_l = sample_gamma(hyper.c0, hyper.c1, rng)
    tau_a = np.asarray(sample_gamma(hyper.vartheta_a, 0.5 * hyper.vartheta_a * xi_a, rng, size=nJ))
    tau_l = np.asarray(sample_gamma(hyper.vartheta_lambda, 0.5 * hyper.vartheta_lambda * xi_l, rng, size=dims.L))
    coefs = rng.standard_normal(nJ) * np.sqrt(tau_a)
    A = coefs[: dims.J].reshape(n, n * dims.Q)
    zeta = coefs[dims.J :].copy() if has_proxy else None
    lam = (rng.standard_normal(dims.L) * np.sqrt(tau_l)).reshape(R, n)
    LF, LM = lam[:, :S].copy(), lam[:, S:].copy()
    LF[:S] = np.eye(S)
    LM[:S] = 0.0
    sigma2 = np.asarray(sample_inverse_gamma(hyper.e0, hyper.e1, rng, size=R))
    SigmaU = sample_inverse_wishart(hyper.v, hyper.Sigma_bar, rng)
    params = FavarParams(LambdaF=LF, LambdaM=LM, sigma2=sigma2, A=A, SigmaU=SigmaU, zeta=zeta)
    return params, ShrinkageState(tau2_a=tau_a, xi_a=xi_a, tau2_lambda=tau_l, xi_lambda=xi_l)


def simulate_given_params(params: FavarParams, T: int, rng, z: Optional[np.ndarray] = None):
    """Draw ``(LatentPath, H)`` from the model given parameters.

    The presample follows the filter's initial-state prior ``N(0, 10 I)``.
    """
    S, Q, R = params.S, params.Q, params.R
    n = S + params.K
    Y = np.empty((Q + T, n))
    Y[:Q] = np.sqrt(INIT_VARIANCE) * rng.standard_normal((Q, n))
    cu = np.linalg.cholesky(params.SigmaU)
    U = rng.standard_normal((T, n)) @ cu.T
    for t in range(T):
        x = Y[t : t + Q][::-1].ravel()
        Y[Q + t] = params.A @ x + U[t]
        if z is not None:
            Y[Q + t] += params.zeta * z[t]
    path = LatentPath(Y=Y, S=S, Q=Q)
    H = Y[Q:] @ params.loadings().T + rng.standard_normal((T, R)) * np.sqrt(params.sigma2)
    return path, H


# --------------------------------------------------------------- sampler ---


def initial_state(data: PanelData, dims: ModelDims, hyper: Hyperparams):
    """Deterministic starting point: factors set to the first S regional series.

    Those series load on the factors with unit weight, so they are the
    factors plus noise.  Loadings, variances and the VAR start at ridge
    estimates given that path.
    """
    S, K, Q, R, n = dims.S, dims.K, dims.Q, dims.R, dims.n
    T = data.T
    Y = np.zeros((Q + T, n))
    Y[Q:, :S] = data.H[:, :S]
    Y[Q:, S:] = data.M
    path = LatentPath(Y=Y, S=S, Q=Q)
    G = np.hstack([path.F, data.M])
    ridge = 1e-3 * np.eye(n)
    lam = np.linalg.solve(G.T @ G + ridge, G.T @ data.H).T
    LF, LM = lam[:, :S].copy(), lam[:, S:].copy()
    LF[:S] = np.eye(S)
    LM[:S] = 0.0
    resid = data.H - G @ np.hstack([LF, LM]).T
    sigma2 = np.maximum(resid.var(axis=0), 1e-4 * np.maximum(data.H.var(axis=0), 1e-12))
    y, X = path.regression()
    W = X if data.z is None else np.hstack([X, data.z[:, None]])
    B = np.linalg.solve(W.T @ W + 1e-2 * np.eye(W.shape[1]), W.T @ y).T
    A, zeta = B[:, : n * Q].copy(), (B[:, n * Q].copy() if data.has_proxy else None)
    u = y - W @ B.T
    SigmaU = (u.T @ u + hyper.Sigma_bar) / (T + hyper.v)
    params = FavarParams(LambdaF=LF, LambdaM=LM, sigma2=sigma2, A=A, SigmaU=0.5 * (SigmaU + SigmaU.T), zeta=zeta)
    nJ = dims.n_var_coefs(data.has_proxy)
    shrink = ShrinkageState(
        tau2_a=np.maximum(var_coef_vector(A, zeta) ** 2, 1e-2),
        xi_a=1.0,
        tau2_lambda=np.maximum(np.hstack([LF, LM]).ravel() ** 2, 1e-2),
        xi_lambda=1.0,
    )
    assert shrink.tau2_a.size == nJ
    return params, shrink, path


@dataclass
class ChainOutput:
    """Stored draws as stacked arrays (leading axis = draw)."""

    LambdaF: np.ndarray
    LambdaM: np.ndarray
    sigma2: np.ndarray
    A: np.ndarray
    SigmaU: np.ndarray
    zeta: Optional[np.ndarray]
    tau2_a: np.ndarray
    xi_a: np.ndarray
    tau2_lambda: np.ndarray
    xi_lambda: np.ndarray
    factors: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    _ARRAYS = ("LambdaF", "LambdaM", "sigma2", "A", "SigmaU", "zeta", "tau2_a", "xi_a", "tau2_lambda", "xi_lambda", "factors")

    def __len__(self) -> int:
        return self.sigma2.shape[0]

    def draw(self, i: int) -> FavarParams:
        return FavarParams(
            LambdaF=self.LambdaF[i],
            LambdaM=self.LambdaM[i],
            sigma2=self.sigma2[i],
            A=self.A[i],
            SigmaU=self.SigmaU[i],
            zeta=None if self.zeta is None else self.zeta[i],
        )

    def shrinkage(self, i: int) -> ShrinkageState:
        return ShrinkageState(self.tau2_a[i], float(self.xi_a[i]), self.tau2_lambda[i], float(self.xi_lambda[i]))

    def __iter__(self):
        return (self.draw(i) for i in range(len(self)))

    def subset(self, idx) -> "ChainOutput":
        kw = {k: (None if getattr(self, k) is None else getattr(self, k)[idx]) for k in self._ARRAYS}
        return ChainOutput(**kw, diagnostics=dict(self.diagnostics))

    def arrays(self) -> dict:
        return {k: getattr(self, k) for k in self._ARRAYS if getattr(self, k) is not None}

    def save(self, path, meta: Optional[dict] = None) -> None:
        m = dict(meta or {})
        m["diagnostics"] = self.diagnostics
        m["format_version"] = CHECKPOINT_VERSION
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.array(json.dumps(m, sort_keys=True)), **self.arrays())

    @classmethod
    def load(cls, path) -> tuple["ChainOutput", dict]:
        with np.load(path, allow_pickle=False) as f:
            meta = json.loads(str(f["__meta__"]))
            kw = {k: (f[k].copy() if k in f.files else None) for k in cls._ARRAYS}
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported chain format version {meta.get('format_version')}")
        return cls(**kw, diagnostics=meta.pop("diagnostics", {})), meta


class _Store:
    def __init__(self, n: int, dims: ModelDims, has_proxy: bool, store_factors: bool):
        R, S, K, Q, T = dims.R, dims.S, dims.K, dims.Q, dims.T
        nn = dims.n
        self.a = {
            "LambdaF": np.empty((n, R, S)),
            "LambdaM": np.empty((n, R, K)),
            "sigma2": np.empty((n, R)),
            "A": np.empty((n, nn, nn * Q)),
            "SigmaU": np.empty((n, nn, nn)),
            "zeta": np.empty((n, nn)) if has_proxy else None,
            "tau2_a": np.empty((n, dims.n_var_coefs(has_proxy))),
            "xi_a": np.empty(n),
            "tau2_lambda": np.empty((n, dims.L)),
            "xi_lambda": np.empty(n),
            "factors": np.empty((n, T, S)) if store_factors else None,
        }

    def put(self, k: int, params: FavarParams, shrink: ShrinkageState, path: LatentPath):
        a = self.a
        a["LambdaF"][k] = params.LambdaF
        a["LambdaM"][k] = params.LambdaM
        a["sigma2"][k] = params.sigma2
        a["A"][k] = params.A
        a["SigmaU"][k] = params.SigmaU
        if a["zeta"] is not None:
            a["zeta"][k] = params.zeta
        a["tau2_a"][k] = shrink.tau2_a
        a["xi_a"][k] = shrink.xi_a
        a["tau2_lambda"][k] = shrink.tau2_lambda
        a["xi_lambda"][k] = shrink.xi_lambda
        if a["factors"] is not None:
            a["factors"][k] = path.F


class GibbsSampler:
    """Explicit sampler state; ``step`` performs one full sweep.

    With ``prior_only`` the data enter with zero length, so every step
    reduces to its prior conditional and the latent path is not drawn.
    """

    def __init__(
        self,
        data: PanelData,
        dims: ModelDims,
        hyper: Hyperparams,
        config: ChainConfig,
        prior_only: bool = False,
        init: Optional[tuple] = None,
    ):
        if (data.T, data.R, data.K) != (dims.T, dims.R, dims.K):
            raise DataError("data shape does not match model dimensions")
        if hyper.Sigma_bar.shape != (dims.n, dims.n):
            raise ConfigError("Sigma_bar must be (S+K) x (S+K)")
        self.data, self.dims, self.hyper, self.config = data, dims, hyper, config
        self.prior_only = prior_only
        self.rng = np.random.default_rng(config.seed)
        if init is None:
            init = initial_state(data, dims, hyper)
        self.params, self.shrink, self.path = init
        self.iteration = 0
        self.timing = {name: 0.0 for name in STEP_NAMES}
        self.store = _Store(config.n_stored, dims, data.has_proxy, config.store_factors)
        self.n_kept = 0

    # -- one sweep -----------------------------------------------------------
    def _run(self, name: str, fn: Callable, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except (FavarError, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise NumericalError(f"iteration {self.iteration + 1}, step {name}: {exc}") from exc
        self.timing[name] += time.perf_counter() - t0
        return out

    def step(self, record: bool = True) -> None:
        d, hp, rng = self.dims, self.hyper, self.rng
        data = self.data
        S, n = d.S, d.n
        if self.prior_only:
            y = np.zeros((0, n))
            X = np.zeros((0, n * d.Q))
            z = np.zeros(0) if data.has_proxy else None
        else:
            y, X = self.path.regression()
            z = data.z
        p, sh = self.params, self.shrink

        A, zeta = self._run("var_coeffs", draw_var_coeffs, y, X, z, p.SigmaU, sh, rng)
        p = replace(p, A=A, zeta=zeta)

        if not self.prior_only:
            self.path = self._run("factors", draw_factors, p, data, rng)
            y, X = self.path.regression()
        W = X if z is None else np.hstack([X, z[:, None]])
        B = A if zeta is None else np.hstack([A, zeta[:, None]])
        resid = y - W @ B.T
        p = replace(p, SigmaU=self._run("sigma_u", draw_sigma_u, resid, hp, rng))

        if self.prior_only:
            empty = PanelData(H=np.zeros((0, d.R)), M=np.zeros((0, d.K)))
            epath = LatentPath(Y=np.zeros((d.Q, n)), S=S, Q=d.Q)
            LF, LM = self._run("loadings", draw_loadings, empty, epath, p, sh, rng)
            p = replace(p, LambdaF=LF, LambdaM=LM)
            p = replace(p, sigma2=self._run("meas_var", draw_meas_var, empty, epath, p, hp, rng))
        else:
            LF, LM = self._run("loadings", draw_loadings, data, self.path, p, sh, rng)
            p = replace(p, LambdaF=LF, LambdaM=LM)
            p = replace(p, sigma2=self._run("meas_var", draw_meas_var, data, self.path, p, hp, rng))

        sh = replace(sh, tau2_a=self._run("tau_a", draw_tau_a, A, zeta, sh, hp, rng))
        sh = replace(sh, xi_a=self._run("xi_a", draw_xi_a, sh, hp, rng))
        sh = replace(sh, tau2_lambda=self._run("tau_lambda", draw_tau_lambda, p, sh, hp, rng))
        sh = replace(sh, xi_lambda=self._run("xi_lambda", draw_xi_lambda, sh, hp, S, n, rng))

        self.params, self.shrink = p, sh
        if record and self.config.keeps(self.iteration):
            self.store.put(self.n_kept, p, sh, self.path)
            self.n_kept += 1
        self.iteration += 1

    @property
    def done(self) -> bool:
        return self.iteration >= self.config.n_draws

    def run(self, until: Optional[int] = None, checkpoint: Optional[Path] = None, checkpoint_every: int = 0,
            progress: Optional[Callable[[int], None]] = None) -> None:
        """Iterate up to ``until`` (default: ``n_draws``), checkpointing periodically."""
        stop = self.config.n_draws if until is None else min(until, self.config.n_draws)
        while self.iteration < stop:
            self.step()
            if checkpoint is not None and checkpoint_every > 0 and self.iteration % checkpoint_every == 0:
                self.save_checkpoint(checkpoint)
            if progress is not None:
                progress(self.iteration)
        if checkpoint is not None and checkpoint_every > 0:
            self.save_checkpoint(checkpoint)

    def output(self) -> ChainOutput:
        a = {k: (None if v is None else v[: self.n_kept]) for k, v in self.store.a.items()}
        diag = {
            "iterations": self.iteration,
            "n_stored": self.n_kept,
            "step_seconds": {k: round(v, 6) for k, v in self.timing.items()},
        }
        return ChainOutput(**a, diagnostics=diag)

    # -- checkpointing -------------------------------------------------------
    def save_checkpoint(self, path) -> None:
        """Write the full sampler state (versioned npz with a JSON header)."""
        p, sh = self.params, self.shrink
        arrays = {
            "p_LambdaF": p.LambdaF,
            "p_LambdaM": p.LambdaM,
            "p_sigma2": p.sigma2,
            "p_A": p.A,
            "p_SigmaU": p.SigmaU,
            "s_tau2_a": sh.tau2_a,
            "s_tau2_lambda": sh.tau2_lambda,
            "path_Y": self.path.Y,
        }
        if p.zeta is not None:
            arrays["p_zeta"] = p.zeta
        for k, v in self.store.a.items():
            if v is not None:
                arrays["store_" + k] = v[: self.n_kept]
        meta = {
            "format_version": CHECKPOINT_VERSION,
            "iteration": self.iteration,
            "n_kept": self.n_kept,
            "xi_a": sh.xi_a,
            "xi_lambda": sh.xi_lambda,
            "rng_state": self.rng.bit_generator.state,
            "config": self.config.__dict__,
            "dims": self.dims.__dict__,
            "prior_only": self.prior_only,
            "data_checksum": self.data.checksum(),
            "timing": self.timing,
        }
        tmp = Path(str(path) + ".tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
        tmp.replace(path)

    @classmethod
    def from_checkpoint(cls, path, data: PanelData, hyper: Hyperparams) -> "GibbsSampler":
        with np.load(path, allow_pickle=False) as f:
            meta = json.loads(str(f["__meta__"]))
            arr = {k: f[k].copy() for k in f.files if k != "__meta__"}
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {meta.get('format_version')}")
        if meta["data_checksum"] != data.checksum():
            raise DataError("checkpoint was written for different data")
        dims = ModelDims(**meta["dims"])
        config = ChainConfig(**meta["config"])
        params = FavarParams(
            LambdaF=arr["p_LambdaF"],
            LambdaM=arr["p_LambdaM"],
            sigma2=arr["p_sigma2"],
            A=arr["p_A"],
            SigmaU=arr["p_SigmaU"],
            zeta=arr.get("p_zeta"),
        )
        shrink = ShrinkageState(arr["s_tau2_a"], meta["xi_a"], arr["s_tau2_lambda"], meta["xi_lambda"])
        path_ = LatentPath(Y=arr["path_Y"], S=dims.S, Q=dims.Q)
        smp = cls(data, dims, hyper, config, prior_only=meta["prior_only"], init=(params, shrink, path_))
        smp.rng.bit_generator.state = meta["rng_state"]
        smp.iteration = meta["iteration"]
        smp.n_kept = meta["n_kept"]
        smp.timing = dict(meta["timing"])
        for k, v in smp.store.a.items():
            if v is not None:
                v[: smp.n_kept] = arr["store_" + k]
        return smp


def run_chain(
    data: PanelData,
    dims: ModelDims,
    hyper: Hyperparams,
    config: ChainConfig,
    prior_only: bool = False,
    checkpoint: Optional[Path] = None,
    checkpoint_every: int = 0,
    progress: Optional[Callable[[int], None]] = None,
) -> ChainOutput:
    """Run a full chain from the deterministic starting point."""
    smp = GibbsSampler(data, dims, hyper, config, prior_only=prior_only)
    smp.run(checkpoint=checkpoint, checkpoint_every=checkpoint_every, progress=progress)
    return smp.output()


def resume_chain(
    checkpoint: Path,
    data: PanelData,
    hyper: Hyperparams,
    checkpoint_every: int = 0,
    progress: Optional[Callable[[int], None]] = None,
) -> ChainOutput:
    smp = GibbsSampler.from_checkpoint(checkpoint, data, hyper)
    smp.run(checkpoint=checkpoint, checkpoint_every=checkpoint_every, progress=progress)
    return smp.output()


def geweke_successive(dims: ModelDims, hyper: Hyperparams, z: Optional[np.ndarray], n_iter: int, seed: int,
                      record: Callable[[FavarParams, ShrinkageState], np.ndarray]) -> np.ndarray:
    """Successive-conditional simulator for joint-distribution checks.

    Alternates one Gibbs sweep given the current data with a fresh draw of
    (latent path, data) given the parameters.  Its stationary distribution
    is the joint prior, so recorded summaries must match prior draws.
    """
    rng = np.random.default_rng(seed)
    params, shrink = sample_prior(dims, hyper, rng, has_proxy=z is not None)
    path, H = simulate_given_params(params, dims.T, rng, z)
    data = PanelData(H=H, M=path.Y[dims.Q :, dims.S :], z=z)
    smp = GibbsSampler(data, dims, hyper, ChainConfig(n_draws=1, n_burn=0, seed=seed), init=(params, shrink, path))
    smp.rng = rng
    out = []
    for _ in range(n_iter):
        smp.step(record=False)
        path, H = simulate_given_params(smp.params, dims.T, rng, z)
        smp.data = PanelData(H=H, M=path.Y[dims.Q :, dims.S :], z=z)
        smp.path = path
        out.append(record(smp.params, smp.shrink))
    return np.asarray(out)

