"""Model dimensions, parameter containers and the companion-form VAR.

Conventions used throughout the package:

* ``y_t = (F_t', M_t')'`` stacks the ``S`` latent factors above the ``K``
  observed aggregates, ``n = S + K``.
* ``A`` is ``n x nQ`` with lag blocks ``[A_1, ..., A_Q]`` so that
  ``y_t = A x_t + zeta z_t + u_t`` with ``x_t = (y_{t-1}', ..., y_{t-Q}')'``.
* Local shrinkage scales are stored on the coefficient-variance scale: the
  prior variance of coefficient ``j`` is ``tau2_a[j]`` itself.  In the
  ``N(0, 2 tau^2 / xi)`` notation with ``tau^2 ~ G(theta, theta)`` this is
  ``2 tau^2 / xi``, which is the variable the closed-form GIG and Gamma
  conditionals are written in.
* VAR coefficients are ordered ``A.ravel()`` (row-major, equation by
  equation) followed by ``zeta`` when a proxy is present.  Loadings are
  ordered ``[LambdaF, LambdaM].ravel()`` (region by region).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, ParameterError, ShapeError

DEFAULT_H_MAX = 72


@dataclass(frozen=True)
class ModelDims:
    R: int
    S: int
    K: int
    Q: int
    T: int
    H_max: int = DEFAULT_H_MAX

    def __post_init__(self):
        if self.S < 1 or self.K < 0 or self.Q < 1:
            raise ParameterError(f"need S >= 1, K >= 0, Q >= 1 (got S={self.S}, K={self.K}, Q={self.Q})")
        if self.R <= self.S:
            raise ParameterError(f"need R > S (got R={self.R}, S={self.S})")
        if self.T <= self.Q:
            raise ParameterError(f"need T > Q (got T={self.T}, Q={self.Q})")
        if self.H_max < 0:
            raise ParameterError("H_max must be nonnegative")

    @property
    def n(self) -> int:
        """Number of VAR variables, S + K."""
        return self.S + self.K

    @property
    def L(self) -> int:
        return self.R * (self.S + self.K)

    @property
    def L_free(self) -> int:
        return (self.R - self.S) * (self.S + self.K)

    @property
    def J(self) -> int:
        return (self.S + self.K) ** 2 * self.Q

    @property
    def state_dim(self) -> int:
        return (self.S + self.K) * self.Q

    def n_var_coefs(self, has_proxy: bool) -> int:
        return self.J + (self.n if has_proxy else 0)

    def with_T(self, T: int) -> "ModelDims":
        return replace(self, T=T)


@dataclass(frozen=True)
class PanelData:
    H: np.ndarray
    M: np.ndarray
    z: Optional[np.ndarray] = None
    time_index: Sequence[str] = ()
    region_names: Sequence[str] = ()
    aggregate_names: Sequence[str] = ()
    proxy_name: Optional[str] = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        M = np.asarray(self.M, dtype=float)
        if H.ndim != 2:
            raise ShapeError("H must be T x R")
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        if M.ndim != 2 or M.shape[0] != H.shape[0]:
            raise ShapeError(f"M must be T x K with T={H.shape[0]} (got {M.shape})")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "M", M)
        if self.z is not None:
            z = np.asarray(self.z, dtype=float).reshape(-1)
            if z.shape[0] != H.shape[0]:
                raise ShapeError("z must have length T")
            object.__setattr__(self, "z", z)
        if len(self.time_index) not in (0, H.shape[0]):
            raise ShapeError("time_index must have length T")
        for name, arr in (("H", H), ("M", M), ("z", self.z)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")

    @property
    def T(self) -> int:
        return self.H.shape[0]

    @property
    def R(self) -> int:
        return self.H.shape[1]

    @property
    def K(self) -> int:
        return self.M.shape[1]

    @property
    def has_proxy(self) -> bool:
        return self.z is not None

    def checksum(self) -> str:
        """SHA-256 over the numeric content (H, M, z)."""
        h = hashlib.sha256()
        for arr in (self.H, self.M, self.z):
            if arr is not None:
                h.update(str(arr.shape).encode())
                h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()

    def dims(self, S: int, Q: int, H_max: int = DEFAULT_H_MAX) -> ModelDims:
        return ModelDims(R=self.R, S=S, K=self.K, Q=Q, T=self.T, H_max=H_max)


@dataclass(frozen=True)
class FavarParams:
    LambdaF: np.ndarray
    LambdaM: np.ndarray
    sigma2: np.ndarray
    A: np.ndarray
    SigmaU: np.ndarray
    zeta: Optional[np.ndarray] = None

    @property
    def S(self) -> int:
        return self.LambdaF.shape[1]

    @property
    def K(self) -> int:
        return self.LambdaM.shape[1]

    @property
    def R(self) -> int:
        return self.LambdaF.shape[0]

    @property
    def Q(self) -> int:
        n = self.A.shape[0]
        return self.A.shape[1] // n

    def check(self, tol: float = 0.0) -> None:
        """Raise if any structural invariant is violated.

        Identification blocks are compared exactly; ``tol`` only applies to
        the symmetry of ``SigmaU``.
        """
        R, S = self.LambdaF.shape
        n = S + self.K
        if self.LambdaM.shape[0] != R or self.sigma2.shape != (R,):
            raise ShapeError("loading / variance shapes disagree")
        if self.A.shape[0] != n or self.A.shape[1] % n:
            raise ShapeError(f"A must be {n} x {n}Q (got {self.A.shape})")
        if self.SigmaU.shape != (n, n):
            raise ShapeError("SigmaU must be n x n")
        if self.zeta is not None and self.zeta.shape != (n,):
            raise ShapeError("zeta must have length S + K")
        if not np.array_equal(self.LambdaF[:S], np.eye(S)):
            raise ParameterError("top S x S block of LambdaF must be the identity")
        if np.any(self.LambdaM[:S] != 0.0):
            raise ParameterError("first S rows of LambdaM must be zero")
        if not np.all(self.sigma2 > 0):
            raise ParameterError("measurement variances must be positive")
        if np.max(np.abs(self.SigmaU - self.SigmaU.T)) > tol:
            raise ParameterError("SigmaU must be symmetric")
        try:
            np.linalg.cholesky(self.SigmaU)
        except np.linalg.LinAlgError as exc:
            raise ParameterError("SigmaU must be positive definite") from exc

    def loadings(self) -> np.ndarray:
        """R x (S+K) matrix [LambdaF, LambdaM]."""
        return np.hstack([self.LambdaF, self.LambdaM])


@dataclass(frozen=True)
class ShrinkageState:
    tau2_a: np.ndarray
    xi_a: float
    tau2_lambda: np.ndarray
    xi_lambda: float

    def check(self) -> None:
        if not (np.all(self.tau2_a > 0) and np.all(self.tau2_lambda > 0)):
            raise ParameterError("local scales must be positive")
        if not (self.xi_a > 0 and self.xi_lambda > 0):
            raise ParameterError("global scales must be positive")


@dataclass(frozen=True)
class Hyperparams:
    vartheta_a: float
    vartheta_lambda: float
    c0: float
    c1: float
    d0: float
    d1: float
    e0: float
    e1: float
    v: float
    Sigma_bar: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("vartheta_a", "vartheta_lambda", "c0", "c1", "d0", "d1", "e0", "e1", "v"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"hyperparameter {name} must be positive")
        Sb = np.atleast_2d(np.asarray(self.Sigma_bar, dtype=float))
        if Sb.shape[0] != Sb.shape[1] or not np.allclose(Sb, Sb.T):
            raise ParameterError("Sigma_bar must be symmetric")
        try:
            np.linalg.cholesky(Sb)
        except np.linalg.LinAlgError as exc:
            raise ParameterError("Sigma_bar must be positive definite") from exc
        object.__setattr__(self, "Sigma_bar", Sb)


def default_hyperparams(dims: ModelDims) -> Hyperparams:
    """Prior settings yielding heavy shrinkage with heavy-tailed marginals."""
    n = dims.n
    return Hyperparams(
        vartheta_a=0.1,
        vartheta_lambda=0.1,
        c0=0.01,
        c1=0.01,
        d0=0.01,
        d1=0.01,
        e0=0.01,
        e1=0.01,
        v=float(n + 1),
        Sigma_bar=1e-2 * np.eye(n),
    )


@dataclass(frozen=True)
class CompanionForm:
    Phi: np.ndarray
    n: int
    Q: int

    def stack_impact(self, impact: np.ndarray) -> np.ndarray:
        """Embed an n-vector into companion space (zeros below the top block)."""
        impact = np.asarray(impact, dtype=float)
        if impact.shape != (self.n,):
            raise ShapeError(f"impact must have length {self.n}")
        out = np.zeros(self.n * self.Q)
        out[: self.n] = impact
        return out

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.Phi))))


def build_companion(A: np.ndarray, dims: Optional[ModelDims] = None) -> CompanionForm:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if dims is not None and n != dims.n:
        raise ShapeError(f"A has {n} rows, expected S+K={dims.n}")
    if A.shape[1] % n:
        raise ShapeError(f"A must be n x nQ (got {A.shape})")
    Q = A.shape[1] // n
    if dims is not None and Q != dims.Q:
        raise ShapeError(f"A implies Q={Q}, expected {dims.Q}")
    m = n * Q
    Phi = np.zeros((m, m))
    Phi[:n] = A
    if Q > 1:
        Phi[n:, :-n] = np.eye(m - n)
    return CompanionForm(Phi=Phi, n=n, Q=Q)


def lag_matrix(Y: np.ndarray, Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a (P+T) x n series whose first ``Q`` rows are presample values.

    Returns ``(y, X)`` with ``y`` the last T rows and ``X`` the T x nQ lagged
    regressors ``(y_{t-1}, ..., y_{t-Q})``.
    """
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0] - Q
    if T < 0:
        raise ShapeError("need at least Q rows")
    X = np.hstack([Y[Q - q : Q - q + T] for q in range(1, Q + 1)])
    return Y[Q:], X
