"""Structural identification of the monetary policy shock.

Both schemes return an impact vector normalized so that the policy
indicator moves by ``POLICY_SHOCK`` (a 25 basis point decline) on impact,
which keeps the IRF code independent of the identification scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateInstrumentError, NumericalError, ParameterError
from .model import FavarParams

POLICY_SHOCK = -0.25
DEFAULT_MAX_TRIES = 1000

# Impact signs for an expansionary shock (policy rate falls).
DEFAULT_SIGNS = {
    "industrial_production": +1,
    "housing_starts": +1,
    "cpi": +1,
    "term_spread": +1,
    "one_year_rate": -1,
}


@dataclass(frozen=True)
class SignRestriction:
    index: int
    sign: int  # +1 or -1, imposed on impact


@dataclass(frozen=True)
class SignRestrictionSpec:
    restrictions: tuple[SignRestriction, ...]
    max_tries: int = DEFAULT_MAX_TRIES

    def __post_init__(self):
        if not self.restrictions:
            raise ParameterError("at least one sign restriction is required")
        if self.max_tries < 1:
            raise ParameterError("max_tries must be >= 1")
        for r in self.restrictions:
            if r.sign not in (-1, 1):
                raise ParameterError(f"sign must be +1 or -1 (got {r.sign})")
        idx = [r.index for r in self.restrictions]
        if len(set(idx)) != len(idx):
            raise ParameterError("duplicate sign restriction")

    def validate(self, n: int) -> None:
        for r in self.restrictions:
            if not 0 <= r.index < n:
                raise ParameterError(f"restricted variable index {r.index} outside 0..{n - 1}")

    @property
    def indices(self) -> np.ndarray:
        return np.array([r.index for r in self.restrictions], dtype=int)

    @property
    def signs(self) -> np.ndarray:
        return np.array([r.sign for r in self.restrictions], dtype=float)

    def satisfied(self, impact: np.ndarray) -> bool:
        """Strict inequalities on every restricted entry."""
        return bool(np.all(self.signs * impact[self.indices] > 0))

    @classmethod
    def from_names(cls, signs: Mapping[str, int | str], names: Sequence[str], max_tries: int = DEFAULT_MAX_TRIES):
        """Resolve ``{variable name: sign}`` against the VAR variable names."""
        lookup = {name: i for i, name in enumerate(names)}
        out = []
        for name, s in signs.items():
            if name not in lookup:
                raise ParameterError(f"sign restriction on unknown variable {name!r}; known: {list(names)}")
            out.append(SignRestriction(lookup[name], _parse_sign(s)))
        return cls(tuple(out), max_tries)


def _parse_sign(s) -> int:
    if s in ("+", "+1", 1, "positive"):
        return 1
    if s in ("-", "-1", -1, "negative"):
        return -1
    raise ParameterError(f"cannot parse sign {s!r}")


def default_sign_spec(names: Sequence[str], max_tries: int = DEFAULT_MAX_TRIES) -> SignRestrictionSpec:
    """Default restriction set restricted to the variables present in ``names``."""
    present = {k: v for k, v in DEFAULT_SIGNS.items() if k in names}
    return SignRestrictionSpec.from_names(present, names, max_tries)


@dataclass(frozen=True)
class StructuralImpact:
    impact: np.ndarray
    source: str  # "proxy" or "sign"
    normalization_scale: float
    tries: int = 1


def normalize_impact(vec: np.ndarray, policy_index: int, source: str, tries: int = 1) -> StructuralImpact:
    vec = np.asarray(vec, dtype=float)
    if not 0 <= policy_index < vec.size:
        raise ParameterError(f"policy index {policy_index} outside 0..{vec.size - 1}")
    pivot = vec[policy_index]
    if pivot == 0.0 or not np.isfinite(pivot):
        raise DegenerateInstrumentError("policy indicator impact is zero; relative responses undefined")
    scale = POLICY_SHOCK / pivot
    impact = vec * scale
    impact[policy_index] = POLICY_SHOCK  # exact, free of rounding
    return StructuralImpact(impact=impact, source=source, normalization_scale=float(scale), tries=tries)


def proxy_impact(params: FavarParams, policy_index: int) -> StructuralImpact:
    """Relative impact from the proxy coefficients ``zeta``."""
    if params.zeta is None:
        raise ParameterError("proxy identification needs zeta (estimate with a proxy series)")
    return normalize_impact(params.zeta, policy_index, "proxy")


def draw_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with sign-fixed R diagonal."""
    if dim < 1:
        raise ParameterError("rotation dimension must be >= 1")
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def sign_restricted_impact(
    SigmaU: np.ndarray, spec: SignRestrictionSpec, policy_index: int, rng: np.random.Generator
) -> Optional[StructuralImpact]:
    """Search rotations for a column satisfying ``spec``; ``None`` after ``max_tries`` failures.

    Each rotation's columns (and their negations) are tested in order; the
    first candidate that meets every restriction and lowers the policy
    indicator is accepted.
    """
    n = SigmaU.shape[0]
    spec.validate(n)
    try:
        P = np.linalg.cholesky(SigmaU)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Cholesky factorization of SigmaU failed") from exc
    for tries in range(1, spec.max_tries + 1):
        C = P @ draw_rotation(n, rng)
        for j in range(n):
            for c in (C[:, j], -C[:, j]):
                if c[policy_index] < 0 and spec.satisfied(c):
                    return normalize_impact(c, policy_index, "sign", tries)
    return None
