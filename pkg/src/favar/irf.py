"""Impulse responses, regional mapping, posterior bands and Moran's I."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, DegenerateInstrumentError, ParameterError, ShapeError
from .identification import SignRestrictionSpec, proxy_impact, sign_restricted_impact
from .model import DEFAULT_H_MAX, CompanionForm, FavarParams, build_companion

QUANTILES = (0.16, 0.5, 0.84)


def propagate(companion: CompanionForm, impact, H_max: int = DEFAULT_H_MAX) -> np.ndarray:
    """(H_max+1) x n responses: top block of ``Phi^h`` applied to the stacked impact."""
    if H_max < 0:
        raise ParameterError("horizon must be nonnegative")
    vec = getattr(impact, "impact", impact)
    x = companion.stack_impact(vec)
    n = companion.n
    out = np.empty((H_max + 1, n))
    out[0] = x[:n]
    for h in range(1, H_max + 1):
        x = companion.Phi @ x
        out[h] = x[:n]
    return out


def regional_irf(macro: np.ndarray, params: FavarParams) -> np.ndarray:
    """Map (H+1) x (S+K) responses to (H+1) x R regional responses."""
    S, K = params.S, params.K
    if macro.ndim != 2 or macro.shape[1] != S + K:
        raise ShapeError(f"macro responses must be (H+1) x {S + K}")
    return macro[:, :S] @ params.LambdaF.T + macro[:, S:] @ params.LambdaM.T


def cumulate(responses: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.cumsum(responses, axis=axis)


def quantile_bands(draws: np.ndarray, probs: Sequence[float] = QUANTILES) -> np.ndarray:
    """Pointwise quantiles over axis 0 (linear interpolation between order statistics)."""
    draws = np.asarray(draws, dtype=float)
    if draws.shape[0] < 2:
        raise ParameterError("need at least two retained draws for bands")
    return np.quantile(draws, probs, axis=0, method="linear")


@dataclass
class IrfSet:
    """Bands have a leading axis of length 3 (q16, q50, q84)."""

    macro: np.ndarray  # 3 x (H+1) x n
    factor: np.ndarray  # 3 x (H+1) x S
    regional: np.ndarray  # 3 x (H+1) x R
    cumulative_regional: np.ndarray  # 3 x R, cumulated to H_max
    cumulative_macro: np.ndarray  # 3 x (H+1) x n
    cumulative_regional_path: np.ndarray  # 3 x (H+1) x R
    macro_names: tuple = ()
    region_names: tuple = ()
    n_draws: int = 0
    n_excluded: int = 0
    diagnostics: dict = field(default_factory=dict)
    per_draw_regional: Optional[np.ndarray] = None

    @property
    def H_max(self) -> int:
        return self.macro.shape[1] - 1


def compute_irfs(
    draws: Sequence[FavarParams],
    policy_index: int,
    method: str = "proxy",
    H_max: int = DEFAULT_H_MAX,
    rng: Optional[np.random.Generator] = None,
    sign_spec: Optional[SignRestrictionSpec] = None,
    macro_names: Sequence[str] = (),
    region_names: Sequence[str] = (),
    keep_draws: bool = False,
) -> IrfSet:
    """Per-draw identification and propagation followed by pointwise bands.

    Draws whose identification fails (degenerate instrument, exhausted
    sign-restriction budget) are excluded and counted.
    """
    if method not in ("proxy", "sign"):
        raise ParameterError(f"unknown identification method {method!r}")
    if method == "sign" and (rng is None or sign_spec is None):
        raise ParameterError("sign identification needs a random generator and a restriction spec")
    macro, regional, tries = [], [], []
    excluded = 0
    S = None
    for p in draws:
        S = p.S
        try:
            if method == "proxy":
                imp = proxy_impact(p, policy_index)
            else:
                imp = sign_restricted_impact(p.SigmaU, sign_spec, policy_index, rng)
        except DegenerateInstrumentError:
            imp = None
        if imp is None:
            excluded += 1
            continue
        tries.append(imp.tries)
        m = propagate(build_companion(p.A), imp, H_max)
        macro.append(m)
        regional.append(regional_irf(m, p))
    if len(macro) < 2:
        raise ParameterError(f"only {len(macro)} identified draws; need at least two")
    macro = np.asarray(macro)
    regional = np.asarray(regional)
    cmacro = cumulate(macro, axis=1)
    creg = cumulate(regional, axis=1)
    diag = {"identified": len(macro), "excluded": excluded, "method": method}
    if method == "sign":
        total = len(macro) + excluded
        diag["acceptance_rate"] = len(macro) / total
        diag["mean_tries"] = float(np.mean(tries))
    return IrfSet(
        macro=quantile_bands(macro),
        factor=quantile_bands(macro[:, :, :S]),
        regional=quantile_bands(regional),
        cumulative_regional=quantile_bands(creg[:, -1, :]),
        cumulative_macro=quantile_bands(cmacro),
        cumulative_regional_path=quantile_bands(creg),
        macro_names=tuple(macro_names),
        region_names=tuple(region_names),
        n_draws=len(macro),
        n_excluded=excluded,
        diagnostics=diag,
        per_draw_regional=regional if keep_draws else None,
    )


IRF_HEADER = ("series", "horizon", "q16", "q50", "q84", "cumulative")


def write_irf_table(path, bands: np.ndarray, cum_bands: np.ndarray, names: Sequence[str], meta: dict) -> None:
    """Long-format table; ``cumulative`` is the median cumulated response up to each horizon.

    Leading ``#`` lines carry run metadata (config hash, seed).
    """
    n_h, n_s = bands.shape[1], bands.shape[2]
    names = list(names) if names else [f"s{i + 1}" for i in range(n_s)]
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}={meta[k]}\n")
        w = csv.writer(fh)
        w.writerow(IRF_HEADER)
        for j in range(n_s):
            for h in range(n_h):
                w.writerow([names[j], h, repr(float(bands[0, h, j])), repr(float(bands[1, h, j])),
                            repr(float(bands[2, h, j])), repr(float(cum_bands[1, h, j]))])


def write_cumulative_table(path, irfs: IrfSet, meta: dict) -> None:
    names = list(irfs.region_names) or [f"region{i + 1}" for i in range(irfs.cumulative_regional.shape[1])]
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}={meta[k]}\n")
        w = csv.writer(fh)
        w.writerow(("region", "q16", "q50", "q84"))
        for j, name in enumerate(names):
            w.writerow([name] + [repr(float(irfs.cumulative_regional[q, j])) for q in range(3)])


def morans_i(values, weights, row_standardize: bool = False) -> float:
    """Global Moran's I of ``values`` under spatial weights ``weights`` (zero diagonal)."""
    v = np.asarray(values, dtype=float).ravel()
    W = np.asarray(weights, dtype=float)
    R = v.size
    if W.shape != (R, R):
        raise ShapeError(f"weights must be {R} x {R}")
    if np.any(np.diag(W) != 0):
        raise ParameterError("weights must have a zero diagonal")
    if row_standardize:
        rs = W.sum(axis=1, keepdims=True)
        W = np.divide(W, rs, out=np.zeros_like(W), where=rs != 0)
    s0 = W.sum()
    if s0 == 0:
        raise ParameterError("weights sum to zero")
    d = v - v.mean()
    ss = d @ d
    if ss == 0:
        raise ParameterError("Moran's I is undefined for constant values")
    return float(R / s0 * (d @ W @ d) / ss)


def load_weights(path) -> tuple[np.ndarray, list[str]]:
    """Read a square weight matrix: header row of region names, then one row per region.

    The first column of each row repeats the region name.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty weights file")
    names = rows[0][1:]
    body = rows[1:]
    if len(body) != len(names) or any(len(r) != len(names) + 1 for r in body):
        raise DataError(f"{path}: weights must be square with a name column")
    if [r[0] for r in body] != names:
        raise DataError(f"{path}: row names must match the header")
    try:
        W = np.array([[float(x) for x in r[1:]] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric weight") from exc
    return W, names
