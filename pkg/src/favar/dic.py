"""Deviance information criterion with the factor path integrated out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import FavarError, NumericalError, ParameterError
from .gibbs import ChainOutput
from .model import FavarParams, PanelData
from .state_space import integrated_loglik

MIN_DRAWS = 100
EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class DicResult:
    d_bar: float
    d_hat: float
    p_d: float
    dic: float
    n_draws_used: int


def dic_from_deviances(deviances: Sequence[float], d_hat: float) -> DicResult:
    dev = np.asarray(deviances, dtype=float)
    d_bar = float(dev.mean())
    p_d = d_bar - d_hat
    return DicResult(d_bar=d_bar, d_hat=float(d_hat), p_d=p_d, dic=2.0 * d_bar - d_hat, n_draws_used=dev.size)


def dic_generic(draws: Sequence, loglik: Callable, mean_point: Callable) -> DicResult:
    """DIC for any model given per-draw log-likelihood and a plug-in point."""
    dev = []
    for i, d in enumerate(draws):
        try:
            dev.append(-2.0 * loglik(d))
        except (FavarError, np.linalg.LinAlgError) as exc:
            raise NumericalError(f"likelihood failed at draw {i}: {exc}") from exc
    return dic_from_deviances(dev, -2.0 * loglik(mean_point(draws)))


def spd_repair(S: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    out = (V * np.maximum(w, floor)) @ V.T
    return 0.5 * (out + out.T)


def posterior_mean_params(chain: ChainOutput) -> FavarParams:
    """Elementwise posterior means; SigmaU projected back to SPD."""
    return FavarParams(
        LambdaF=chain.LambdaF.mean(axis=0),
        LambdaM=chain.LambdaM.mean(axis=0),
        sigma2=chain.sigma2.mean(axis=0),
        A=chain.A.mean(axis=0),
        SigmaU=spd_repair(chain.SigmaU.mean(axis=0)),
        zeta=None if chain.zeta is None else chain.zeta.mean(axis=0),
    )


def compute_dic(chain: ChainOutput, data: PanelData, min_draws: int = MIN_DRAWS) -> DicResult:
    if len(chain) < min_draws:
        raise ParameterError(f"DIC needs at least {min_draws} retained draws (got {len(chain)})")
    return dic_generic(list(chain), lambda p: integrated_loglik(p, data), lambda _: posterior_mean_params(chain))
