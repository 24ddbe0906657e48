"""Panel ingestion, stationarity transforms and the synthetic generator.

File format: comma-separated UTF-8 text, optional leading ``#`` metadata
lines, a header row whose first column is the period label (``YYYY-MM``),
then one column per series.  Gzip-compressed files (``.gz``) are read
transparently.
"""

from __future__ import annotations

import csv
import gzip
import io
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .model import FavarParams, ModelDims, PanelData, build_companion

TRANSFORMS = ("none", "log_diff_x100", "diff")
KINDS = ("regional", "aggregate", "proxy")
_PERIOD = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")

DEFAULT_AGGREGATES = (
    "industrial_production",
    "cpi",
    "housing_starts",
    "term_spread",
    "unemployment",
    "mortgage_rate",
    "one_year_rate",
)
POLICY_NAME = "one_year_rate"
PROXY_NAME = "ff_surprise"


@dataclass(frozen=True)
class SeriesSpec:
    name: str
    kind: str
    transform: str = "none"
    policy_indicator: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"series {self.name!r}: kind must be one of {KINDS}")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"series {self.name!r}: transform must be one of {TRANSFORMS}")
        if self.policy_indicator and self.kind != "aggregate":
            raise ConfigError(f"series {self.name!r}: only an aggregate can be the policy indicator")


def validate_specs(specs: Sequence[SeriesSpec], S: Optional[int] = None) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate series names")
    n_proxy = sum(s.kind == "proxy" for s in specs)
    if n_proxy > 1:
        raise ConfigError("at most one proxy series")
    if sum(s.policy_indicator for s in specs) != 1:
        raise ConfigError("exactly one aggregate must be flagged as policy indicator")
    n_reg = sum(s.kind == "regional" for s in specs)
    if n_reg == 0 or (S is not None and S > n_reg):
        raise ConfigError(f"need at least S regional series (have {n_reg})")


def policy_index(specs: Sequence[SeriesSpec], S: int) -> int:
    """Position of the policy indicator in ``y_t = (F_t, M_t)``."""
    aggs = [s for s in specs if s.kind == "aggregate"]
    return S + next(i for i, s in enumerate(aggs) if s.policy_indicator)


def apply_transform(x: np.ndarray, transform: str) -> np.ndarray:
    """Returns T values for ``none`` and T-1 for the differencing transforms."""
    x = np.asarray(x, dtype=float)
    if transform == "none":
        return x.copy()
    if transform == "diff":
        return np.diff(x)
    if transform == "log_diff_x100":
        if np.any(x <= 0):
            raise DataError("log_diff_x100 needs strictly positive values")
        return 100.0 * np.diff(np.log(x))
    raise ConfigError(f"unknown transform {transform!r}")


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def read_table(path) -> tuple[list[str], list[str], dict[str, list[str]]]:
    """Raw read: (column names, period labels, column -> cell strings)."""
    with _open_text(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    body = rows[1:]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} cells, header has {len(header)}")
    periods = [r[0].strip() for r in body]
    cols = {h: [r[j] for r in body] for j, h in enumerate(header)}
    return header, periods, cols


def _check_periods(path, periods: list[str]) -> None:
    bad = [p for p in periods if not _PERIOD.match(p)]
    if bad:
        raise DataError(f"{path}: period labels must be YYYY-MM (bad: {bad[:5]})")
    if len(set(periods)) != len(periods):
        raise DataError(f"{path}: duplicate periods")
    if periods != sorted(periods):
        raise DataError(f"{path}: periods are not sorted")


def load_panel(path, specs: Sequence[SeriesSpec], Q: Optional[int] = None) -> PanelData:
    """Read, transform and validate a panel.

    If any series is differenced, the first period is dropped for every
    series so that all columns stay aligned.  Lags are not trimmed here:
    the presample values are latent in the model and sampled with the
    factors.  ``Q`` only checks that enough periods remain.
    """
    validate_specs(specs)
    header, periods, cols = read_table(path)
    missing_cols = [s.name for s in specs if s.name not in cols]
    if missing_cols:
        raise DataError(f"{path}: series not in file: {missing_cols}")
    _check_periods(path, periods)
    gaps = []
    values = {}
    for s in specs:
        raw = []
        for i, cell in enumerate(cols[s.name]):
            cell = cell.strip()
            try:
                v = float(cell) if cell else np.nan
            except ValueError:
                v = np.nan
            if not np.isfinite(v):
                gaps.append(f"{periods[i]}/{s.name}")
            raw.append(v)
        values[s.name] = np.array(raw)
    if gaps:
        raise DataError(f"{path}: missing or non-numeric cells: {gaps[:20]}{' ...' if len(gaps) > 20 else ''}")
    drop = 1 if any(s.transform != "none" for s in specs) else 0
    out = {}
    for s in specs:
        x = apply_transform(values[s.name], s.transform)
        out[s.name] = x[len(x) - (len(periods) - drop) :]
    for s in specs:
        if s.kind != "proxy" and np.ptp(out[s.name]) == 0:
            raise DataError(f"{path}: series {s.name!r} is constant after transformation")
    T = len(periods) - drop
    if Q is not None and T <= Q:
        raise DataError(f"{path}: {T} usable periods, need more than Q={Q}")
    reg = [s.name for s in specs if s.kind == "regional"]
    agg = [s.name for s in specs if s.kind == "aggregate"]
    prx = [s.name for s in specs if s.kind == "proxy"]
    return PanelData(
        H=np.column_stack([out[n] for n in reg]),
        M=np.column_stack([out[n] for n in agg]) if agg else np.zeros((T, 0)),
        z=out[prx[0]] if prx else None,
        time_index=tuple(periods[drop:]),
        region_names=tuple(reg),
        aggregate_names=tuple(agg),
        proxy_name=prx[0] if prx else None,
    )


def panel_specs(data: PanelData, policy_name: str = POLICY_NAME) -> list[SeriesSpec]:
    """Identity-transform specs matching a panel's own columns."""
    specs = [SeriesSpec(n, "regional") for n in data.region_names]
    specs += [SeriesSpec(n, "aggregate", policy_indicator=(n == policy_name)) for n in data.aggregate_names]
    if data.proxy_name is not None:
        specs.append(SeriesSpec(data.proxy_name, "proxy"))
    return specs


def write_panel(data: PanelData, path, meta: Optional[dict] = None) -> None:
    """Write regional, aggregate and proxy columns; floats use ``repr`` so they round-trip exactly."""
    T = data.T
    periods = list(data.time_index) or monthly_index("2000-01", T)
    reg = list(data.region_names) or [f"region{i + 1}" for i in range(data.R)]
    agg = list(data.aggregate_names) or [f"aggregate{i + 1}" for i in range(data.K)]
    header = ["period"] + reg + agg
    cols = [data.H[:, j] for j in range(data.R)] + [data.M[:, j] for j in range(data.K)]
    if data.z is not None:
        header.append(data.proxy_name or PROXY_NAME)
        cols.append(data.z)
    path = Path(path)
    if path.suffix == ".gz":
        # empty name and zero mtime keep the archive bytes reproducible
        raw = open(path, "wb")
        fh = io.TextIOWrapper(gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0), encoding="utf-8", newline="")
    else:
        raw = None
        fh = open(path, "w", encoding="utf-8", newline="")
    with fh:
        for k in sorted(meta or {}):
            fh.write(f"# {k}={meta[k]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(T):
            w.writerow([periods[t]] + [repr(float(c[t])) for c in cols])
    if raw is not None:
        raw.close()


def monthly_index(start: str, T: int) -> tuple[str, ...]:
    y, m = (int(v) for v in start.split("-"))
    out = []
    for _ in range(T):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return tuple(out)


# ----------------------------------------------------------- synthetic ---


@dataclass(frozen=True)
class SynthConfig:
    dims: ModelDims
    noise_scale: float = 0.5  # measurement variances drawn in noise_scale * [0.5, 1.5]
    relevance: float = 0.8  # loading of z on the structural shock
    proxy_noise: float = 0.6  # sd of the proxy's own noise
    persistence: float = 0.6
    max_radius: float = 0.9
    loading_mean: float = 0.8
    loading_sd: float = 0.4
    burn: int = 100
    start: str = "1997-04"
    aggregate_names: tuple = ()
    with_proxy: bool = True

    def __post_init__(self):
        if not 0 < self.max_radius < 1:
            raise ConfigError("max_radius must lie in (0, 1)")
        if self.noise_scale < 0 or self.proxy_noise < 0:
            raise ConfigError("noise scales must be nonnegative")
        if self.aggregate_names and len(self.aggregate_names) != self.dims.K:
            raise ConfigError("aggregate_names must have K entries")

    def names(self) -> tuple[str, ...]:
        if self.aggregate_names:
            return tuple(self.aggregate_names)
        K = self.dims.K
        if K == 0:
            raise ConfigError("the generator needs K >= 1 (the policy indicator is an aggregate)")
        return DEFAULT_AGGREGATES[: K - 1] + (POLICY_NAME,) if K <= len(DEFAULT_AGGREGATES) else tuple(
            f"aggregate{i + 1}" for i in range(K - 1)
        ) + (POLICY_NAME,)


@dataclass
class SyntheticSample:
    data: PanelData
    params: FavarParams
    factors: np.ndarray  # T x S
    shocks: np.ndarray  # T structural shocks
    innovations: np.ndarray  # T x n regression-form residuals (covariance SigmaU)
    impact: np.ndarray  # structural impact column b
    relative_impact: np.ndarray  # b normalized to -0.25 on the policy indicator
    policy_index: int
    presample: np.ndarray = field(repr=False, default=None)


# Signs of the structural impact by variable name for an expansionary shock.
_IMPACT_SIGNS = {
    "industrial_production": 1.0,
    "cpi": 1.0,
    "housing_starts": 1.0,
    "term_spread": 1.0,
    "unemployment": -1.0,
    "mortgage_rate": -1.0,
    POLICY_NAME: -1.0,
}


def _stable_var(n: int, Q: int, cfg: SynthConfig, rng) -> np.ndarray:
    A = np.zeros((n, n * Q))
    A[:, :n] = np.diag(rng.uniform(0.5, 1.0, n) * cfg.persistence) + 0.05 * rng.standard_normal((n, n))
    for q in range(1, Q):
        A[:, q * n : (q + 1) * n] = 0.1 / (q + 1) * rng.standard_normal((n, n))
    for _ in range(5):
        rho = build_companion(A).spectral_radius
        if not np.isfinite(rho):
            break
        if rho < cfg.max_radius:
            return A
        c = 0.99 * cfg.max_radius / rho
        for q in range(Q):
            A[:, q * n : (q + 1) * n] *= c ** (q + 1)  # scales every companion eigenvalue by c
    raise ConfigError("could not generate a stable VAR")


def generate_synthetic(cfg: SynthConfig, rng: np.random.Generator) -> SyntheticSample:
    """Simulate the FAVAR with one structural shock and an external instrument.

    Innovations are ``u_t = b e_t + w_t`` with ``e_t ~ N(0, 1)`` the structural
    shock and ``z_t = relevance e_t + proxy_noise v_t``.  Conditioning on
    ``z_t`` gives the regression form ``u_t = zeta z_t + u*_t`` with
    ``zeta = b relevance / (relevance^2 + proxy_noise^2)`` and
    ``u*_t ~ N(0, SigmaU)``; the returned ground truth uses that form.
    """
    d = cfg.dims
    R, S, K, Q, T, n = d.R, d.S, d.K, d.Q, d.T, d.n
    names = cfg.names()
    pidx = S + names.index(POLICY_NAME)
    A = _stable_var(n, Q, cfg, rng)

    b = np.empty(n)
    b[:S] = rng.uniform(0.3, 0.6, S)
    for j, nm in enumerate(names):
        b[S + j] = _IMPACT_SIGNS.get(nm, 1.0) * rng.uniform(0.2, 0.5)
    G = 0.3 * rng.standard_normal((n, n))
    Sw = G @ G.T + 0.2 * np.eye(n)
    rho, sn = cfg.relevance, cfg.proxy_noise
    vz = rho**2 + sn**2
    if cfg.with_proxy and vz > 0:
        zeta = b * rho / vz
        SigmaU = Sw + np.outer(b, b) - np.outer(zeta, zeta) * vz
    else:
        zeta = None
        SigmaU = Sw + np.outer(b, b)
    SigmaU = 0.5 * (SigmaU + SigmaU.T)

    LF = np.vstack([np.eye(S), cfg.loading_mean + cfg.loading_sd * rng.standard_normal((R - S, S))])
    LM = np.vstack([np.zeros((S, K)), 0.3 * rng.standard_normal((R - S, K))])
    sigma2 = cfg.noise_scale * rng.uniform(0.5, 1.5, R)

    total = cfg.burn + T
    e = rng.standard_normal(total)
    w = rng.standard_normal((total, n)) @ np.linalg.cholesky(Sw).T
    u = w + np.outer(e, b)
    z_all = rho * e + sn * rng.standard_normal(total)
    Y = np.zeros((total + Q, n))
    for t in range(total):
        x = Y[t : t + Q][::-1].ravel()
        Y[Q + t] = A @ x + u[t]
    Y = Y[cfg.burn :]  # Q presample rows then T periods
    y = Y[Q:]
    F = y[:, :S].copy()
    M = y[:, S:].copy()
    e, z, u = e[cfg.burn :], z_all[cfg.burn :], u[cfg.burn :]
    innov = u - np.outer(z, zeta) if zeta is not None else u
    H = y @ np.hstack([LF, LM]).T + rng.standard_normal((T, R)) * np.sqrt(sigma2)

    params = FavarParams(LambdaF=LF, LambdaM=LM, sigma2=sigma2, A=A, SigmaU=SigmaU, zeta=zeta)
    data = PanelData(
        H=H,
        M=M,
        z=z if cfg.with_proxy else None,
        time_index=monthly_index(cfg.start, T),
        region_names=tuple(f"region{r + 1:03d}" for r in range(R)),
        aggregate_names=names,
        proxy_name=PROXY_NAME if cfg.with_proxy else None,
    )
    rel = b * (-0.25 / b[pidx])
    return SyntheticSample(data, params, F, e, innov, b, rel, pidx, presample=Y[:Q].copy())


FIXTURE_NAME = "synthetic_panel.csv.gz"


def fixture_path() -> Path:
    """Bundled synthetic panel (417 regions, 7 aggregates, 183 months); not real data."""
    return Path(str(resources.files("favar") / "data" / FIXTURE_NAME))


def fixture_specs() -> list[SeriesSpec]:
    header, _, _ = read_table(fixture_path())
    specs = []
    for h in header[1:]:
        if h.startswith("region"):
            specs.append(SeriesSpec(h, "regional"))
        elif h == PROXY_NAME:
            specs.append(SeriesSpec(h, "proxy"))
        else:
            specs.append(SeriesSpec(h, "aggregate", policy_indicator=(h == POLICY_NAME)))
    return specs


def make_fixture(path, seed: int = 20120601) -> None:
    """Regenerate the bundled fixture."""
    cfg = SynthConfig(ModelDims(R=417, S=1, K=7, Q=2, T=183))
    smp = generate_synthetic(cfg, np.random.default_rng(seed))
    write_panel(smp.data, path, meta={"synthetic": "true", "seed": seed})
