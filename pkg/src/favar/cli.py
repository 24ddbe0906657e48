"""Command-line interface: ``favar {simulate,estimate,irf,dic}``.

Every run reads one YAML configuration file; a few scalar flags override
fields.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
import time
import zipfile
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .data_io import (
    SeriesSpec,
    SynthConfig,
    generate_synthetic,
    load_panel,
    policy_index,
    validate_specs,
    write_panel,
)
from .dic import compute_dic
from .errors import ConfigError, DataError, FavarError, NumericalError
from .gibbs import ChainConfig, ChainOutput, GibbsSampler
from .identification import DEFAULT_MAX_TRIES, DEFAULT_SIGNS, SignRestrictionSpec
from .irf import compute_irfs, write_cumulative_table, write_irf_table
from .model import DEFAULT_H_MAX, FavarParams, Hyperparams, ModelDims, default_hyperparams

log = logging.getLogger("favar")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SeriesEntry(_Strict):
    name: str
    kind: Literal["regional", "aggregate", "proxy"]
    transform: Literal["none", "log_diff_x100", "diff"] = "none"
    policy_indicator: bool = False


class DataSection(_Strict):
    panel: Optional[str] = None
    series: Union[list[SeriesEntry], str, None] = None  # inline list or path to a YAML list


class ModelSection(_Strict):
    S: int = Field(1, ge=1)
    Q: int = Field(2, ge=1)
    H_max: int = Field(DEFAULT_H_MAX, ge=0)


class HyperSection(_Strict):
    vartheta_a: Optional[float] = Field(None, gt=0)
    vartheta_lambda: Optional[float] = Field(None, gt=0)
    c0: Optional[float] = Field(None, gt=0)
    c1: Optional[float] = Field(None, gt=0)
    d0: Optional[float] = Field(None, gt=0)
    d1: Optional[float] = Field(None, gt=0)
    e0: Optional[float] = Field(None, gt=0)
    e1: Optional[float] = Field(None, gt=0)
    v: Optional[float] = Field(None, gt=0)
    sigma_bar_scale: Optional[float] = Field(None, gt=0)


class ChainSection(_Strict):
    n_draws: int = Field(20_000, ge=1)
    n_burn: int = Field(10_000, ge=0)
    thin: int = Field(1, ge=1)
    store_factors: bool = False
    checkpoint_every: int = Field(500, ge=0)

    @model_validator(mode="after")
    def _burn(self):
        if self.n_burn >= self.n_draws:
            raise ValueError("n_burn must be smaller than n_draws")
        return self


class IdentSection(_Strict):
    method: Literal["proxy", "sign"] = "proxy"
    sign_restrictions: Optional[dict[str, Literal["+", "-"]]] = None
    max_tries: int = Field(DEFAULT_MAX_TRIES, ge=1)


class SimulateSection(_Strict):
    R: int = Field(30, ge=2)
    S: int = Field(1, ge=1)
    K: int = Field(2, ge=1)
    Q: int = Field(2, ge=1)
    T: int = Field(300, ge=3)
    noise_scale: float = Field(0.5, ge=0)
    relevance: float = 0.8
    proxy_noise: float = Field(0.6, ge=0)


class RunConfig(_Strict):
    data: DataSection = DataSection()
    model: ModelSection = ModelSection()
    hyper: HyperSection = HyperSection()
    chain: ChainSection = ChainSection()
    identification: IdentSection = IdentSection()
    simulate: SimulateSection = SimulateSection()
    output_dir: str = "favar_out"
    seed: int = Field(0, ge=0)

    def digest(self) -> str:
        # output location does not affect results
        blob = json.dumps(self.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ------------------------------------------------------------- helpers ---


def load_config(path, overrides: dict) -> tuple[RunConfig, Path]:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = raw
        *head, last = dotted.split(".")
        for k in head:
            node = node.setdefault(k, {})
        node[last] = value
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, path.parent


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def resolve_specs(cfg: RunConfig, base: Path) -> list[SeriesSpec]:
    entries = cfg.data.series
    if entries is None:
        raise ConfigError("data.series is required")
    if isinstance(entries, str):
        try:
            items = yaml.safe_load(_resolve(base, entries).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read series file {entries}: {exc}") from exc
        try:
            entries = [SeriesEntry.model_validate(e) for e in items]
        except (ValidationError, TypeError) as exc:
            raise ConfigError(f"invalid series file {entries}: {exc}") from exc
    return [SeriesSpec(**e.model_dump()) for e in entries]


def build_hyper(cfg: RunConfig, dims: ModelDims) -> Hyperparams:
    base = default_hyperparams(dims)
    h = cfg.hyper.model_dump(exclude_none=True)
    scale = h.pop("sigma_bar_scale", None)
    kw = {k: getattr(base, k) for k in ("vartheta_a", "vartheta_lambda", "c0", "c1", "d0", "d1", "e0", "e1", "v")}
    kw.update(h)
    Sb = base.Sigma_bar if scale is None else scale * np.eye(dims.n)
    return Hyperparams(Sigma_bar=Sb, **kw)


def _meta(cfg: RunConfig, **extra) -> dict:
    return {"config_hash": cfg.digest(), "seed": cfg.seed, **extra}


def write_npz(path: Path, arrays: dict, meta: dict) -> None:
    """npz with fixed zip timestamps so equal content gives equal bytes."""
    tmp = Path(str(path) + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        items = {"__meta__": np.array(json.dumps(meta, sort_keys=True)), **arrays}
        for name in items:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(items[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())
    tmp.replace(path)


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _settings(cfg: RunConfig, dims: ModelDims, hyper: Hyperparams) -> dict:
    return {
        "S": dims.S,
        "K": dims.K,
        "R": dims.R,
        "T": dims.T,
        "Q": dims.Q,
        "H_max": dims.H_max,
        "n_draws": cfg.chain.n_draws,
        "n_burn": cfg.chain.n_burn,
        "thin": cfg.chain.thin,
        "vartheta_a": hyper.vartheta_a,
        "vartheta_lambda": hyper.vartheta_lambda,
        "c0": hyper.c0,
        "c1": hyper.c1,
        "d0": hyper.d0,
        "d1": hyper.d1,
        "e0": hyper.e0,
        "e1": hyper.e1,
        "v": hyper.v,
        "Sigma_bar": hyper.Sigma_bar,
        "identification": cfg.identification.method,
    }


# ------------------------------------------------------------ commands ---


def cmd_simulate(cfg: RunConfig, base: Path, args) -> int:
    s = cfg.simulate
    try:
        dims = ModelDims(R=s.R, S=s.S, K=s.K, Q=s.Q, T=s.T)
        scfg = SynthConfig(dims, noise_scale=s.noise_scale, relevance=s.relevance, proxy_noise=s.proxy_noise)
    except FavarError as exc:
        raise ConfigError(str(exc)) from exc
    smp = generate_synthetic(scfg, np.random.default_rng(cfg.seed))
    out = _resolve(base, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg)
    write_panel(smp.data, out / "panel.csv", meta=meta)
    p = smp.params
    arrays = {"LambdaF": p.LambdaF, "LambdaM": p.LambdaM, "sigma2": p.sigma2, "A": p.A, "SigmaU": p.SigmaU,
              "factors": smp.factors, "shocks": smp.shocks, "impact": smp.impact,
              "relative_impact": smp.relative_impact}
    if p.zeta is not None:
        arrays["zeta"] = p.zeta
    write_npz(out / "truth.npz", arrays, {**meta, "policy_index": smp.policy_index})
    series = [{"name": n, "kind": "regional"} for n in smp.data.region_names]
    series += [{"name": n, "kind": "aggregate", "policy_indicator": n == smp.data.aggregate_names[-1]}
               for n in smp.data.aggregate_names]
    if smp.data.proxy_name:
        series.append({"name": smp.data.proxy_name, "kind": "proxy"})
    (out / "series.yaml").write_text(yaml.safe_dump(series, sort_keys=False))
    log.info("wrote synthetic panel to %s", out)
    return EXIT_OK


def load_truth(path) -> tuple[FavarParams, dict]:
    with np.load(path, allow_pickle=False) as f:
        meta = json.loads(str(f["__meta__"]))
        params = FavarParams(LambdaF=f["LambdaF"], LambdaM=f["LambdaM"], sigma2=f["sigma2"], A=f["A"],
                             SigmaU=f["SigmaU"], zeta=f["zeta"] if "zeta" in f.files else None)
    return params, meta


def _load_data(cfg: RunConfig, base: Path):
    if cfg.data.panel is None:
        raise ConfigError("data.panel is required")
    specs = resolve_specs(cfg, base)
    validate_specs(specs, cfg.model.S)
    data = load_panel(_resolve(base, cfg.data.panel), specs, Q=cfg.model.Q)
    return data, specs


def cmd_estimate(cfg: RunConfig, base: Path, args) -> int:
    data, specs = _load_data(cfg, base)
    try:
        dims = data.dims(cfg.model.S, cfg.model.Q, cfg.model.H_max)
        hyper = build_hyper(cfg, dims)
        chain_cfg = ChainConfig(n_draws=cfg.chain.n_draws, n_burn=cfg.chain.n_burn, thin=cfg.chain.thin,
                                seed=cfg.seed, store_factors=cfg.chain.store_factors)
    except FavarError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.identification.method == "proxy" and data.z is None:
        raise ConfigError("proxy identification needs a proxy series")
    out = _resolve(base, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg, data_checksum=data.checksum(), policy_index=policy_index(specs, dims.S),
                 macro_names=[f"factor{i + 1}" for i in range(dims.S)] + list(data.aggregate_names),
                 region_names=list(data.region_names), S=dims.S, Q=dims.Q)
    summary = {**meta, "settings": _settings(cfg, dims, hyper)}
    if args.dry_run:
        summary["dry_run"] = True
        write_json(out / "summary.json", summary)
        return EXIT_OK

    ckpt = out / "checkpoint.npz"
    if args.resume and ckpt.exists():
        smp = GibbsSampler.from_checkpoint(ckpt, data, hyper)
        if smp.config != chain_cfg:
            raise ConfigError("checkpoint was written with a different chain configuration")
        log.info("resuming at iteration %d", smp.iteration)
    else:
        smp = GibbsSampler(data, dims, hyper, chain_cfg)
    t0 = time.perf_counter()
    every = max(1, cfg.chain.n_draws // 20)
    smp.run(until=args.stop_after, checkpoint=ckpt, checkpoint_every=cfg.chain.checkpoint_every,
            progress=lambda i: log.info("iteration %d/%d", i, cfg.chain.n_draws) if i % every == 0 else None)
    if not smp.done:
        log.info("stopped at iteration %d; rerun with --resume", smp.iteration)
        return EXIT_OK
    chain = smp.output()
    write_npz(out / "chain.npz", chain.arrays(), {**meta, "format_version": 1, "diagnostics": {}})
    summary["elapsed_seconds"] = round(time.perf_counter() - t0, 3)
    summary["diagnostics"] = chain.diagnostics
    write_json(out / "summary.json", summary)
    return EXIT_OK


def load_chain(path) -> tuple[ChainOutput, dict]:
    try:
        return ChainOutput.load(path)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read chain {path}: {exc}") from exc


def cmd_irf(cfg: RunConfig, base: Path, args) -> int:
    chain, meta = load_chain(Path(args.chain))
    if meta.get("S") != cfg.model.S:
        log.warning("chain was estimated with S=%s; using the chain's value", meta.get("S"))
    names = meta["macro_names"]
    idc = cfg.identification
    rng = np.random.default_rng(cfg.seed)
    spec = None
    if idc.method == "sign":
        signs = idc.sign_restrictions or {k: ("+" if v > 0 else "-") for k, v in DEFAULT_SIGNS.items() if k in names}
        try:
            spec = SignRestrictionSpec.from_names(signs, names, idc.max_tries)
        except FavarError as exc:
            raise ConfigError(str(exc)) from exc
    irfs = compute_irfs(list(chain), meta["policy_index"], idc.method, cfg.model.H_max, rng=rng, sign_spec=spec,
                        macro_names=names, region_names=meta["region_names"])
    out = _resolve(base, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = _meta(cfg, chain_config_hash=meta.get("config_hash"), identification=idc.method)
    S = meta["S"]
    write_irf_table(out / "irf_macro.csv", irfs.macro, irfs.cumulative_macro, names, m)
    write_irf_table(out / "irf_factor.csv", irfs.factor, irfs.cumulative_macro[:, :, :S], names[:S], m)
    write_irf_table(out / "irf_regional.csv", irfs.regional, irfs.cumulative_regional_path, irfs.region_names, m)
    write_cumulative_table(out / "irf_cumulative.csv", irfs, m)
    cum = irfs.cumulative_regional[1]
    write_json(out / "irf_summary.json", {**m, "H_max": irfs.H_max, **irfs.diagnostics,
                                          "cumulative_median_mean": float(cum.mean()),
                                          "cumulative_median_sd": float(cum.std(ddof=1)) if cum.size > 1 else 0.0})
    return EXIT_OK


def cmd_dic(cfg: RunConfig, base: Path, args) -> int:
    data, _ = _load_data(cfg, base)
    rows = []
    for p in args.chains:
        chain, meta = load_chain(Path(p))
        if meta.get("data_checksum") != data.checksum():
            raise DataError(f"{p}: chain was estimated on different data (checksum mismatch)")
        res = compute_dic(chain, data)
        rows.append((meta["S"], res, p))
    rows.sort(key=lambda r: r[1].dic)
    out = _resolve(base, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "dic_table.csv", "w") as fh:
        for k, v in sorted(_meta(cfg).items()):
            fh.write(f"# {k}={v}\n")
        fh.write("S,dic,d_bar,d_hat,p_d,n_draws,chain\n")
        for S, r, p in rows:
            fh.write(f"{S},{r.dic!r},{r.d_bar!r},{r.d_hat!r},{r.p_d!r},{r.n_draws_used},{p}\n")
    for S, r, _ in rows:
        print(f"S={S}  dic={r.dic:.3f}  p_d={r.p_d:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- main ---


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="favar", description="Bayesian FAVAR estimation and regional IRFs")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir")
        p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        return p

    common(sub.add_parser("simulate", help="write a synthetic panel and its ground truth"))
    est = common(sub.add_parser("estimate", help="run the Gibbs sampler"))
    est.add_argument("--S", type=int)
    est.add_argument("--n-draws", type=int)
    est.add_argument("--n-burn", type=int)
    est.add_argument("--dry-run", action="store_true", help="validate and write the resolved settings only")
    est.add_argument("--resume", action="store_true", help="continue from output_dir/checkpoint.npz")
    est.add_argument("--stop-after", type=int, default=None, help=argparse.SUPPRESS)
    irf = common(sub.add_parser("irf", help="identify the shock and write IRF tables"))
    irf.add_argument("chain", help="chain.npz from estimate")
    irf.add_argument("--method", choices=("proxy", "sign"))
    dic = common(sub.add_parser("dic", help="compare chains with different factor counts"))
    dic.add_argument("chains", nargs="+")
    return ap


def _overrides(args) -> dict:
    out = None if args.output_dir is None else str(Path(args.output_dir).resolve())
    o = {"seed": args.seed, "output_dir": out}
    for flag, key in (("S", "model.S"), ("n_draws", "chain.n_draws"), ("n_burn", "chain.n_burn"),
                      ("method", "identification.method")):
        if hasattr(args, flag):
            o[key] = getattr(args, flag)
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    commands = {"simulate": cmd_simulate, "estimate": cmd_estimate, "irf": cmd_irf, "dic": cmd_dic}
    try:
        cfg, base = load_config(args.config, _overrides(args))
        return commands[args.command](cfg, base, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FavarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
