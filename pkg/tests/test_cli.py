import csv
import hashlib
import json

import numpy as np
import pytest
import yaml

from favar import cli
from favar.gibbs import ChainOutput

SMALL_CHAIN = {"n_draws": 60, "n_burn": 20, "checkpoint_every": 5}


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_cfg(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def simulate(tmp_path, name="sim", seed=1, **sim):
    sim = {"R": 10, "S": 1, "K": 2, "T": 80, **sim}
    cfg = write_cfg(tmp_path / f"{name}.yaml", {"simulate": sim, "output_dir": name, "seed": seed})
    assert cli.main(["simulate", cfg]) == 0
    return tmp_path / name


def estimate_cfg(sim_dir, out="est", **extra):
    cfg = {"data": {"panel": "panel.csv", "series": "series.yaml"}, "chain": SMALL_CHAIN,
           "output_dir": out, "seed": 3, **extra}
    return write_cfg(sim_dir / f"{out}.yaml", cfg)


def test_simulate_counts_and_header(tmp_path):
    out = simulate(tmp_path, R=30, T=300)
    rows = [r for r in csv.reader(open(out / "panel.csv")) if not r[0].startswith("#")]
    assert len(rows) == 301 and len(rows[0]) == 1 + 33
    assert rows[0][0] == "period" and rows[0][-1] == "ff_surprise" and rows[0][-2] == "one_year_rate"
    assert "config_hash=" in (out / "panel.csv").read_text().splitlines()[0]


def test_simulate_deterministic(tmp_path):
    a = simulate(tmp_path, "a")
    b = simulate(tmp_path, "b")
    for f in ("panel.csv", "truth.npz", "series.yaml"):
        assert sha(a / f) == sha(b / f), f


def test_truth_reloads_valid(tmp_path):
    out = simulate(tmp_path)
    params, meta = cli.load_truth(out / "truth.npz")
    params.check()
    assert meta["seed"] == 1 and meta["policy_index"] == 2


def test_dry_run_defaults(tmp_path):
    sim = simulate(tmp_path)
    cfg = write_cfg(sim / "d.yaml", {"data": {"panel": "panel.csv", "series": "series.yaml"}, "output_dir": "dry"})
    assert cli.main(["estimate", cfg, "--dry-run"]) == 0
    s = json.loads((sim / "dry" / "summary.json").read_text())["settings"]
    assert (s["Q"], s["n_draws"], s["n_burn"], s["H_max"]) == (2, 20000, 10000, 72)
    assert s["vartheta_a"] == s["vartheta_lambda"] == 0.1 and s["v"] == 4
    assert s["Sigma_bar"] == (0.01 * np.eye(3)).tolist()
    assert not (sim / "dry" / "chain.npz").exists()


def test_schema_error_exits_2_without_outputs(tmp_path):
    sim = simulate(tmp_path)
    cfg = write_cfg(sim / "bad.yaml", {"data": {"panel": "panel.csv", "series": "series.yaml"},
                                       "chain": {"n_draws": 10, "n_burn": 2, "colour": "red"}, "output_dir": "bad"})
    assert cli.main(["estimate", cfg]) == 2
    assert not (sim / "bad").exists()
    cfg = write_cfg(sim / "bad2.yaml", {"chain": {"n_draws": 10, "n_burn": 20}, "output_dir": "bad2"})
    assert cli.main(["estimate", cfg]) == 2
    assert not (sim / "bad2").exists()


def test_data_error_exit_code(tmp_path):
    sim = simulate(tmp_path)
    (sim / "panel.csv").write_text((sim / "panel.csv").read_text().replace("1997-05", "1997-04"))  # duplicate period
    assert cli.main(["estimate", estimate_cfg(sim)]) == 3


def test_estimate_resume_bitwise(tmp_path):
    sim = simulate(tmp_path)
    assert cli.main(["estimate", estimate_cfg(sim, "full")]) == 0
    cfg = estimate_cfg(sim, "part")
    assert cli.main(["estimate", cfg, "--stop-after", "27"]) == 0
    assert not (sim / "part" / "chain.npz").exists()
    assert cli.main(["estimate", cfg, "--resume"]) == 0
    assert sha(sim / "full" / "chain.npz") == sha(sim / "part" / "chain.npz")
    summary = json.loads((sim / "full" / "summary.json").read_text())
    assert summary["elapsed_seconds"] > 0 and "config_hash" in summary


@pytest.fixture(scope="module")
def estimated(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    sim = simulate(tmp)
    assert cli.main(["estimate", estimate_cfg(sim)]) == 0
    return sim


def test_irf_proxy_tables(estimated):
    sim = estimated
    cfg = estimate_cfg(sim, "irf")
    assert cli.main(["irf", cfg, str(sim / "est" / "chain.npz")]) == 0
    out = sim / "irf"
    for f in ("irf_macro.csv", "irf_factor.csv", "irf_regional.csv", "irf_cumulative.csv", "irf_summary.json"):
        assert (out / f).exists()
    rows = [r for r in csv.reader(open(out / "irf_macro.csv")) if not r[0].startswith("#")]
    assert rows[0] == ["series", "horizon", "q16", "q50", "q84", "cumulative"]
    policy = [r for r in rows[1:] if r[0] == "one_year_rate"]
    assert len(policy) == 73 and float(policy[0][3]) == -0.25
    assert len(rows) == 1 + 73 * 3


def test_irf_sign_summary(estimated):
    sim = estimated
    cfg = estimate_cfg(sim, "sign")
    assert cli.main(["irf", cfg, str(sim / "est" / "chain.npz"), "--method", "sign"]) == 0
    s = json.loads((sim / "sign" / "irf_summary.json").read_text())
    assert s["method"] == "sign" and 0 < s["acceptance_rate"] <= 1 and "excluded" in s


def test_irf_deterministic(estimated):
    sim = estimated
    for name in ("r1", "r2"):
        assert cli.main(["irf", estimate_cfg(sim, name), str(sim / "est" / "chain.npz"), "--method", "sign"]) == 0
    for f in ("irf_macro.csv", "irf_regional.csv", "irf_cumulative.csv"):
        assert sha(sim / "r1" / f) == sha(sim / "r2" / f)


def test_dic_sorted_and_checksum_guard(estimated, tmp_path):
    sim = estimated
    chain, meta = ChainOutput.load(sim / "est" / "chain.npz")
    assert len(chain) == 40
    # repeat the draws so the chain meets the minimum count, and fake a second model
    big = chain.subset(np.tile(np.arange(40), 3))
    cli.write_npz(sim / "s1.npz", big.arrays(), meta)
    worse = big.subset(slice(None))
    worse.sigma2 = worse.sigma2 * 3.0
    cli.write_npz(sim / "s2.npz", worse.arrays(), {**meta, "S": 2})
    cfg = estimate_cfg(sim, "dic")
    assert cli.main(["dic", cfg, str(sim / "s2.npz"), str(sim / "s1.npz")]) == 0
    rows = [r for r in csv.reader(open(sim / "dic" / "dic_table.csv")) if not r[0].startswith("#")]
    dics = [float(r[1]) for r in rows[1:]]
    assert dics == sorted(dics) and rows[1][0] == "1"
    cli.write_npz(sim / "s3.npz", big.arrays(), {**meta, "data_checksum": "0" * 64})
    assert cli.main(["dic", cfg, str(sim / "s3.npz")]) == 3


def test_threads_flag_leaves_chain_unchanged(tmp_path):
    sim = simulate(tmp_path)
    assert cli.main(["estimate", estimate_cfg(sim, "t1"), "--threads", "1"]) == 0
    assert cli.main(["estimate", estimate_cfg(sim, "t2"), "--threads", "2"]) == 0
    assert sha(sim / "t1" / "chain.npz") == sha(sim / "t2" / "chain.npz")
