import gzip

import numpy as np
import pytest

from favar.data_io import (
    POLICY_NAME,
    SeriesSpec,
    SynthConfig,
    apply_transform,
    fixture_path,
    fixture_specs,
    generate_synthetic,
    load_panel,
    panel_specs,
    policy_index,
    validate_specs,
    write_panel,
)
from favar.errors import ConfigError, DataError
from favar.model import ModelDims


def specs3(transform="log_diff_x100"):
    return [
        SeriesSpec("r1", "regional", transform),
        SeriesSpec("r2", "regional", transform),
        SeriesSpec("rate", "aggregate", "diff", policy_indicator=True),
    ]


def write(tmp_path, text, name="p.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


PANEL = """# source=handmade
period,r1,rate,r2
2000-01,100,5.0,50
2000-02,102,5.25,51
2000-03,101,5.0,53
2000-04,104,4.5,52
2000-05,105,4.75,54
"""


def test_log_diff_arithmetic():
    assert apply_transform([100.0, 102.0], "log_diff_x100")[0] == pytest.approx(1.9803, abs=5e-5)
    x = np.array([3.0, -1.0, 2.5])
    assert np.array_equal(apply_transform(x, "none"), x)
    assert np.array_equal(apply_transform(x, "diff"), [-4.0, 3.5])
    with pytest.raises(DataError):
        apply_transform([1.0, 0.0], "log_diff_x100")


def test_handmade_panel_loads_after_one_difference(tmp_path):
    data = load_panel(write(tmp_path, PANEL), specs3(), Q=2)
    assert data.H.shape == (4, 2) and data.M.shape == (4, 1) and data.z is None
    assert data.region_names == ("r1", "r2") and data.aggregate_names == ("rate",)
    assert data.time_index == ("2000-02", "2000-03", "2000-04", "2000-05")
    assert data.H[0, 0] == pytest.approx(100 * np.log(1.02), abs=1e-12)
    assert np.allclose(data.M[:, 0], [0.25, -0.25, -0.5, 0.25])


def test_no_transform_keeps_every_row(tmp_path):
    specs = [SeriesSpec("r1", "regional"), SeriesSpec("r2", "regional"), SeriesSpec("rate", "aggregate", policy_indicator=True)]
    data = load_panel(write(tmp_path, PANEL), specs)
    assert data.H.shape == (5, 2) and data.H[0, 1] == 50.0


def test_missing_cells_listed(tmp_path):
    bad = PANEL.replace("2000-03,101,5.0,53", "2000-03,,5.0,NA")
    with pytest.raises(DataError, match=r"2000-03/r1.*2000-03/r2"):
        load_panel(write(tmp_path, bad), specs3())


def test_period_errors(tmp_path):
    dup = PANEL.replace("2000-03", "2000-02")
    with pytest.raises(DataError, match="duplicate"):
        load_panel(write(tmp_path, dup), specs3())
    unsorted = PANEL.replace("2000-03", "2000-09")
    with pytest.raises(DataError, match="sorted"):
        load_panel(write(tmp_path, unsorted), specs3())
    badfmt = PANEL.replace("2000-03", "2000/03")
    with pytest.raises(DataError, match="YYYY-MM"):
        load_panel(write(tmp_path, badfmt), specs3())


def test_constant_series_rejected(tmp_path):
    const = "period,r1,rate,r2\n" + "".join(f"2000-0{i},7,{i},{i * i}\n" for i in range(1, 6))
    specs = [SeriesSpec("r1", "regional"), SeriesSpec("r2", "regional"), SeriesSpec("rate", "aggregate", policy_indicator=True)]
    with pytest.raises(DataError, match="constant"):
        load_panel(write(tmp_path, const), specs)


def test_missing_column_and_short_panel(tmp_path):
    with pytest.raises(DataError, match="not in file"):
        load_panel(write(tmp_path, PANEL), specs3() + [SeriesSpec("gdp", "aggregate")])
    with pytest.raises(DataError, match="usable periods"):
        load_panel(write(tmp_path, PANEL), specs3(), Q=4)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SeriesSpec("x", "national")
    with pytest.raises(ConfigError):
        SeriesSpec("x", "regional", "log")
    with pytest.raises(ConfigError):
        SeriesSpec("x", "regional", policy_indicator=True)
    base = specs3()
    with pytest.raises(ConfigError, match="duplicate"):
        validate_specs(base + [base[0]])
    with pytest.raises(ConfigError, match="policy"):
        validate_specs(base[:2])
    with pytest.raises(ConfigError, match="proxy"):
        validate_specs(base + [SeriesSpec("z1", "proxy"), SeriesSpec("z2", "proxy")])
    with pytest.raises(ConfigError, match="regional"):
        validate_specs(base, S=3)
    assert policy_index(base, S=1) == 1


def test_write_load_round_trip_bit_exact(tmp_path):
    smp = generate_synthetic(SynthConfig(ModelDims(R=12, S=1, K=3, Q=2, T=40)), np.random.default_rng(0))
    for name in ("panel.csv", "panel.csv.gz"):
        path = tmp_path / name
        write_panel(smp.data, path, meta={"seed": 0})
        back = load_panel(path, panel_specs(smp.data))
        assert np.array_equal(back.H, smp.data.H) and np.array_equal(back.M, smp.data.M)
        assert np.array_equal(back.z, smp.data.z) and back.time_index == smp.data.time_index
        assert back.checksum() == smp.data.checksum()


def test_gzip_output_is_byte_deterministic(tmp_path):
    smp = generate_synthetic(SynthConfig(ModelDims(R=5, S=1, K=2, Q=2, T=10)), np.random.default_rng(1))
    write_panel(smp.data, tmp_path / "a.csv.gz")
    write_panel(smp.data, tmp_path / "b.csv.gz")
    assert (tmp_path / "a.csv.gz").read_bytes() == (tmp_path / "b.csv.gz").read_bytes()


# ----------------------------------------------------------- generator ---


def test_generator_seed_deterministic():
    cfg = SynthConfig(ModelDims(R=10, S=1, K=2, Q=2, T=50))
    a = generate_synthetic(cfg, np.random.default_rng(4))
    b = generate_synthetic(cfg, np.random.default_rng(4))
    assert a.data.checksum() == b.data.checksum() and np.array_equal(a.params.A, b.params.A)


def test_generator_zero_noise_identity_rows_equal_factors():
    smp = generate_synthetic(SynthConfig(ModelDims(R=6, S=2, K=2, Q=2, T=80), noise_scale=0.0), np.random.default_rng(2))
    assert np.array_equal(smp.data.H[:, :2], smp.factors)


def test_generator_innovation_covariance_large_sample():
    smp = generate_synthetic(SynthConfig(ModelDims(R=5, S=1, K=3, Q=2, T=50_000)), np.random.default_rng(5))
    u = smp.innovations
    C = u.T @ u / len(u)
    S = smp.params.SigmaU
    assert np.linalg.norm(C - S) / np.linalg.norm(S) < 0.02


def test_generator_relevance_recovered():
    cfg = SynthConfig(ModelDims(R=5, S=1, K=2, Q=2, T=5000), relevance=0.7, proxy_noise=0.5)
    smp = generate_synthetic(cfg, np.random.default_rng(6))
    e, z = smp.shocks, smp.data.z
    beta = (e @ z) / (e @ e)
    se = np.sqrt(np.sum((z - beta * e) ** 2) / (len(e) - 1) / (e @ e))
    assert abs(beta - 0.7) < 3 * se


def test_generator_stable_and_named():
    smp = generate_synthetic(SynthConfig(ModelDims(R=10, S=1, K=7, Q=2, T=30)), np.random.default_rng(7))
    from favar.model import build_companion

    assert build_companion(smp.params.A).spectral_radius < 0.9
    assert smp.data.aggregate_names[-1] == POLICY_NAME
    assert smp.relative_impact[smp.policy_index] == pytest.approx(-0.25, abs=1e-15)
    smp.params.check()


def test_generator_rejects_bad_config():
    with pytest.raises(ConfigError):
        SynthConfig(ModelDims(R=5, S=1, K=2, Q=2, T=10), max_radius=1.2)
    with pytest.raises(ConfigError):
        SynthConfig(ModelDims(R=5, S=1, K=2, Q=2, T=10), aggregate_names=("a",))


def test_bundled_fixture_shape():
    path = fixture_path()
    assert path.exists()
    with gzip.open(path, "rt") as fh:
        assert fh.readline().startswith("#")
    data = load_panel(path, fixture_specs())
    assert data.H.shape == (183, 417) and data.M.shape == (183, 7) and data.z.shape == (183,)
