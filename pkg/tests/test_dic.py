import numpy as np
import pytest

from favar.data_io import SynthConfig, generate_synthetic
from favar.dic import (
    compute_dic,
    dic_from_deviances,
    dic_generic,
    posterior_mean_params,
    spd_repair,
)
from favar.errors import NumericalError, ParameterError
from favar.gibbs import ChainConfig, ChainOutput, run_chain
from favar.model import ModelDims, default_hyperparams
from favar.state_space import integrated_loglik


def small_chain(n_draws=400, seed=0):
    smp = generate_synthetic(SynthConfig(ModelDims(R=8, S=1, K=2, Q=2, T=80)), np.random.default_rng(seed))
    dims = smp.data.dims(1, 2)
    chain = run_chain(smp.data, dims, default_hyperparams(dims), ChainConfig(n_draws=n_draws + 100, n_burn=100, seed=seed))
    return smp, chain


def test_dic_identity_exact():
    r = dic_from_deviances([10.0, 12.0, 14.0], 11.0)
    assert r.d_bar == 12.0 and r.p_d == 1.0 and r.dic == 13.0 and r.dic == 2 * r.d_bar - r.d_hat
    assert r.n_draws_used == 3


def test_identical_draws_have_zero_penalty():
    smp, chain = small_chain(n_draws=20)
    same = chain.subset(np.zeros(150, dtype=int))
    r = compute_dic(same, smp.data)
    assert abs(r.p_d) < 1e-9 * abs(r.d_bar) and r.dic == pytest.approx(r.d_bar, rel=1e-12)


def test_gaussian_mean_toy_matches_closed_form(rng):
    sigma, n = 1.5, 40
    y = 2.0 + sigma * rng.standard_normal(n)
    mus = y.mean() + sigma / np.sqrt(n) * rng.standard_normal(5000)

    def loglik(mu):
        return -0.5 * n * np.log(2 * np.pi * sigma**2) - 0.5 * np.sum((y - mu) ** 2) / sigma**2

    r = dic_generic(mus, loglik, np.mean)
    const = n * np.log(2 * np.pi * sigma**2)
    ss = np.sum((y - y.mean()) ** 2)
    d_bar = const + (ss + n * np.mean((mus - y.mean()) ** 2)) / sigma**2
    d_hat = const + (ss + n * (mus.mean() - y.mean()) ** 2) / sigma**2
    assert abs(r.d_bar - d_bar) < 1e-6 and abs(r.d_hat - d_hat) < 1e-6
    assert r.p_d == pytest.approx(1.0, abs=0.1)  # one free parameter


def test_failing_likelihood_names_draw():
    def loglik(x):
        if x == 3:
            raise np.linalg.LinAlgError("boom")
        return 0.0

    with pytest.raises(NumericalError, match="draw 3"):
        dic_generic([0, 1, 2, 3, 4], loglik, lambda d: 0)


def test_spd_repair():
    S = np.array([[1.0, 2.0], [2.0, 1.0]])
    out = spd_repair(S)
    assert np.min(np.linalg.eigvalsh(out)) >= 1e-10 * 0.999 and np.array_equal(out, out.T)
    good = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.allclose(spd_repair(good), good, atol=1e-14)


def test_min_draws_enforced():
    smp, chain = small_chain(n_draws=50)
    with pytest.raises(ParameterError):
        compute_dic(chain, smp.data)


def test_dic_plugin_is_posterior_mean():
    smp, chain = small_chain(n_draws=150)
    r = compute_dic(chain, smp.data)
    assert r.d_hat == pytest.approx(-2 * integrated_loglik(posterior_mean_params(chain), smp.data), rel=1e-14)
    assert r.n_draws_used == 150 and np.isfinite(r.dic)


def test_dic_thinning_invariance():
    smp, chain = small_chain(n_draws=1000, seed=3)
    full = compute_dic(chain, smp.data)
    half = compute_dic(chain.subset(slice(None, None, 2)), smp.data)
    assert abs(full.dic - half.dic) < 0.01 * abs(full.dic)
