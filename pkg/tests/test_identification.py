import numpy as np
import pytest

from favar.errors import DegenerateInstrumentError, NumericalError, ParameterError
from favar.identification import (
    DEFAULT_SIGNS,
    POLICY_SHOCK,
    SignRestriction,
    SignRestrictionSpec,
    default_sign_spec,
    draw_rotation,
    normalize_impact,
    proxy_impact,
    sign_restricted_impact,
)
from favar.model import FavarParams

NAMES = ("factor1", "industrial_production", "cpi", "housing_starts", "term_spread", "one_year_rate")


def params_with_zeta(zeta):
    n = len(zeta)
    return FavarParams(
        LambdaF=np.eye(2, 1) + np.array([[0.0], [0.5]]),
        LambdaM=np.zeros((2, n - 1)),
        sigma2=np.ones(2),
        A=np.zeros((n, 2 * n)),
        SigmaU=np.eye(n),
        zeta=np.asarray(zeta, float),
    )


def random_spd(rng, n):
    G = rng.standard_normal((n, n))
    return G @ G.T + 0.5 * np.eye(n)


def test_proxy_normalization_arithmetic():
    imp = proxy_impact(params_with_zeta([0.2, -0.1]), 1)
    assert imp.normalization_scale == pytest.approx(2.5, abs=1e-15)
    assert np.allclose(imp.impact, [0.5, -0.25], atol=1e-15) and imp.impact[1] == POLICY_SHOCK
    assert imp.source == "proxy"


def test_proxy_fixed_point():
    z = np.array([0.7, -0.25, 0.1])
    imp = proxy_impact(params_with_zeta(z), 1)
    assert imp.normalization_scale == 1.0 and np.array_equal(imp.impact, z)


def test_proxy_policy_entry_exact_for_random_zeta(rng):
    for _ in range(1000):
        z = rng.standard_normal(4)
        p = int(rng.integers(4))
        assert normalize_impact(z, p, "proxy").impact[p] == -0.25


def test_proxy_degenerate_instrument():
    with pytest.raises(DegenerateInstrumentError):
        proxy_impact(params_with_zeta([0.3, 0.0]), 1)


def test_proxy_requires_zeta():
    p = params_with_zeta([0.3, 0.1])
    p = FavarParams(p.LambdaF, p.LambdaM, p.sigma2, p.A, p.SigmaU, None)
    with pytest.raises(ParameterError):
        proxy_impact(p, 1)


def test_rotation_orthogonal(rng):
    for dim in (1, 2, 3, 6, 10):
        Q = draw_rotation(dim, rng)
        assert np.max(np.abs(Q.T @ Q - np.eye(dim))) < 1e-12


def test_rotation_dim_one_fair_coin(rng):
    draws = np.array([draw_rotation(1, rng)[0, 0] for _ in range(10_000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    p = np.mean(draws > 0)
    assert abs(p - 0.5) < 3 * np.sqrt(0.25 / 10_000)


def test_rotation_first_column_uniform_on_sphere(rng):
    dim, N = 4, 100_000
    cols = np.array([draw_rotation(dim, rng)[:, 0] for _ in range(N)])
    se_mean = np.sqrt(1 / dim / N)
    assert np.max(np.abs(cols.mean(0))) < 4 * se_mean
    # var of x_i^2 on the sphere: 2(dim-1) / (dim^2 (dim+2))
    se_var = np.sqrt(2 * (dim - 1) / (dim**2 * (dim + 2)) / N)
    assert np.max(np.abs((cols**2).mean(0) - 1 / dim)) < 4 * se_var


def test_rotation_rejects_zero_dim(rng):
    with pytest.raises(ParameterError):
        draw_rotation(0, rng)


def test_single_restriction_acceptance_half(rng):
    """With SigmaU = I and one column per try, a Haar column passes {y1 > 0} half the time."""
    N = 10_000
    hits = sum(draw_rotation(3, rng)[0, 0] > 0 for _ in range(N))
    assert abs(hits / N - 0.5) < 4 * np.sqrt(0.25 / N)


def test_default_spec_encodes_expected_signs():
    spec = default_sign_spec(NAMES)
    got = {NAMES[r.index]: r.sign for r in spec.restrictions}
    assert got == {"industrial_production": 1, "housing_starts": 1, "cpi": 1, "term_spread": 1, "one_year_rate": -1}
    assert DEFAULT_SIGNS == got


def test_accepted_impacts_satisfy_restrictions(rng):
    spec = default_sign_spec(NAMES, max_tries=2000)
    accepted = 0
    for _ in range(300):
        S = random_spd(rng, 6)
        imp = sign_restricted_impact(S, spec, 5, rng)
        if imp is None:
            continue
        accepted += 1
        assert imp.impact[5] == POLICY_SHOCK
        assert spec.satisfied(imp.impact)
        # unscaled column lies on the Cholesky image of the unit sphere
        c = imp.impact / imp.normalization_scale
        q = np.linalg.solve(np.linalg.cholesky(S), c)
        assert abs(np.linalg.norm(q) - 1) < 1e-10
    assert accepted > 250


def test_sign_rejection_marker_after_budget(rng):
    # the policy entry must fall, so requiring it to rise can never be met
    spec = SignRestrictionSpec((SignRestriction(0, 1),), max_tries=5)
    assert sign_restricted_impact(np.eye(2), spec, 0, rng) is None


def test_sign_cholesky_failure(rng):
    spec = SignRestrictionSpec((SignRestriction(0, 1),))
    with pytest.raises(NumericalError):
        sign_restricted_impact(-np.eye(2), spec, 1, rng)


def test_spec_validation():
    with pytest.raises(ParameterError):
        SignRestrictionSpec(())
    with pytest.raises(ParameterError):
        SignRestrictionSpec((SignRestriction(0, 2),))
    with pytest.raises(ParameterError):
        SignRestrictionSpec((SignRestriction(0, 1), SignRestriction(0, -1)))
    with pytest.raises(ParameterError):
        SignRestrictionSpec((SignRestriction(7, 1),)).validate(3)
    with pytest.raises(ParameterError):
        SignRestrictionSpec.from_names({"gdp": "+"}, NAMES)
    spec = SignRestrictionSpec.from_names({"cpi": "+", "one_year_rate": "-"}, NAMES)
    assert [(r.index, r.sign) for r in spec.restrictions] == [(2, 1), (5, -1)]
