import math

import numpy as np
import pytest

from hjbwaves.errors import DomainError, PreconditionError
from hjbwaves.model import ModelParams, theta_of_phi
from hjbwaves.montecarlo import (
    CARAUtility,
    PolicyField,
    Provenance,
    SDEConfig,
    _GridLookup,
    cara_constant_oracle,
    drift_vol,
    policy_from_wave,
    simulate,
)
from hjbwaves.riccati import synth_terminal_utility
from hjbwaves.waves import compute_wave_spec, integrate_profile


def test_drift_vol_examples():
    assert drift_vol(ModelParams.simple(1.0), 1.0) == (1.0, 1.0)
    assert drift_vol(ModelParams.quadratic_drift(1.0), 1.0) == (0.5, 1.0)
    mu, sigma = drift_vol(ModelParams.general(1.0, 1.5), 1.0)
    assert mu == 1.0 and sigma == pytest.approx(math.sqrt(4 / 3), rel=1e-15)
    mu, sigma = drift_vol(ModelParams.general(2.0, 3.0, alpha=0.5, beta=-0.2), np.array([0.5, 1.0]))
    np.testing.assert_allclose(mu, [0.8, 1.8])
    np.testing.assert_allclose(sigma**2, 2 * (0.25 + np.array([0.125, 1.0]) / 3))


@pytest.mark.parametrize("theta", [0.0, -0.1, 1.0001, float("nan")])
def test_drift_vol_domain(theta):
    with pytest.raises(DomainError):
        drift_vol(ModelParams.simple(1.0), theta)


def test_config_validation(simple_params):
    with pytest.raises(PreconditionError):
        SDEConfig(simple_params, 0.0, T=0.0, n_paths=1000)
    with pytest.raises(PreconditionError):
        SDEConfig(simple_params, 0.0, T=1.0, n_paths=999)
    with pytest.raises(PreconditionError):
        SDEConfig(simple_params, 0.0, T=1.0, n_paths=1000, n_steps=99)
    with pytest.raises(PreconditionError):
        SDEConfig(simple_params, 0.0, T=1.0, n_paths=1000, seed=-1)
    with pytest.raises(DomainError):
        PolicyField.constant(0.0)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0])
def test_cara_oracle_simple(simple_params, theta):
    cfg = SDEConfig(simple_params, x0=0.3, T=1.0, n_paths=100_000, seed=7)
    res = simulate(cfg, PolicyField.constant(theta), CARAUtility(1.2))
    exact = cara_constant_oracle(simple_params, theta, 1.2, 0.3, 1.0)
    assert abs(res.mean_utility - exact) < 3 * res.std_error


@pytest.mark.parametrize(
    "params",
    [ModelParams.quadratic_drift(1.0), ModelParams.general(1.0, 1.5), ModelParams.general(0.5, 3.0, 0.4, 0.3)],
    ids=["quadratic", "general", "general-ab"],
)
def test_cara_oracle_other_variants(params):
    cfg = SDEConfig(params, x0=0.0, T=2.0, n_paths=40_000, n_steps=100, seed=3)
    res = simulate(cfg, PolicyField.constant(0.6), CARAUtility(0.8))
    exact = cara_constant_oracle(params, 0.6, 0.8, 0.0, 2.0)
    assert abs(res.mean_utility - exact) < 3 * res.std_error


def test_terminal_variance_moment():
    params = ModelParams.general(1.0, 2.5, alpha=0.5, beta=0.2)
    cfg = SDEConfig(params, x0=1.0, T=3.0, n_paths=100_000, n_steps=100, seed=11)
    res = simulate(cfg, PolicyField.constant(0.6), CARAUtility(0.1))
    mu, sigma = drift_vol(params, 0.6)
    assert res.var_terminal == pytest.approx(sigma**2 * 3.0, rel=0.05)
    assert res.mean_terminal == pytest.approx(1.0 + mu * 3.0, abs=4 * sigma * math.sqrt(3.0 / 1e5))


def test_standard_error_scaling(simple_params):
    ses = []
    for n in (10_000, 40_000, 160_000):
        cfg = SDEConfig(simple_params, x0=0.0, T=1.0, n_paths=n, n_steps=100, seed=5)
        ses.append(simulate(cfg, PolicyField.constant(0.5), CARAUtility(1.0)).std_error)
    for a, b in zip(ses, ses[1:]):
        assert a / b == pytest.approx(2.0, rel=0.2)


@pytest.fixture(scope="module")
def simple_wave(simple_spec, simple_profile):
    return simple_spec, simple_profile, synth_terminal_utility(simple_profile)


def test_wave_policy_beats_constants(simple_wave):
    spec, profile, utility = simple_wave
    cfg = SDEConfig(spec.params, x0=0.0, T=1.0, n_paths=20_000, n_steps=200, seed=2024)
    best = simulate(cfg, policy_from_wave(spec, profile, cfg.T), utility)
    assert best.flagged_paths == 0
    for theta in (0.25, 0.5, 0.75, 1.0):
        other = simulate(cfg, PolicyField.constant(theta), utility)
        assert best.mean_utility >= other.mean_utility - 3 * math.hypot(best.std_error, other.std_error)


def test_determinism_across_threads(simple_wave):
    spec, profile, utility = simple_wave
    cfg = SDEConfig(spec.params, x0=-0.5, T=1.0, n_paths=10_000, n_steps=100, seed=99)
    pol = policy_from_wave(spec, profile, cfg.T)
    runs = [simulate(cfg, pol, utility, threads=t) for t in (1, 2, 4, 1)]
    assert all(r == runs[0] for r in runs[1:])
    other = simulate(SDEConfig(spec.params, -0.5, 1.0, 10_000, n_steps=100, seed=100), pol, utility)
    assert other.mean_utility != runs[0].mean_utility


def test_flagged_paths(simple_params):
    cfg = SDEConfig(simple_params, x0=0.0, T=1.0, n_paths=2000, n_steps=100, seed=1)

    def utility(x):
        return np.where(x > 2.0, np.nan, -np.exp(-x))

    res = simulate(cfg, PolicyField.constant(1.0), utility)
    assert 0 < res.flagged_paths < 2000
    assert math.isfinite(res.mean_utility)


def test_theta_floor():
    pol = PolicyField(lambda x, t: np.zeros_like(x), Provenance.CONSTANT, "zero")
    assert np.all(pol(np.zeros(3), 0.0) == 1e-6)


def test_grid_lookup_matches_interp(simple_profile):
    p = simple_profile
    look = _GridLookup(p.xi, p.v, p.spec.v_left, p.spec.v_right)
    q = np.concatenate([np.random.default_rng(0).uniform(-60, 40, 20_000), p.xi, [-1e12, 1e12]])
    np.testing.assert_allclose(look(q), p.v_linear(q), rtol=1e-15, atol=1e-15)


def test_policy_terminal_value(simple_spec, simple_profile):
    pol = policy_from_wave(simple_spec, simple_profile, T=2.0)
    assert pol.provenance is Provenance.WAVE_OPTIMAL
    # far left the profile sits at v_left = 2, so theta = 1/2
    assert pol(np.array([-1e6]), 2.0)[0] == 0.5
    x = np.linspace(-20, 20, 41)
    np.testing.assert_allclose(pol(x, 2.0), theta_of_phi(simple_spec.params, simple_profile.v_linear(x)), rtol=1e-15)


@pytest.mark.parametrize("variant", ["simple", "quadratic"])
def test_policy_monotone_decreasing_waves(variant):
    params = ModelParams.simple(1.0) if variant == "simple" else ModelParams.quadratic_drift(1.0)
    spec = compute_wave_spec(params, 2.0, 0.5)
    pol = policy_from_wave(spec, integrate_profile(spec), T=5.0)
    x = np.linspace(-30, 30, 601)
    t = np.linspace(0, 5, 51)
    th = np.array([pol(x, ti) for ti in t])
    assert np.all(np.diff(th, axis=1) >= 0)  # non-decreasing in x
    assert np.all(np.diff(th, axis=0) <= 0)  # non-increasing in t


def test_policy_monotone_increasing_wave(general_spec, general_profile):
    pol = policy_from_wave(general_spec, general_profile, T=5.0)
    x = np.linspace(-60, 30, 901)
    for t in np.linspace(0, 5, 11):
        assert np.all(np.diff(pol(x, t)) <= 0)


def test_policy_identically_one_far_left(general_b_spec, general_b_profile):
    assert general_b_spec.v_left < 1
    pol = policy_from_wave(general_b_spec, general_b_profile, T=1.0)
    x = np.linspace(-1e4, general_b_profile.xi[0] - 10, 500)
    for t in (0.0, 0.5, 1.0):
        assert np.all(pol(x, t) == 1.0)
