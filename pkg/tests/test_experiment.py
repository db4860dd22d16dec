import math

import numpy as np
import pytest
from scipy import stats

from genborn.deviation import exact_generalized_probability
from genborn.errors import InvalidParameter
from genborn.experiment import (
    CHUNK,
    ExperimentPlan,
    PowerRequest,
    binomial_p_value,
    build_sampler,
    required_sample_size,
    run_experiment,
    trial_uniforms,
)
from genborn.numerics import Interval
from genborn.states import AsymmetricStep, Gaussian, SymmetricUniform, abs2_integral, abs4_integral, abs4_total

from conftest import lopsided_tabulated


def analytic_cdf(psi, alpha, xs):
    """CDF of the normalized |psi|^2 + alpha |psi|^4 density from the closed-form integrals."""
    c3 = abs4_total(psi)
    out = []
    for x in xs:
        iv = Interval(-math.inf, x)
        out.append((abs2_integral(psi, iv) + alpha * abs4_integral(psi, iv)) / (1 + alpha * c3))
    return np.array(out)


def ks_distance(samples, cdf_vals):
    n = len(samples)
    i = np.arange(1, n + 1)
    return max(np.max(i / n - cdf_vals), np.max(cdf_vals - (i - 1) / n))


def test_sampler_alpha_zero_is_born():
    g = Gaussian(0.5)
    s = build_sampler(g, 0.0)
    xs = np.linspace(-2, 2, 9)
    assert np.allclose(s.cdf_at(xs), analytic_cdf(g, 0.0, xs), atol=1e-6)


def test_sampler_uniform_state_is_uniform():
    psi = SymmetricUniform(1.5)
    s = build_sampler(psi, 0.3)
    u = np.linspace(0, 1, 101)
    assert np.allclose(s.sample(u), -psi.length / 2 + u * psi.length, atol=1e-12)


@pytest.mark.parametrize("psi, alpha", [
    (Gaussian(1.0), 0.2),
    (AsymmetricStep(1.0, 2.0), 0.1),
    (lopsided_tabulated(), 0.05),
])
def test_sampler_ks(psi, alpha):
    s = build_sampler(psi, alpha)
    draws = np.sort(s.sample(trial_uniforms(11, 0, 100_000)))
    assert ks_distance(draws, analytic_cdf(psi, alpha, draws)) < 0.01


def test_sampler_validation():
    with pytest.raises(InvalidParameter):
        build_sampler(Gaussian(1.0), 0.0, grid_points=100)
    with pytest.raises(InvalidParameter):
        build_sampler(Gaussian(1.0), -1.0)


def test_trial_uniforms_are_one_stream():
    full = trial_uniforms(99, 0, 1000)
    for start in (0, 1, 3, 4, 257, 999):
        part = trial_uniforms(99, start, min(50, 1000 - start))
        assert np.array_equal(part, full[start:start + len(part)])
    assert not np.array_equal(trial_uniforms(1, 0, 10), trial_uniforms(2, 0, 10))


def test_seed_validation():
    with pytest.raises(InvalidParameter):
        trial_uniforms(-1, 0, 3)
    with pytest.raises(InvalidParameter):
        ExperimentPlan(Gaussian(1), Interval(-1, 1), 0.0, 10, seed=1 << 64)
    with pytest.raises(InvalidParameter):
        ExperimentPlan(Gaussian(1), Interval(-1, 1), 0.0, 0)
    assert trial_uniforms((1 << 64) - 1, 0, 2).shape == (2,)


def test_determinism_independent_of_workers():
    plan = ExperimentPlan(Gaussian(1.0), Interval(-0.5, 1.0), 0.1, 3 * CHUNK + 17, seed=2024)
    a = run_experiment(plan)
    b = run_experiment(plan)
    c = run_experiment(plan, workers=4)
    assert a == b == c


def test_single_trial():
    for seed in range(20):
        out = run_experiment(ExperimentPlan(Gaussian(1.0), Interval(-1, 1), 0.0, 1, seed))
        assert out.hits in (0, 1) and out.n == 1


def test_step_hit_frequency_near_exact_probability():
    s = AsymmetricStep(1.0, 2.0)
    iv = Interval(-s.length / 2, 0)
    out = run_experiment(ExperimentPlan(s, iv, 0.1, 1_000_000, seed=7))
    p = 11 / 67
    assert abs(out.empirical_p - p) <= 4 * math.sqrt(p * (1 - p) / out.n)
    assert out.p_value_born < 1e-10
    assert 0 <= out.p_value_generalized <= 1


def test_binomial_p_value_paths():
    assert binomial_p_value(500, 1000, 0.5) == pytest.approx(stats.binomtest(500, 1000, 0.5).pvalue)
    # normal branch vs exact binomial for a large n
    approx = binomial_p_value(10_300, 20_000, 0.5)
    exact = stats.binomtest(10_300, 20_000, 0.5).pvalue
    assert approx == pytest.approx(exact, rel=0.05)
    assert binomial_p_value(7, 7, 1.0) == 1.0
    assert binomial_p_value(6, 7, 1.0) == 0.0


def test_calibration_under_null():
    g = Gaussian(1.0)
    iv = Interval(-1.0, 0.4)
    sampler = build_sampler(g, 0.0)
    rejections = sum(
        run_experiment(ExperimentPlan(g, iv, 0.0, 5000, seed), sampler=sampler).p_value_born < 0.05
        for seed in range(1, 201)
    )
    assert 0.01 <= rejections / 200 <= 0.12


def test_sample_size_formula():
    n = required_sample_size(PowerRequest(0.5, 0.01, 0.05, 0.8))
    z_a, z_b = 1.959963984540054, 0.8416212335729143
    expected = math.ceil((z_a * 0.5 + z_b * math.sqrt(0.51 * 0.49)) ** 2 / 1e-4)
    assert n == expected == 19620


def test_sample_size_monte_carlo_power():
    req = PowerRequest(0.5, 0.01, 0.05, 0.8)
    n = required_sample_size(req)
    rng = np.random.default_rng(5)
    hits = rng.binomial(n, 0.51, size=4000)
    power = np.mean([binomial_p_value(int(h), n, 0.5) < 0.05 for h in hits])
    assert abs(power - 0.8) <= 0.03


def test_sample_size_scaling():
    a = required_sample_size(PowerRequest(0.3, 0.01))
    b = required_sample_size(PowerRequest(0.3, 0.02))
    assert a / b == pytest.approx(4, rel=0.05)
    half = required_sample_size(PowerRequest(0.3, 0.01, 0.05, 0.5))
    assert half == math.ceil(1.959963984540054**2 * 0.21 / 1e-4)


def test_sample_size_monotone_in_delta():
    ns = [required_sample_size(PowerRequest(0.4, -d)) for d in (0.005, 0.01, 0.05, 0.1)]
    assert ns == sorted(ns, reverse=True)


def test_power_request_validation():
    with pytest.raises(InvalidParameter):
        required_sample_size(PowerRequest(0.5, 0.0))
    with pytest.raises(InvalidParameter):
        PowerRequest(0.95, 0.1)
    with pytest.raises(InvalidParameter):
        PowerRequest(0.5, 0.1, significance=1.0)
