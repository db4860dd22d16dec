"""Exit criteria, one test per criterion, each logging a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` -- the lines are printed in the
"acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from genborn.cli import main
from genborn.deviation import (
    delta_first_order,
    exact_generalized_probability,
    gamma_constant,
    gaussian_delta_closed_form,
    gaussian_max_delta,
    gaussian_optimal_length,
    required_dispersion,
    step_delta_closed_form,
)
from genborn.experiment import ExperimentPlan, PowerRequest, build_sampler, required_sample_size, run_experiment
from genborn.numerics import Bracket, Interval, Tolerance, golden_section_max
from genborn.states import AsymmetricStep, Gaussian, SymmetricUniform, abs2_integral, abs4_integral, abs4_total

from conftest import lopsided_tabulated, random_state

pytestmark = pytest.mark.filterwarnings("ignore::genborn.deviation.FirstOrderValidityWarning")

B_SET = (1e-4, 1e-2, 1.0, 1e2)
TIGHT = Tolerance(1e-13, 1e-13)


class Criterion:
    def __init__(self, log, number, title):
        self.log, self.number, self.title = log, number, title
        self.details = []

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def note(self, text):
        self.details.append(text)

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        dt = time.perf_counter() - self.t0
        extra = "; ".join(self.details)
        self.log.append(f"[{status}] {self.number:>2}. {self.title} ({dt:.1f}s){': ' + extra if extra else ''}")
        return False


def test_01_step_closed_form(acceptance_log, rng):
    with Criterion(acceptance_log, 1, "step-function closed form") as c:
        s = AsymmetricStep(1.0, 2.0)
        d = delta_first_order(s, Interval(-s.length / 2, 0), 1.0)
        c.note(f"delta(H=1,k=2,alpha=1) = {d!r}")
        assert abs(d - (-0.48)) <= 1e-12
        worst = 0.0
        for _ in range(100):
            H, k = rng.uniform(0.2, 4), rng.uniform(0.1, 6)
            st = AsymmetricStep(H, k)
            quad = delta_first_order(st, Interval(-st.length / 2, 0), 1.0, TIGHT, method="quadrature")
            worst = max(worst, abs(quad - step_delta_closed_form(H, k, 1.0)))
        c.note(f"max |quadrature - closed form| over 100 draws = {worst:.2e}")
        assert worst <= 1e-9


def test_02_symmetric_uniform_null(acceptance_log, rng):
    with Criterion(acceptance_log, 2, "symmetric-uniform null") as c:
        worst = 0.0
        for H in [*rng.uniform(0.05, 10, 200), 1.0, 2.0]:
            psi = SymmetricUniform(H)
            worst = max(worst, abs(delta_first_order(psi, Interval(0, psi.length / 2), 1.0)))
        c.note(f"max |delta| = {worst:.2e}")
        assert worst <= 1e-12


def test_03_gaussian_integrals(acceptance_log):
    with Criterion(acceptance_log, 3, "Gaussian c3 = 1/(2 sqrt(pi b))") as c:
        for b in B_SET:
            target = 1.0 / (2.0 * math.sqrt(math.pi * b))
            g = Gaussian(b)
            via_erf = g._abs4(-math.inf, math.inf)
            via_quad = abs4_total(g, TIGHT, method="quadrature")
            c.note(f"b={b:g}: erf err {abs(via_erf - target):.1e}, quad err {abs(via_quad - target):.1e}")
            assert abs(via_erf - target) <= 1e-12
            assert abs(abs4_total(g) - target) <= 1e-12
            assert abs(via_quad - target) <= 1e-9


def test_04_optimal_interval(acceptance_log):
    with Criterion(acceptance_log, 4, "optimal interval L_max and delta_max") as c:
        g_erf = gamma_constant("erf")
        g_quad = gamma_constant("quadrature", TIGHT)
        c.note(f"gamma erf={g_erf!r} quad={g_quad!r}")
        assert abs(g_erf - g_quad) <= 1e-12
        alpha = 1.0
        for b in B_SET:
            sb = math.sqrt(b)
            x, _ = golden_section_max(lambda L: gaussian_delta_closed_form(L, b, alpha),
                                      Bracket(0.1 * sb, 10 * sb), Tolerance(1e-12 * sb, 0))
            rel = abs(x / gaussian_optimal_length(b) - 1)
            d_opt = gaussian_delta_closed_form(x, b, alpha)
            d_ana = gaussian_max_delta(b, alpha).delta_max
            c.note(f"b={b:g}: argmax rel err {rel:.1e}, delta err {abs(d_opt - d_ana):.1e}")
            assert rel <= 1e-6
            assert abs(d_opt - g_quad * alpha / sb) <= 1e-9
            assert abs(d_ana - g_erf * alpha / sb) <= 1e-12 * d_ana


def test_05_scaling_law(acceptance_log):
    with Criterion(acceptance_log, 5, "dispersion scaling b ~ 10^(-2m+2s)") as c:
        worst = 0.0
        for m in range(1, 16):
            for s in range(0, m + 1):
                d = required_dispersion(m, s)
                assert d.exponent == -2 * m + 2 * s
                assert d.b_magnitude == pytest.approx(10.0 ** (-2 * m + 2 * s), rel=1e-15)
                got = gaussian_max_delta(d.b_exact, 10.0**-m).delta_max
                worst = max(worst, abs(got / 10.0**-s - 1))
        c.note(f"max rel err of delta_max vs 10^-s = {worst:.1e}")
        assert worst <= 1e-9


def _partition(rng, psi, pieces):
    s = psi.effective_support
    cuts = np.sort(rng.uniform(s.lo - 0.1 * s.length, s.hi + 0.1 * s.length, pieces - 1))
    edges = [-math.inf, *cuts, math.inf]
    return [Interval(a, b) for a, b in zip(edges[:-1], edges[1:]) if a < b]


def test_06_measure_properties(acceptance_log, rng):
    with Criterion(acceptance_log, 6, "partition sums") as c:
        worst_d, worst_p = 0.0, 0.0
        for _ in range(20):
            psi = random_state(rng)
            alpha = rng.uniform(0, 0.05)
            parts = _partition(rng, psi, int(rng.integers(1, 9)))
            worst_d = max(worst_d, abs(sum(delta_first_order(psi, I, alpha) for I in parts)))
            worst_p = max(worst_p, abs(sum(exact_generalized_probability(psi, I, alpha) for I in parts) - 1))
        c.note(f"|sum delta| <= {worst_d:.1e}, |sum p_exact - 1| <= {worst_p:.1e}")
        assert worst_d <= 1e-8 and worst_p <= 1e-8


def test_07_first_order_consistency(acceptance_log, rng):
    with Criterion(acceptance_log, 7, "O(alpha^2) agreement of first-order and exact rules") as c:
        ratios = []
        while len(ratios) < 40:
            if len(ratios) % 4 < 2:
                psi = AsymmetricStep(rng.uniform(0.5, 2), rng.uniform(0.3, 3))
            else:
                psi = Gaussian(10 ** rng.uniform(-2, 1))
            s = psi.effective_support
            a, b = np.sort(rng.uniform(s.lo, s.hi, 2))
            iv = Interval(a, b)
            if abs(delta_first_order(psi, iv, 1.0)) < 1e-3:
                continue
            c1 = abs2_integral(psi, iv)

            def err(alpha):
                return abs(exact_generalized_probability(psi, iv, alpha) - (c1 + delta_first_order(psi, iv, alpha)))

            for alpha in (1e-2, 1e-3):
                ratios.append(err(alpha) / err(alpha / 2))
        c.note(f"E(a)/E(a/2) in [{min(ratios):.3f}, {max(ratios):.3f}] over 20 cases x 2 alphas")
        assert all(3.2 <= r <= 4.8 for r in ratios)


def test_08_simulation_fidelity(acceptance_log):
    with Criterion(acceptance_log, 8, "simulation fidelity, n=1e6 x 10 seeds x 4 variants") as c:
        step = AsymmetricStep(1.0, 2.0)
        cases = [
            ("uniform", SymmetricUniform(1.2), Interval(-0.1, 0.25), 0.1),
            ("step", step, Interval(-step.length / 2, 0), 0.1),
            ("gaussian", Gaussian(1.0, 3.0), Interval(-0.8325546111576977, 0.8325546111576977), 0.2),
            ("tabulated", lopsided_tabulated(), Interval(-1.0, 0.7), 0.05),
        ]
        n = 1_000_000
        t0 = time.perf_counter()
        for name, psi, iv, alpha in cases:
            p = exact_generalized_probability(psi, iv, alpha)
            sigma = math.sqrt(p * (1 - p) / n)
            sampler = build_sampler(psi, alpha)
            worst = 0.0
            for seed in range(10):
                out = run_experiment(ExperimentPlan(psi, iv, alpha, n, seed), sampler=sampler)
                worst = max(worst, abs(out.empirical_p - p) / sigma)
            c.note(f"{name} max {worst:.2f} sigma")
            assert worst <= 5
        assert time.perf_counter() - t0 <= 60


def test_09_calibration_and_power(acceptance_log):
    with Criterion(acceptance_log, 9, "test calibration and power") as c:
        t0 = time.perf_counter()
        g, iv = Gaussian(1.0), Interval(-1.0, 0.4)
        sampler = build_sampler(g, 0.0)
        rate = np.mean([
            run_experiment(ExperimentPlan(g, iv, 0.0, 10_000, seed), sampler=sampler).p_value_born < 0.05
            for seed in range(1, 201)
        ])
        c.note(f"null rejection rate {rate:.3f}")
        assert 0.01 <= rate <= 0.12

        step = AsymmetricStep(1.0, 2.0)
        iv = Interval(-step.length / 2, 0)
        alpha = 0.1
        p0 = abs2_integral(step, iv)
        p1 = exact_generalized_probability(step, iv, alpha)
        n = required_sample_size(PowerRequest(p0, p1 - p0, 0.05, 0.8))
        sampler = build_sampler(step, alpha)
        power = np.mean([
            run_experiment(ExperimentPlan(step, iv, alpha, n, seed), sampler=sampler).p_value_born < 0.05
            for seed in range(1, 201)
        ])
        c.note(f"N={n}, realised power {power:.3f}")
        assert abs(power - 0.8) <= 0.05
        assert time.perf_counter() - t0 <= 120


def test_10_determinism(acceptance_log):
    with Criterion(acceptance_log, 10, "byte-identical CLI output") as c:
        runner = CliRunner()
        base = ["simulate", "--state", "gaussian:b=0.5", "--interval=-0.3,0.9", "--alpha", "0.05",
                "--n", "300000", "--seed", "18446744073709551615"]
        outs = []
        for fmt in ("json", "csv"):
            for workers in ("1", "1", "3", "8"):
                r = runner.invoke(main, [*base, "--output", fmt, "--workers", workers])
                assert r.exit_code == 0, r.output
                outs.append((fmt, r.stdout))
        for fmt in ("json", "csv"):
            texts = {t for f, t in outs if f == fmt}
            assert len(texts) == 1
        scans = {runner.invoke(main, ["scan", "--state", "step:H=1,k=0.5", "--alpha", "0.01",
                                      "--lengths", "0.01:2:50", "--output", "csv"]).stdout for _ in range(3)}
        assert len(scans) == 1
        c.note("simulate json/csv identical across runs and 1/3/8 workers; scan csv identical")
