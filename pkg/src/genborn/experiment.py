"""Simulated detection runs and the statistics to analyse them.

Positions are drawn from the normalized detector density

    p_alpha(x) = (|psi(x)|^2 + alpha |psi(x)|^4) / (1 + alpha c3)

by inverse-CDF lookup on a uniform grid over the state's effective support.
Hits in the detection window are tested against the Born probability and
against the exact generalized probability.

Random numbers come from a counter-based Philox stream keyed by the seed; the
uniform for trial i is word i of that stream. Trials are processed in chunks
and any chunk can be generated independently, so serial and threaded runs
give identical counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .deviation import exact_generalized_probability
from .errors import DegenerateSupport, InvalidParameter
from .numerics import DEFAULT_TOL, Interval, Tolerance, erfc
from .states import WaveFunction, abs2_integral

__all__ = [
    "DEFAULT_GRID_POINTS",
    "EXACT_TEST_MAX_N",
    "Sampler",
    "ExperimentPlan",
    "TrialOutcome",
    "PowerRequest",
    "build_sampler",
    "trial_uniforms",
    "binomial_p_value",
    "run_experiment",
    "required_sample_size",
]

DEFAULT_GRID_POINTS = 65536
MIN_GRID_POINTS = 256
EXACT_TEST_MAX_N = 1000
CHUNK = 1 << 16  # multiple of 4: Philox emits four 64-bit words per counter step
_U64 = 1 << 64


@dataclass(frozen=True, eq=False)
class Sampler:
    """Inverse-CDF sampler over a tabulated density; immutable once built."""

    x: np.ndarray
    cdf: np.ndarray
    alpha: float = field(default=0.0)

    def sample(self, u):
        """Map uniforms in [0, 1) to positions by linear interpolation of the CDF."""
        u = np.asarray(u, dtype=float)
        cdf, x = self.cdf, self.x
        # first node with cdf > u, so the bracketing cell always has positive mass
        i = np.searchsorted(cdf, u, side="right")
        i = np.clip(i, 1, len(cdf) - 1)
        c0, c1 = cdf[i - 1], cdf[i]
        span = c1 - c0
        t = np.divide(u - c0, span, out=np.zeros_like(u), where=span > 0)
        return x[i - 1] + t * (x[i] - x[i - 1])

    def cdf_at(self, pos):
        return np.interp(pos, self.x, self.cdf, left=0.0, right=1.0)


def build_sampler(psi: WaveFunction, alpha: float, grid_points: int = DEFAULT_GRID_POINTS) -> Sampler:
    if int(grid_points) != grid_points or grid_points < MIN_GRID_POINTS:
        raise InvalidParameter(f"grid_points must be an integer >= {MIN_GRID_POINTS}, got {grid_points!r}")
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InvalidParameter(f"alpha must be finite and >= 0, got {alpha!r}")
    window = psi.effective_support
    if not (window.is_finite and window.length > 0):
        raise DegenerateSupport(f"effective support {window} has no usable width")
    x = np.linspace(window.lo, window.hi, int(grid_points))
    rho = np.asarray(psi.density(x), dtype=float)
    dens = rho + alpha * rho * rho
    cells = 0.5 * (dens[1:] + dens[:-1]) * np.diff(x)
    cdf = np.concatenate([[0.0], np.cumsum(cells)])
    total = cdf[-1]
    if not total > 0:
        raise DegenerateSupport("density vanishes on the effective support")
    cdf /= total
    cdf[-1] = 1.0
    x.flags.writeable = False
    cdf.flags.writeable = False
    return Sampler(x=x, cdf=cdf, alpha=alpha)


def _check_seed(seed):
    if int(seed) != seed or not 0 <= seed < _U64:
        raise InvalidParameter(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def trial_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms for trials ``start .. start+count-1`` of the stream keyed by ``seed``."""
    seed = _check_seed(seed)
    base = start - start % 4
    bitgen = np.random.Philox(key=seed)
    bitgen.advance(base // 4)
    return np.random.Generator(bitgen).random(count + start - base)[start - base:]


@dataclass(frozen=True)
class ExperimentPlan:
    psi: WaveFunction
    interval: Interval
    alpha: float
    n_trials: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise InvalidParameter(f"n_trials must be a positive integer, got {self.n_trials!r}")
        a = float(self.alpha)
        if not (math.isfinite(a) and a >= 0):
            raise InvalidParameter(f"alpha must be finite and >= 0, got {a!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "n_trials", int(self.n_trials))
        object.__setattr__(self, "seed", _check_seed(self.seed))


@dataclass(frozen=True)
class TrialOutcome:
    hits: int
    n: int
    empirical_p: float
    p_value_born: float
    p_value_generalized: float
    z_born: float


def binomial_p_value(hits: int, n: int, p0: float) -> float:
    """Two-sided p-value of ``hits`` successes in ``n`` trials under success rate ``p0``.

    Exact binomial test for n <= 1000, otherwise the normal approximation with
    continuity correction.
    """
    if p0 <= 0.0 or p0 >= 1.0:
        expected = 0 if p0 <= 0.0 else n
        return 1.0 if hits == expected else 0.0
    if n <= EXACT_TEST_MAX_N:
        return float(stats.binomtest(int(hits), int(n), p0).pvalue)
    sd = math.sqrt(n * p0 * (1.0 - p0))
    z = max(0.0, abs(hits - n * p0) - 0.5) / sd
    return min(1.0, erfc(z / math.sqrt(2.0)))


def _z_score(hits, n, p0):
    var = n * p0 * (1.0 - p0)
    diff = hits - n * p0
    if var == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / math.sqrt(var)


def _count_hits(sampler, interval, seed, start, count):
    pos = sampler.sample(trial_uniforms(seed, start, count))
    return int(np.count_nonzero((pos >= interval.lo) & (pos <= interval.hi)))


def run_experiment(plan: ExperimentPlan, *, sampler: Sampler | None = None, workers: int = 1,
                   grid_points: int = DEFAULT_GRID_POINTS, tol: Tolerance = DEFAULT_TOL) -> TrialOutcome:
    """Draw ``plan.n_trials`` positions and test the hit count.

    The outcome depends only on the plan (and grid size), never on ``workers``.
    """
    if sampler is None:
        sampler = build_sampler(plan.psi, plan.alpha, grid_points)
    elif sampler.alpha != plan.alpha:
        raise InvalidParameter("sampler was built for a different alpha")
    n = plan.n_trials
    starts = range(0, n, CHUNK)

    def job(start):
        return _count_hits(sampler, plan.interval, plan.seed, start, min(CHUNK, n - start))

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(job, starts))
    else:
        hits = sum(job(s) for s in starts)

    p_born = abs2_integral(plan.psi, plan.interval, tol)
    p_gen = exact_generalized_probability(plan.psi, plan.interval, plan.alpha, tol)
    return TrialOutcome(
        hits=hits,
        n=n,
        empirical_p=hits / n,
        p_value_born=binomial_p_value(hits, n, p_born),
        p_value_generalized=binomial_p_value(hits, n, p_gen),
        z_born=_z_score(hits, n, p_born),
    )


@dataclass(frozen=True)
class PowerRequest:
    p_born: float
    delta: float
    significance: float = 0.05
    power: float = 0.8

    def __post_init__(self):
        for name in ("p_born", "significance", "power"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidParameter(f"{name} must lie in (0, 1), got {v!r}")
        if not 0.0 < self.p_born + self.delta < 1.0:
            raise InvalidParameter(f"p_born + delta = {self.p_born + self.delta!r} is not a probability")


def required_sample_size(req: PowerRequest) -> int:
    """Smallest N for which the normal-approximation test reaches ``req.power``.

    N = ceil((z_{1-sig/2} sqrt(p0 q0) + z_power sqrt(p1 q1))^2 / delta^2), p1 = p0 + delta.
    """
    if req.delta == 0:
        raise InvalidParameter("delta = 0 cannot be resolved with any sample size")
    p0 = req.p_born
    p1 = p0 + req.delta
    z_a = stats.norm.ppf(1.0 - req.significance / 2.0)
    z_b = stats.norm.ppf(req.power)
    root = z_a * math.sqrt(p0 * (1 - p0)) + z_b * math.sqrt(p1 * (1 - p1))
    return max(1, math.ceil(root * root / (req.delta * req.delta)))
