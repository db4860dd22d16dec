"""Fourth-order correction to Born's rule.

A detector that integrates |phi|^2 + alpha |phi|^4 instead of |phi|^2 shifts
the probability of a hit in I. With

    c1 = int_I |psi|^2,   c2 = int_I |psi|^4,   c3 = int_R |psi|^4

the first-order shift is ``delta = alpha (c2 - c1 c3)`` and the exact
(normalized) rule is ``(c1 + alpha c2) / (1 + alpha c3)``. The two agree to
O(alpha^2).

Gaussian states have closed forms for the deviation of a centred window of
length L, its maximiser ``L_max = 2 sqrt(b ln 2)`` and the maximal value
``gamma alpha / sqrt(b)``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameter, NonConvergence, OutOfRange
from .numerics import DEFAULT_TOL, Bracket, Interval, Tolerance, erf, golden_section_max, integrate
from .states import WaveFunction, abs2_integral, abs4_integral, abs4_total

__all__ = [
    "VALIDITY_LIMIT",
    "FirstOrderValidityWarning",
    "ModelParams",
    "DeviationReport",
    "GaussianOptimum",
    "DispersionDesign",
    "IntervalOptimum",
    "ScanRow",
    "born_integrals",
    "delta_first_order",
    "generalized_probability_first_order",
    "exact_generalized_probability",
    "deviation_report",
    "step_delta_closed_form",
    "gaussian_delta_closed_form",
    "gaussian_optimal_length",
    "gamma_constant",
    "gaussian_max_delta",
    "required_dispersion",
    "optimize_interval",
    "scan_delta",
]

VALIDITY_LIMIT = 0.1


class FirstOrderValidityWarning(UserWarning):
    """alpha * c3 exceeds VALIDITY_LIMIT; the linearised rule may be inaccurate."""


@dataclass(frozen=True)
class ModelParams:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (math.isfinite(a) and a >= 0):
            raise InvalidParameter(f"alpha must be finite and >= 0, got {a!r}")
        object.__setattr__(self, "alpha", a)

    def exceeds_validity(self, c3: float) -> bool:
        return self.alpha * c3 > VALIDITY_LIMIT


def _params(params) -> ModelParams:
    return params if isinstance(params, ModelParams) else ModelParams(params)


def _warn_validity(params, c3):
    if params.exceeds_validity(c3):
        warnings.warn(
            f"alpha*c3 = {params.alpha * c3:.3g} > {VALIDITY_LIMIT}; first-order rule is questionable",
            FirstOrderValidityWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class DeviationReport:
    c1: float
    c2: float
    c3: float
    alpha: float
    delta: float
    p_first_order: float
    p_exact: float
    validity_warning: bool
    out_of_range: bool


@dataclass(frozen=True)
class GaussianOptimum:
    L_max: float
    delta_max: float
    gamma: float


@dataclass(frozen=True)
class DispersionDesign:
    m: int
    s: int
    exponent: int
    b_magnitude: float
    b_exact: float
    gamma: float


@dataclass(frozen=True)
class IntervalOptimum:
    interval: Interval
    delta: float
    mode: str
    degenerate: bool = False
    note: str = ""


class ScanRow(NamedTuple):
    L: float
    c1: float
    delta: float
    p_first_order: float
    p_exact: float


def born_integrals(psi: WaveFunction, interval: Interval, tol: Tolerance = DEFAULT_TOL,
                   method: str = "auto"):
    """Return ``(c1, c2, c3)`` for ``psi`` on ``interval``."""
    c1 = abs2_integral(psi, interval, tol, method)
    c2 = abs4_integral(psi, interval, tol, method)
    c3 = abs4_total(psi, tol, method)
    return c1, c2, c3


def _delta(alpha, c1, c2, c3):
    if alpha == 0:
        return 0.0
    return alpha * (c2 - c1 * c3)


def delta_first_order(psi: WaveFunction, interval: Interval, params, tol: Tolerance = DEFAULT_TOL,
                      method: str = "auto") -> float:
    """First-order deviation from Born's rule, ``alpha (c2 - c1 c3)``.

    Vanishes identically when ``interval`` covers the support of ``psi``.
    """
    params = _params(params)
    c1, c2, c3 = born_integrals(psi, interval, tol, method)
    _warn_validity(params, c3)
    return _delta(params.alpha, c1, c2, c3)


def generalized_probability_first_order(psi: WaveFunction, interval: Interval, params,
                                        tol: Tolerance = DEFAULT_TOL, method: str = "auto") -> float:
    """``c1 + delta``, clamped into [0, 1].

    Raises OutOfRange if the raw value leaves [-10 abs_tol, 1 + 10 abs_tol],
    which happens only when alpha is too large for the linearised rule.
    """
    params = _params(params)
    c1, c2, c3 = born_integrals(psi, interval, tol, method)
    _warn_validity(params, c3)
    p = c1 + _delta(params.alpha, c1, c2, c3)
    slack = 10 * tol.abs_tol
    if p < -slack or p > 1 + slack:
        raise OutOfRange(f"first-order probability {p!r} outside [0, 1]; alpha={params.alpha} is too large")
    return min(1.0, max(0.0, p))


def exact_generalized_probability(psi: WaveFunction, interval: Interval, params,
                                  tol: Tolerance = DEFAULT_TOL, method: str = "auto") -> float:
    """Hit probability under the detector response |phi|^2 + alpha |phi|^4.

    ``(c1 + alpha c2) / (1 + alpha c3)``; exactly 1.0 on the real line.
    """
    params = _params(params)
    c1, c2, c3 = born_integrals(psi, interval, tol, method)
    return _exact(params.alpha, c1, c2, c3)


def _exact(alpha, c1, c2, c3):
    p = (c1 + alpha * c2) / (1.0 + alpha * c3)
    return min(1.0, max(0.0, p))


def deviation_report(psi: WaveFunction, interval: Interval, params, tol: Tolerance = DEFAULT_TOL,
                     method: str = "auto") -> DeviationReport:
    params = _params(params)
    c1, c2, c3 = born_integrals(psi, interval, tol, method)
    delta = _delta(params.alpha, c1, c2, c3)
    p1 = c1 + delta
    slack = 10 * tol.abs_tol
    return DeviationReport(
        c1=c1,
        c2=c2,
        c3=c3,
        alpha=params.alpha,
        delta=delta,
        p_first_order=p1,
        p_exact=_exact(params.alpha, c1, c2, c3),
        validity_warning=params.exceeds_validity(c3),
        out_of_range=p1 < -slack or p1 > 1 + slack,
    )


def step_delta_closed_form(H: float, k: float, alpha: float) -> float:
    """Deviation of the asymmetric step on its left half: alpha H^2 k^2 (1 - k^2) / (1 + k^2)^2.

    Positive for k < 1, zero at k = 1, negative for k > 1.
    """
    for name, v in (("H", H), ("k", k)):
        if not (math.isfinite(v) and v > 0):
            raise InvalidParameter(f"{name} must be positive, got {v!r}")
    alpha = _params(alpha).alpha
    k2 = k * k
    return alpha * H * H * k2 * (1.0 - k2) / (1.0 + k2) ** 2


def gaussian_delta_closed_form(L: float, b: float, alpha: float) -> float:
    """Deviation for a Gaussian state and the window [-L/2, L/2].

    (alpha / (pi b)) * int_{L/(2 sqrt 2)}^{L/2} exp(-x^2/b) dx. The lower limit
    is +L/(2 sqrt 2): only that sign reproduces alpha (c2 - c1 c3) and the
    stationarity condition sqrt(2) e^{-L^2/4b} = e^{-L^2/8b}.
    """
    if not (math.isfinite(L) and L > 0):
        raise InvalidParameter(f"L must be positive, got {L!r}")
    if not (math.isfinite(b) and b > 0):
        raise InvalidParameter(f"b must be positive, got {b!r}")
    alpha = _params(alpha).alpha
    u = L / (2.0 * math.sqrt(b))
    return alpha * (erf(u) - erf(u / math.sqrt(2.0))) / (2.0 * math.sqrt(math.pi * b))


def gaussian_optimal_length(b: float) -> float:
    if not (math.isfinite(b) and b > 0):
        raise InvalidParameter(f"b must be positive, got {b!r}")
    return 2.0 * math.sqrt(b * math.log(2.0))


@functools.cache
def _gamma_erf() -> float:
    hi = math.sqrt(math.log(2.0))
    lo = math.sqrt(math.log(2.0) / 2.0)
    return (erf(hi) - erf(lo)) / (2.0 * math.sqrt(math.pi))


def gamma_constant(method: str = "erf", tol: Tolerance = DEFAULT_TOL) -> float:
    """gamma = (1/pi) int_{sqrt(ln2/2)}^{sqrt(ln2)} exp(-x^2) dx ~= 0.0468458.

    ``method="quadrature"`` evaluates the defining integral directly instead
    of through erf; the erf value is cached.
    """
    if method == "erf":
        return _gamma_erf()
    if method == "quadrature":
        window = Interval(math.sqrt(math.log(2.0) / 2.0), math.sqrt(math.log(2.0)))
        return integrate(lambda x: np.exp(-x * x), window, tol, vectorized=True) / math.pi
    raise InvalidParameter(f"unknown method {method!r}")


def gaussian_max_delta(b: float, alpha: float) -> GaussianOptimum:
    L = gaussian_optimal_length(b)
    alpha = _params(alpha).alpha
    g = gamma_constant()
    return GaussianOptimum(L_max=L, delta_max=g * alpha / math.sqrt(b), gamma=g)


def required_dispersion(m: int, s: int) -> DispersionDesign:
    """Gaussian dispersion giving a maximal deviation 10^-s when alpha = 10^-m.

    ``b_magnitude`` is the bare order of magnitude 10^(2s - 2m);
    ``b_exact = gamma^2 10^(2s - 2m)`` solves gamma alpha / sqrt(b) = 10^-s.
    """
    for name, v, lo in (("m", m, 1), ("s", s, 0)):
        if int(v) != v or v < lo:
            raise InvalidParameter(f"{name} must be an integer >= {lo}, got {v!r}")
    m, s = int(m), int(s)
    if s > m:
        raise InvalidParameter(f"target exponent s={s} exceeds alpha exponent m={m}")
    exponent = 2 * s - 2 * m
    magnitude = 10.0**exponent
    g = gamma_constant()
    return DispersionDesign(m=m, s=s, exponent=exponent, b_magnitude=magnitude,
                            b_exact=g * g * magnitude, gamma=g)


_SCAN_LENGTHS = 256
_SCAN_ENDPOINTS = 64
_MAX_SWEEPS = 50


def optimize_interval(psi: WaveFunction, params, mode: str = "length-symmetric",
                      tol: Tolerance = DEFAULT_TOL, search_box: Interval | None = None,
                      center: float | None = None) -> IntervalOptimum:
    """Find the detection window with the largest |delta| for ``psi``.

    ``length-symmetric`` scans 256 window lengths centred on ``center``
    (default: middle of the effective support); ``free-endpoints`` scans a
    64x64 grid of endpoints inside ``search_box`` (default: effective
    support). The best grid cell is refined by golden-section search. No
    unimodality is assumed beyond the grid cell that is refined.
    """
    params = _params(params)
    box = search_box if search_box is not None else psi.effective_support
    if not box.is_finite:
        raise InvalidParameter("free search needs a finite search box")
    c3 = abs4_total(psi, tol)
    _warn_validity(params, c3)

    def score(lo, hi):
        iv = Interval(lo, hi)
        c1 = abs2_integral(psi, iv, tol)
        c2 = abs4_integral(psi, iv, tol)
        return c2 - c1 * c3

    if mode == "length-symmetric":
        mid = psi.center if center is None else float(center)
        width = 2.0 * max(box.hi - mid, mid - box.lo)
        lengths = width * np.arange(1, _SCAN_LENGTHS + 1) / _SCAN_LENGTHS
        values = np.array([score(mid - L / 2, mid + L / 2) for L in lengths])
        i = int(np.argmax(np.abs(values)))
        best = _refine_symmetric(score, mid, lengths, i, width)
        L, raw = best
        interval = Interval.centered(L, mid)
    elif mode == "free-endpoints":
        edges = np.linspace(box.lo, box.hi, _SCAN_ENDPOINTS)
        best_val, bi, bj = 0.0, 0, len(edges) - 1
        for i in range(len(edges) - 1):
            for j in range(i + 1, len(edges)):
                v = score(edges[i], edges[j])
                if abs(v) > abs(best_val):
                    best_val, bi, bj = v, i, j
        lo, hi, raw = _refine_free(score, edges, bi, bj, best_val, tol)
        interval = Interval(lo, hi)
    else:
        raise InvalidParameter(f"mode must be 'length-symmetric' or 'free-endpoints', got {mode!r}")

    if params.alpha == 0:
        return IntervalOptimum(interval, 0.0, mode, degenerate=True,
                               note="alpha = 0: no deviation from Born's rule on any interval")
    if abs(raw) <= 1e-12 * c3:
        return IntervalOptimum(interval, 0.0, mode, degenerate=True,
                               note="|psi|^4 is proportional to |psi|^2 on every scanned interval; delta vanishes")
    return IntervalOptimum(interval, params.alpha * raw, mode)


def _refine_symmetric(score, mid, lengths, i, width):
    lo_L = lengths[i - 1] if i > 0 else 0.5 * lengths[0]
    hi_L = lengths[i + 1] if i + 1 < len(lengths) else width
    sign = 1.0 if score(mid - lengths[i] / 2, mid + lengths[i] / 2) >= 0 else -1.0
    if hi_L <= lo_L:
        L = float(lengths[i])
        return L, score(mid - L / 2, mid + L / 2)
    gtol = Tolerance(abs_tol=1e-12 * width, rel_tol=1e-12)
    L, _ = golden_section_max(lambda L: sign * score(mid - L / 2, mid + L / 2), Bracket(lo_L, hi_L), gtol)
    val = score(mid - L / 2, mid + L / 2)
    # keep the grid point if the refinement did not improve on it
    grid_val = score(mid - lengths[i] / 2, mid + lengths[i] / 2)
    if abs(grid_val) > abs(val):
        return float(lengths[i]), grid_val
    return L, val


def _refine_free(score, edges, i, j, value, tol):
    sign = 1.0 if value >= 0 else -1.0
    step = edges[1] - edges[0]
    lo, hi = float(edges[i]), float(edges[j])
    gtol = Tolerance(abs_tol=1e-12 * (edges[-1] - edges[0]), rel_tol=1e-12)
    best = sign * score(lo, hi)
    for _ in range(_MAX_SWEEPS):
        prev = (lo, hi)
        a, b = max(edges[0], lo - step), min(lo + step, hi - 1e-9 * step)
        if a < b:
            x, fx = golden_section_max(lambda x: sign * score(x, hi), Bracket(a, b), gtol)
            if fx > best:
                lo, best = x, fx
        a, b = max(hi - step, lo + 1e-9 * step), min(edges[-1], hi + step)
        if a < b:
            x, fx = golden_section_max(lambda x: sign * score(lo, x), Bracket(a, b), gtol)
            if fx > best:
                hi, best = x, fx
        if abs(lo - prev[0]) <= gtol.abs_tol and abs(hi - prev[1]) <= gtol.abs_tol:
            return lo, hi, sign * best
    raise NonConvergence("free-endpoint refinement did not settle")


def scan_delta(psi: WaveFunction, params, lengths: Sequence[float], tol: Tolerance = DEFAULT_TOL,
               center: float = 0.0) -> list[ScanRow]:
    """Deviation along centred windows [center - L/2, center + L/2], one row per length."""
    params = _params(params)
    rows = []
    for L in lengths:
        L = float(L)
        if not (math.isfinite(L) and L > 0):
            raise InvalidParameter(f"scan lengths must be positive and finite, got {L!r}")
        c1, c2, c3 = born_integrals(psi, Interval.centered(L, center), tol)
        delta = _delta(params.alpha, c1, c2, c3)
        rows.append(ScanRow(L, c1, delta, c1 + delta, _exact(params.alpha, c1, c2, c3)))
    return rows
