"""Numerical kernel: adaptive quadrature, the error function, golden-section search.

Everything here is a pure function of its arguments, so it is safe to call
from any number of threads.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameter, NonConvergence, NonFinite

__all__ = [
    "Tolerance",
    "Bracket",
    "Interval",
    "DEFAULT_TOL",
    "integrate",
    "erf",
    "erfc",
    "golden_section_max",
]


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol >= 0 and self.rel_tol >= 0):
            raise InvalidParameter("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise InvalidParameter("abs_tol and rel_tol cannot both be zero")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions <= 0:
            raise InvalidParameter("max_subdivisions must be a positive integer")

    def target(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise InvalidParameter(f"bracket needs finite lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Interval:
    """Closed segment [lo, hi] of the real line; either end may be infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise InvalidParameter("interval endpoints must not be NaN")
        if lo == math.inf or hi == -math.inf:
            raise InvalidParameter(f"interval [{lo}, {hi}] is empty")
        if not lo < hi:
            raise InvalidParameter(f"interval needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-math.inf, math.inf)

    @classmethod
    def centered(cls, length: float, center: float = 0.0) -> "Interval":
        return cls(center - length / 2, center + length / 2)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo < hi else None


# 7-point Gauss / 15-point Kronrod pair on [-1, 1] (QUADPACK qk15 constants).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]
_GWEIGHTS[[9, 11, 13]] = _WG[2::-1]


def _to_finite(f, lo, hi):
    """Rewrite an integral with infinite limits as one over a finite t-range.

    Uses x = c + t/(1 - t^2) with dx = (1 + t^2)/(1 - t^2)^2 dt. The t-range is
    (-1, 1) for the whole line, [0, 1) for [c, inf) and (-1, 0] for (-inf, c].
    Kronrod nodes never touch t = +-1, so the singular Jacobian is not sampled.
    """
    if math.isfinite(lo) and math.isfinite(hi):
        return f, lo, hi
    if math.isinf(lo) and math.isinf(hi):
        c, tlo, thi = 0.0, -1.0, 1.0
    elif math.isinf(hi):
        c, tlo, thi = lo, 0.0, 1.0
    else:
        c, tlo, thi = hi, -1.0, 0.0

    def g(t):
        t = np.asarray(t, dtype=float)
        d = 1.0 - t * t
        return f(c + t / d) * (1.0 + t * t) / (d * d)

    return g, tlo, thi


def _kronrod(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = np.asarray(f(mid + half * _NODES), dtype=float)
    if y.shape != _NODES.shape:
        y = np.broadcast_to(y, _NODES.shape)
    if not np.all(np.isfinite(y)):
        raise NonFinite(f"integrand is not finite on [{a}, {b}]")
    k = half * float(y @ _KWEIGHTS)
    g = half * float(y @ _GWEIGHTS)
    return k, abs(k - g)


def integrate(
    f: Callable,
    interval: Interval,
    tol: Tolerance = DEFAULT_TOL,
    *,
    points=(),
    vectorized: bool = False,
    full_output: bool = False,
):
    """Adaptive Gauss-Kronrod (G7/K15) quadrature of ``f`` over ``interval``.

    The worst subinterval is bisected until the summed local error
    ``|K15 - G7|`` is at most ``max(abs_tol, rel_tol*|result|)``. Infinite
    endpoints are mapped onto a finite range with ``x = t/(1 - t^2)``.

    Parameters
    ----------
    f : callable
        Real integrand. With ``vectorized=True`` it receives a numpy array.
    interval : Interval
    tol : Tolerance
    points : sequence of float, optional
        Known kinks or jumps; the initial partition is split there.
    full_output : bool
        Return ``(value, error_estimate)`` instead of just the value.
    """
    if not vectorized:
        scalar = f

        def f(xs):
            return np.array([scalar(float(x)) for x in np.atleast_1d(xs)], dtype=float)

    lo, hi = interval.lo, interval.hi
    cuts = sorted({float(p) for p in points if lo < p < hi})
    edges = [lo, *cuts, hi]

    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        g, ta, tb = _to_finite(f, a, b)
        pieces.append((g, ta, tb))

    heap = []
    total = 0.0
    err_total = 0.0
    for idx, (g, a, b) in enumerate(pieces):
        val, err = _kronrod(g, a, b)
        total += val
        err_total += err
        heapq.heappush(heap, (-err, idx, a, b, val))

    n_sub = len(heap)
    while err_total > tol.target(total):
        if n_sub >= tol.max_subdivisions:
            raise NonConvergence(
                f"quadrature did not reach tolerance in {tol.max_subdivisions} subdivisions "
                f"(estimate {total!r}, error {err_total!r})"
            )
        neg_err, idx, a, b, val = heapq.heappop(heap)
        m = 0.5 * (a + b)
        if not (a < m < b):
            raise NonConvergence(f"subinterval [{a}, {b}] cannot be bisected further")
        g = pieces[idx][0]
        v1, e1 = _kronrod(g, a, m)
        v2, e2 = _kronrod(g, m, b)
        total += v1 + v2 - val
        err_total += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, idx, a, m, v1))
        heapq.heappush(heap, (-e2, idx, m, b, v2))
        n_sub += 1

    # Re-sum to shed drift from the running updates.
    total = math.fsum(item[4] for item in heap)
    err_total = math.fsum(-item[0] for item in heap)
    return (total, err_total) if full_output else total


_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_SERIES_CUTOFF = 3.0


def _erf_series(x):
    # erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n x (2x^2)^n / (2n+1)!!  -- all terms positive
    x2 = x * x
    term = x
    total = x
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return _TWO_OVER_SQRT_PI * math.exp(-x2) * total


def _erfc_cfrac(x):
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    for n in range(1, 500):
        a = 0.5 * n
        d = x + a * d
        d = tiny if d == 0.0 else d
        c = x + a / c
        c = tiny if c == 0.0 else c
        d = 1.0 / d
        step = c * d
        f *= step
        if abs(step - 1.0) < 1e-16:
            break
    else:  # pragma: no cover - converges in < 100 terms for x > 3
        raise NonConvergence(f"erfc continued fraction did not converge at x={x}")
    return _INV_SQRT_PI * math.exp(-x * x) / f


def erf(x: float) -> float:
    """Error function, accurate to ~1e-15 absolute for every finite x."""
    if math.isnan(x):
        return math.nan
    ax = abs(x)
    if ax == 0.0:
        return x
    if ax <= _SERIES_CUTOFF:
        r = _erf_series(ax)
    elif ax < 27.0:
        r = 1.0 - _erfc_cfrac(ax)
    else:
        r = 1.0
    return r if x > 0 else -r


def erfc(x: float) -> float:
    """Complementary error function, keeping relative accuracy in the right tail."""
    if math.isnan(x):
        return math.nan
    if x > _SERIES_CUTOFF:
        return _erfc_cfrac(x) if x < 27.0 else 0.0
    if x < -_SERIES_CUTOFF:
        return 2.0 - erfc(-x)
    return 1.0 - erf(x)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GSS_MAX_ITER = 200


def golden_section_max(f, bracket: Bracket, tol: Tolerance = DEFAULT_TOL):
    """Maximise a unimodal ``f`` on ``bracket`` by golden-section search.

    Unimodality is the caller's responsibility; on a multimodal function the
    search still terminates but may return a local maximum.

    Returns ``(x_max, f_max)``. The bracket is shrunk until its width is at most
    ``max(abs_tol, rel_tol*|x|)`` or reaches floating-point resolution.
    """
    a, b = bracket.lo, bracket.hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(_GSS_MAX_ITER):
        mid = 0.5 * (a + b)
        width = b - a
        if width <= tol.target(mid) or width <= 8.0 * math.ulp(max(abs(a), abs(b))):
            fm = f(mid)
            # fall back on an interior probe if it beats the midpoint (flat-top ties)
            best = max((fm, mid), (fc, c), (fd, d))
            return best[1], best[0]
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    raise NonConvergence(f"golden-section search exceeded {_GSS_MAX_ITER} iterations")
