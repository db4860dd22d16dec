"""One-dimensional pure states and the interval integrals of |psi|^2 and |psi|^4.

Four representations are provided: a symmetric uniform box, an asymmetric
two-level step, a Gaussian wave packet, and a tabulated state whose density is
interpolated piecewise-linearly. Closed forms are used wherever they exist;
``method="quadrature"`` forces the adaptive-quadrature path for cross-checks.

Only the density |psi|^2 and its square enter any probability here, so the
phase of a state (e.g. the Gaussian wavenumber) never changes a result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, ZeroNorm
from .numerics import DEFAULT_TOL, Interval, Tolerance, erf, erfc, integrate

__all__ = [
    "NORM_TOL",
    "Interval",
    "WaveFunction",
    "SymmetricUniform",
    "AsymmetricStep",
    "Gaussian",
    "Tabulated",
    "construct",
    "load_tabulated",
    "density",
    "abs2_integral",
    "abs4_integral",
    "abs4_total",
]

NORM_TOL = 1e-9
GAUSSIAN_CUTOFF = 10.0  # effective support |x| <= 10 sqrt(b); tail mass < e^-50


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameter(f"{name} must be a finite positive number, got {value!r}")
    return value


def _overlap(lo, hi, a, b):
    return max(0.0, min(hi, b) - max(lo, a))


def _erf_diff(a, b):
    """erf(b) - erf(a) without cancellation when both arguments sit in one tail."""
    if a >= 0:
        return erfc(a) - erfc(b)
    if b <= 0:
        return erfc(-b) - erfc(-a)
    return erf(b) - erf(a)


class WaveFunction:
    """Common interface of the normalized 1D states.

    Subclasses supply ``density`` (vectorized), ``support`` (exact support,
    possibly the whole line), ``effective_support`` (finite window used by
    quadrature and sampling), ``breakpoints`` and the closed-form integrals.
    """

    kind: str = ""

    def density(self, x):
        raise NotImplementedError

    @property
    def support(self) -> Interval:
        raise NotImplementedError

    @property
    def effective_support(self) -> Interval:
        return self.support

    @property
    def breakpoints(self) -> tuple:
        return ()

    @property
    def center(self) -> float:
        s = self.effective_support
        return 0.5 * (s.lo + s.hi)

    def _abs2(self, lo, hi):
        raise NotImplementedError

    def _abs4(self, lo, hi):
        raise NotImplementedError

    def abs4_total(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SymmetricUniform(WaveFunction):
    """psi = H on [-L/2, L/2] with L = 1/H^2."""

    height: float
    kind = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "height", _positive("height H", self.height))

    @property
    def length(self) -> float:
        return 1.0 / self.height**2

    @property
    def support(self):
        return Interval(-self.length / 2, self.length / 2)

    @property
    def breakpoints(self):
        return (-self.length / 2, self.length / 2)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        half = self.length / 2
        out = np.where((x >= -half) & (x <= half), self.height**2, 0.0)
        return out if out.ndim else float(out)

    def _abs2(self, lo, hi):
        return self.height**2 * _overlap(lo, hi, -self.length / 2, self.length / 2)

    def _abs4(self, lo, hi):
        return self.height**4 * _overlap(lo, hi, -self.length / 2, self.length / 2)

    def abs4_total(self):
        # H^4 L = H^2
        return self.height**2

    def params(self):
        return {"H": self.height}


@dataclass(frozen=True)
class AsymmetricStep(WaveFunction):
    """psi = H on [-L/2, 0] and kH on (0, L/2], with L = 2/(H^2 (k^2 + 1)).

    The jump at x = 0 belongs to the left piece.
    """

    height: float
    ratio: float
    kind = "step"

    def __post_init__(self):
        object.__setattr__(self, "height", _positive("height H", self.height))
        object.__setattr__(self, "ratio", _positive("ratio k", self.ratio))

    @property
    def length(self) -> float:
        return 2.0 / (self.height**2 * (self.ratio**2 + 1.0))

    @property
    def support(self):
        return Interval(-self.length / 2, self.length / 2)

    @property
    def breakpoints(self):
        return (-self.length / 2, 0.0, self.length / 2)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        half = self.length / 2
        h2 = self.height**2
        out = np.where((x >= -half) & (x <= 0.0), h2, 0.0)
        out = np.where((x > 0.0) & (x <= half), h2 * self.ratio**2, out)
        return out if out.ndim else float(out)

    def _abs2(self, lo, hi):
        half = self.length / 2
        h2, k2 = self.height**2, self.ratio**2
        return h2 * (_overlap(lo, hi, -half, 0.0) + k2 * _overlap(lo, hi, 0.0, half))

    def _abs4(self, lo, hi):
        half = self.length / 2
        h4, k4 = self.height**4, self.ratio**4
        return h4 * (_overlap(lo, hi, -half, 0.0) + k4 * _overlap(lo, hi, 0.0, half))

    def abs4_total(self):
        k2 = self.ratio**2
        return (1.0 + k2 * k2) / (1.0 + k2) * self.height**2

    def params(self):
        return {"H": self.height, "k": self.ratio}


@dataclass(frozen=True)
class Gaussian(WaveFunction):
    """psi(x) = (2 pi b)^(-1/4) exp(-x^2/(4b) + i k x); b is the variance of |psi|^2."""

    dispersion: float
    wavenumber: float = 0.0
    kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "dispersion", _positive("dispersion b", self.dispersion))
        k = float(self.wavenumber)
        if not math.isfinite(k):
            raise InvalidParameter(f"wavenumber k must be finite, got {k!r}")
        object.__setattr__(self, "wavenumber", k)

    @property
    def support(self):
        return Interval.real_line()

    @property
    def effective_support(self):
        w = GAUSSIAN_CUTOFF * math.sqrt(self.dispersion)
        return Interval(-w, w)

    def amplitude(self, x):
        b = self.dispersion
        x = np.asarray(x, dtype=float)
        return (2 * math.pi * b) ** -0.25 * np.exp(-x * x / (4 * b) + 1j * self.wavenumber * x)

    def density(self, x):
        b = self.dispersion
        x = np.asarray(x, dtype=float)
        out = np.exp(-x * x / (2 * b)) / math.sqrt(2 * math.pi * b)
        return out if out.ndim else float(out)

    def _abs2(self, lo, hi):
        s = math.sqrt(2 * self.dispersion)
        return 0.5 * _erf_diff(lo / s, hi / s)

    def _abs4(self, lo, hi):
        # (1/2 pi b) * int e^{-x^2/b} dx = erf-difference / (4 sqrt(pi b))
        s = math.sqrt(self.dispersion)
        return _erf_diff(lo / s, hi / s) / (4.0 * math.sqrt(math.pi * self.dispersion))

    def abs4_total(self):
        return 1.0 / (2.0 * math.sqrt(math.pi * self.dispersion))

    def params(self):
        return {"b": self.dispersion, "k": self.wavenumber}


@dataclass(frozen=True, eq=False)
class Tabulated(WaveFunction):
    """State given by complex amplitudes on a strictly increasing grid.

    The density is interpolated linearly between grid points and is zero
    outside the grid. Inputs are rescaled at construction so the trapezoid
    norm (which is the exact integral of the interpolant) equals one.
    """

    grid: np.ndarray
    amplitudes: np.ndarray
    rho: np.ndarray = field(init=False, repr=False)
    kind = "tabulated"

    def __post_init__(self):
        x = np.array(self.grid, dtype=float)
        a = np.array(self.amplitudes, dtype=complex)
        if x.ndim != 1 or a.shape != x.shape:
            raise InvalidParameter("grid and amplitudes must be 1-D arrays of equal length")
        if x.size < 2:
            raise InvalidParameter("tabulated state needs at least 2 grid points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(a))):
            raise InvalidParameter("grid and amplitudes must be finite")
        if not np.all(np.diff(x) > 0):
            raise InvalidParameter("grid must be strictly increasing")
        rho = np.abs(a) ** 2
        norm = np.trapezoid(rho, x)
        if not norm > 0:
            raise ZeroNorm("tabulated amplitudes have zero norm")
        a = a / math.sqrt(norm)
        rho = rho / norm
        for arr in (x, a, rho):
            arr.flags.writeable = False
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "rho", rho)

    @property
    def support(self):
        return Interval(self.grid[0], self.grid[-1])

    @property
    def breakpoints(self):
        return tuple(self.grid)

    def density(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.grid, self.rho, left=0.0, right=0.0)
        return out if np.ndim(out) else float(out)

    def _nodes(self, lo, hi):
        x = self.grid
        lo, hi = max(lo, x[0]), min(hi, x[-1])
        if not lo < hi:
            return None, None
        inner = x[(x > lo) & (x < hi)]
        pts = np.concatenate([[lo], inner, [hi]])
        return pts, np.interp(pts, x, self.rho)

    def _abs2(self, lo, hi):
        pts, r = self._nodes(lo, hi)
        if pts is None:
            return 0.0
        return math.fsum(np.diff(pts) * (r[:-1] + r[1:]) / 2)

    def _abs4(self, lo, hi):
        pts, r = self._nodes(lo, hi)
        if pts is None:
            return 0.0
        u, v = r[:-1], r[1:]
        return math.fsum(np.diff(pts) * (u * u + u * v + v * v) / 3)

    def abs4_total(self):
        return self._abs4(-math.inf, math.inf)

    def params(self):
        return {"points": int(self.grid.size)}


_KINDS = {
    "uniform": (SymmetricUniform, {"H": "height"}),
    "step": (AsymmetricStep, {"H": "height", "k": "ratio"}),
    "gaussian": (Gaussian, {"b": "dispersion", "k": "wavenumber"}),
}


def construct(kind: str, **params) -> WaveFunction:
    """Build a state from its variant name and paper-style parameter names.

    >>> construct("step", H=1, k=2).length
    0.4
    """
    if kind == "tabulated":
        if "path" in params:
            return load_tabulated(params["path"])
        return Tabulated(params["grid"], params["amplitudes"])
    try:
        cls, names = _KINDS[kind]
    except KeyError:
        raise InvalidParameter(f"unknown state kind {kind!r}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise InvalidParameter(f"unknown parameter(s) for {kind}: {sorted(unknown)}")
    return cls(**{names[k]: v for k, v in params.items()})


def load_tabulated(path) -> Tabulated:
    """Read a ``x re [im]`` whitespace-separated file (``#`` starts a comment)."""
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as exc:
        raise InvalidParameter(f"{path}: {exc}") from None
    if data.shape[1] not in (2, 3):
        raise InvalidParameter(f"{path}: expected 2 or 3 columns, found {data.shape[1]}")
    amps = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0.0)
    return Tabulated(data[:, 0], amps)


def density(psi: WaveFunction, x):
    """|psi(x)|^2."""
    return psi.density(x)


def _quad(psi, interval, tol, power):
    window = interval.intersect(psi.effective_support)
    if window is None:
        return 0.0
    if power == 2:
        f = psi.density
    else:
        def f(x):
            r = psi.density(x)
            return r * r
    pts = psi.breakpoints
    if len(pts) + 1 > tol.max_subdivisions:
        tol = Tolerance(tol.abs_tol, tol.rel_tol, tol.max_subdivisions + len(pts))
    return integrate(f, window, tol, points=pts, vectorized=True)


def _check_method(method):
    if method not in ("auto", "quadrature"):
        raise InvalidParameter(f"method must be 'auto' or 'quadrature', got {method!r}")


def abs2_integral(psi: WaveFunction, interval: Interval, tol: Tolerance = DEFAULT_TOL,
                  method: str = "auto") -> float:
    """Born probability c1 = int_I |psi|^2 dx.

    Returns exactly 1.0 when ``interval`` covers the support of ``psi``.
    """
    _check_method(method)
    if method == "quadrature":
        return _quad(psi, interval, tol, 2)
    if interval.contains(psi.support):
        return 1.0
    return psi._abs2(interval.lo, interval.hi)


def abs4_integral(psi: WaveFunction, interval: Interval, tol: Tolerance = DEFAULT_TOL,
                  method: str = "auto") -> float:
    """c2 = int_I |psi|^4 dx; equals ``abs4_total`` exactly when I covers the support."""
    _check_method(method)
    if method == "quadrature":
        return _quad(psi, interval, tol, 4)
    if interval.contains(psi.support):
        return psi.abs4_total()
    return psi._abs4(interval.lo, interval.hi)


def abs4_total(psi: WaveFunction, tol: Tolerance = DEFAULT_TOL, method: str = "auto") -> float:
    """c3 = int_R |psi|^4 dx."""
    _check_method(method)
    if method == "quadrature":
        return _quad(psi, Interval.real_line(), tol, 4)
    return psi.abs4_total()
