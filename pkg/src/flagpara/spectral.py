"""Periodic grids, sampled functions and their discrete Fourier transforms.

Transform convention (Riemann-sum normalization, so refinement converges to
the continuum integral)::

    F(j) = (L/N) sum_n f(x_n) exp(-2 pi i j x_n / L),    x_n = n L / N
    f(x) = (1/L) sum_j F(j) exp(2 pi i j x / L)

Modes ``j`` run over ``[-N/2, N/2)``; the physical frequency is ``xi = j/L``.
Spectrum coefficients are stored in ascending mode order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import InputError

__all__ = [
    "Grid",
    "SampledFunction",
    "Spectrum",
    "forward_transform",
    "inverse_transform",
    "lp_norm",
    "fractional_derivative",
    "apply_spectral_filter",
    "make_function",
    "dilate",
    "grid_from_json",
    "grid_to_json",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """``N`` equispaced samples on the torus of length ``L``."""

    n: int = 128
    l: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n & (self.n - 1):
            raise InputError(f"grid n must be a power of two >= 8, got {self.n!r}")
        if not np.isfinite(self.l) or self.l <= 0:
            raise InputError(f"grid l must be a positive real, got {self.l!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def dx(self) -> float:
        return self.l / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n // 2, self.n // 2)

    @property
    def xi(self) -> np.ndarray:
        """Physical frequencies of the modes, ascending."""
        return self.modes / self.l

    @property
    def nyquist_mode(self) -> int:
        return self.n // 2


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.shape != (self.grid.n,):
            raise InputError(f"expected {self.grid.n} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InputError("samples must be finite")
        object.__setattr__(self, "samples", s)

    def _other(self, other):
        if isinstance(other, SampledFunction):
            if other.grid != self.grid:
                raise InputError("functions live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return SampledFunction(self.grid, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFunction(self.grid, self.samples - self._other(other))

    def __mul__(self, other):
        return SampledFunction(self.grid, self.samples * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.samples)

    def conj(self):
        return SampledFunction(self.grid, self.samples.conj())


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (self.grid.n,):
            raise InputError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def coeff(self, j: int) -> complex:
        """Coefficient of mode ``j`` (zero outside the grid band)."""
        h = self.grid.n // 2
        if not -h <= j < h:
            return 0j
        return complex(self.coeffs[j + h])

    @classmethod
    def from_modes(cls, grid: Grid, values: Mapping[int, complex]) -> "Spectrum":
        c = np.zeros(grid.n, dtype=complex)
        h = grid.n // 2
        for j, v in values.items():
            if not -h <= j < h:
                raise InputError(f"mode {j} outside [-{h}, {h})")
            c[j + h] = v
        return cls(grid, c)


def forward_transform(f: SampledFunction) -> Spectrum:
    g = f.grid
    return Spectrum(g, np.fft.fftshift(np.fft.fft(f.samples)) * g.dx)


def inverse_transform(F: Spectrum) -> SampledFunction:
    g = F.grid
    return SampledFunction(g, np.fft.ifft(np.fft.ifftshift(F.coeffs)) / g.dx)


def apply_spectral_filter(f: SampledFunction, multiplier: np.ndarray) -> SampledFunction:
    """Multiply the spectrum of ``f`` by ``multiplier`` (ascending-mode order)."""
    F = forward_transform(f)
    return inverse_transform(Spectrum(f.grid, F.coeffs * multiplier))


def lp_norm(f: SampledFunction, p: float) -> float:
    """Riemann-sum L^p (quasi-)norm; ``p = inf`` is the sample maximum."""
    if not (p > 0):
        raise InputError(f"exponent p must be positive, got {p!r}")
    a = np.abs(f.samples)
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.dx * np.sum(a**p)) ** (1.0 / p))


def fractional_derivative(f: SampledFunction, alpha: float) -> SampledFunction:
    """``D^alpha``: spectrum multiplied by ``|xi|^alpha``; mode 0 killed for alpha > 0."""
    if not (alpha >= 0):
        raise InputError(f"alpha must be nonnegative, got {alpha!r}")
    if alpha == 0:
        return f
    return apply_spectral_filter(f, np.abs(f.grid.xi) ** alpha)


def dilate(f: SampledFunction, s: int) -> SampledFunction:
    """Realize ``x -> f(2^s x)`` exactly by moving mode ``j`` to ``2^s j``.

    The result lives on a grid with ``2^s`` times as many samples, so the band
    limit relative to Nyquist is unchanged.
    """
    if s < 0:
        raise InputError("dilation exponent must be nonnegative")
    if s == 0:
        return f
    g = f.grid
    big = Grid(g.n << s, g.l)
    F = forward_transform(f)
    c = np.zeros(big.n, dtype=complex)
    c[(g.modes << s) + big.n // 2] = F.coeffs
    return inverse_transform(Spectrum(big, c))


# ---------------------------------------------------------------- generators

_REQUIRED = {
    "gaussian": ("center", "width"),
    "modulated_bump": ("center", "width", "mode"),
    "random_bandlimited": ("j_min", "j_max"),
    "indicator": ("a", "b"),
    "constant": (),
}


def _field(spec: Mapping[str, Any], name: str, kind=float):
    if name not in spec:
        raise InputError(f"function spec {spec.get('kind')!r} missing field {name!r}")
    v = spec[name]
    try:
        out = kind(v)
    except (TypeError, ValueError):
        raise InputError(f"function spec field {name!r} has bad value {v!r}") from None
    if kind is float and not np.isfinite(out):
        raise InputError(f"function spec field {name!r} must be finite")
    return out


def _periodic_gaussian(grid: Grid, center: float, width: float) -> np.ndarray:
    x = grid.x
    out = np.zeros(grid.n)
    # enough images that the periodization is smooth to machine precision
    reach = int(np.ceil(9 * width / grid.l)) + 1
    for m in range(-reach, reach + 1):
        out += np.exp(-0.5 * ((x - center - m * grid.l) / width) ** 2)
    return out


def make_function(spec: Mapping[str, Any], grid: Grid, seed: int = 0) -> SampledFunction:
    """Deterministic test function from a JSON-style spec.

    Kinds: ``gaussian(center, width)``, ``modulated_bump(center, width, mode)``,
    ``random_bandlimited(j_min, j_max)``, ``indicator(a, b)`` and ``constant``; all accept an
    optional ``amplitude``. Only ``random_bandlimited`` consumes ``seed``.
    """
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise InputError("function spec must be a mapping with a 'kind' field")
    kind = spec["kind"]
    if kind not in _REQUIRED:
        raise InputError(f"function spec field 'kind' has unknown value {kind!r}")
    amp = complex(spec.get("amplitude", 1.0))

    if kind in ("gaussian", "modulated_bump"):
        c = _field(spec, "center")
        w = _field(spec, "width")
        if w <= 0:
            raise InputError("function spec field 'width' must be positive")
        vals = _periodic_gaussian(grid, c, w).astype(complex)
        if kind == "modulated_bump":
            m = _field(spec, "mode", int)
            vals = vals * np.exp(2j * np.pi * m * grid.x / grid.l)
    elif kind == "random_bandlimited":
        lo = _field(spec, "j_min", int)
        hi = _field(spec, "j_max", int)
        h = grid.n // 2
        if lo > hi:
            raise InputError("function spec field 'j_min' exceeds 'j_max'")
        if lo < -h or hi >= h:
            raise InputError(f"function spec field 'j_max'/'j_min' outside [-{h}, {h})")
        rng = np.random.default_rng(seed)
        k = hi - lo + 1
        r = np.sqrt(rng.uniform(size=k))
        theta = rng.uniform(0, 2 * np.pi, size=k)
        c = np.zeros(grid.n, dtype=complex)
        c[lo + h : hi + h + 1] = grid.l * r * np.exp(1j * theta)
        vals = inverse_transform(Spectrum(grid, c)).samples
    elif kind == "constant":
        vals = np.ones(grid.n, dtype=complex)
    else:
        a = _field(spec, "a")
        b = _field(spec, "b")
        vals = ((grid.x >= a) & (grid.x < b)).astype(complex)
    return SampledFunction(grid, amp * vals)


def grid_from_json(d: Mapping[str, Any]) -> Grid:
    try:
        return Grid(int(d.get("n", 128)), float(d.get("l", 1.0)))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad grid spec {dict(d)!r}: {exc}") from None


def grid_to_json(g: Grid) -> dict:
    return {"n": g.n, "l": g.l}
