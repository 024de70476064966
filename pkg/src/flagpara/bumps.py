"""Dyadic bump families, Littlewood-Paley projections, square and maximal functions.

All bumps are built on the Fourier side from one even cutoff ``theta``:
``theta == 1`` on ``[-1, 1]``, ``theta == 0`` outside ``(-2, 2)``, with the
transition given by the smooth step ``s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})``.

* Psi type:  ``psi_k(xi) = theta(xi / 2^(k+hi)) - theta(xi / 2^(k+lo))``,
  standard offsets ``lo = -1, hi = 0`` give support ``2^(k-1) <= |xi| <= 2^(k+1)``.
* Phi type:  ``phi_k(xi) = theta(xi / 2^(k+hi))``, support ``|xi| <= 2^(k+hi+1)``.
* ``lp``:    the standard Psi family on ``[k_min, k_max]`` closed off by a
  low cap at ``k_min - 1`` and a high cap at ``k_max + 1``, so the pieces sum
  to one at every frequency.

Derivatives of the profile (needed for Taylor expansions of the symbols) are
computed exactly in truncated-power-series arithmetic rather than by finite
differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

from .errors import InputError
from .spectral import Grid, SampledFunction, apply_spectral_filter, forward_transform, inverse_transform, Spectrum

__all__ = [
    "MAX_ORDER",
    "smooth_step",
    "theta",
    "profile_series",
    "BumpFamily",
    "build_family",
    "family_from_json",
    "project",
    "square_function",
    "maximal_function",
    "reconstruct",
]

# derivative profiles are supported up to this order
MAX_ORDER = 9
_EDGE = 1e-3  # s and all its derivatives are < 1e-300 within this distance of 0 and 1


# ------------------------------------------------------- power series helpers
# A series is an array of shape (order + 1, *points): Taylor coefficients.

def _ser_mul(a, b):
    out = np.zeros_like(a)
    for n in range(a.shape[0]):
        out[n] = sum(a[k] * b[n - k] for k in range(n + 1))
    return out


def _ser_div(a, b):
    q = np.zeros_like(a)
    for n in range(a.shape[0]):
        acc = a[n] - sum(b[k] * q[n - k] for k in range(1, n + 1))
        q[n] = acc / b[0]
    return q


def _ser_exp(a):
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for n in range(1, a.shape[0]):
        e[n] = sum(k * a[k] * e[n - k] for k in range(1, n + 1)) / n
    return e


def _step_series(u, order):
    """Taylor coefficients of the smooth step at points ``u``."""
    u = np.asarray(u, dtype=float)
    out = np.zeros((order + 1,) + u.shape)
    out[0] = np.where(u >= 1 - _EDGE, 1.0, 0.0)
    mid = (u > _EDGE) & (u < 1 - _EDGE)
    if not np.any(mid):
        return out
    um = u[mid]
    k = np.arange(order + 1).reshape(-1, 1)
    g = (-1.0) ** k / um ** (k + 1) - 1.0 / (1 - um) ** (k + 1)
    pos = g[0] > 0
    # s = 1/(1+e^g) = e^{-g}/(1+e^{-g}); pick the form whose exponential is <= 1
    e = _ser_exp(np.where(pos, -g, g))
    one_plus = e.copy()
    one_plus[0] += 1.0
    num = np.where(pos, e, 0.0)
    num[0] = np.where(pos, e[0], 1.0)
    out[:, mid] = _ser_div(num, one_plus)
    return out


def smooth_step(u):
    """``s(u)``: 0 for ``u <= 0``, 1 for ``u >= 1``, C-infinity in between."""
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1, 1.0, 0.0)
    mid = (u > 0) & (u < 1)
    um = u[mid]
    a = np.exp(-1.0 / um)
    b = np.exp(-1.0 / (1 - um))
    out[mid] = a / (a + b)
    return out


def theta(t):
    """The even cutoff: 1 on ``[-1, 1]``, 0 outside ``(-2, 2)``."""
    t = np.abs(np.asarray(t, dtype=float))
    return smooth_step(2.0 - t)


def profile_series(t, order: int, profile: str = "flat"):
    """Taylor coefficients ``P^(l)(t) / l!`` for ``l = 0..order``.

    ``profile='flat'`` is ``theta``; ``'gaussian'`` is ``theta(t) exp(-t^2/2)``,
    a Phi-type profile that is not constant near the origin.
    """
    if order > MAX_ORDER:
        raise InputError(f"derivative order {order} exceeds tabulated maximum {MAX_ORDER}")
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    a = np.abs(t)
    out[0] = np.where(a <= 1, 1.0, 0.0)
    right = (t > 1) & (t < 2)
    left = (t < -1) & (t > -2)
    if np.any(right):
        # theta(t) = s(2 - t): odd coefficients flip sign
        sign = ((-1.0) ** np.arange(order + 1))[:, None]
        out[:, right] = _step_series(2 - t[right], order) * sign
    if np.any(left):
        out[:, left] = _step_series(2 + t[left], order)
    if profile == "flat":
        return out
    if profile == "gaussian":
        ex = np.zeros_like(out)
        ex[0] = -0.5 * t**2
        if order >= 1:
            ex[1] = -t
        if order >= 2:
            ex[2] = -0.5
        return _ser_mul(out, _ser_exp(ex))
    raise InputError(f"unknown profile {profile!r}")


def _profile(t, profile="flat"):
    if profile == "flat":
        return theta(t)
    return profile_series(t, 0, profile)[0]


# ------------------------------------------------------------------ families

_KINDS = ("psi", "phi", "lp")


@dataclass(frozen=True)
class BumpFamily:
    """A dyadic family ``(b_k)`` of Fourier-side bumps, ``k_min <= k <= k_max``.

    ``moment`` multiplies by ``(-xi / 2^k)^moment`` and ``power`` by
    ``(|xi| / 2^k)^power``; both leave the supports unchanged. For the ``lp``
    kind the valid scales extend to ``k_min - 1`` (low cap) and ``k_max + 1``
    (high cap).
    """

    kind: str
    k_min: int
    k_max: int
    lo: int = -1
    hi: int = 0
    profile: str = "flat"
    moment: int = 0
    power: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"family kind must be one of {_KINDS}, got {self.kind!r}")
        if self.k_min > self.k_max:
            raise InputError(f"family k_min={self.k_min} exceeds k_max={self.k_max}")
        if self.kind != "phi" and self.profile != "flat":
            raise InputError("only Phi-type families may use a non-flat profile")
        if self.kind == "psi" and self.lo >= self.hi + 1:
            raise InputError("psi family needs lo < hi + 1")

    # --- structure
    @property
    def is_psi(self) -> bool:
        return self.kind == "psi"

    @property
    def scales(self) -> range:
        if self.kind == "lp":
            return range(self.k_min - 1, self.k_max + 2)
        return range(self.k_min, self.k_max + 1)

    def _check_k(self, k):
        if k not in self.scales:
            raise InputError(f"scale {k} outside family range [{self.scales[0]}, {self.scales[-1]}]")

    def support(self, k: int) -> tuple[float, float]:
        """Closed range of ``|xi|`` outside which ``b_k`` vanishes."""
        self._check_k(k)
        if self.kind == "phi":
            return 0.0, 2.0 ** (k + self.hi + 1)
        if self.kind == "lp" and k == self.k_min - 1:
            return 0.0, 2.0 ** self.k_min
        if self.kind == "lp" and k == self.k_max + 1:
            return 2.0 ** self.k_max, math.inf
        lo, hi = (self.lo, self.hi) if self.kind == "psi" else (-1, 0)
        return 2.0 ** (k + lo), 2.0 ** (k + hi + 1)

    # --- evaluation
    def _series(self, k, xi, order):
        """Normalized Taylor coefficients ``2^(k l) b_k^(l)(xi) / l!``."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "phi":
            return profile_series(xi / 2.0 ** (k + self.hi), order, self.profile) * _scale_vec(order, -self.hi, xi.ndim)
        if self.kind == "lp":
            if k == self.k_min - 1:
                return profile_series(xi / 2.0**k, order)
            if k == self.k_max + 1:
                out = -profile_series(xi / 2.0 ** self.k_max, order) * _scale_vec(order, 1, xi.ndim)
                out[0] += 1.0
                return out
            lo, hi = -1, 0
        else:
            lo, hi = self.lo, self.hi
        return (profile_series(xi / 2.0 ** (k + hi), order) * _scale_vec(order, -hi, xi.ndim)
                - profile_series(xi / 2.0 ** (k + lo), order) * _scale_vec(order, -lo, xi.ndim))

    def value(self, k: int, xi, order: int = 0) -> np.ndarray:
        """``b_k(xi)``, or for ``order = l`` the normalized ``2^(k l) b_k^(l)(xi) / l!``."""
        self._check_k(k)
        xi = np.asarray(xi, dtype=float)
        if order and (self.moment or self.power):
            raise InputError("derivatives of moment/power-modified families are not supported")
        if order == 0:
            base = self._plain(k, xi)
        else:
            base = self._series(k, xi, order)[order]
        if self.moment:
            base = base * (-xi / 2.0**k) ** self.moment
        if self.power:
            r = np.abs(xi) / 2.0**k
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(r > 0, r ** self.power, 0.0)
            base = base * w
        return base

    def _plain(self, k, xi):
        P = lambda t: _profile(t, self.profile)  # noqa: E731
        if self.kind == "phi":
            return P(xi / 2.0 ** (k + self.hi))
        if self.kind == "lp":
            if k == self.k_min - 1:
                return theta(xi / 2.0**k)
            if k == self.k_max + 1:
                return 1.0 - theta(xi / 2.0**self.k_max)
            return theta(xi / 2.0**k) - theta(xi / 2.0 ** (k - 1))
        return theta(xi / 2.0 ** (k + self.hi)) - theta(xi / 2.0 ** (k + self.lo))

    def taylor_series(self, k: int, xi, order: int) -> np.ndarray:
        """All normalized coefficients ``2^(k l) b_k^(l)(xi) / l!``, ``l = 0..order``."""
        self._check_k(k)
        if self.moment or self.power:
            raise InputError("derivatives of moment/power-modified families are not supported")
        return self._series(k, xi, order)

    def with_(self, **changes) -> "BumpFamily":
        return replace(self, **changes)

    def restrict(self, k_min: int, k_max: int) -> "BumpFamily":
        return replace(self, k_min=k_min, k_max=k_max)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "k_min": self.k_min, "k_max": self.k_max}
        for name, default in (("lo", -1), ("hi", 0), ("profile", "flat"), ("moment", 0), ("power", 0.0)):
            v = getattr(self, name)
            if v != default:
                d[name] = v
        return d


def _scale_vec(order, e, ndim):
    """Column of ``2^(e l)``, ``l = 0..order``, shaped to broadcast over points."""
    return (2.0 ** (e * np.arange(order + 1))).reshape((-1,) + (1,) * ndim)


def build_family(kind: str, k_min: int, k_max: int, grid: Grid | None = None, **kw) -> BumpFamily:
    """Construct a family; with ``grid`` given, enforce Nyquist safety.

    Nyquist safety means the top Psi annulus ``2^(k_max+1)`` (shifted by the
    family's upper offset) stays strictly below ``N / (2L)``.
    """
    fam = BumpFamily(kind, int(k_min), int(k_max), **kw)
    if grid is not None:
        top = fam.hi if kind != "lp" else 0
        edge = 2.0 ** (fam.k_max + top + 1)
        if not edge < grid.n / (2 * grid.l):
            raise InputError(
                f"family top edge 2^{fam.k_max + top + 1} = {edge} violates Nyquist "
                f"bound {grid.n / (2 * grid.l)}"
            )
    return fam


def family_from_json(d: Mapping[str, Any], grid: Grid | None = None) -> BumpFamily:
    d = dict(d)
    try:
        kind = d.pop("kind")
        k_min = int(d.pop("k_min"))
        k_max = int(d.pop("k_max"))
    except KeyError as exc:
        raise InputError(f"family spec missing field {exc.args[0]!r}") from None
    return build_family(kind, k_min, k_max, grid, **d)


# --------------------------------------------------------------- operations

def project(f: SampledFunction, fam: BumpFamily, k: int) -> SampledFunction:
    """``f * b_k``: spectrum multiplied by ``b_k(j / L)``."""
    return apply_spectral_filter(f, fam.value(k, f.grid.xi))


def _projections(f: SampledFunction, fam: BumpFamily):
    F = forward_transform(f)
    xi = f.grid.xi
    return [inverse_transform(Spectrum(f.grid, F.coeffs * fam.value(k, xi))).samples for k in fam.scales]


def square_function(f: SampledFunction, fam: BumpFamily) -> SampledFunction:
    """Pointwise ``(sum_k |f * psi_k|^2)^(1/2)``."""
    if not fam.is_psi:
        raise InputError("square function needs a Psi-type family")
    parts = _projections(f, fam)
    return SampledFunction(f.grid, np.sqrt(sum(np.abs(p) ** 2 for p in parts)))


def reconstruct(f: SampledFunction, fam: BumpFamily) -> SampledFunction:
    """``sum_k f * psi_k``.

    Equal to ``f`` on modes inside the flat region of the telescoped sum.
    """
    if not fam.is_psi:
        raise InputError("reconstruction needs a Psi-type family")
    total = sum(fam.value(k, f.grid.xi) for k in fam.scales)
    return apply_spectral_filter(f, total)


def maximal_function(f: SampledFunction) -> SampledFunction:
    """Dyadic Hardy-Littlewood maximal function.

    ``f`` is read as a step function constant on the sample-centered cells
    ``[x_n - dx/2, x_n + dx/2)``. At each sample the averages of ``|f|`` over
    the centered windows of length ``L 2^-s``, ``s = 0 .. log2 N``, are taken
    and their maximum returned. The smallest window is the sample's own cell,
    so ``Mf >= |f|``; the restriction to dyadic lengths changes the full
    supremum by at most a factor of 2.
    """
    a = np.abs(f.samples)
    n = f.grid.n
    best = a.copy()
    # a centered window of even length m cells covers m - 1 whole cells and
    # half of each of the two cells at its ends
    c = np.concatenate([[0.0], np.cumsum(np.concatenate([a, a, a]))])
    idx = np.arange(n) + n
    m = 2
    while m <= n:
        h = m // 2
        full = c[idx + h] - c[idx - h + 1]           # cells idx-h+1 .. idx+h-1
        halves = 0.5 * (a[(idx - h) % n] + a[(idx + h) % n])
        best = np.maximum(best, (full + halves) / m)
        m *= 2
    return SampledFunction(f.grid, best)
