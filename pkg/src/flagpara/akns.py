"""AKNS systems ``u' = i lam D u + N u``, their gauge transform, and the
iterated-integral solution formula for upper-triangular coupling.

Coupling entries are analytic functions of ``x`` (Gaussians, compact smooth
bumps, constants), evaluated exactly inside the integrator and sampled on an
equispaced grid over ``[-X, X]`` for quadrature.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InputError
from .spectral import SampledFunction, forward_transform

__all__ = [
    "Entry",
    "AknsConfig",
    "Trajectory",
    "GaugeData",
    "integrate",
    "gauge_transform",
    "iterated_integral",
    "triangular_solution",
    "ordered_frequency_form",
    "lambda_scan",
    "scan_to_csv",
    "max_step",
]


@dataclass(frozen=True)
class Entry:
    """``amplitude * profile((x - center) / width)``.

    kinds: ``gaussian`` (``exp(-t^2/2)``), ``bump`` (``exp(1 - 1/(1-t^2))`` on
    ``|t| < 1``, zero outside) and ``constant``.
    """

    kind: str
    amplitude: complex = 1.0
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bump", "constant"):
            raise InputError(f"entry field 'kind' has unknown value {self.kind!r}")
        if not self.width > 0:
            raise InputError("entry field 'width' must be positive")
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.amplitude)
        t = (x - self.center) / self.width
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-0.5 * t**2)
        inside = np.abs(t) < 1
        out = np.zeros(x.shape, dtype=complex)
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return out

    def to_json(self, row, col) -> dict:
        return {"row": row, "col": col, "kind": self.kind, "amplitude": [self.amplitude.real, self.amplitude.imag],
                "center": self.center, "width": self.width}


@dataclass(frozen=True)
class AknsConfig:
    """System size ``n = len(d)``; ``entries`` maps 0-based ``(l, m)``, ``l != m``, to :class:`Entry`."""

    d: tuple
    entries: Mapping = field(default_factory=dict)
    lam: float = 0.0
    x_max: float = 8.0
    nq: int = 4096

    def __post_init__(self):
        d = tuple(float(v) for v in self.d)
        if len(d) < 1:
            raise InputError("need at least one diagonal entry")
        if len(set(d)) != len(d):
            raise InputError("diagonal entries d must be pairwise distinct")
        object.__setattr__(self, "d", d)
        ent = dict(self.entries)
        for (l, m) in ent:
            if l == m:
                raise InputError("coupling matrix N must have zero diagonal")
            if not (0 <= l < len(d) and 0 <= m < len(d)):
                raise InputError(f"entry ({l}, {m}) outside a {len(d)}x{len(d)} system")
        object.__setattr__(self, "entries", ent)
        if not self.x_max > 0 or self.nq < 2:
            raise InputError("need x_max > 0 and nq >= 2")

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def quad_x(self) -> np.ndarray:
        """``nq + 1`` equispaced quadrature nodes on ``[-X, X]``."""
        return np.linspace(-self.x_max, self.x_max, self.nq + 1)

    def coupling(self, x) -> np.ndarray:
        """``N(x)``, shape ``x.shape + (n, n)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.n, self.n), dtype=complex)
        for (l, m), e in self.entries.items():
            out[..., l, m] = e(x)
        return out

    def is_upper_triangular(self) -> bool:
        return all(l < m for l, m in self.entries)

    def with_lam(self, lam: float) -> "AknsConfig":
        return AknsConfig(self.d, self.entries, float(lam), self.x_max, self.nq)

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "AknsConfig":
        try:
            diag = d["d"]
        except KeyError:
            raise InputError("AKNS config missing field 'd'") from None
        ent = {}
        for e in d.get("entries", []):
            try:
                amp = e.get("amplitude", 1.0)
                amp = complex(*amp) if isinstance(amp, (list, tuple)) else complex(amp)
                ent[(int(e["row"]) - 1, int(e["col"]) - 1)] = Entry(
                    e["kind"], amp, float(e.get("center", 0.0)), float(e.get("width", 1.0)))
            except KeyError as exc:
                raise InputError(f"AKNS entry missing field {exc.args[0]!r}") from None
        return cls(tuple(diag), ent, float(d.get("lambda", 0.0)), float(d.get("x_max", 8.0)),
                   int(d.get("nq", 4096)))

    def to_json(self) -> dict:
        return {"d": list(self.d), "lambda": self.lam, "x_max": self.x_max, "nq": self.nq,
                "entries": [e.to_json(l + 1, m + 1) for (l, m), e in sorted(self.entries.items())]}


# ---------------------------------------------------------------- integration

@dataclass(frozen=True, eq=False)
class Trajectory:
    x: np.ndarray
    u: np.ndarray  # shape (len(x), n)
    lam: float


def max_step(cfg: AknsConfig, lam: float | None = None) -> float:
    """Largest step resolving the fastest phase with 8 points per period."""
    lam = cfg.lam if lam is None else lam
    w = abs(lam) * max(abs(v) for v in cfg.d)
    return math.inf if w == 0 else 2 * math.pi / (8 * w)


def integrate(cfg: AknsConfig, u0, x_span=(0.0, 1.0), h: float = 1e-2) -> Trajectory:
    """Classical fixed-step RK4.

    The step is shrunk to divide the span evenly; a step that leaves fewer
    than 8 points per period of ``exp(i lam d_k x)`` is rejected.
    """
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != (cfg.n,):
        raise InputError(f"initial vector must have {cfg.n} entries")
    if not h > 0:
        raise InputError("step h must be positive")
    x0, x1 = float(x_span[0]), float(x_span[1])
    if h > max_step(cfg):
        raise InputError(f"step {h} leaves fewer than 8 points per phase period (max {max_step(cfg):.3g})")
    steps = max(1, math.ceil(abs(x1 - x0) / h - 1e-9))
    hs = (x1 - x0) / steps
    iD = 1j * cfg.lam * np.diag(cfg.d)
    xs = x0 + hs * np.arange(steps + 1)
    mid = cfg.coupling(xs[:-1] + hs / 2) + iD
    nodes = cfg.coupling(xs) + iD
    u = np.empty((steps + 1, cfg.n), dtype=complex)
    u[0] = y = u0
    for i in range(steps):
        A0, Am, A1 = nodes[i], mid[i], nodes[i + 1]
        k1 = A0 @ y
        k2 = Am @ (y + 0.5 * hs * k1)
        k3 = Am @ (y + 0.5 * hs * k2)
        k4 = A1 @ (y + hs * k3)
        y = y + (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        u[i + 1] = y
    return Trajectory(xs, u, cfg.lam)


@dataclass(frozen=True, eq=False)
class GaugeData:
    """``v_k = exp(-i lam d_k x) u_k`` and ``w_lm = a_lm exp(i lam (d_m - d_l) x)``.

    The phase follows from substituting ``u_k = exp(i lam d_k x) v_k`` into
    ``u' = i lam D u + N u``.
    """

    x: np.ndarray
    v: np.ndarray
    w: np.ndarray  # shape (len(x), n, n)
    residual: float
    flagged: bool


def gauge_transform(traj: Trajectory, cfg: AknsConfig, tol: float = 1e-6) -> GaugeData:
    """Gauge to ``v' = W v`` and check it with 4th-order centered differences."""
    x = traj.x
    ph = np.exp(-1j * traj.lam * np.outer(x, cfg.d))
    v = ph * traj.u
    dd = np.subtract.outer(cfg.d, cfg.d).T  # dd[l, m] = d_m - d_l
    w = cfg.coupling(x) * np.exp(1j * traj.lam * x[:, None, None] * dd[None])
    res = 0.0
    if len(x) >= 5:
        hx = x[1] - x[0]
        dv = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * hx)
        rhs = np.einsum("xlm,xm->xl", w[2:-2], v[2:-2])
        res = float(np.max(np.abs(dv - rhs)) / max(1.0, float(np.max(np.abs(v)))))
    return GaugeData(x, v, w, res, res > tol)


# ---------------------------------------------------------- iterated integrals

def _sample(f, x):
    if callable(f):
        return np.asarray(f(x), dtype=complex)
    f = np.asarray(f, dtype=complex)
    if f.shape != x.shape:
        raise InputError("sampled entries must live on the quadrature grid")
    return f


def iterated_integral(fs: Sequence, sharps: Sequence[float], lam: float, x=None, x_max: float = 8.0,
                      nq: int = 4096):
    """``int_{-X < x_1 < ... < x_k < x} prod_j f_j(x_j) exp(i lam #_j x_j)`` by cumulative trapezoid.

    ``fs`` are callables or arrays on the ``nq + 1`` quadrature nodes. With
    ``x=None`` the whole profile on the nodes is returned; otherwise it is
    linearly interpolated at ``x``.
    """
    if len(fs) != len(sharps):
        raise InputError("need one frequency # per function")
    if not fs:
        raise InputError("need at least one function")
    t = np.linspace(-x_max, x_max, nq + 1)
    acc = np.ones_like(t, dtype=complex)
    for f, s in zip(fs, sharps):
        acc = cumulative_trapezoid(_sample(f, t) * np.exp(1j * lam * s * t) * acc, t, initial=0.0)
    if x is None:
        return acc
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -x_max) or np.any(xa > x_max):
        raise InputError("evaluation point outside the quadrature range")
    out = np.interp(xa, t, acc.real) + 1j * np.interp(xa, t, acc.imag)
    return complex(out) if out.ndim == 0 else out


def _chains(i, n, entries):
    """Index chains ``i = c_0 < c_1 < ... < c_r`` through nonzero upper entries."""
    yield (i,)
    for m in range(i + 1, n):
        if (i, m) in entries:
            for rest in _chains(m, n, entries):
                yield (i,) + rest


def triangular_solution(cfg: AknsConfig, u0, x=None) -> np.ndarray:
    """Closed form for upper-triangular ``N`` with data ``u(-X) = u0``.

    ``v_i(x) = sum over chains i -> c_1 -> ... -> c_r`` of
    ``v_{c_r}(-X) * iterated_integral([a_{c_{r-1} c_r}, ..., a_{i c_1}], ...)``;
    the innermost integral carries the last link of the chain.
    """
    if not cfg.is_upper_triangular():
        raise InputError("closed form needs an upper-triangular coupling")
    u0 = np.asarray(u0, dtype=complex)
    t = cfg.quad_x
    v0 = np.exp(-1j * cfg.lam * np.asarray(cfg.d) * (-cfg.x_max)) * u0
    v = np.zeros((len(t), cfg.n), dtype=complex)
    for i in range(cfg.n):
        for ch in _chains(i, cfg.n, cfg.entries):
            if len(ch) == 1:
                v[:, i] += v0[i]
                continue
            links = list(zip(ch[:-1], ch[1:]))[::-1]
            fs = [cfg.entries[lm] for lm in links]
            sh = [cfg.d[m] - cfg.d[l] for l, m in links]
            v[:, i] += v0[ch[-1]] * iterated_integral(fs, sh, cfg.lam, None, cfg.x_max, cfg.nq)
    u = np.exp(1j * cfg.lam * np.outer(t, cfg.d)) * v
    if x is None:
        return u
    xa = np.asarray(x, dtype=float)
    return np.stack([np.interp(xa, t, u[:, k].real) + 1j * np.interp(xa, t, u[:, k].imag)
                     for k in range(cfg.n)], axis=-1)


# ------------------------------------------------------ ordered frequencies

def ordered_frequency_form(fs: Sequence[SampledFunction], sharps: Sequence[float], x=None) -> np.ndarray:
    """``sum_{j_1 < ... < j_k} prod_i L^-1 F_i(j_i) exp(2 pi i x #_i j_i / L)`` at the points ``x``.

    Computed with exclusive cumulative sums over the mode axis, ``O(k N)``
    per point. ``x`` defaults to the grid of the inputs.
    """
    k = len(fs)
    if k == 0 or k > 3:
        raise InputError("ordered frequency form supports 1 <= k <= 3")
    if len(sharps) != k or any(s == 0 for s in sharps):
        raise InputError("need k nonzero frequencies #")
    g = fs[0].grid
    if any(f.grid != g for f in fs):
        raise InputError("input functions live on different grids")
    xs = g.x if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    modes = g.modes
    acc = None
    for f, s in zip(fs, sharps):
        F = forward_transform(f).coeffs / g.l
        term = F[None, :] * np.exp(2j * np.pi * np.outer(xs, s * modes) / g.l)
        if acc is None:
            acc = term
        else:
            prev = np.cumsum(acc, axis=1)
            excl = np.concatenate([np.zeros((len(xs), 1), dtype=complex), prev[:, :-1]], axis=1)
            acc = term * excl
    return acc.sum(axis=1)


# -------------------------------------------------------------------- scans

def lambda_scan(cfg: AknsConfig, lam_grid: Sequence[float], u0, h: float = 1.0 / 64) -> list[tuple]:
    """Rows ``(lambda, component, sup_x |u_k(x)|)`` over ``[-X, X]`` from ``u(-X) = u0``.

    The step is reduced where needed to keep 16 points per phase period.
    """
    rows = []
    for lam in lam_grid:
        c = cfg.with_lam(lam)
        hh = min(h, max_step(c) / 2)
        tr = integrate(c, u0, (-cfg.x_max, cfg.x_max), hh)
        sup = np.max(np.abs(tr.u), axis=0)
        rows.extend((float(lam), k + 1, float(sup[k])) for k in range(cfg.n))
    return rows


def scan_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "component", "sup_norm"])
    for lam, k, s in rows:
        w.writerow([f"{lam:.17g}", k, f"{s:.17g}"])
    return buf.getvalue()
