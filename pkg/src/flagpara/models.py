"""Discrete model operators built from L2-normalized wave packets, and the
size / energy functionals of coefficient trees.

A packet adapted to the dyadic interval ``I`` (length ``|I| = L 2^-k``,
center ``c_I``) is defined on the Fourier side as
``bump(xi |I|) exp(-2 pi i xi c_I)`` with ``bump = theta`` (Phi type) or
``theta(t) - theta(2t)`` (Psi type), then divided by its L2 norm. Both
bumps are even and real, so packets are real-valued.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .bumps import theta
from .errors import ConsistencyError, InputError
from .spectral import Grid, SampledFunction, Spectrum, inverse_transform, lp_norm

__all__ = [
    "DyadicInterval",
    "WavePacket",
    "ModelConfig",
    "CoefficientTree",
    "make_packet",
    "inner",
    "model_op_24",
    "model_op_25",
    "four_linear_form",
    "form_trees",
    "size",
    "local_size",
    "energy",
    "check_size_energy",
    "all_intervals",
    "tree_to_json",
    "tree_from_json",
]

TAGS = ("phi", "psi")


# ------------------------------------------------------------------ intervals

@dataclass(frozen=True, order=True)
class DyadicInterval:
    """``[n 2^-k L, (n+1) 2^-k L)`` with ``k >= 0`` and ``0 <= n < 2^k``."""

    k: int
    n: int

    def __post_init__(self):
        if self.k < 0 or not 0 <= self.n < 2**self.k:
            raise InputError(f"invalid dyadic interval k={self.k}, n={self.n}")

    def length(self, l: float = 1.0) -> float:
        return l * 2.0**-self.k

    def bounds(self, l: float = 1.0) -> tuple[float, float]:
        h = self.length(l)
        return self.n * h, (self.n + 1) * h

    def center(self, l: float = 1.0) -> float:
        return (self.n + 0.5) * self.length(l)

    def contains(self, other: "DyadicInterval") -> bool:
        """``other`` is a subset of ``self``."""
        return other.k >= self.k and other.n >> (other.k - self.k) == self.n

    def disjoint(self, other: "DyadicInterval") -> bool:
        return not (self.contains(other) or other.contains(self))

    def cells(self, depth: int) -> range:
        """Indices of the scale-``depth`` cells covering this interval."""
        if depth < self.k:
            raise InputError("cell depth finer than the interval is required")
        s = depth - self.k
        return range(self.n << s, (self.n + 1) << s)


def all_intervals(k_max: int) -> list[DyadicInterval]:
    return [DyadicInterval(k, n) for k in range(k_max + 1) for n in range(2**k)]


# -------------------------------------------------------------------- packets

@dataclass(frozen=True, eq=False)
class WavePacket:
    interval: DyadicInterval
    tag: str
    samples: np.ndarray = field(repr=False)

    @property
    def omega(self) -> float:
        """Center of the frequency support in mode units (0 for Phi type)."""
        return 0.0 if self.tag == "phi" else 1.25 * 2.0**self.interval.k


def _bump(tag, t):
    if tag == "phi":
        return theta(t)
    return theta(t) - theta(2 * t)


_PACKET_CACHE: dict = {}


def make_packet(interval: DyadicInterval, tag: str, grid: Grid) -> WavePacket:
    """L2-normalized real packet adapted to ``interval``."""
    if tag not in TAGS:
        raise InputError(f"packet tag must be one of {TAGS}, got {tag!r}")
    key = (interval, tag, grid)
    if key in _PACKET_CACHE:
        return _PACKET_CACHE[key]
    if 2 ** (interval.k + 1) >= grid.n // 2:
        raise InputError(f"packet at scale {interval.k} exceeds the grid band (N={grid.n})")
    xi = grid.xi
    c = _bump(tag, xi * interval.length(grid.l)) * np.exp(-2j * np.pi * xi * interval.center(grid.l))
    u = inverse_transform(Spectrum(grid, c)).samples.real
    u = u / lp_norm(SampledFunction(grid, u), 2)
    u.setflags(write=False)
    p = WavePacket(interval, tag, u)
    _PACKET_CACHE[key] = p
    return p


def inner(u, v, grid: Grid) -> complex:
    """``<u, v> = int u conj(v)`` by the grid Riemann sum."""
    return complex(grid.dx * np.sum(np.asarray(u) * np.conj(np.asarray(v))))


@dataclass(frozen=True)
class ModelConfig:
    """Index sets and type tags of a model operator.

    ``i_tags[m]`` / ``j_tags[m]`` are the types of ``Phi^(m+1)_I`` / ``Phi^(m+1)_J``;
    at least two of each triple must be Psi type.
    """

    grid: Grid
    i_intervals: tuple
    j_intervals: tuple
    i_tags: tuple = ("psi", "psi", "phi")
    j_tags: tuple = ("psi", "psi", "phi")

    def __post_init__(self):
        object.__setattr__(self, "i_intervals", tuple(sorted(set(self.i_intervals))))
        object.__setattr__(self, "j_intervals", tuple(sorted(set(self.j_intervals))))
        for tags in (self.i_tags, self.j_tags):
            if len(tags) != 3 or any(t not in TAGS for t in tags):
                raise InputError("tags must be three of 'phi' / 'psi'")
            if sum(t == "psi" for t in tags) < 2:
                raise InputError("at least two packet families of each triple must be Psi type")

    def matrix(self, intervals, tag) -> np.ndarray:
        """Packets as rows, shape ``(len(intervals), N)``."""
        if not intervals:
            return np.zeros((0, self.grid.n))
        return np.stack([make_packet(I, tag, self.grid).samples for I in intervals])

    def lengths(self, intervals) -> np.ndarray:
        return np.array([I.length(self.grid.l) for I in intervals])

    def to_json(self) -> dict:
        return {
            "grid": {"n": self.grid.n, "l": self.grid.l},
            "i_intervals": [[I.k, I.n] for I in self.i_intervals],
            "j_intervals": [[J.k, J.n] for J in self.j_intervals],
            "i_tags": list(self.i_tags),
            "j_tags": list(self.j_tags),
        }


def _coeffs(P, u, grid):
    """``<u, P_r>`` for every packet row ``P_r``."""
    return grid.dx * (P @ np.asarray(u, dtype=complex))


def _check(cfg, *fs):
    for f in fs:
        if f.grid != cfg.grid:
            raise InputError("function grid differs from the model grid")


def _pair_mask(cfg: ModelConfig, gap: int | None):
    """``mask[i, j]``: J contributes to ``B_I`` (``|J| > |I|``, or ``|J| = 2^gap |I|``)."""
    ki = np.array([I.k for I in cfg.i_intervals])[:, None]
    kj = np.array([J.k for J in cfg.j_intervals])[None, :]
    if gap is None:
        return kj < ki
    return ki - kj == gap


def _b_coeffs(cfg, f, g, gap):
    """``<B_I(f, g), Phi^1_I>`` for every I."""
    G = cfg.grid
    PJ = [cfg.matrix(cfg.j_intervals, t) for t in cfg.j_tags]
    PI1 = cfg.matrix(cfg.i_intervals, cfg.i_tags[0])
    aj = _coeffs(PJ[0], f.samples, G) * _coeffs(PJ[1], g.samples, G) / np.sqrt(cfg.lengths(cfg.j_intervals))
    # <Phi^3_J, Phi^1_I> for real packets
    cross = G.dx * (PI1 @ PJ[2].T)
    return (cross * _pair_mask(cfg, gap)) @ aj


def _model(cfg, f, g, h, gap):
    _check(cfg, f, g, h)
    G = cfg.grid
    out = np.zeros(G.n, dtype=complex)
    if not cfg.i_intervals or not cfg.j_intervals:
        return SampledFunction(G, out)
    b = _b_coeffs(cfg, f, g, gap)
    PI2 = cfg.matrix(cfg.i_intervals, cfg.i_tags[1])
    PI3 = cfg.matrix(cfg.i_intervals, cfg.i_tags[2])
    w = b * _coeffs(PI2, h.samples, G) / np.sqrt(cfg.lengths(cfg.i_intervals))
    return SampledFunction(G, w @ PI3)


def model_op_24(cfg: ModelConfig, f, g, h) -> SampledFunction:
    """``sum_I |I|^-1/2 <B_I(f,g), Phi^1_I> <h, Phi^2_I> Phi^3_I``, J over ``|J| > |I|``."""
    return _model(cfg, f, g, h, None)


def model_op_25(gap: int, cfg: ModelConfig, f, g, h) -> SampledFunction:
    """As :func:`model_op_24` with the J-sum restricted to ``|J| = 2^gap |I|``."""
    if gap < 1:
        raise InputError("gap must be a positive integer")
    return _model(cfg, f, g, h, int(gap))


def _dual_form(cfg, f, g, h, k):
    """``sum_J |J|^-1/2 <f,Phi^1_J> <g,Phi^2_J> <B_J(h,k), Phi^3_J>``.

    ``B_J(h, k) = sum_{I : |I| < |J|} |I|^-1/2 <h,Phi^2_I> <k,Phi^3_I> Phi^1_I``.
    """
    G = cfg.grid
    PI = [cfg.matrix(cfg.i_intervals, t) for t in cfg.i_tags]
    PJ = [cfg.matrix(cfg.j_intervals, t) for t in cfg.j_tags]
    ci = _coeffs(PI[1], h.samples, G) * _coeffs(PI[2], k.samples, G)
    ci = ci / np.sqrt(cfg.lengths(cfg.i_intervals))
    cross = G.dx * (PJ[2] @ PI[0].T)  # <Phi^1_I, Phi^3_J>
    bj = (cross * _pair_mask(cfg, None).T) @ ci
    aj = _coeffs(PJ[0], f.samples, G) * _coeffs(PJ[1], g.samples, G) / np.sqrt(cfg.lengths(cfg.j_intervals))
    return complex(np.sum(aj * bj))


def four_linear_form(cfg: ModelConfig, f, g, h, k, tol: float = 1e-10) -> complex:
    """``Lambda(f,g,h,k) = sum_I |I|^-1/2 <B_I(f,g),Phi^1_I> <h,Phi^2_I> <k,Phi^3_I>``.

    Equals ``int T(f,g,h) k`` for ``T = model_op_24``. The sum is also computed
    regrouped over J; a mismatch beyond ``tol`` raises :class:`ConsistencyError`.
    """
    _check(cfg, f, g, h, k)
    if not cfg.i_intervals or not cfg.j_intervals:
        return 0j
    T = model_op_24(cfg, f, g, h)
    lam = complex(cfg.grid.dx * np.sum(T.samples * k.samples))
    dual = _dual_form(cfg, f, g, h, k)
    if abs(lam - dual) > tol * max(1.0, abs(lam)):
        raise ConsistencyError(f"four-linear form {lam} and its regrouping {dual} disagree")
    return lam


# ---------------------------------------------------------- coefficient trees

@dataclass(frozen=True)
class CoefficientTree:
    """Coefficients ``a_J`` on dyadic intervals of the period ``[0, l)``."""

    entries: tuple
    tag: str = "phi"
    l: float = 1.0

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InputError(f"tree tag must be one of {TAGS}, got {self.tag!r}")
        d: dict = {}
        for J, a in (self.entries.items() if isinstance(self.entries, Mapping) else self.entries):
            if not isinstance(J, DyadicInterval):
                J = DyadicInterval(*J)
            a = complex(a)
            if not np.isfinite(a):
                raise InputError("tree coefficients must be finite")
            d[J] = a
        object.__setattr__(self, "entries", tuple(sorted(d.items())))

    @property
    def mapping(self) -> dict:
        return dict(self.entries)

    @property
    def intervals(self) -> list:
        return [J for J, _ in self.entries]

    def scaled(self, c: complex) -> "CoefficientTree":
        return CoefficientTree(tuple((J, c * a) for J, a in self.entries), self.tag, self.l)

    def __len__(self):
        return len(self.entries)


def form_trees(cfg: ModelConfig, f, g, h, k) -> tuple:
    """The three trees ``(<f,Phi^1_J>)``, ``(<g,Phi^2_J>)``, ``(<B_J(h,k),Phi^3_J>)`` over J."""
    _check(cfg, f, g, h, k)
    G = cfg.grid
    PI = [cfg.matrix(cfg.i_intervals, t) for t in cfg.i_tags]
    PJ = [cfg.matrix(cfg.j_intervals, t) for t in cfg.j_tags]
    ci = _coeffs(PI[1], h.samples, G) * _coeffs(PI[2], k.samples, G)
    ci = ci / np.sqrt(cfg.lengths(cfg.i_intervals))
    cross = G.dx * (PJ[2] @ PI[0].T)
    bj = (cross * _pair_mask(cfg, None).T) @ ci
    vals = (_coeffs(PJ[0], f.samples, G), _coeffs(PJ[1], g.samples, G), bj)
    return tuple(CoefficientTree(tuple(zip(cfg.j_intervals, v)), t, G.l) for v, t in zip(vals, cfg.j_tags))


def _weak_l1(values: np.ndarray, cell: float) -> float:
    """``sup_lam lam |{F >= lam}|`` for a step function with equal cells."""
    v = np.sort(values[values > 0])[::-1]
    if v.size == 0:
        return 0.0
    return float(np.max(v * cell * np.arange(1, v.size + 1)))


def local_size(tree: CoefficientTree, J: DyadicInterval) -> float:
    """Phi tag: ``|a_J| / |J|^1/2``. Psi tag: the normalized weak-L1 square function over ``J' <= J``."""
    m = tree.mapping
    if tree.tag == "phi":
        return abs(m.get(J, 0j)) / math.sqrt(J.length(tree.l))
    sub = [(Jp, a) for Jp, a in tree.entries if J.contains(Jp)]
    depth = max([Jp.k for Jp, _ in sub], default=J.k)
    base = J.n << (depth - J.k)
    sq = np.zeros(1 << (depth - J.k))
    for Jp, a in sub:
        r = Jp.cells(depth)
        sq[r.start - base : r.stop - base] += abs(a) ** 2 / Jp.length(tree.l)
    cell = tree.l * 2.0**-depth
    return _weak_l1(np.sqrt(sq), cell) / J.length(tree.l)


def size(tree: CoefficientTree, collection: Iterable[DyadicInterval] | None = None) -> float:
    """``sup_{J in collection} local_size(tree, J)``; the collection defaults to the tree's intervals."""
    if not len(tree):
        raise InputError("size of an empty tree")
    coll = tree.intervals if collection is None else list(collection)
    if not coll:
        raise InputError("empty interval collection")
    return max(local_size(tree, J) for J in coll)


def _floor_log2(v: float) -> int:
    return math.frexp(v)[1] - 1


def energy(tree: CoefficientTree, dyadic: bool = False) -> float:
    """``sup_lam lam * sum_{J in D} |J|`` over disjoint ``D`` of intervals with local size ``>= lam``.

    At fixed ``lam`` the best ``D`` is the set of maximal qualifying intervals,
    so the sup runs over the finitely many thresholds ``lam = local_size(J)``.
    With ``dyadic=True`` the thresholds are restricted to powers ``2^n``,
    ``n`` an integer, and each interval contributes at ``n = floor(log2 size)``.
    """
    if not len(tree):
        raise InputError("energy of an empty tree")
    vals = {J: local_size(tree, J) for J in tree.intervals}
    best = 0.0
    levels = sorted({v for v in vals.values() if v > 0}, reverse=True)
    if dyadic:
        levels = sorted({2.0 ** _floor_log2(v) for v in levels}, reverse=True)
    for lam in levels:
        q = [J for J, v in vals.items() if v >= lam]
        top = [J for J in q if not any(K != J and K.contains(J) for K in q)]
        best = max(best, lam * sum(J.length(tree.l) for J in top))
    return best


def check_size_energy(lam: complex, trees: Sequence[CoefficientTree], theta_: Sequence[float],
                      dyadic: bool = False) -> float:
    """``|Lambda| / prod_i size_i^(1 - theta_i) energy_i^theta_i`` (with ``0^0 = 1``)."""
    if len(trees) != 3 or len(theta_) != 3:
        raise InputError("need three trees and three theta parameters")
    th = [float(t) for t in theta_]
    if any(t < 0 or t >= 1 for t in th) or abs(sum(th) - 1) > 1e-12:
        raise InputError("theta parameters must lie in [0, 1) and sum to 1")
    if lam == 0:
        return 0.0
    den = 1.0
    for t, tr in zip(th, trees):
        s, e = size(tr), energy(tr, dyadic)
        den *= (s ** (1 - t)) * (e**t if t else 1.0)
    if den == 0:
        raise ConsistencyError("nonzero form value with a vanishing size-energy bound")
    return abs(lam) / den


# ---------------------------------------------------------------------- JSON

def tree_to_json(tree: CoefficientTree) -> list:
    return [{"k": J.k, "n": J.n, "re": a.real, "im": a.imag, "tag": tree.tag} for J, a in tree.entries]


def tree_from_json(items: Sequence[Mapping[str, Any]], l: float = 1.0) -> CoefficientTree:
    if not items:
        raise InputError("tree JSON has no entries")
    tags = {d.get("tag", "phi") for d in items}
    if len(tags) != 1:
        raise InputError("tree entries carry mixed tags")
    try:
        ent = tuple((DyadicInterval(int(d["k"]), int(d["n"])), complex(d.get("re", 0.0), d.get("im", 0.0)))
                    for d in items)
    except KeyError as exc:
        raise InputError(f"tree entry missing field {exc.args[0]!r}") from None
    return CoefficientTree(ent, tags.pop(), l)
