"""Multiplier symbols: closed forms, tabulations and dyadic scale sums.

A :class:`SymbolExpr` of arity ``n`` is a product of factors ``m_S(xi_S)``
over index subsets ``S`` of ``{1, ..., n}`` (1-based, as in the flag class).
A :class:`SymbolSum` is a finite linear combination of such products; it is
what Taylor remainders and case splits produce.

The workhorse factor is :class:`ScaleSum`::

    sum over (k_0, ..., k_{r-1}) in box, subject to difference constraints,
        of  coef * prod_slots slot(k_{slot.scale}, xi)

where a slot evaluates a bump family at a linear combination of the factor's
coordinates (``weights``), optionally differentiated, or a Taylor polynomial
or Taylor remainder of a family about a second linear form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .bumps import BumpFamily, family_from_json
from .errors import InputError

__all__ = [
    "Slot",
    "ClosedForm",
    "Tabulated",
    "ScaleSum",
    "SymbolExpr",
    "SymbolSum",
    "MihlinReport",
    "CLOSED_FORMS",
    "eval_symbol",
    "eval_exact",
    "mihlin_report",
    "build_flag_symbol",
    "tensor_kernel_symbol",
    "constant_symbol",
    "symbol_to_json",
    "symbol_from_json",
]


# -------------------------------------------------------------- closed forms

def _one(xi):
    return np.ones(xi.shape[:-1])


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _riesz_ratio(xi):
    return _ratio(xi[..., 0] ** 2, np.sum(xi**2, axis=-1))


def _pair_ratio(xi):
    return _ratio(xi[..., 0] * xi[..., 1], np.sum(xi**2, axis=-1))


def _signed_ratio(xi):
    return _ratio(xi[..., 0], np.sqrt(np.sum(xi**2, axis=-1)))


# name -> (callable on (..., d) arrays, minimal arity); all vanish at the origin
# except "one", where the value there is set by convention
CLOSED_FORMS: dict[str, tuple[Callable, int]] = {
    "one": (_one, 1),
    "riesz_ratio": (_riesz_ratio, 1),
    "pair_ratio": (_pair_ratio, 2),
    "signed_ratio": (_signed_ratio, 1),
}


@dataclass(frozen=True)
class ClosedForm:
    name: str

    def __post_init__(self):
        if self.name not in CLOSED_FORMS:
            raise InputError(f"unknown closed-form symbol {self.name!r}")

    def check_arity(self, d):
        if d < CLOSED_FORMS[self.name][1]:
            raise InputError(f"closed form {self.name!r} needs at least {CLOSED_FORMS[self.name][1]} arguments")

    def evaluate(self, xi):
        return CLOSED_FORMS[self.name][0](xi).astype(complex)

    def exact(self, xi):
        v = complex(self.evaluate(np.asarray(xi, dtype=float)[None, :])[0])
        if v.imag:
            raise InputError("exact evaluation needs real symbol values")
        return Fraction(v.real)


@dataclass(frozen=True)
class Tabulated:
    """Values on integer mode tuples; lookup rounds ``xi * l`` to the nearest mode."""

    l: float
    arity: int
    table: tuple = field(default=())  # sorted ((modes...), value) pairs

    @classmethod
    def from_dict(cls, l, values: Mapping[tuple, complex]):
        items = tuple(sorted((tuple(int(j) for j in k), complex(v)) for k, v in values.items()))
        if not items:
            raise InputError("tabulated factor needs at least one entry")
        arity = len(items[0][0])
        if any(len(k) != arity for k, _ in items):
            raise InputError("tabulated factor keys have inconsistent length")
        return cls(float(l), arity, items)

    def check_arity(self, d):
        if d != self.arity:
            raise InputError(f"tabulated factor has arity {self.arity}, subset has {d}")

    def evaluate(self, xi):
        lookup = dict(self.table)
        modes = np.rint(np.asarray(xi) * self.l).astype(int)
        flat = modes.reshape(-1, self.arity)
        out = np.array([lookup.get(tuple(r), 0j) for r in flat], dtype=complex)
        return out.reshape(modes.shape[:-1])

    def exact(self, xi):
        v = complex(self.evaluate(np.asarray(xi, dtype=float)[None, :])[0])
        if v.imag:
            raise InputError("exact evaluation needs real symbol values")
        return Fraction(v.real)


@dataclass(frozen=True)
class Slot:
    """One bump (or Taylor piece) inside a :class:`ScaleSum`.

    kind ``bump``: ``family.value(k, <weights, xi>, order)``.
    kind ``taylor_poly``: degree-``taylor_order`` Taylor polynomial of
    ``family_k`` about ``<center, xi>``, evaluated at ``<weights, xi>``.
    kind ``taylor_remainder``: ``family_k(<weights, xi>)`` minus that polynomial.
    """

    family: BumpFamily
    scale: int
    weights: tuple
    order: int = 0
    kind: str = "bump"
    center: tuple | None = None
    taylor_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if self.center is not None:
            object.__setattr__(self, "center", tuple(int(w) for w in self.center))
        if self.kind not in ("bump", "taylor_poly", "taylor_remainder"):
            raise InputError(f"unknown slot kind {self.kind!r}")
        if self.kind != "bump" and (self.center is None or len(self.center) != len(self.weights)):
            raise InputError("taylor slots need a center form of matching length")

    def evaluate(self, k, xi):
        target = xi @ np.asarray(self.weights, dtype=float)
        if self.kind == "bump":
            return self.family.value(k, target, self.order)
        c = xi @ np.asarray(self.center, dtype=float)
        coeffs = self.family.taylor_series(k, c, self.taylor_order)
        d = (target - c) / 2.0**k
        poly = np.zeros_like(target)
        for l in range(self.taylor_order, -1, -1):  # Horner
            poly = poly * d + coeffs[l]
        if self.kind == "taylor_poly":
            return poly
        return self.family.value(k, target) - poly

    @property
    def is_unit(self) -> bool:
        """Bump slot whose argument is a plain sum of coordinates (0/1 weights)."""
        return self.kind == "bump" and set(self.weights) <= {0, 1} and any(self.weights)

    def support_interval(self, k):
        return self.family.support(k)


@dataclass(frozen=True)
class ScaleSum:
    """``coef * sum_{scale tuples} prod_slots``.

    ``scales`` gives one ``(k_min, k_max)`` box per scale index.
    ``constraints`` holds ``(i, j, lo, hi)`` meaning ``lo <= k_j - k_i <= hi``
    (``None`` for an open side).
    """

    scales: tuple
    slots: tuple
    constraints: tuple = ()
    coef: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple((int(a), int(b)) for a, b in self.scales))
        object.__setattr__(self, "slots", tuple(self.slots))
        object.__setattr__(self, "constraints", tuple(tuple(c) for c in self.constraints))
        if not self.slots:
            raise InputError("scale sum needs at least one slot")
        widths = {len(s.weights) for s in self.slots}
        if len(widths) != 1:
            raise InputError("all slots of a scale sum must act on the same coordinates")
        for s in self.slots:
            if not 0 <= s.scale < len(self.scales):
                raise InputError(f"slot refers to scale index {s.scale}, have {len(self.scales)}")
        for a, b in self.scales:
            if a > b:
                raise InputError(f"empty scale box ({a}, {b})")

    @property
    def width(self) -> int:
        return len(self.slots[0].weights)

    def check_arity(self, d):
        if d != self.width:
            raise InputError(f"scale sum acts on {self.width} coordinates, subset has {d}")

    def scale_tuples(self) -> list[tuple]:
        boxes = [range(a, b + 1) for a, b in self.scales]
        out = []
        for ks in itertools.product(*boxes):
            ok = True
            for i, j, lo, hi in self.constraints:
                d = ks[j] - ks[i]
                if (lo is not None and d < lo) or (hi is not None and d > hi):
                    ok = False
                    break
            if ok:
                out.append(ks)
        return out

    def term(self, ks, xi):
        v = np.full(xi.shape[:-1], self.coef, dtype=float)
        for s in self.slots:
            v = v * s.evaluate(ks[s.scale], xi)
        return v

    def evaluate(self, xi):
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for ks in self.scale_tuples():
            out += self.term(ks, xi)
        return out

    def exact(self, xi):
        xi = np.asarray(xi, dtype=float)[None, :]
        total = Fraction(0)
        c = Fraction(self.coef)
        for ks in self.scale_tuples():
            t = c
            for s in self.slots:
                t *= Fraction(float(s.evaluate(ks[s.scale], xi)[0]))
                if not t:
                    break
            total += t
        return total


Factor = ClosedForm | Tabulated | ScaleSum


@dataclass(frozen=True)
class SymbolExpr:
    """``coef * prod_S m_S(xi_S)`` with 1-based subsets ``S``."""

    arity: int
    factors: tuple
    coef: float = 1.0

    def __post_init__(self):
        if self.arity < 1:
            raise InputError("symbol arity must be positive")
        fs = []
        for S, fac in self.factors:
            S = tuple(int(i) for i in S)
            if not S:
                raise InputError("factor subset must be nonempty")
            if len(set(S)) != len(S) or not all(1 <= i <= self.arity for i in S):
                raise InputError(f"invalid subset {S} for arity {self.arity}")
            fac.check_arity(len(S))
            fs.append((S, fac))
        object.__setattr__(self, "factors", tuple(fs))

    def evaluate(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.full(xi.shape[:-1], complex(self.coef))
        for S, fac in self.factors:
            out = out * fac.evaluate(xi[..., [i - 1 for i in S]])
        return out

    def exact(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = Fraction(self.coef)
        for S, fac in self.factors:
            if not out:
                break
            out *= fac.exact(xi[[i - 1 for i in S]])
        return out

    def scaled(self, c: float) -> "SymbolExpr":
        return SymbolExpr(self.arity, self.factors, self.coef * c)


@dataclass(frozen=True)
class SymbolSum:
    """``sum_i c_i * m_i`` over symbols of a common arity."""

    arity: int
    terms: tuple

    def __post_init__(self):
        ts = tuple((float(c), m) for c, m in self.terms)
        for _, m in ts:
            if m.arity != self.arity:
                raise InputError("summands must share the arity")
        object.__setattr__(self, "terms", ts)

    def evaluate(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for c, m in self.terms:
            out += c * m.evaluate(xi)
        return out

    def exact(self, xi):
        return sum((Fraction(c) * m.exact(xi) for c, m in self.terms), Fraction(0))


Symbol = SymbolExpr | SymbolSum


# ---------------------------------------------------------------- operations

def eval_symbol(m: Symbol, xi) -> np.ndarray | complex:
    """Evaluate at one point (length-``n`` vector) or a stack ``(..., n)``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (m.arity,):
        raise InputError(f"symbol has arity {m.arity}, got points of shape {xi.shape}")
    if not np.all(np.isfinite(xi)):
        raise InputError("frequencies must be finite")
    out = m.evaluate(xi)
    return complex(out) if xi.ndim == 1 else out


def eval_exact(m: Symbol, xi) -> Fraction:
    """Evaluate with every sum and product carried out in exact rationals.

    Each bump value is the float ``eval_symbol`` would use, read exactly as a
    rational; identities that hold by regrouping finite sums then hold with
    error exactly zero.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (m.arity,):
        raise InputError(f"symbol has arity {m.arity}, got point of shape {xi.shape}")
    return m.exact(xi)


def constant_symbol(n: int) -> SymbolExpr:
    return SymbolExpr(n, (((tuple(range(1, n + 1))), ClosedForm("one")),))


def _embed(S, m: SymbolExpr):
    """Re-index the factors of an arity-|S| symbol onto the global subset S."""
    out = []
    for T, fac in m.factors:
        out.append((tuple(S[i - 1] for i in T), fac))
    return out


def build_flag_symbol(n: int, factors: Sequence[tuple[Iterable[int], Any]]) -> SymbolExpr:
    """Product symbol ``prod_S m_S(xi_S)``.

    Each factor is a :class:`ClosedForm`, :class:`Tabulated`, :class:`ScaleSum`
    or an arity-``|S|`` :class:`SymbolExpr` (whose own factors are embedded).
    """
    if not factors:
        raise InputError("flag symbol needs at least one factor")
    flat = []
    coef = 1.0
    for S, fac in factors:
        S = tuple(int(i) for i in S)
        if isinstance(fac, SymbolExpr):
            if fac.arity != len(S):
                raise InputError(f"sub-symbol of arity {fac.arity} placed on subset {S}")
            if not all(1 <= i <= n for i in S):
                raise InputError(f"invalid subset {S} for arity {n}")
            flat.extend(_embed(S, fac))
            coef *= fac.coef
        else:
            flat.append((S, fac))
    return SymbolExpr(n, tuple(flat), coef)


def tensor_kernel_symbol(families: Sequence[BumpFamily], scales: range | None = None) -> SymbolExpr:
    """``sum_k prod_j b^j_k(xi_j)`` over a shared scale range."""
    if not families:
        raise InputError("need at least one family")
    if scales is None:
        rs = {tuple(f.scales) for f in families}
        if len(rs) != 1:
            raise InputError("families have mismatched scale ranges")
        scales = families[0].scales
    for f in families:
        if scales[0] not in f.scales or scales[-1] not in f.scales:
            raise InputError("scale range not covered by every family")
    n = len(families)
    slots = tuple(Slot(f, 0, tuple(int(i == j) for i in range(n))) for j, f in enumerate(families))
    return SymbolExpr(n, ((tuple(range(1, n + 1)), ScaleSum(((scales[0], scales[-1]),), slots)),))


# --------------------------------------------------------- Mihlin condition

_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


@dataclass(frozen=True)
class MihlinReport:
    """Worst ``|d^alpha m(xi)| |xi|^|alpha|`` per multi-index over the samples."""

    values: dict
    sample_count: int

    def by_order(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for a, v in self.values.items():
            out[sum(a)] = max(out.get(sum(a), 0.0), v)
        return out


def _multi_indices(n, max_order):
    for a in itertools.product(range(max_order + 1), repeat=n):
        if sum(a) <= max_order:
            yield a


def mihlin_report(m: Symbol, max_order: int, samples) -> MihlinReport:
    """Central-difference check of ``|d^alpha m| <~ |xi|^-|alpha|``.

    Step ``h = 1e-3 |xi|`` per sample; multi-indices up to ``|alpha| = max_order``.
    """
    if not 0 <= max_order <= 4:
        raise InputError("max_order must be in 0..4")
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[1] != m.arity:
        raise InputError(f"samples must have {m.arity} coordinates")
    r = np.linalg.norm(pts, axis=1)
    if np.any(r == 0):
        raise InputError("sample at the origin, where the symbol is singular")
    h = 1e-3 * r
    values = {}
    for a in _multi_indices(m.arity, max_order):
        offsets = [list(_STENCILS[ai].items()) for ai in a]
        total = np.zeros(len(pts), dtype=complex)
        for combo in itertools.product(*offsets):
            shift = np.array([o for o, _ in combo], dtype=float)
            w = math.prod(c for _, c in combo)
            total += w * m.evaluate(pts + h[:, None] * shift[None, :])
        deriv = total / h ** sum(a)
        values[a] = float(np.max(np.abs(deriv) * r ** sum(a)))
    return MihlinReport(values, len(pts))


# ------------------------------------------------------------- JSON support

def _slot_to_json(s: Slot) -> dict:
    d = {"family": s.family.to_json(), "scale": s.scale, "weights": list(s.weights)}
    if s.order:
        d["order"] = s.order
    if s.kind != "bump":
        d.update(kind=s.kind, center=list(s.center), taylor_order=s.taylor_order)
    return d


def _factor_to_json(S, fac) -> dict:
    d: dict[str, Any] = {"subset": list(S)}
    if isinstance(fac, ClosedForm):
        d.update(kind="closed_form", name=fac.name)
    elif isinstance(fac, Tabulated):
        d.update(kind="tabulated", l=fac.l,
                 values=[[list(k), v.real, v.imag] for k, v in fac.table])
    else:
        d.update(kind="scale_sum", scales=[list(b) for b in fac.scales],
                 slots=[_slot_to_json(s) for s in fac.slots],
                 constraints=[list(c) for c in fac.constraints])
        if fac.coef != 1.0:
            d["coef"] = fac.coef
    return d


def symbol_to_json(m: Symbol) -> dict:
    if isinstance(m, SymbolSum):
        return {"arity": m.arity, "sum": [[c, symbol_to_json(t)] for c, t in m.terms]}
    d = {"arity": m.arity, "factors": [_factor_to_json(S, f) for S, f in m.factors]}
    if m.coef != 1.0:
        d["coef"] = m.coef
    return d


def _factor_from_json(d):
    kind = d.get("kind")
    if kind == "closed_form":
        return ClosedForm(d["name"])
    if kind == "tabulated":
        return Tabulated.from_dict(d.get("l", 1.0), {tuple(k): complex(re, im) for k, re, im in d["values"]})
    if kind == "scale_sum":
        slots = []
        for s in d["slots"]:
            slots.append(Slot(family_from_json(s["family"]), int(s["scale"]), tuple(s["weights"]),
                              int(s.get("order", 0)), s.get("kind", "bump"),
                              tuple(s["center"]) if "center" in s else None,
                              int(s.get("taylor_order", 0))))
        return ScaleSum(tuple(tuple(b) for b in d["scales"]), tuple(slots),
                        tuple(tuple(c) for c in d.get("constraints", ())), float(d.get("coef", 1.0)))
    raise InputError(f"unknown factor kind {kind!r}")


def symbol_from_json(d: Mapping[str, Any]) -> Symbol:
    try:
        n = int(d["arity"])
        if "sum" in d:
            return SymbolSum(n, tuple((c, symbol_from_json(t)) for c, t in d["sum"]))
        if not d["factors"]:
            raise InputError("symbol needs at least one factor")
        return SymbolExpr(n, tuple((tuple(f["subset"]), _factor_from_json(f)) for f in d["factors"]),
                          float(d.get("coef", 1.0)))
    except KeyError as exc:
        raise InputError(f"symbol JSON missing field {exc.args[0]!r}") from None
