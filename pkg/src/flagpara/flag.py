"""Flag paraproducts ``a(xi1,xi2) b(xi2,xi3)`` and ``a(xi1,xi2) b(xi1,xi2,xi3)``.

Also: the split of their tensor-form symbols into the scale cases
``k1 ~ k2``, ``k1 << k2``, ``k2 << k1`` and the Taylor reduction of the
``k1 << k2`` case, which trades ``phi_k2(xi2)`` (resp. ``phi_k2(xi1)``) for
derivatives evaluated at ``xi1 + xi2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bumps import BumpFamily
from .errors import InputError
from .multiplier import apply_multiplier, apply_tensor, has_tensor_form
from .spectral import SampledFunction
from .symbols import ScaleSum, Slot, SymbolExpr, SymbolSum, build_flag_symbol, tensor_kernel_symbol

__all__ = [
    "MAX_TAYLOR",
    "ScaleCases",
    "TaylorTerm",
    "TaylorReduction",
    "flag_symbol_tab",
    "flag_symbol_nls",
    "apply_flag_tab",
    "apply_flag_nls",
    "theorem_families",
    "flag_scale_range",
    "split_scale_cases",
    "support_pairs",
    "taylor_reduce",
    "remainder_sups",
    "sample_low_high",
    "fit_log2_slope",
    "resummation_partial_sums",
]

MAX_TAYLOR = 8


# ---------------------------------------------------------------- operators

def flag_symbol_tab(a: SymbolExpr, b: SymbolExpr) -> SymbolExpr:
    if a.arity != 2 or b.arity != 2:
        raise InputError("both factors of a(xi1,xi2) b(xi2,xi3) have arity 2")
    return build_flag_symbol(3, [((1, 2), a), ((2, 3), b)])


def flag_symbol_nls(a: SymbolExpr, b: SymbolExpr) -> SymbolExpr:
    if a.arity != 2 or b.arity != 3:
        raise InputError("a(xi1,xi2) b(xi1,xi2,xi3) needs arities 2 and 3")
    return build_flag_symbol(3, [((1, 2), a), ((1, 2, 3), b)])


def _apply(m, fs, mode):
    if mode == "direct":
        return apply_multiplier(m, fs)
    if mode == "fast" or (mode == "auto" and has_tensor_form(m)):
        return apply_tensor(m, fs)
    if mode == "auto":
        return apply_multiplier(m, fs)
    raise InputError(f"mode must be 'auto', 'fast' or 'direct', got {mode!r}")


def apply_flag_tab(a, b, f1, f2, f3, mode: str = "auto") -> SampledFunction:
    """Trilinear operator with symbol ``a(xi1, xi2) b(xi2, xi3)``.

    ``fast`` needs scale-sum factors and runs per scale pair with nested
    spectral products; ``direct`` is the ``O(N^3)`` frequency sum.
    """
    return _apply(flag_symbol_tab(a, b), [f1, f2, f3], mode)


def apply_flag_nls(a, b, f1, f2, f3, mode: str = "auto") -> SampledFunction:
    """Trilinear operator with symbol ``a(xi1, xi2) b(xi1, xi2, xi3)``."""
    return _apply(flag_symbol_nls(a, b), [f1, f2, f3], mode)


def theorem_families(variant: str, k_min: int, k_max: int):
    """Standard tensor families ``(a_fams, b_fams)`` for the two theorem symbols.

    ``tab``: ``a = sum phi(xi1) psi(xi2)``, ``b = sum phi(xi2) psi(xi3)``.
    ``nls``: ``a = sum phi(xi1) psi(xi2)``, ``b = sum phi(xi1) phi(xi2) psi(xi3)``.
    """
    phi = BumpFamily("phi", k_min, k_max)
    psi = BumpFamily("psi", k_min, k_max)
    if variant == "tab":
        return (phi, psi), (phi, psi)
    if variant == "nls":
        return (phi, psi), (phi, phi, psi)
    raise InputError(f"variant must be 'tab' or 'nls', got {variant!r}")


def flag_scale_range(grid, factors: int = 3) -> tuple[int, int]:
    """Scales ``[k_min, k_max]`` whose ``factors``-fold products of pieces stay alias-free.

    ``k_min`` is the lowest annulus reaching mode 1; ``k_max`` keeps
    ``factors * 2^(k_max+1) < N / (2L)``.
    """
    import math

    k_min = math.floor(math.log2(1.0 / grid.l)) - 1
    k_max = k_min
    while factors * 2.0 ** (k_max + 2) < grid.n / (2 * grid.l):
        k_max += 1
    return k_min, k_max


# --------------------------------------------------------------- case split

def _unit(i, n=3):
    return tuple(int(j == i) for j in range(n))


def _product_slots(a_fams, b_fams):
    if len(a_fams) != 2 or len(b_fams) not in (2, 3):
        raise InputError("need two a-families and two (tab) or three (nls) b-families")
    for fams in (a_fams, b_fams):
        if not all(isinstance(f, BumpFamily) for f in fams):
            raise InputError("case split needs scale-sum tensor families")
        if len({tuple(f.scales) for f in fams}) != 1:
            raise InputError("the families of one factor must share their scale range")
    a_coords = (0, 1)
    b_coords = (1, 2) if len(b_fams) == 2 else (0, 1, 2)
    slots = [Slot(f, 0, _unit(i)) for f, i in zip(a_fams, a_coords)]
    slots += [Slot(f, 1, _unit(i)) for f, i in zip(b_fams, b_coords)]
    scales = ((a_fams[0].scales[0], a_fams[0].scales[-1]), (b_fams[0].scales[0], b_fams[0].scales[-1]))
    return tuple(slots), scales


@dataclass(frozen=True)
class ScaleCases:
    """``a b = diag + low_high + high_low``; ``low_high`` is ``k1 << k2``.

    ``empty[name]`` is True when support analysis proves that part vanishes.
    """

    variant: str
    gap: int
    diag: SymbolExpr
    low_high: SymbolExpr
    high_low: SymbolExpr
    product: SymbolExpr
    empty: dict = field(default_factory=dict)

    def parts(self):
        return {"diag": self.diag, "low_high": self.low_high, "high_low": self.high_low}


def _coord_supports(slots, ks):
    """Per coordinate, the intersection of the |xi| ranges of the bumps acting on it.

    Returns None when some intersection has empty interior (the term vanishes).
    """
    rng = {}
    for s in slots:
        if sum(1 for w in s.weights if w) != 1:
            continue
        i = s.weights.index(1) if 1 in s.weights else None
        if i is None:
            continue
        lo, hi = s.family.support(ks[s.scale])
        plo, phi = rng.get(i, (0.0, np.inf))
        lo, hi = max(lo, plo), min(hi, phi)
        if not lo < hi:
            return None
        rng[i] = (lo, hi)
    return rng


def support_pairs(part: SymbolExpr) -> list[tuple]:
    """Scale tuples of a single-scale-sum symbol whose coordinate supports overlap."""
    (_, fac), = part.factors
    return [ks for ks in fac.scale_tuples() if _coord_supports(fac.slots, ks) is not None]


def split_scale_cases(a_fams: Sequence[BumpFamily], b_fams: Sequence[BumpFamily], gap: int = 2) -> ScaleCases:
    """Partition the double scale sum of ``a b`` by ``d = k2 - k1``.

    ``diag``: ``|d| <= gap``; ``low_high``: ``d > gap``; ``high_low``: ``d < -gap``.
    The parts come from one index set split three ways, so their sum equals
    the product term by term.
    """
    if gap < 0:
        raise InputError("gap must be nonnegative")
    slots, scales = _product_slots(a_fams, b_fams)
    variant = "tab" if len(b_fams) == 2 else "nls"
    full = (1, 2, 3)

    def part(lo, hi):
        return SymbolExpr(3, ((full, ScaleSum(scales, slots, ((0, 1, lo, hi),))),))

    b_coords = (2, 3) if variant == "tab" else (1, 2, 3)
    product = build_flag_symbol(3, [((1, 2), tensor_kernel_symbol(list(a_fams))),
                                    (b_coords, tensor_kernel_symbol(list(b_fams)))])
    cases = ScaleCases(variant, gap, part(-gap, gap), part(gap + 1, None), part(None, -gap - 1), product)
    for name, p in cases.parts().items():
        cases.empty[name] = not support_pairs(p)
    return cases


# ---------------------------------------------------------- Taylor reduction

@dataclass(frozen=True)
class TaylorTerm:
    """``weight * symbol`` with ``weight = 2^(-gap (l + l_tilde))`` and ``k2 - k1 = gap``."""

    l: int
    l_tilde: int
    gap: int
    weight: float
    symbol: SymbolExpr

    def full(self) -> SymbolExpr:
        return self.symbol.scaled(self.weight)


@dataclass(frozen=True)
class TaylorReduction:
    terms: tuple
    remainder: SymbolSum
    M: int
    variant: str

    def reconstruction(self) -> SymbolSum:
        ts = [(t.weight, t.symbol) for t in self.terms]
        ts += list(self.remainder.terms)
        return SymbolSum(3, tuple(ts))


def _case_layout(case_symbol: SymbolExpr):
    if not isinstance(case_symbol, SymbolExpr) or case_symbol.arity != 3 or len(case_symbol.factors) != 1:
        raise InputError("taylor_reduce expects a k1 << k2 part from split_scale_cases")
    (_, fac), = case_symbol.factors
    if not isinstance(fac, ScaleSum) or len(fac.scales) != 2 or len(fac.constraints) != 1:
        raise InputError("taylor_reduce expects a k1 << k2 part from split_scale_cases")
    (i, j, lo, hi), = fac.constraints
    if (i, j) != (0, 1) or lo is None or hi is not None or lo < 1:
        raise InputError("case symbol is not a k1 << k2 part")
    by = {(s.scale, s.weights): s for s in fac.slots}
    a1, a2 = by.get((0, _unit(0))), by.get((0, _unit(1)))
    b1, b2, b3 = by.get((1, _unit(0))), by.get((1, _unit(1))), by.get((1, _unit(2)))
    if a1 is None or a2 is None or b2 is None or b3 is None:
        raise InputError("case symbol does not have the flag tensor layout")
    return fac, lo, (a1, a2, b1, b2, b3)


def taylor_reduce(case_symbol: SymbolExpr, M: int, gap_max: int | None = None) -> TaylorReduction:
    """Expand the ``k2`` bumps on ``xi2`` (and on ``xi1`` for nls) about ``xi1 + xi2``.

    Term ``(l, l~, #)`` holds ``k2 = k1 + #``: the ``xi1``-bump at scale ``k1``
    gains the moment ``(-xi1/2^k1)^l~`` (``^l`` in the tab case), the
    ``xi2``-bump gains ``(-xi2/2^k1)^l`` (nls only), and the ``k2`` bumps are
    replaced by their normalized derivatives at ``xi1 + xi2``. The prefactor
    ``2^(k1 l) / 2^(k2 l)`` is the weight ``2^(-# l)``.

    ``#`` runs over ``[gap + 1, gap_max]``, by default the whole scale span;
    the remainder covers the full ``k1 << k2`` region.
    """
    if not isinstance(M, (int, np.integer)) or M < 0:
        raise InputError("Taylor order M must be a nonnegative integer")
    if M > MAX_TAYLOR:
        raise InputError(f"Taylor order M={M} exceeds {MAX_TAYLOR}")
    fac, lo, (a1, a2, b1, b2, b3) = _case_layout(case_symbol)
    (k1a, k1b), (k2a, k2b) = fac.scales
    span = k2b - k1a
    gmax = span if gap_max is None else min(gap_max, span)
    s12 = (1, 1, 0)
    nls = b1 is not None
    terms = []
    for g in range(lo, gmax + 1):
        cons = ((0, 1, g, g),)
        for l in range(M + 1):
            for lt in (range(M + 1) if nls else (0,)):
                if nls:
                    slots = (Slot(a1.family.with_(moment=a1.family.moment + lt), 0, a1.weights),
                             Slot(a2.family.with_(moment=a2.family.moment + l), 0, a2.weights),
                             Slot(b1.family, 1, s12, order=l),
                             Slot(b2.family, 1, s12, order=lt), b3)
                else:
                    slots = (Slot(a1.family.with_(moment=a1.family.moment + l), 0, a1.weights), a2,
                             Slot(b2.family, 1, s12, order=l), b3)
                sym = SymbolExpr(3, (((1, 2, 3), ScaleSum(fac.scales, slots, cons, fac.coef)),),
                                 case_symbol.coef)
                terms.append(TaylorTerm(l, lt, g, 2.0 ** (-g * (l + lt)), sym))
    rest = fac.constraints
    if gmax < span:
        # terms stop at gmax; the tail of the region keeps its exact symbol
        rest = ((0, 1, lo, gmax),)
    tail = []
    if gmax < span:
        tail.append((1.0, SymbolExpr(3, (((1, 2, 3), ScaleSum(fac.scales, fac.slots, ((0, 1, gmax + 1, None),),
                                                              fac.coef)),), case_symbol.coef)))

    def rem(b, target):
        return Slot(b.family, 1, target, kind="taylor_remainder", center=s12, taylor_order=M)

    def poly(b, target):
        return Slot(b.family, 1, target, kind="taylor_poly", center=s12, taylor_order=M)

    def expr(slots):
        return SymbolExpr(3, (((1, 2, 3), ScaleSum(fac.scales, slots, rest, fac.coef)),), case_symbol.coef)

    if nls:
        r = [(1.0, expr((a1, a2, rem(b1, b1.weights), b2, b3))),
             (1.0, expr((a1, a2, poly(b1, b1.weights), rem(b2, b2.weights), b3)))]
    else:
        r = [(1.0, expr((a1, a2, rem(b2, b2.weights), b3)))]
    return TaylorReduction(tuple(terms), SymbolSum(3, tuple(r + tail)), int(M), "nls" if nls else "tab")


def remainder_sups(reduction: TaylorReduction, gaps: Sequence[int], samples) -> np.ndarray:
    """Sup over ``samples`` of the Taylor remainder restricted to ``k2 - k1 = #``."""
    out = []
    for g in gaps:
        total = np.zeros(len(samples), dtype=complex)
        for c, m in reduction.remainder.terms:
            (_, fac), = m.factors
            lo, hi = fac.constraints[0][2], fac.constraints[0][3]
            if (lo is not None and g < lo) or (hi is not None and g > hi):
                continue
            one = SymbolExpr(3, (((1, 2, 3), ScaleSum(fac.scales, fac.slots, ((0, 1, g, g),), fac.coef)),), m.coef)
            total += c * one.evaluate(np.asarray(samples, dtype=float))
        out.append(float(np.max(np.abs(total))))
    return np.array(out)


def sample_low_high(k1_range, gap: int, count: int, rng) -> np.ndarray:
    """Points with ``xi1, xi2`` at a random scale ``k1`` and ``xi3`` at ``k1 + gap``.

    ``|xi1| <= 2^(k1+1)``, ``|xi2|`` in the annulus ``[2^(k1-1), 2^(k1+1)]`` and
    ``|xi3|`` in the annulus of scale ``k1 + gap``, with random signs, so the
    samples hit the supports of the ``k2 - k1 = gap`` terms.
    """
    k1 = rng.integers(k1_range[0], k1_range[1] + 1, size=count).astype(float)
    sgn = rng.choice([-1.0, 1.0], size=(count, 3))
    x1 = rng.uniform(0, 2.0 ** (k1 + 1))
    x2 = 2.0 ** (k1 - 1 + 2 * rng.uniform(size=count))
    x3 = 2.0 ** (k1 + gap - 1 + 2 * rng.uniform(size=count))
    return sgn * np.stack([x1, x2, x3], axis=1)


def fit_log2_slope(gaps: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of ``log2(values)`` against ``gaps``."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise InputError("slope fit needs positive values")
    return float(np.polyfit(np.asarray(gaps, dtype=float), np.log2(v), 1)[0])


def resummation_partial_sums(weights: Sequence[float], proxies: Sequence[float]) -> np.ndarray:
    """Partial sums of ``sum_# weight_# * proxy_#``."""
    return np.cumsum(np.asarray(weights, dtype=float) * np.asarray(proxies, dtype=float))
