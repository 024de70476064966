"""n-linear multiplier operators: direct frequency sums and nested-filter fast paths.

Output convention: for inputs with coefficients ``F_i`` the output coefficient
on mode ``s`` is::

    C(s) = L^(1-n) * sum_{j_1 + ... + j_n = s} m(j_1/L, ..., j_n/L) prod_i F_i(j_i)

so that ``m == 1`` reproduces the pointwise product of the inputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bumps import BumpFamily, build_family
from .errors import AliasingError, InputError
from .spectral import (
    SampledFunction,
    Spectrum,
    forward_transform,
    fractional_derivative,
    inverse_transform,
)
from .symbols import ClosedForm, ScaleSum, Slot, SymbolExpr, SymbolSum

__all__ = [
    "COEFF_TOL",
    "ProductParts",
    "TripleParts",
    "apply_multiplier",
    "apply_tensor",
    "has_tensor_form",
    "scale_case",
    "decompose_product",
    "paraproduct_families",
    "paraproduct_symbol",
    "paraproduct_pi",
    "commuted_families",
    "verify_commutation",
    "decompose_triple_product",
]

# coefficients below this fraction of an input's largest one count as zero
COEFF_TOL = 1e-13

# largest N allowed for the direct sum, per arity
_DIRECT_BUDGET = {2: 256, 3: 64}


def _common_grid(fs: Sequence[SampledFunction]):
    if not fs:
        raise InputError("need at least one input function")
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise InputError("input functions live on different grids")
    return g


def _significant(F: Spectrum):
    a = np.abs(F.coeffs)
    top = a.max()
    if top == 0:
        return np.array([], dtype=int)
    return np.nonzero(a > COEFF_TOL * top)[0]


def _band(F: Spectrum) -> int:
    """Largest |mode| carrying a significant coefficient (-1 for the zero function)."""
    idx = _significant(F)
    if idx.size == 0:
        return -1
    return int(np.max(np.abs(F.grid.modes[idx])))


# --------------------------------------------------------------- direct sum

def apply_multiplier(m: SymbolExpr | SymbolSum, fs: Sequence[SampledFunction]) -> SampledFunction:
    """Direct ``O(N^n)`` frequency sum; the generic path and the oracle for all fast paths."""
    g = _common_grid(fs)
    n = len(fs)
    if m.arity != n:
        raise InputError(f"symbol has arity {m.arity}, got {n} inputs")
    limit = _DIRECT_BUDGET.get(n)
    if n >= 4 and g.n**n > 64**3 or limit is not None and g.n > limit:
        raise InputError(f"direct sum over {n} inputs needs N within budget, got N={g.n}")

    spectra = [forward_transform(f) for f in fs]
    idx = [_significant(F) for F in spectra]
    h = g.n // 2
    out = np.zeros(g.n, dtype=complex)
    if any(i.size == 0 for i in idx):
        return SampledFunction(g, out)

    mesh = np.meshgrid(*idx, indexing="ij")
    cols = [a.ravel() for a in mesh]
    modes = np.stack([c - h for c in cols], axis=-1)
    weight = np.ones(len(cols[0]), dtype=complex)
    for F, c in zip(spectra, cols):
        weight = weight * F.coeffs[c]
    sym = np.asarray(m.evaluate(modes / g.l))
    total = modes.sum(axis=1)
    live = (sym != 0) & (weight != 0)
    bad = live & (np.abs(total) >= h)
    if np.any(bad):
        raise AliasingError(modes[np.argmax(bad)])
    np.add.at(out, total[live] + h, sym[live] * weight[live])
    out *= g.l ** (1 - n)
    return inverse_transform(Spectrum(g, out))


# ---------------------------------------------------------- nested fast path

def _tensor_plan(m: SymbolExpr):
    """Nested-filter plan for ``m``, or ``None`` when it has no such form.

    Supported: products of ``one`` closed forms and scale sums whose slots are
    plain bumps of sums of coordinates, with the coordinate subsets laminar.
    """
    if not isinstance(m, SymbolExpr):
        return None
    parts = []
    for S, fac in m.factors:
        if isinstance(fac, ClosedForm) and fac.name == "one":
            continue
        if not isinstance(fac, ScaleSum):
            return None
        placed = []
        for s in fac.slots:
            if not s.is_unit:
                return None
            placed.append((frozenset(S[i] for i, w in enumerate(s.weights) if w), s))
        parts.append((fac, placed))
    nodes = {frozenset([i]) for i in range(1, m.arity + 1)}
    nodes.add(frozenset(range(1, m.arity + 1)))
    nodes |= {T for _, pl in parts for T, _ in pl}
    for A, B in itertools.combinations(nodes, 2):
        if A & B and not (A <= B or B <= A):
            return None
    order = sorted(nodes, key=len)
    children = {}
    for T in order:
        inside = [U for U in order if U < T]
        children[T] = [U for U in inside if not any(U < V for V in inside)]
    return parts, order, children


def has_tensor_form(m) -> bool:
    if isinstance(m, SymbolSum):
        return all(_tensor_plan(t) is not None for _, t in m.terms)
    return _tensor_plan(m) is not None


def apply_tensor(m: SymbolExpr | SymbolSum, fs: Sequence[SampledFunction]) -> SampledFunction:
    """Fast path: per scale tuple, filter inputs, multiply, filter subset sums.

    Cost is ``O(#tuples * N log N)``. Aliasing is detected from the band limits
    of the filtered pieces, so a product that could wrap before a later
    filter raises instead.
    """
    g = _common_grid(fs)
    if m.arity != len(fs):
        raise InputError(f"symbol has arity {m.arity}, got {len(fs)} inputs")
    if isinstance(m, SymbolSum):
        acc = np.zeros(g.n, dtype=complex)
        for c, t in m.terms:
            acc += c * apply_tensor(t, fs).samples
        return SampledFunction(g, acc)
    plan = _tensor_plan(m)
    if plan is None:
        raise InputError("symbol has no nested-filter form; use apply_multiplier")
    parts, order, children = plan
    xi = g.xi
    h = g.n // 2
    full = order[-1]
    spectra = {frozenset([i + 1]): forward_transform(f).coeffs for i, f in enumerate(fs)}
    bands = {frozenset([i + 1]): _band(forward_transform(f)) for i, f in enumerate(fs)}
    acc = np.zeros(g.n, dtype=complex)
    if min(bands.values()) < 0:
        return SampledFunction(g, acc)

    # filter values depend only on (slot, scale); cache them
    cache: dict = {}

    def slot_filter(s: Slot, k):
        key = (id(s), k)
        if key not in cache:
            hi = s.family.support(k)[1]
            cache[key] = (s.family.value(k, xi), math.inf if math.isinf(hi) else math.floor(hi * g.l))
        return cache[key]

    tuple_lists = [fac.scale_tuples() for fac, _ in parts]
    for joint in itertools.product(*tuple_lists):
        coef = m.coef
        filt: dict = {}
        dead = False
        for (fac, placed), ks in zip(parts, joint):
            coef *= fac.coef
            for T, s in placed:
                v, b = slot_filter(s, ks[s.scale])
                if T in filt:
                    old, ob = filt[T]
                    filt[T] = (old * v, min(ob, b))
                else:
                    filt[T] = (v, b)
                if not np.any(filt[T][0]):
                    dead = True
                    break
            if dead:
                break
        if dead or coef == 0:
            continue
        val: dict = {}
        band: dict = {}
        for T in order:
            if len(T) == 1:
                c, b = spectra[T], bands[T]
            else:
                prod = np.ones(g.n, dtype=complex)
                b = 0
                for U in children[T]:
                    prod = prod * inverse_transform(Spectrum(g, val[U])).samples
                    b += band[U]
                # an unfiltered product is exact on the samples; only a later
                # filter needs the spectrum free of wraparound
                if b >= h and any(T <= U for U in filt):
                    raise AliasingError(tuple(band[U] for U in children[T]))
                c = forward_transform(SampledFunction(g, prod)).coeffs
            if T in filt:
                c = c * filt[T][0]
                b = min(b, filt[T][1])
            val[T], band[T] = c, b
        acc += coef * val[full]
    return inverse_transform(Spectrum(g, acc))


# ------------------------------------------------------ product decomposition

def scale_case(k1: int, k2: int, gap: int) -> str:
    """``diag`` if ``|k1 - k2| <= gap``, ``low_high`` if ``k1 < k2 - gap``, else ``high_low``."""
    if k2 - k1 > gap:
        return "low_high"
    if k1 - k2 > gap:
        return "high_low"
    return "diag"


def _as_lp(fam: BumpFamily) -> BumpFamily:
    if fam.kind == "lp":
        return fam
    if fam.kind == "psi" and (fam.lo, fam.hi) == (-1, 0) and not (fam.moment or fam.power):
        return BumpFamily("lp", fam.k_min, fam.k_max)
    raise InputError("product decomposition needs a standard Psi family or an lp family")


def _pieces(f: SampledFunction, fam: BumpFamily) -> dict[int, np.ndarray]:
    F = forward_transform(f).coeffs
    xi = f.grid.xi
    return {k: inverse_transform(Spectrum(f.grid, F * fam.value(k, xi))).samples for k in fam.scales}


@dataclass(frozen=True)
class ProductParts:
    """Terms I (``diag``), II (``low_high``), III (``high_low``) of ``f g``."""

    diag: SampledFunction
    low_high: SampledFunction
    high_low: SampledFunction

    def total(self) -> SampledFunction:
        return self.diag + self.low_high + self.high_low


def decompose_product(f: SampledFunction, g: SampledFunction, fam: BumpFamily, gap: int = 2) -> ProductParts:
    """Split ``f g = sum_{k1, k2} (f * psi_k1)(g * psi_k2)`` by scale case.

    ``fam`` is completed to a partition of unity by its low and high caps; the
    caps count as scales ``k_min - 1`` and ``k_max + 1`` in the case split.
    """
    grid = _common_grid([f, g])
    if gap < 0:
        raise InputError("gap must be nonnegative")
    lp = _as_lp(fam)
    pf, pg = _pieces(f, lp), _pieces(g, lp)
    out = {c: np.zeros(grid.n, dtype=complex) for c in ("diag", "low_high", "high_low")}
    # summing in (low, high) order with the low piece as left operand makes
    # low_high(f, g) and high_low(g, f) bitwise equal (SIMD complex products
    # are not bitwise commutative)
    pairs = sorted(itertools.product(lp.scales, lp.scales), key=lambda p: (min(p), max(p), p[0]))
    for k1, k2 in pairs:
        out[scale_case(k1, k2, gap)] += pf[k1] * pg[k2] if k1 <= k2 else pg[k2] * pf[k1]
    return ProductParts(*(SampledFunction(grid, out[c]) for c in ("diag", "low_high", "high_low")))


# ------------------------------------------------------------- paraproducts

def paraproduct_families(k_min: int, k_max: int, gap: int = 2, grid=None):
    """``(phi, psi, out)`` families for ``Pi(f, g) = sum_k [(f*Phi_k)(g*Psi_k)]*Psi~_k``.

    ``Phi_k = theta(xi / 2^(k-gap-1))`` collects the pieces with ``k1 < k - gap``;
    ``Psi~_k`` is the Psi family with offsets (-3, 2): equal to one on
    ``[2^(k-2), 2^(k+2)]``, which contains the spectrum of the inner product
    for ``gap >= 2``, so the outer filter acts as the identity there.
    """
    if gap < 2:
        raise InputError("paraproduct families need gap >= 2")
    psi = build_family("psi", k_min, k_max, grid)
    phi = BumpFamily("phi", k_min, k_max, hi=-gap - 1)
    out = BumpFamily("psi", k_min, k_max, lo=-3, hi=2)
    return phi, psi, out


def _same_range(*fams):
    if len({(f.k_min, f.k_max) for f in fams}) != 1:
        raise InputError("families must share the scale range")


def paraproduct_symbol(phi: BumpFamily, psi: BumpFamily, out: BumpFamily) -> SymbolExpr:
    """``sum_k phi_k(xi1) psi_k(xi2) out_k(xi1 + xi2)``."""
    _same_range(phi, psi, out)
    slots = (Slot(phi, 0, (1, 0)), Slot(psi, 0, (0, 1)), Slot(out, 0, (1, 1)))
    return SymbolExpr(2, (((1, 2), ScaleSum(((psi.k_min, psi.k_max),), slots)),))


def paraproduct_pi(f: SampledFunction, g: SampledFunction, phi: BumpFamily, psi: BumpFamily,
                   out: BumpFamily) -> SampledFunction:
    return apply_tensor(paraproduct_symbol(phi, psi, out), [f, g])


def commuted_families(phi, psi, out, alpha: float):
    """Families of ``Pi~``: inner Psi times ``(|xi|/2^k)^-alpha``, outer times ``(|xi|/2^k)^alpha``.

    Since ``|xi1 + xi2|^alpha = 2^(k alpha) (|xi1+xi2|/2^k)^alpha`` and
    ``|xi2|^-alpha = 2^(-k alpha) (|xi2|/2^k)^-alpha``, the symbols satisfy
    ``|xi1+xi2|^alpha m_Pi(xi1, xi2) = m_Pi~(xi1, xi2) |xi2|^alpha`` exactly.
    """
    if alpha < 0:
        raise InputError(f"alpha must be nonnegative, got {alpha!r}")
    if alpha == 0:
        return phi, psi, out
    return phi, psi.with_(power=psi.power - alpha), out.with_(power=out.power + alpha)


def verify_commutation(f: SampledFunction, g: SampledFunction, alpha: float, families=None,
                       gap: int = 2) -> float:
    """``||D^a Pi(f,g) - Pi~(f, D^a g)||_inf / ||D^a Pi(f,g)||_inf`` (0 when both vanish)."""
    if not alpha >= 0:
        raise InputError(f"alpha must be nonnegative, got {alpha!r}")
    grid = _common_grid([f, g])
    if families is None:
        families = default_paraproduct_families(grid, gap)
    phi, psi, out = families
    lhs = fractional_derivative(paraproduct_pi(f, g, phi, psi, out), alpha)
    rhs = paraproduct_pi(f, fractional_derivative(g, alpha), *commuted_families(phi, psi, out, alpha))
    den = np.max(np.abs(lhs.samples))
    num = np.max(np.abs(lhs.samples - rhs.samples))
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / den)


def default_paraproduct_families(grid, gap: int = 2):
    """Widest alias-free scale range on ``grid``: lowest annulus reaching mode 1."""
    k_min = math.floor(math.log2(1.0 / grid.l)) - 1
    k_max = k_min
    nyq = grid.n / (2 * grid.l)
    while 2.0 ** (k_max + 2) + 2.0 ** (k_max + 1 - gap) < nyq:
        k_max += 1
    return paraproduct_families(k_min, k_max, gap, grid)


__all__.append("default_paraproduct_families")


# --------------------------------------------------- triple product A + B + C

@dataclass(frozen=True)
class TripleParts:
    """``Pi(F, G) H = A + B + C``; ``C`` is the flag term with symbol ``C_symbol``."""

    A: SampledFunction
    B: SampledFunction
    C: SampledFunction
    C_symbol: SymbolExpr

    def total(self) -> SampledFunction:
        return self.A + self.B + self.C


def triple_families(families, gap: int):
    """``(h_fam, phi_tilde)``: lp pieces for ``H`` and ``theta(xi / 2^(k3 - gap))``."""
    _, psi, _ = families
    h_fam = BumpFamily("lp", psi.k_min, psi.k_max)
    sc = h_fam.scales
    phi_t = BumpFamily("phi", sc[0], sc[-1], hi=-gap)
    return h_fam, phi_t


def flag_c_symbol(families, gap: int) -> SymbolExpr:
    """``(sum_k2 phi_k2(xi1) psi_k2(xi2)) (sum_k3 phi~_k3(xi2) psi_k3(xi3))``."""
    phi, psi, _ = families
    h_fam, phi_t = triple_families(families, gap)
    a = ScaleSum(((psi.k_min, psi.k_max),), (Slot(phi, 0, (1, 0)), Slot(psi, 0, (0, 1))))
    sc = h_fam.scales
    b = ScaleSum(((sc[0], sc[-1]),), (Slot(phi_t, 0, (1, 0)), Slot(h_fam, 0, (0, 1))))
    return SymbolExpr(3, (((1, 2), a), ((2, 3), b)))


def decompose_triple_product(F: SampledFunction, G: SampledFunction, H: SampledFunction,
                             families=None, gap: int = 2) -> TripleParts:
    """Split ``Pi(F, G) H`` over the scale ``k2`` of ``Pi`` and ``k3`` of ``H``.

    A: ``k2 - k3 > gap``. B: ``|k2 - k3| <= gap`` with ``G`` pieces weighted by
    ``1 - phi~_k3``. C: the factored flag term, i.e. ``k2 < k3 - gap`` plus the
    ``phi~_k3``-weighted share of the band ``|k2 - k3| <= gap``.
    """
    grid = _common_grid([F, G, H])
    if families is None:
        families = default_paraproduct_families(grid, gap)
    phi, psi, out = families
    _same_range(phi, psi, out)
    h_fam, phi_t = triple_families(families, gap)
    xi = grid.xi
    Fc, Gc = forward_transform(F).coeffs, forward_transform(G).coeffs
    inv = lambda c: inverse_transform(Spectrum(grid, c)).samples  # noqa: E731
    hp = _pieces(H, h_fam)

    A = np.zeros(grid.n, dtype=complex)
    B = np.zeros(grid.n, dtype=complex)
    sym_pi = paraproduct_symbol(phi, psi, out)
    for k2 in psi.scales:
        low = sum((hp[k3] for k3 in h_fam.scales if k2 - k3 > gap), np.zeros(grid.n, dtype=complex))
        if np.any(low):
            single = SymbolExpr(2, (((1, 2), ScaleSum(((k2, k2),), sym_pi.factors[0][1].slots)),))
            A += apply_tensor(single, [F, G]).samples * low
        fk = inv(Fc * phi.value(k2, xi))
        for k3 in h_fam.scales:
            if abs(k2 - k3) <= gap:
                w = psi.value(k2, xi) * (1.0 - phi_t.value(k3, xi))
                B += fk * inv(Gc * w) * hp[k3]
    c_sym = flag_c_symbol(families, gap)
    C = apply_tensor(c_sym, [F, G, H])
    return TripleParts(SampledFunction(grid, A), SampledFunction(grid, B), C, c_sym)


__all__ += ["triple_families", "flag_c_symbol"]
