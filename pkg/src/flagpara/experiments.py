"""Batch experiments: Leibnitz-rule ratio studies, flag operator norm sweeps,
model-operator bound trials, AKNS scans and decomposition identity checks.

Every experiment is driven by an :class:`ExperimentConfig` and returns a
:class:`RatioReport` whose CSV serialization is byte-deterministic for a fixed
config and seed. Ratios are empirical observations, not bounds.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .akns import AknsConfig, lambda_scan
from .bumps import BumpFamily, reconstruct
from .errors import ConsistencyError, InputError
from .flag import apply_flag_nls, apply_flag_tab, flag_scale_range, theorem_families
from .models import (
    ModelConfig,
    all_intervals,
    check_size_energy,
    form_trees,
    four_linear_form,
)
from .multiplier import (
    apply_multiplier,
    decompose_product,
    decompose_triple_product,
    default_paraproduct_families,
    paraproduct_pi,
)
from .spectral import (
    Grid,
    SampledFunction,
    dilate,
    fractional_derivative,
    grid_from_json,
    lp_norm,
    make_function,
)
from .symbols import constant_symbol, tensor_kernel_symbol

__all__ = [
    "EXPERIMENTS",
    "HOLDER_TOL",
    "ExperimentConfig",
    "RatioReport",
    "load_config",
    "trial_rngs",
    "mix_params",
    "mix_function",
    "run_kato_ponce",
    "run_grand_leibnitz",
    "run_norm_sweep",
    "run_model_bound",
    "run_akns_scan",
    "run_decompose",
    "run_self_test",
    "run_experiment",
]

EXPERIMENTS = ("kato-ponce", "grand-leibnitz", "norm-sweep", "model-bound", "akns-scan",
               "decompose", "self-test")
HOLDER_TOL = 1e-12
OPERATORS = ("tab", "nls", "paraproduct", "identity")
DEFAULT_THETAS = ((1 / 3, 1 / 3, 1 / 3), (1 / 2, 1 / 2, 0.0), (0.0, 1 / 2, 1 / 2))

# exponent names per experiment; each entry besides p is a list indexed by term
_EXPONENT_KEYS = {
    "kato-ponce": ("p_i", "q_i"),
    "grand-leibnitz": ("p_i", "q_i", "r_i"),
    "norm-sweep": ("p_i",),
}
_DEFAULT_EXPONENTS = {
    "kato-ponce": {"p": 1.0, "p_i": [2.0, 2.0], "q_i": [2.0, 2.0]},
    "grand-leibnitz": {"p": 2 / 3, "p_i": [2.0] * 4, "q_i": [2.0] * 4, "r_i": [2.0] * 4},
    "norm-sweep": {"p": 1.0, "p_i": [3.0, 3.0, 3.0]},
}


# ------------------------------------------------------------------- config

def _exponent(v, name) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise InputError(f"exponent {name} must be a number or 'inf', got {v!r}")
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise InputError(f"exponent {name} must be a number or 'inf', got {v!r}") from None
    if not x > 0:
        raise InputError(f"exponent {name} must be positive, got {v!r}")
    return x


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def _int_list(v, name) -> tuple:
    try:
        return tuple(int(x) for x in v)
    except (TypeError, ValueError):
        raise InputError(f"config field {name!r} must be a list of integers") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment configuration; ``raw`` is the JSON echo written to summaries."""

    experiment: str
    grid: Grid = field(default_factory=lambda: Grid(64))
    exponents: Mapping = field(default_factory=dict)
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    trials: int = 10
    seed: int = 0
    gap: int = 2
    exploratory: bool = False
    grids: tuple = ()
    rungs: tuple = (0,)
    operator: str = "tab"
    functions: tuple = ()
    sizes: tuple = (8, 16)
    thetas: tuple = DEFAULT_THETAS
    model_depth: int = 4
    akns: Mapping | None = None
    lambdas: tuple = (0.0,)
    u0: tuple = ()
    step: float = 1.0 / 64
    output: str | None = None
    raw: Mapping = field(default_factory=dict, compare=False)

    @property
    def grid_sizes(self) -> tuple:
        return self.grids or (self.grid.n,)

    def exponent_list(self, key: str) -> list:
        return list(self.exponents[key])

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], seed: int | None = None,
                  trials: int | None = None) -> "ExperimentConfig":
        if not isinstance(d, Mapping):
            raise InputError("config must be a JSON object")
        d = dict(d)
        if seed is not None:
            d["seed"] = int(seed)
        if trials is not None:
            d["trials"] = int(trials)
        exp = d.get("experiment")
        if exp not in EXPERIMENTS:
            raise InputError(f"config field 'experiment' must be one of {EXPERIMENTS}, got {exp!r}")
        grid = grid_from_json(d.get("grid", {"n": 64}))
        try:
            kw = dict(
                alpha=float(d.get("alpha", 0.0)),
                beta=float(d.get("beta", 0.0)),
                gamma=float(d.get("gamma", 0.0)),
                trials=int(d.get("trials", 10)),
                seed=int(d.get("seed", 0)),
                gap=int(d.get("gap", 2)),
                exploratory=bool(d.get("exploratory", False)),
                operator=str(d.get("operator", "tab")),
                model_depth=int(d.get("model_depth", 4)),
                step=float(d.get("step", 1.0 / 64)),
            )
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad scalar config field: {exc}") from None
        if kw["trials"] < 0:
            raise InputError("config field 'trials' must be nonnegative")
        if kw["gap"] < 0:
            raise InputError("config field 'gap' must be nonnegative")
        for name in ("alpha", "beta", "gamma"):
            if not (kw[name] >= 0 and math.isfinite(kw[name])):
                raise InputError(f"config field {name!r} must be a finite nonnegative number")
        if kw["operator"] not in OPERATORS:
            raise InputError(f"config field 'operator' must be one of {OPERATORS}")
        grids = _int_list(d.get("grids", []), "grids")
        for n in grids:
            Grid(n, grid.l)
        rungs = _int_list(d.get("rungs", [0]), "rungs")
        if any(s < 0 for s in rungs):
            raise InputError("config field 'rungs' must hold nonnegative integers")
        sizes = _int_list(d.get("sizes", [8, 16]), "sizes")
        thetas = tuple(tuple(float(t) for t in th) for th in d.get("thetas", DEFAULT_THETAS))
        funcs = d.get("functions", [])
        if not isinstance(funcs, (list, tuple)):
            raise InputError("config field 'functions' must be a list")
        exps = cls._parse_exponents(exp, d.get("exponents"), d.get("operator", "tab"))
        return cls(
            experiment=exp, grid=grid, exponents=exps, grids=grids, rungs=rungs, sizes=sizes,
            thetas=thetas, functions=tuple(funcs), akns=d.get("akns"),
            lambdas=tuple(float(x) for x in d.get("lambdas", [0.0])),
            u0=tuple(d.get("u0", [])), output=d.get("output"), raw=d, **kw,
        )

    @staticmethod
    def _parse_exponents(exp, given, operator) -> dict:
        if exp not in _EXPONENT_KEYS:
            return {}
        src = dict(_DEFAULT_EXPONENTS[exp])
        if exp == "norm-sweep" and operator == "paraproduct":
            src = {"p": 1.0, "p_i": [2.0, 2.0]}
        if given is not None:
            if not isinstance(given, Mapping):
                raise InputError("config field 'exponents' must be an object")
            src = dict(given)
        if "p" not in src:
            raise InputError("exponents missing 'p'")
        out = {"p": _exponent(src["p"], "p")}
        for key in _EXPONENT_KEYS[exp]:
            if key not in src:
                raise InputError(f"exponents missing {key!r}")
            vals = src[key]
            if not isinstance(vals, (list, tuple)):
                raise InputError(f"exponents {key!r} must be a list")
            out[key] = tuple(_exponent(v, f"{key}[{i}]") for i, v in enumerate(vals))
        return out

    def to_json(self) -> dict:
        return json.loads(json.dumps(self.raw, default=str))


def load_config(path: str, seed: int | None = None, trials: int | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(d, seed, trials)


# ------------------------------------------------------------ exponent rules

def _check_holder(cfg: ExperimentConfig, expected_terms: int, per_term: Sequence[str]) -> None:
    e = cfg.exponents
    for key in per_term:
        if len(e[key]) != expected_terms:
            raise InputError(f"exponents {key!r} needs {expected_terms} entries, got {len(e[key])}")
    target = _inv(e["p"])
    for i in range(expected_terms):
        s = sum(_inv(e[key][i]) for key in per_term)
        if abs(s - target) > HOLDER_TOL:
            raise InputError(f"Hölder mismatch in term {i + 1}: sum of reciprocals {s!r} != 1/p = {target!r}")


def _in_range(cfg: ExperimentConfig, keys: Sequence[str], allow_inf: bool) -> bool:
    for key in keys:
        for v in cfg.exponents[key]:
            if not v > 1 or (math.isinf(v) and not allow_inf):
                return False
    return True


def _range_flag(cfg: ExperimentConfig, keys, allow_inf: bool) -> int:
    """0 inside the theorem range; 1 outside (only in exploratory mode)."""
    ok = _in_range(cfg, keys, allow_inf)
    if not ok and not cfg.exploratory:
        raise InputError("exponents outside the theorem range; set \"exploratory\": true to run them")
    return 0 if ok else 1


# ----------------------------------------------------------- trial functions

def trial_rngs(seed: int, trials: int) -> list:
    """Independent per-trial generators, ordered by trial index."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def mix_params(rng, count: int = 3) -> list:
    """``count`` gaussians: (center, width, amplitude), lengths relative to ``L``."""
    c = rng.uniform(0.0, 1.0, count)
    w = rng.uniform(0.06, 0.15, count)
    a = rng.uniform(0.5, 1.5, count) * rng.choice([-1.0, 1.0], count)
    return [(float(ci), float(wi), float(ai)) for ci, wi, ai in zip(c, w, a)]


def mix_function(grid: Grid, params) -> SampledFunction:
    total = np.zeros(grid.n)
    for c, w, a in params:
        spec = {"kind": "gaussian", "center": c * grid.l, "width": w * grid.l, "amplitude": a}
        total = total + make_function(spec, grid).samples.real
    return SampledFunction(grid, total)


def _slot_builders(cfg: ExperimentConfig, count: int, rng) -> list:
    """One ``grid -> SampledFunction`` per input slot; config specs override the gaussian mix."""
    out = []
    for i in range(count):
        params = mix_params(rng)
        spec = cfg.functions[i] if i < len(cfg.functions) else None
        if spec is None:
            out.append(lambda g, p=params: mix_function(g, p))
        else:
            seed = int(rng.integers(2**31))
            out.append(lambda g, s=spec, sd=seed: make_function(s, g, sd))
    return out


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


# -------------------------------------------------------------------- report

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


@dataclass
class RatioReport:
    """Per-row results plus a summary; ``ratio`` columns are summarized by group."""

    experiment: str
    columns: tuple
    rows: list
    config: Mapping
    group_by: tuple = ()
    value_column: str = "ratio"
    extra: dict = field(default_factory=dict)

    def _values(self, rows=None) -> np.ndarray:
        i = self.columns.index(self.value_column)
        return np.array([r[i] for r in (self.rows if rows is None else rows)], dtype=float)

    def groups(self) -> dict:
        idx = [self.columns.index(c) for c in self.group_by]
        out: dict = {}
        for r in self.rows:
            out.setdefault(tuple(r[i] for i in idx), []).append(r)
        return out

    def max_by_group(self) -> dict:
        return {k: float(self._values(v).max()) for k, v in self.groups().items()}

    @property
    def max_ratio(self) -> float:
        v = self._values()
        return float(v.max()) if v.size else 0.0

    @property
    def median_ratio(self) -> float:
        v = self._values()
        return float(np.median(v)) if v.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def summary(self) -> dict:
        s = {
            "experiment": self.experiment,
            "version": __version__,
            "config": dict(self.config),
            "rows": len(self.rows),
        }
        if self.value_column in self.columns:
            s[f"max_{self.value_column}"] = self.max_ratio
            s[f"median_{self.value_column}"] = self.median_ratio
            if self.group_by:
                s["group_by"] = list(self.group_by)
                s["max_by_group"] = [[*k, v] for k, v in sorted(self.max_by_group().items())]
        s.update(self.extra)
        return s


# --------------------------------------------------------- Leibnitz harnesses

def _ladder(cfg: ExperimentConfig):
    for n in cfg.grid_sizes:
        base = Grid(n, cfg.grid.l)
        for s in cfg.rungs:
            yield n, s, base


def _sampled(builders, base, s):
    return [dilate(b(base), s) for b in builders]


def run_kato_ponce(cfg: ExperimentConfig) -> RatioReport:
    """``||D^a(fg)||_p`` against ``||D^a f||_p1 ||g||_q1 + ||f||_p2 ||D^a g||_q2``.

    Rows per (trial, grid size, dilation rung); the rung ``s`` replaces every
    input by ``x -> f(2^s x)``.
    """
    _check_holder(cfg, 2, ("p_i", "q_i"))
    flag = _range_flag(cfg, ("p_i", "q_i"), allow_inf=True)
    e, a = cfg.exponents, cfg.alpha
    (p1, p2), (q1, q2) = e["p_i"], e["q_i"]
    rows = []
    for t, rng in enumerate(trial_rngs(cfg.seed, cfg.trials)):
        builders = _slot_builders(cfg, 2, rng)
        for n, s, base in _ladder(cfg):
            f, g = _sampled(builders, base, s)
            lhs = lp_norm(fractional_derivative(f * g, a), e["p"])
            rhs = (lp_norm(fractional_derivative(f, a), p1) * lp_norm(g, q1)
                   + lp_norm(f, p2) * lp_norm(fractional_derivative(g, a), q2))
            rows.append((t, n, s, lhs, rhs, _ratio(lhs, rhs), flag))
    return RatioReport("kato-ponce", ("trial", "n", "rung", "lhs", "rhs", "ratio", "exploratory"),
                       rows, cfg.to_json(), group_by=("n", "rung"))


def run_grand_leibnitz(cfg: ExperimentConfig) -> RatioReport:
    """``||D^a(D^b(fg) h)||_p`` against the four-term sum.

    Terms: ``D^(a+b)f g h``, ``f D^(a+b)g h``, ``D^b f g D^a h``,
    ``f D^b g D^a h``, term ``i`` measured in ``(p_i, q_i, r_i)``.
    """
    _check_holder(cfg, 4, ("p_i", "q_i", "r_i"))
    flag = _range_flag(cfg, ("p_i", "q_i", "r_i"), allow_inf=False)
    e, a, b = cfg.exponents, cfg.alpha, cfg.beta
    P, Q, R = e["p_i"], e["q_i"], e["r_i"]
    D = fractional_derivative
    rows = []
    for t, rng in enumerate(trial_rngs(cfg.seed, cfg.trials)):
        builders = _slot_builders(cfg, 3, rng)
        for n, s, base in _ladder(cfg):
            f, g, h = _sampled(builders, base, s)
            lhs = lp_norm(D(D(f * g, b) * h, a), e["p"])
            terms = (
                (D(f, a + b), g, h),
                (f, D(g, a + b), h),
                (D(f, b), g, D(h, a)),
                (f, D(g, b), D(h, a)),
            )
            rhs = sum(lp_norm(x, P[i]) * lp_norm(y, Q[i]) * lp_norm(z, R[i])
                      for i, (x, y, z) in enumerate(terms))
            rows.append((t, n, s, lhs, rhs, _ratio(lhs, rhs), flag))
    return RatioReport("grand-leibnitz", ("trial", "n", "rung", "lhs", "rhs", "ratio", "exploratory"),
                       rows, cfg.to_json(), group_by=("n", "rung"))


# --------------------------------------------------------------- norm sweep

def sweep_operator(name: str, grid: Grid, gap: int = 2) -> Callable:
    """The operator of a norm sweep on ``grid``, with the widest alias-free scale range."""
    if name == "paraproduct":
        fams = default_paraproduct_families(grid, gap)
        return lambda f, g: paraproduct_pi(f, g, *fams)
    if name == "identity":
        one = constant_symbol(2)
        return lambda f1, f2, f3: apply_flag_tab(one, one, f1, f2, f3, mode="fast")
    k_min, k_max = flag_scale_range(grid)
    a_fams, b_fams = theorem_families(name, k_min, k_max)
    a, b = tensor_kernel_symbol(a_fams), tensor_kernel_symbol(b_fams)
    apply = apply_flag_tab if name == "tab" else apply_flag_nls
    return lambda f1, f2, f3: apply(a, b, f1, f2, f3, mode="fast")


def run_norm_sweep(cfg: ExperimentConfig, operator: str | None = None) -> RatioReport:
    """``||T(f_1, ..)||_p / prod ||f_i||_{p_i}`` over trials and the dilation ladder.

    ``scale`` is the rung ``s``: inputs ``x -> f(2^s x)`` on a grid ``2^s``
    times finer, with the operator's scale range extended to match.
    """
    op = operator or cfg.operator
    if op not in OPERATORS:
        raise InputError(f"operator must be one of {OPERATORS}, got {op!r}")
    arity = 2 if op == "paraproduct" else 3
    _check_holder_sum(cfg, arity)
    flag = _range_flag(cfg, ("p_i",), allow_inf=False)
    e = cfg.exponents
    ops = {s: sweep_operator(op, Grid(cfg.grid.n << s, cfg.grid.l), cfg.gap) for s in cfg.rungs}
    rows = []
    for t, rng in enumerate(trial_rngs(cfg.seed, cfg.trials)):
        builders = _slot_builders(cfg, arity, rng)
        for s in cfg.rungs:
            fs = _sampled(builders, cfg.grid, s)
            lhs = lp_norm(ops[s](*fs), e["p"])
            rhs = float(np.prod([lp_norm(f, p) for f, p in zip(fs, e["p_i"])]))
            rows.append((t, s, _ratio(lhs, rhs), flag))
    rep = RatioReport("norm-sweep", ("trial", "scale", "ratio", "exploratory"), rows, cfg.to_json(),
                      group_by=("scale",))
    rep.extra["operator"] = op
    return rep


def _check_holder_sum(cfg: ExperimentConfig, arity: int) -> None:
    ps = cfg.exponents["p_i"]
    if len(ps) != arity:
        raise InputError(f"exponents 'p_i' needs {arity} entries, got {len(ps)}")
    s = sum(_inv(p) for p in ps)
    if abs(s - _inv(cfg.exponents["p"])) > HOLDER_TOL:
        raise InputError(f"Hölder mismatch: sum of reciprocals {s!r} != 1/p")


# -------------------------------------------------------------- model bound

def _model_grid(depth: int) -> Grid:
    n = 8
    while not 2 ** (depth + 1) < n / 2:
        n *= 2
    return Grid(max(n, 128))


def run_model_bound(cfg: ExperimentConfig) -> RatioReport:
    """Size-energy ratios of the four-linear model form on random interval sets.

    Per trial and tree size ``m``: ``J`` is a random ``m``-subset of the
    dyadic intervals of depth ``<= model_depth``, ``I`` is all of them, and the
    inputs are random band-limited functions.
    """
    for th in cfg.thetas:
        if len(th) != 3 or any(x < 0 or x >= 1 for x in th) or abs(sum(th) - 1) > 1e-12:
            raise InputError(f"theta triple {th} must lie in [0, 1) and sum to 1")
    pool = all_intervals(cfg.model_depth)
    if any(m < 0 or m > len(pool) for m in cfg.sizes):
        raise InputError(f"tree sizes must lie in [0, {len(pool)}]")
    grid = _model_grid(cfg.model_depth)
    band = grid.n // 2 - grid.n // 8
    rows = []
    for t, rng in enumerate(trial_rngs(cfg.seed, cfg.trials)):
        seeds = rng.integers(2**31, size=4)
        fs = [make_function({"kind": "random_bandlimited", "j_min": -band, "j_max": band}, grid, int(sd))
              for sd in seeds]
        for m in cfg.sizes:
            pick = sorted(rng.choice(len(pool), size=m, replace=False)) if m else []
            mc = ModelConfig(grid, tuple(pool), tuple(pool[i] for i in pick))
            lam = four_linear_form(mc, *fs)
            trees = form_trees(mc, *fs)
            for j, th in enumerate(cfg.thetas):
                rows.append((t, m, j, check_size_energy(lam, trees, th)))
    rep = RatioReport("model-bound", ("trial", "size", "theta", "ratio"), rows, cfg.to_json(),
                      group_by=("size", "theta"))
    rep.extra["thetas"] = [list(th) for th in cfg.thetas]
    return rep


# -------------------------------------------------------------------- AKNS

def run_akns_scan(cfg: ExperimentConfig) -> RatioReport:
    """``sup |u_k|`` over ``[-X, X]`` for each ``lambda``, from ``u(-X) = u0``."""
    if cfg.akns is None:
        raise InputError("akns-scan needs an 'akns' system block")
    sys = AknsConfig.from_json(cfg.akns)
    u0 = cfg.u0 or tuple([1.0] + [0.0] * (sys.n - 1))
    try:
        u0 = np.array([complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in u0])
    except (TypeError, ValueError):
        raise InputError("config field 'u0' must hold numbers or [re, im] pairs") from None
    if u0.shape != (sys.n,):
        raise InputError(f"u0 needs {sys.n} components")
    rows = lambda_scan(sys, cfg.lambdas, u0, cfg.step)
    return RatioReport("akns-scan", ("lambda", "component", "sup_norm"), rows, cfg.to_json(),
                       value_column="sup_norm")


# ------------------------------------------------------------- decompositions

def run_decompose(cfg: ExperimentConfig) -> RatioReport:
    """Identity errors of reconstruction, the product split and the triple split.

    Inputs are random band-limited with ``|j| <= N/8`` so every product stays
    alias-free; errors are sup-norm, relative to the true result. The
    reconstruction input has its mean removed, since Psi pieces vanish at 0.
    """
    grid = cfg.grid
    band = grid.n // 8
    k_max = max(0, math.ceil(math.log2(band / grid.l)))
    lp = BumpFamily("psi", math.floor(math.log2(1.0 / grid.l)) - 1, k_max)
    rows = []

    def err(a, b):
        den = float(np.max(np.abs(b.samples)))
        num = float(np.max(np.abs(a.samples - b.samples)))
        return num / den if den else num

    for t, rng in enumerate(trial_rngs(cfg.seed, cfg.trials)):
        seeds = rng.integers(2**31, size=3)
        spec = {"kind": "random_bandlimited", "j_min": -band, "j_max": band}
        f, g, h = (make_function(spec, grid, int(s)) for s in seeds)
        f0 = f - complex(np.mean(f.samples))
        rows.append((t, "reconstruct", err(reconstruct(f0, lp), f0)))
        rows.append((t, "product", err(decompose_product(f, g, lp, cfg.gap).total(), f * g)))
        fams = default_paraproduct_families(grid, cfg.gap)
        parts = decompose_triple_product(f, g, h, fams, cfg.gap)
        rows.append((t, "triple", err(parts.total(), paraproduct_pi(f, g, *fams) * h)))
    return RatioReport("decompose", ("trial", "kind", "identity_error"), rows, cfg.to_json(),
                       group_by=("kind",), value_column="identity_error")


# ---------------------------------------------------------------- self test

def _self_checks() -> list:
    g = Grid(64)
    out = []
    f = mix_function(g, [(0.3, 0.1, 1.0), (0.7, 0.08, -0.6)])
    h = mix_function(g, [(0.5, 0.12, 0.9)])
    prod = apply_multiplier(constant_symbol(2), [f, h])
    out.append(("product_identity", float(np.max(np.abs(prod.samples - (f * h).samples))), 1e-12))

    base = {"grid": {"n": 32}, "trials": 3, "seed": 1}
    kp = run_kato_ponce(ExperimentConfig.from_dict({
        **base, "experiment": "kato-ponce", "alpha": 0.0,
        "exponents": {"p": 1.5, "p_i": [3, 3], "q_i": [3, 3]},
        "functions": [{"kind": "gaussian", "center": 0.4, "width": 0.1}] * 2}))
    out.append(("kato_ponce_equal_factors", kp.max_ratio - 0.5, 1e-12))
    kp1 = run_kato_ponce(ExperimentConfig.from_dict({
        **base, "experiment": "kato-ponce", "alpha": 1.0,
        "exponents": {"p": 2, "p_i": [2, 2], "q_i": ["inf", "inf"]},
        "functions": [None, {"kind": "constant"}]}))
    out.append(("kato_ponce_unit_factor", kp1.max_ratio - 1.0, 1e-12))
    gl = run_grand_leibnitz(ExperimentConfig.from_dict({
        **base, "experiment": "grand-leibnitz",
        "exponents": {"p": 1, "p_i": [3] * 4, "q_i": [3] * 4, "r_i": [3] * 4}}))
    out.append(("grand_leibnitz_holder", gl.max_ratio - 0.25, 1e-12))
    ns = run_norm_sweep(ExperimentConfig.from_dict({
        **base, "experiment": "norm-sweep", "operator": "identity"}))
    out.append(("norm_sweep_identity", ns.max_ratio - 1.0, 1e-12))
    mb = run_model_bound(ExperimentConfig.from_dict({
        **base, "experiment": "model-bound", "sizes": [0], "model_depth": 2}))
    out.append(("model_bound_empty_trees", mb.max_ratio, 0.0))
    return out


def run_self_test(cfg: ExperimentConfig | None = None) -> RatioReport:
    """Closed-form checks; raises :class:`ConsistencyError` if any fails."""
    rows = [(name, value, tol, int(value <= tol)) for name, value, tol in _self_checks()]
    echo = cfg.to_json() if cfg is not None else {"experiment": "self-test"}
    rep = RatioReport("self-test", ("check", "value", "tolerance", "passed"), rows, echo,
                      value_column="value")
    failed = [r[0] for r in rows if not r[3]]
    rep.extra["failed"] = failed
    if failed:
        raise ConsistencyError(f"self-test failed: {', '.join(failed)}")
    return rep


_RUNNERS = {
    "kato-ponce": run_kato_ponce,
    "grand-leibnitz": run_grand_leibnitz,
    "norm-sweep": run_norm_sweep,
    "model-bound": run_model_bound,
    "akns-scan": run_akns_scan,
    "decompose": run_decompose,
    "self-test": run_self_test,
}


def run_experiment(cfg: ExperimentConfig) -> RatioReport:
    return _RUNNERS[cfg.experiment](cfg)

