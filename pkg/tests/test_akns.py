import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from conftest import bandlimited
from flagpara.akns import (
    AknsConfig,
    Entry,
    gauge_transform,
    integrate,
    iterated_integral,
    lambda_scan,
    max_step,
    ordered_frequency_form,
    scan_to_csv,
    triangular_solution,
)
from flagpara.errors import InputError
from flagpara.spectral import Grid

X = 8.0


def gauss_integral(omega, x, x0=-X):
    """int_{x0}^{x} exp(-t^2/2 + i omega t) dt via the complex error function."""
    c = np.sqrt(np.pi / 2) * np.exp(-omega**2 / 2)
    return c * (erf((np.asarray(x) - 1j * omega) / np.sqrt(2)) - erf((x0 - 1j * omega) / np.sqrt(2)))


def two_by_two(lam, nq=2**12):
    return AknsConfig((1.0, 2.0), {(0, 1): Entry("gaussian")}, lam, X, nq)


def rk4_on(cfg, u0, h):
    return integrate(cfg, u0, (-X, X), h)


# -------------------------------------------------------------- entries

def test_entry_profiles():
    x = np.array([-2.0, 0.0, 0.5, 3.0])
    assert np.allclose(Entry("gaussian", 2.0, 0.5, 2.0)(x), 2.0 * np.exp(-0.5 * ((x - 0.5) / 2) ** 2))
    b = Entry("bump", 1.0, 0.0, 1.0)(x)
    assert b[0] == 0 and b[3] == 0 and b[1] == pytest.approx(1.0)
    assert np.all(Entry("constant", 1j)(x) == 1j)
    with pytest.raises(InputError):
        Entry("square")
    with pytest.raises(InputError):
        Entry("gaussian", width=0.0)


def test_config_validation():
    with pytest.raises(InputError):
        AknsConfig((1.0, 1.0))
    with pytest.raises(InputError):
        AknsConfig((1.0, 2.0), {(0, 0): Entry("constant")})
    with pytest.raises(InputError):
        AknsConfig((1.0, 2.0), {(0, 2): Entry("constant")})
    with pytest.raises(InputError):
        AknsConfig((1.0, 2.0), nq=1)
    with pytest.raises(InputError):
        AknsConfig.from_json({"entries": []})
    with pytest.raises(InputError, match="kind"):
        AknsConfig.from_json({"d": [1, 2], "entries": [{"row": 1, "col": 2}]})


def test_config_json_roundtrip():
    cfg = AknsConfig((0.0, 1.0, 3.0), {(0, 1): Entry("gaussian", 1 + 2j, 0.5, 0.7), (1, 2): Entry("bump")},
                     1.5, 6.0, 512)
    again = AknsConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg
    assert again.is_upper_triangular()
    assert not AknsConfig((0.0, 1.0), {(1, 0): Entry("constant")}).is_upper_triangular()


# ---------------------------------------------------------- integration

def test_rk4_diagonal_phase():
    cfg = AknsConfig((1.0, -2.0), {}, 3.0)
    tr = integrate(cfg, [1.0, 2.0], (0.0, 1.0), 1e-3)
    want = np.array([1.0, 2.0]) * np.exp(3j * np.array([1.0, -2.0]) * tr.x[:, None])
    # RK4 local phase error is theta^5 / 120 per step with theta = 6e-3
    assert np.max(np.abs(tr.u - want)) < 1e-9


def test_rk4_fourth_order():
    cfg = AknsConfig((0.0, 1.0), {(0, 1): Entry("gaussian"), (1, 0): Entry("bump", 0.5)}, 2.0)
    ref = integrate(cfg, [1.0, 1.0], (-2.0, 2.0), 1e-3).u[-1]
    e1 = np.abs(integrate(cfg, [1.0, 1.0], (-2.0, 2.0), 0.04).u[-1] - ref).max()
    e2 = np.abs(integrate(cfg, [1.0, 1.0], (-2.0, 2.0), 0.02).u[-1] - ref).max()
    assert 12 < e1 / e2 < 20


def test_step_limits():
    cfg = two_by_two(10.0)
    assert max_step(cfg) == pytest.approx(2 * np.pi / 160)
    assert max_step(two_by_two(0.0)) == np.inf
    with pytest.raises(InputError, match="points per phase"):
        integrate(cfg, [1, 1], (-1, 1), 0.05)
    with pytest.raises(InputError):
        integrate(cfg, [1, 1, 1], (-1, 1), 0.01)
    with pytest.raises(InputError):
        integrate(cfg, [1, 1], (-1, 1), 0.0)


# ------------------------------------------------------ closed forms

@pytest.mark.parametrize("omega", [0.0, 1.0, 4.0])
def test_iterated_integral_single_gaussian(omega):
    x = np.linspace(-4, 4, 9)
    got = iterated_integral([Entry("gaussian")], [1.0], omega, x, X, 2**16)
    assert np.max(np.abs(got - gauss_integral(omega, x))) < 1e-7


def test_iterated_integral_two_constants():
    # int_{-X<s<t<x} 1 ds dt = (x + X)^2 / 2
    one = Entry("constant")
    x = np.array([-1.0, 0.0, 2.0])
    got = iterated_integral([one, one], [0.0, 0.0], 0.0, x, X, 2**10)
    assert np.allclose(got, (x + X) ** 2 / 2, atol=1e-10)
    with pytest.raises(InputError):
        iterated_integral([one], [0.0, 1.0], 0.0)
    with pytest.raises(InputError):
        iterated_integral([one], [0.0], 0.0, 9.0, X)


@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0])
def test_two_by_two_closed_form_and_rk4(lam):
    cfg = two_by_two(lam, 2**16)
    u0 = np.array([0.3 - 0.2j, 1.0])
    x = np.linspace(-4, 4, 33)
    closed = triangular_solution(cfg, u0, x)
    # independent oracle: v_1 = v_1(-X) + v_2(-X) int a_12 exp(i lam (d_2 - d_1) t) dt
    v0 = np.exp(1j * lam * np.array(cfg.d) * X) * u0
    v1 = v0[0] + v0[1] * gauss_integral(lam * (cfg.d[1] - cfg.d[0]), x)
    exact = np.stack([np.exp(1j * lam * x) * v1, np.exp(2j * lam * x) * v0[1]], axis=-1)
    assert np.max(np.abs(closed - exact)) < 1e-6
    # h = 1/2048 puts every x on an RK4 node
    tr = rk4_on(cfg, u0, 1 / 2048)
    idx = np.searchsorted(tr.x, x - 1e-12)
    assert np.allclose(tr.x[idx], x, atol=1e-12)
    assert np.max(np.abs(closed - tr.u[idx])) < 1e-6


def test_three_by_three_triangular():
    ent = {(0, 1): Entry("gaussian", 0.7, 0.5, 0.8), (1, 2): Entry("bump", 1.2, -0.5, 1.5),
           (0, 2): Entry("gaussian", -0.4j, 0.0, 1.0)}
    cfg = AknsConfig((0.0, 1.0, 2.5), ent, 1.5, X, 2**15)
    u0 = np.array([1.0, -0.5, 0.25j])
    tr = rk4_on(cfg, u0, 1 / 128)
    closed = triangular_solution(cfg, u0, tr.x[::64])
    assert np.max(np.abs(closed - tr.u[::64])) < 1e-6


def test_closed_form_needs_triangular():
    cfg = AknsConfig((0.0, 1.0), {(1, 0): Entry("constant")})
    with pytest.raises(InputError):
        triangular_solution(cfg, [1, 0])


# --------------------------------------------------------------- gauge

@pytest.mark.parametrize("lam", [0.5, 4.0])
def test_gauge_transform(lam):
    cfg = AknsConfig((1.0, -1.0, 2.0), {(0, 1): Entry("gaussian"), (2, 0): Entry("bump", 0.5, 1.0, 2.0),
                                       (1, 2): Entry("gaussian", 1j, -1.0)}, lam)
    tr = integrate(cfg, [1.0, 0.5j, -0.25], (-3.0, 3.0), 1 / 256)
    gd = gauge_transform(tr, cfg)
    assert np.allclose(np.abs(gd.v), np.abs(tr.u), atol=1e-14)
    assert np.allclose(np.abs(gd.w), np.abs(cfg.coupling(tr.x)), atol=1e-14)
    assert gd.residual < 1e-6 and not gd.flagged


def test_gauge_flags_wrong_sign():
    cfg = AknsConfig((1.0, -1.0), {(0, 1): Entry("gaussian"), (1, 0): Entry("constant", 0.3)}, 3.0)
    tr = integrate(cfg, [1.0, 1.0], (-3.0, 3.0), 1 / 256)
    wrong = AknsConfig((-1.0, 1.0), cfg.entries, 3.0)
    flipped = type(tr)(tr.x, tr.u * np.exp(-2j * 3.0 * np.outer(tr.x, cfg.d)), tr.lam)
    assert gauge_transform(flipped, wrong).flagged


# ------------------------------------------------- ordered frequencies

def brute_ordered(fs, sharps, x):
    g = fs[0].grid
    F = [np.array([np.sum(f.samples * np.exp(-2j * np.pi * j * g.x / g.l)) * g.dx for j in g.modes]) / g.l
         for f in fs]
    m = g.modes
    out = np.zeros(len(x), dtype=complex)
    for a in range(len(m)):
        for b in range(a + 1, len(m)):
            out += F[0][a] * F[1][b] * np.exp(2j * np.pi * x * (sharps[0] * m[a] + sharps[1] * m[b]) / g.l)
    return out


@pytest.mark.parametrize("l", [1.0, 2.0])
def test_ordered_form_against_pair_loop(l):
    g = Grid(64, l)
    fs = [bandlimited(g, 31, 1), bandlimited(g, 31, 2)]
    x = np.random.default_rng(0).uniform(0, l, 7)
    assert np.max(np.abs(ordered_frequency_form(fs, [1.0, -1.5], x) - brute_ordered(fs, [1.0, -1.5], x))) < 1e-9


def test_ordered_form_single_and_three():
    g = Grid(32)
    f = bandlimited(g, 10, 3)
    assert np.allclose(ordered_frequency_form([f], [1.0]), f.samples, atol=1e-12)
    fs = [bandlimited(g, 4, s) for s in range(3)]
    F = [np.fft.fftshift(np.fft.fft(h.samples)) / g.n for h in fs]
    m = g.modes
    x0 = 0.3
    want = sum(F[0][a] * F[1][b] * F[2][c] * np.exp(2j * np.pi * x0 * (m[a] + 2 * m[b] - m[c]))
               for a in range(32) for b in range(a + 1, 32) for c in range(b + 1, 32))
    assert ordered_frequency_form(fs, [1.0, 2.0, -1.0], x0)[0] == pytest.approx(want, abs=1e-12)
    with pytest.raises(InputError):
        ordered_frequency_form(fs, [1.0, 0.0, 1.0])
    with pytest.raises(InputError):
        ordered_frequency_form(fs + fs[:1], [1.0] * 4)


# ---------------------------------------------------------------- scans

def test_lambda_scan_rows_and_csv():
    cfg = AknsConfig((0.0, 1.0), {(0, 1): Entry("gaussian")}, 0.0, 4.0)
    rows = lambda_scan(cfg, [0.0, 5.0], [0.0, 1.0])
    assert [r[:2] for r in rows] == [(0.0, 1), (0.0, 2), (5.0, 1), (5.0, 2)]
    # |u_2| = 1 throughout and |u_1| at lam = 0 grows to the full Gaussian mass
    assert rows[1][2] == pytest.approx(1.0)
    assert rows[0][2] == pytest.approx(np.sqrt(2 * np.pi) * erf(4 / np.sqrt(2)), rel=1e-8)
    text = scan_to_csv(rows)
    assert text.splitlines()[0] == "lambda,component,sup_norm"
    assert len(text.splitlines()) == 5


# ------------------------------------------------------------ properties

@settings(max_examples=15, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-2.0, 2.0), st.floats(0.3, 2.0))
def test_triangular_matches_rk4_property(lam, center, width):
    cfg = AknsConfig((0.0, 1.0), {(0, 1): Entry("gaussian", 1.0, center, width)}, lam, 6.0, 2**13)
    tr = integrate(cfg, [0.0, 1.0], (-6.0, 6.0), 1 / 64)
    closed = triangular_solution(cfg, [0.0, 1.0], tr.x[::16])
    assert np.max(np.abs(closed - tr.u[::16])) < 1e-5


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0), st.integers(0, 2**30))
def test_gauge_preserves_modulus_property(lam, seed):
    rng = np.random.default_rng(seed)
    cfg = AknsConfig((0.0, 1.0, -1.0), {(0, 1): Entry("gaussian", complex(*rng.normal(size=2)))}, lam)
    u0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    tr = integrate(cfg, u0, (-2.0, 2.0), 1 / 64)
    assert np.allclose(np.abs(gauge_transform(tr, cfg).v), np.abs(tr.u), atol=1e-13)
