import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from boussinesq_lab.solvers import IntegratorConfig, evolve
from boussinesq_lab.spectral_ops import Field, Grid, ParameterError
from boussinesq_lab.systems import CaseParams, CavitationError, State, rhs_abcd_1d, rhs_abcd_2d
from boussinesq_lab.transforms import (CaseMismatchError, DerivativeBundle, EtaVSystem, StencilError,
                                       curl_free_projection, diagonalize_2d, diagonalize_a_neg_1d,
                                       diagonalize_c_neg_1d, from_v_variable, inverse_tilde_eta_transform,
                                       nested_bundle, pushforward_rhs, quasilinear_residual,
                                       regularity_transfer_check, rhs_diag_2d, rhs_diag_a_neg_1d,
                                       rhs_diag_c_neg_1d, rhs_eta_v_1d, rhs_eta_v_2d, rhs_tilde_eta,
                                       stencil_bundle, tilde_eta_transform, to_v_variable,
                                       undiagonalize_2d, undiagonalize_a_neg_1d, undiagonalize_c_neg_1d)

from conftest import random_field, seeds, small_eps

A_NEG = CaseParams(-1.0, 0.0, 0.0, 0.0, eps=0.1, tau=4 / 3)
C_NEG = CaseParams(0.0, 0.0, -1.0, 0.0, eps=0.1, tau=4 / 3)


def _sup(a):
    return float(np.max(np.abs(a)))


def _low(grid, seed, amp=0.3):
    # band small enough that cubic products stay inside the 2/3 ball
    return random_field(grid, seed, kmax=grid.k_nyquist / 6, amp=amp)


def _state(grid, seed, amp=0.3, kmax=None):
    top = grid.k_nyquist - 1 if kmax is None else kmax
    rows = [random_field(grid, seed + j, kmax=top, amp=amp) for j in range(1 + grid.dim)]
    return State(grid, rows[0], tuple(rows[1:]))


# ---------------------------------------------------------------- 1D diagonal forms


def test_a_neg_read_off_eta():
    g = Grid(1, 32)
    c = np.cos(g.x[0])
    zeta, v = diagonalize_a_neg_1d(State(g, c, (np.zeros(g.shape),)), 0.3)
    assert _sup(zeta.values - 0.5 * c) < 1e-15
    assert _sup(v.values - 0.5 * c) < 1e-15


def test_a_neg_read_off_velocity():
    g = Grid(1, 32)
    c = np.cos(g.x[0])
    zeta, v = diagonalize_a_neg_1d(State(g, np.zeros(g.shape), (c,)), 1.0)
    assert _sup(zeta.values - math.sqrt(2) / 2 * c) < 1e-14
    assert _sup(v.values + math.sqrt(2) / 2 * c) < 1e-14


def test_c_neg_read_off():
    g = Grid(1, 32)
    c = np.cos(g.x[0])
    zeta, v = diagonalize_c_neg_1d(State(g, c, (np.zeros(g.shape),)), 1.0)
    assert _sup(zeta.values - math.sqrt(2) / 2 * c) < 1e-14
    assert _sup(v.values + math.sqrt(2) / 2 * c) < 1e-14


@given(seed=seeds, eps=small_eps)
def test_1d_round_trips(seed, eps):
    g = Grid(1, 64)
    s = _state(g, seed)
    back_a = undiagonalize_a_neg_1d(*diagonalize_a_neg_1d(s, eps), eps)
    back_c = undiagonalize_c_neg_1d(*diagonalize_c_neg_1d(s, eps), eps)
    assert _sup(back_a.stack() - s.stack()) < 1e-12
    assert _sup(back_c.stack() - s.stack()) < 1e-12


def test_diagonal_rhs_of_rest():
    g = Grid(1, 16)
    zero = Field(g, np.zeros(g.shape))
    for rhs in (rhs_diag_a_neg_1d, rhs_diag_c_neg_1d):
        assert all(_sup(f.values) == 0.0 for f in rhs(zero, zero, 0.1))


@given(seed=seeds, which=st.sampled_from(["a_neg", "c_neg"]))
def test_1d_pushforward(seed, which):
    g = Grid(1, 64)
    p = A_NEG if which == "a_neg" else C_NEG
    fwd = diagonalize_a_neg_1d if which == "a_neg" else diagonalize_c_neg_1d
    rhs = rhs_diag_a_neg_1d if which == "a_neg" else rhs_diag_c_neg_1d
    w = fwd(_state(g, seed, kmax=g.k_nyquist / 2), p.eps)
    got = rhs(*w, p.eps)
    want = pushforward_rhs(p, w, which)
    assert max(_sup(a.values - b.values) for a, b in zip(got, want)) < 1e-10


def test_1d_diagonal_wrong_dimension():
    g = Grid(2, 16)
    with pytest.raises(CaseMismatchError):
        diagonalize_a_neg_1d(_state(g, 0), 0.1)


# ---------------------------------------------------------------- 2D diagonal forms


def _gradient_state(g, seed, amp=0.3):
    phi = random_field(g, seed, kmax=g.k_nyquist - 1, amp=amp)
    eta = random_field(g, seed + 1, kmax=g.k_nyquist - 1, amp=amp)
    return State(g, eta, tuple(np.real(g.ifft(ik * g.fft(phi))) for ik in g.ik))


@given(seed=seeds, which=st.sampled_from(["a_neg", "c_neg"]))
def test_curl_free_velocity_has_no_zeta(seed, which):
    g = Grid(2, 16)
    zeta, _, _ = diagonalize_2d(_gradient_state(g, seed), 0.1, which)
    assert _sup(zeta.values) < 1e-12


@given(seed=seeds, which=st.sampled_from(["a_neg", "c_neg"]))
def test_2d_round_trip(seed, which):
    g = Grid(2, 16)
    s = _state(g, seed)
    s = State(g, *(lambda r: (r[0], tuple(r[1:])))([a - a.mean() for a in s.stack()]))
    back = undiagonalize_2d(*diagonalize_2d(s, 0.1, which), 0.1, which)
    assert _sup(back.stack() - s.stack()) < 1e-12


@pytest.mark.parametrize("which", ["a_neg", "c_neg"])
def test_pure_rotation_lands_in_zeta(which):
    g = Grid(2, 16)
    psi = random_field(g, 9, kmax=g.k_nyquist - 1)
    psi_h = g.fft(psi)
    u = (np.real(g.ifft(-g.ik[1] * psi_h)), np.real(g.ifft(g.ik[0] * psi_h)))
    zeta, v1, v2 = diagonalize_2d(State(g, np.zeros(g.shape), u), 0.1, which)
    assert _sup(v1.values) < 1e-12 and _sup(v2.values) < 1e-12
    assert _sup(zeta.values) > 0.1


@given(seed=seeds, which=st.sampled_from(["a_neg", "c_neg"]))
def test_2d_pushforward(seed, which):
    g = Grid(2, 16)
    p = A_NEG if which == "a_neg" else C_NEG
    w = diagonalize_2d(_state(g, seed, kmax=g.k_nyquist / 2), p.eps, which)
    got = rhs_diag_2d(*w, p.eps, which)
    want = pushforward_rhs(p, w, which)
    assert max(_sup(a.values - b.values) for a, b in zip(got, want)) < 1e-10


def test_unknown_diagonal_case():
    with pytest.raises(CaseMismatchError):
        diagonalize_2d(_state(Grid(2, 16), 0), 0.1, "b_neg")


# ---------------------------------------------------------------- (eta, v)


def test_v_equals_u_on_flat_surface():
    g = Grid(1, 32)
    u = random_field(g, 1)
    s = to_v_variable(State(g, np.zeros(g.shape), (u,)), 0.1)
    assert np.array_equal(s.vel[0], u)


def test_v_on_constant_surface():
    g = Grid(1, 32)
    u = random_field(g, 1)
    s = to_v_variable(State(g, np.full(g.shape, 0.4), (u,)), 0.1)
    assert _sup(s.vel[0] - 1.04 * u) < 1e-15


@given(seed=seeds, eps=small_eps, dim=st.sampled_from([1, 2]))
def test_v_round_trip(seed, eps, dim):
    g = Grid(dim, 32 if dim == 1 else 16)
    s = _state(g, seed)
    assert _sup(from_v_variable(to_v_variable(s, eps), eps).stack() - s.stack()) < 1e-12


def test_v_rejects_cavitation():
    g = Grid(1, 16)
    with pytest.raises(CavitationError):
        to_v_variable(State(g, np.full(g.shape, -20.0), (np.zeros(g.shape),)), 0.1)


def test_eta_v_rest_state():
    for g in (Grid(1, 16), Grid(2, 16)):
        zero = np.zeros(g.shape)
        if g.dim == 1:
            out = rhs_eta_v_1d(Field(g, zero), Field(g, zero), 0.1)
        else:
            out = rhs_eta_v_2d(Field(g, zero), [Field(g, zero)] * 2, 0.1)
        assert _sup(out.stack()) == 0.0


@given(seed=seeds)
def test_eta_v_first_equation(seed):
    g = Grid(1, 64)
    eta, v = _low(g, seed), _low(g, seed + 1)
    out = rhs_eta_v_1d(Field(g, eta), Field(g, v), 0.1)
    assert _sup(out.eta + np.real(g.ifft(g.ik[0] * g.fft(v)))) < 1e-14


@given(seed=seeds, eps=small_eps)
def test_eta_v_product_rule_1d(seed, eps):
    g = Grid(1, 64)
    p = CaseParams(0.0, 0.0, -1.0, 0.0, eps=eps, tau=4 / 3)
    s = State(g, _low(g, seed), (_low(g, seed + 1),))
    du = rhs_abcd_1d(p, s)
    q = 1 + eps * s.eta
    v_t = q * du.vel[0] + eps * du.eta * s.vel[0]
    out = rhs_eta_v_1d(Field(g, s.eta), Field(g, q * s.vel[0]), eps)
    assert _sup(out.vel[0] - v_t) < 1e-10
    assert _sup(out.eta - du.eta) < 1e-12


@given(seed=seeds, eps=small_eps)
def test_eta_v_product_rule_2d(seed, eps):
    g = Grid(2, 32)
    p = CaseParams(0.0, 0.0, -1.0, 0.0, eps=eps, tau=4 / 3)
    phi = _low(g, seed)
    u = tuple(np.real(g.ifft(ik * g.fft(phi))) for ik in g.ik)
    s = State(g, _low(g, seed + 1), u)
    du = rhs_abcd_2d(p, s)
    q = 1 + eps * s.eta
    out = rhs_eta_v_2d(Field(g, s.eta), [Field(g, q * c) for c in u], eps)
    for j in range(2):
        v_t = q * du.vel[j] + eps * du.eta * u[j]
        assert _sup(out.vel[j] - v_t) < 1e-10
    assert _sup(out.eta - du.eta) < 1e-12


# ---------------------------------------------------------------- quasilinear residual


def _sympy_residuals(eps, coeffs):
    """Both residuals of the second-order form for eta = A(t) cos x, v = -A'(t) sin x at t = 0."""
    t, x = sp.symbols("t x", real=True)
    A = sum(c * t**n / math.factorial(n) for n, c in enumerate(coeffs))
    eta = A * sp.cos(x)
    v = -sp.diff(A, t) * sp.sin(x)
    q = 1 + eps * eta
    dx, dt = (lambda f, n=1: sp.diff(f, x, n)), (lambda f, n=1: sp.diff(f, t, n))
    f = 2 * eps * dx(v) ** 2 / q - 2 * eps**2 * v * dx(v) * dx(eta) / q**2 - eps**2 * dx(dx(eta) * v**2 / q**2)
    res_f = (dt(eta, 2) - dx(q * dx(eta)) + eps * dx(q * dx(eta, 3)) + 2 * eps * v / q * dx(dt(eta)) - f)
    g = (-(eps * dt(eta) / q) * (dx(eta) - eps * dx(eta, 3)) - 2 * eps * dx(v) * dt(v) / q**2
         + eps**2 / q * dx(v**2 * dt(eta) / q**2))
    res_g = dt(v, 2) / q - dx(v, 2) + eps * dx(v, 4) + 2 * eps * v / q * dx(dt(v) / q) - g
    return [sp.lambdify(x, r.subs(t, 0), "numpy") for r in (res_f, res_g)]


def test_manufactured_residual_matches_symbolic():
    eps, coeffs = 0.1, (0.2, 0.15, -0.1, 0.05)
    g = Grid(1, 64)
    x = g.x[0]
    bundle = DerivativeBundle(g, tuple(c * np.cos(x) for c in coeffs[:3]),
                              tuple(-c * np.sin(x)[None] for c in coeffs[1:]))
    got = quasilinear_residual(bundle, eps)
    want = [np.broadcast_to(fn(x), g.shape) for fn in _sympy_residuals(eps, coeffs)]
    assert max(_sup(a - b) for a, b in zip(got, want)) < 1e-9
    assert _sup(want[1]) > 1e-3


def test_rest_trajectory_residual():
    g = Grid(1, 16)
    zero = np.zeros(g.shape)
    bundle = DerivativeBundle(g, (zero,) * 3, (zero[None],) * 3)
    assert all(_sup(r) == 0.0 for r in quasilinear_residual(bundle, 0.1))
    report = regularity_transfer_check(bundle, 0.1)
    assert report.mass_residual == 0.0 and report.space_residual == 0.0


@given(seed=seeds)
def test_nested_bundle_solves_the_system(seed):
    # wide grid so the 1/q series is resolved; the bar covers roundoff in fourth derivatives
    g = Grid(1, 256)
    eta, v = random_field(g, seed, kmax=5.0), random_field(g, seed + 1, kmax=5.0)
    bundle = nested_bundle(g, eta, v[None], 0.1, order=2)
    scale = max(_sup(bundle.eta[2]), _sup(bundle.v[2]))
    assert max(_sup(r) for r in quasilinear_residual(bundle, 0.1)) < 1e-9 * scale
    report = regularity_transfer_check(bundle, 0.1)
    assert report.mass_residual < 1e-12 and report.space_residual < 1e-10


def test_residual_needs_second_derivatives():
    g = Grid(1, 16)
    zero = np.zeros(g.shape)
    with pytest.raises(StencilError):
        quasilinear_residual(DerivativeBundle(g, (zero,) * 2, (zero[None],) * 2), 0.1)


def test_stencil_errors():
    g = Grid(1, 16)
    snaps = [np.zeros(g.shape)] * 3
    with pytest.raises(StencilError):
        stencil_bundle(g, snaps, snaps, 0.1, 4)
    with pytest.raises(StencilError):
        stencil_bundle(g, snaps, snaps, 0.1, 3)
    with pytest.raises(StencilError):
        stencil_bundle(g, snaps, snaps, 0.0, 2)


def test_stencil_on_polynomial_in_time():
    g = Grid(1, 16)
    dt, c = 0.1, np.cos(g.x[0])
    times = [dt * (k - 2) for k in range(5)]
    eta = [(1 + t + t**2 + t**3) * c for t in times]
    b = stencil_bundle(g, eta, [e[None] for e in eta], dt, 4)
    assert _sup(b.eta[1] - c) < 1e-12
    assert _sup(b.eta[2] - 2 * c) < 1e-12
    assert _sup(b.eta[3] - 6 * c) < 1e-12


def _transfer_ratios(eps, seed):
    g = Grid(1, 128, 4 * math.pi)
    eta = random_field(g, seed, kmax=4.0, amp=0.3)
    u = random_field(g, seed + 1, kmax=4.0, amp=0.3)
    s0 = to_v_variable(State(g, eta, (u,)), eps)
    traj = evolve(IntegratorConfig(dt=0.01, t_end=2.0, report_every=50), EtaVSystem(eps, g), s0.stack(),
                  keep_states=True)
    out = []
    for st_ in traj.states:
        report = regularity_transfer_check(nested_bundle(g, st_[0], st_[1:], eps, order=2), eps)
        out.append(report.energy_ratio)
    return out


def test_transfer_energy_ratio_bracket():
    # bracket from one calibration run, checked on held-out seeds
    calib = [r for eps in (0.1, 0.05) for r in _transfer_ratios(eps, 1)]
    lo, hi = min(calib) / 2, max(calib) * 2
    assert hi / lo < 50
    for seed in (11, 21, 31):
        for eps in (0.1, 0.05):
            assert all(lo <= r <= hi for r in _transfer_ratios(eps, seed))


# ---------------------------------------------------------------- tilde eta


def test_tilde_of_cosine():
    g = Grid(1, 32)
    c = np.cos(g.x[0])
    s = tilde_eta_transform(State(g, c, (np.zeros(g.shape),)), 1.0)
    assert _sup(s.eta - 2 * c) < 1e-13
    assert _sup(inverse_tilde_eta_transform(s, 1.0).eta - c) < 1e-14


@given(seed=seeds, eps=small_eps, dim=st.sampled_from([1, 2]))
def test_truncated_tilde_rhs_is_a_neg_system(seed, eps, dim):
    g = Grid(dim, 64 if dim == 1 else 16)
    s = _state(g, seed)
    p = CaseParams(-1.0, 0.0, 0.0, 0.0, eps=eps, tau=4 / 3)
    got = rhs_tilde_eta(s, eps, remainder=False)
    want = (rhs_abcd_1d if dim == 1 else rhs_abcd_2d)(p, s)
    assert _sup(got.stack() - want.stack()) < 1e-12


# ---------------------------------------------------------------- projection


@given(seed=seeds)
def test_projection_properties(seed):
    g = Grid(2, 16)
    u = [Field(g, random_field(g, seed + j, kmax=g.k_nyquist)) for j in range(2)]
    once = curl_free_projection(u)
    twice = curl_free_projection(once)
    assert max(_sup(a.values - b.values) for a, b in zip(once, twice)) < 1e-14
    curl = g.ifft(g.ik[0] * once[1].spectrum - g.ik[1] * once[0].spectrum)
    assert _sup(curl) < 1e-12


def test_gradient_unchanged_and_rotation_removed():
    g = Grid(2, 16)
    phi_h = g.fft(random_field(g, 3))
    grad = [Field(g, np.real(g.ifft(ik * phi_h))) for ik in g.ik]
    assert max(_sup(a.values - b.values) for a, b in zip(curl_free_projection(grad), grad)) < 1e-14
    rot = [Field(g, np.real(g.ifft(-g.ik[1] * phi_h)) + 0.25), Field(g, np.real(g.ifft(g.ik[0] * phi_h)))]
    out = curl_free_projection(rot)
    assert _sup(out[0].values - 0.25) < 1e-14 and _sup(out[1].values) < 1e-14


def test_projection_needs_2d():
    g = Grid(1, 16)
    with pytest.raises(ParameterError):
        curl_free_projection([Field(g, np.zeros(16))])
