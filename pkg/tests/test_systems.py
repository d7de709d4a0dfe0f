import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boussinesq_lab.config import REPRESENTATIVES
from boussinesq_lab.spectral_ops import Field, Grid, ParameterError
from boussinesq_lab.solvers import IntegratorConfig, evolve
from boussinesq_lab.systems import (BathymetryProfile, CaseParams, ConstraintViolation, FifthOrderSystem, IllPosedError,
                                    KaupSystem, ResolutionError, State, make_system, registry_case, rhs_abcd_1d,
                                    rhs_abcd_2d, rhs_bathymetry, rhs_fifth_order, rhs_full_dispersion, rhs_kaup,
                                    validate_params)

from conftest import random_field, seeds

WAVE = CaseParams(0.0, 0.0, 0.0, 0.0, eps=0.1, tau=1 / 3)
CASE_7 = CaseParams(0.0, 1 / 3, 0.0, 0.0, eps=0.1)
FIFTH = CaseParams(-1 / 6, 1 / 6, -1 / 6, 1 / 6, eps=0.1, family="fifth_order", b1=0.05, d1=0.05)
FD = CaseParams(eps=0.1, family="full_dispersion")
KAUP = CaseParams(eps=0.01, family="kaup")


def _state(grid, seed, amp=0.3):
    fields = [random_field(grid, seed + j, kmax=grid.k_nyquist / 3, amp=amp) for j in range(1 + grid.dim)]
    return State(grid, fields[0], tuple(fields[1:]))


def _sup(a):
    return float(np.max(np.abs(a)))


# ---------------------------------------------------------------- validation


def test_case_7():
    assert validate_params(CaseParams(0.0, 1 / 3, 0.0, 0.0)).case_id == "7"


def test_case_13_needs_surface_tension():
    assert validate_params(CaseParams(-1.0, 0.0, 0.0, 0.0, tau=4 / 3)).case_id == "13"


def test_bad_case_reports_both_reasons():
    with pytest.raises(ConstraintViolation) as info:
        validate_params(CaseParams(1.0, 0.0, 0.0, 0.0))
    assert len(info.value.reasons) == 2
    assert "1/3" in info.value.reasons[0]
    assert "ill-posed" in info.value.reasons[1]


def test_ill_posed_with_valid_sum():
    with pytest.raises(IllPosedError):
        validate_params(CaseParams(1.0, 0.0, -2 / 3, 0.0))


@pytest.mark.parametrize("number", sorted(REPRESENTATIVES))
def test_representatives_land_on_their_case(number):
    a, b, c, d, tau = REPRESENTATIVES[number]
    assert registry_case(a, b, c, d) == number
    assert validate_params(CaseParams(a, b, c, d, tau=tau)).case_id == str(number)


def test_fifth_order_sign_pattern():
    assert validate_params(FIFTH).case_id == "EXTENDED"
    with pytest.raises(IllPosedError):
        validate_params(CaseParams(-1 / 6, 1 / 6, -1 / 6, 1 / 6, family="fifth_order", b1=0.05, d1=0.0))


def test_full_dispersion_rejects_negative_bond():
    with pytest.raises(IllPosedError):
        validate_params(CaseParams(family="full_dispersion", beta_fd=-0.1))


def test_bad_family_and_eps():
    with pytest.raises(ParameterError):
        CaseParams(family="whitham")
    with pytest.raises(ParameterError):
        CaseParams(eps=0.0)


# ---------------------------------------------------------------- rhs


def test_wave_system_on_one_mode():
    g = Grid(1, 32)
    x = g.x[0]
    out = rhs_abcd_1d(WAVE, State(g, np.cos(x), (np.zeros(g.shape),)), nonlinear=False)
    assert _sup(out.eta) < 1e-14
    assert _sup(out.vel[0] - np.sin(x)) < 1e-13


@pytest.mark.parametrize("make", [
    lambda g: rhs_abcd_1d(CASE_7, State(g, np.zeros(g.shape), (np.zeros(g.shape),))),
    lambda g: rhs_fifth_order(FIFTH, State(g, np.zeros(g.shape), (np.zeros(g.shape),))),
    lambda g: rhs_full_dispersion(FD, State(g, np.zeros(g.shape), (np.zeros(g.shape),))),
    lambda g: rhs_full_dispersion(replace_beta(FD, 0.2), State(g, np.zeros(g.shape), (np.zeros(g.shape),)), True),
    lambda g: rhs_kaup(KAUP, State(g, np.zeros(g.shape), (np.zeros(g.shape),))),
])
def test_rest_state_is_fixed(make):
    out = make(Grid(1, 16))
    assert _sup(out.stack()) == 0.0


def replace_beta(p, beta):
    return CaseParams(eps=p.eps, family=p.family, beta_fd=beta)


def test_rest_state_2d():
    g = Grid(2, 16)
    zero = np.zeros(g.shape)
    assert _sup(rhs_abcd_2d(CASE_7, State(g, zero, (zero, zero))).stack()) == 0.0


SYSTEMS = [("abcd", lambda g: make_system(CASE_7, g, nonlinear=False), lambda g: make_system(CASE_7, g)),
           ("fifth", lambda g: FifthOrderSystem(FIFTH, g, nonlinear=False), lambda g: FifthOrderSystem(FIFTH, g)),
           ("fd", lambda g: make_system(FD, g, nonlinear=False), lambda g: make_system(FD, g)),
           ("kaup", lambda g: KaupSystem(KAUP, g, nonlinear=False), lambda g: KaupSystem(KAUP, g))]


@given(seed=seeds, which=st.sampled_from(range(len(SYSTEMS))))
def test_quadratic_split(seed, which):
    g = Grid(1, 16)
    _, linear, full = SYSTEMS[which]
    lin_sys, full_sys = linear(g), full(g)
    u = _state(g, seed).stack()
    uh = full_sys.to_hat(u)
    lin = lin_sys.rhs_hat(uh)
    quad = full_sys.rhs_hat(uh) - lin
    for lam in (1.0, 2.0):
        resid = full_sys.rhs_hat(lam * uh) - lam * lin - lam**2 * quad
        assert _sup(resid) <= 1e-12 * max(_sup(quad), 1.0)


@given(seed=seeds, which=st.sampled_from(range(len(SYSTEMS))))
def test_mass_mode_is_zero(seed, which):
    g = Grid(1, 32)
    system = SYSTEMS[which][2](g)
    out = system.rhs_hat(system.to_hat(_state(g, seed).stack()))
    assert abs(out[0].flat[0]) == 0.0


@given(seed=seeds)
def test_gradient_velocity_keeps_gradient_rhs(seed):
    g = Grid(2, 32)
    phi = random_field(g, seed, kmax=g.k_nyquist / 3)
    eta = random_field(g, seed + 1, kmax=g.k_nyquist / 3)
    grad = [np.real(g.ifft(ik * g.fft(phi))) for ik in g.ik]
    out = rhs_abcd_2d(CASE_7, State(g, eta, tuple(grad)))
    curl = np.real(g.ifft(g.ik[0] * g.fft(out.vel[1]) - g.ik[1] * g.fft(out.vel[0])))
    assert _sup(curl) < 1e-12


@given(seed=seeds)
def test_flat_bottom_matches_abcd(seed):
    g = Grid(1, 32)
    s = _state(g, seed)
    beta = BathymetryProfile(Field(g, np.zeros(g.shape)))
    p = CaseParams(0.0, 1 / 3, 0.0, 0.0, family="bathymetry")
    assert _sup(rhs_bathymetry(p, beta, s).stack() - rhs_abcd_1d(CASE_7, s).stack()) == 0.0


def test_bottom_at_surface_kills_flux():
    g = Grid(1, 32)
    s = _state(g, 3)
    p = CaseParams(0.0, 1 / 3, 0.0, 0.0, family="bathymetry")
    full = rhs_bathymetry(p, BathymetryProfile(Field(g, s.eta)), s)
    linear = rhs_abcd_1d(CASE_7, s, nonlinear=False)
    assert _sup(full.eta - linear.eta) < 1e-15


def test_constant_bottom_shifts_flux_only():
    g = Grid(1, 32)
    s = _state(g, 5)
    c0 = 0.2
    p = CaseParams(0.0, 1 / 3, 0.0, 0.0, family="bathymetry")
    out = rhs_bathymetry(p, BathymetryProfile(Field(g, np.full(g.shape, c0))), s)
    shifted = rhs_abcd_1d(CASE_7, State(g, s.eta - c0, s.vel))
    linear_shift = rhs_abcd_1d(CASE_7, State(g, s.eta, s.vel), nonlinear=False).stack() - rhs_abcd_1d(
        CASE_7, State(g, s.eta - c0, s.vel), nonlinear=False).stack()
    assert _sup(out.eta - shifted.eta - linear_shift[0]) < 1e-12
    assert _sup(out.vel[0] - rhs_abcd_1d(CASE_7, s).vel[0]) < 1e-12


def test_bathymetry_grid_mismatch():
    p = CaseParams(0.0, 1 / 3, 0.0, 0.0, family="bathymetry")
    with pytest.raises(Exception):
        make_system(p, Grid(1, 32), beta=BathymetryProfile(Field(Grid(1, 16), np.zeros(16))))


def test_fifth_order_symbol_eigenvalues():
    g = Grid(1, 16)
    system = FifthOrderSystem(FIFTH, g)
    p, e, k = FIFTH, FIFTH.eps, 1.0
    omega_sq = k**2 * (1 - p.a * e * k**2) * (1 - p.c * e * k**2) / (
        (1 + p.b * e * k**2 + p.b1 * e**2 * k**4) * (1 + p.d * e * k**2 + p.d1 * e**2 * k**4))
    lam = np.linalg.eigvals(system.linear_symbol[:, :, 1])
    assert np.allclose(sorted(lam.imag), [-math.sqrt(omega_sq), math.sqrt(omega_sq)], rtol=1e-12, atol=0)
    assert _sup(lam.real) < 1e-14


def test_fifth_order_tends_to_wave_system():
    g = Grid(1, 32)
    s = _state(g, 11)
    wave = rhs_abcd_1d(WAVE, s, nonlinear=False).stack()
    errs = []
    for eps in (1e-4, 5e-5, 2.5e-5):
        p = CaseParams(-1 / 6, 1 / 6, -1 / 6, 1 / 6, eps=eps, family="fifth_order", b1=0.05, d1=0.05)
        errs.append(_sup(rhs_fifth_order(p, s).stack() - wave))
    slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(sl - 1.0) < 0.05 for sl in slopes)


def test_full_dispersion_tends_to_kaup():
    g = Grid(1, 32)
    s = State(g, 0.1 * np.cos(g.x[0]), (0.1 * np.sin(g.x[0]),))
    errs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        fd = rhs_full_dispersion(CaseParams(eps=eps, family="full_dispersion"), s).stack()
        kaup = rhs_kaup(CaseParams(eps=eps, family="kaup"), s, allow_ill_posed=True).stack()
        errs.append(_sup(fd - kaup))
    slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(sl - 2.0) < 0.05 for sl in slopes)


def test_full_dispersion_frequency():
    g = Grid(1, 16)
    system = make_system(FD, g)
    k = g.k[0]
    z = math.sqrt(FD.eps) * np.abs(k)
    t_sym = np.where(z > 0, np.tanh(z) / np.where(z > 0, z, 1.0), 1.0)
    for m in (1, 3, 5):
        lam = np.linalg.eigvals(system.linear_symbol[:, :, m])
        assert max(abs(lam.imag)) == pytest.approx(abs(k[m]) * math.sqrt(t_sym[m]), rel=1e-12)


def test_kaup_resolution_gate():
    g = Grid(1, 256)
    with pytest.raises(ResolutionError):
        KaupSystem(CaseParams(eps=0.1, family="kaup"), g)
    KaupSystem(CaseParams(eps=0.1, family="kaup"), g, allow_ill_posed=True)


def test_kaup_growth_rate_beyond_threshold():
    g = Grid(1, 16)
    xi = 4.0
    system = KaupSystem(CaseParams(eps=6 / xi**2, family="kaup"), g, allow_ill_posed=True)
    lam = np.linalg.eigvals(system.linear_symbol[:, :, 4])
    assert max(lam.real) == pytest.approx(xi, rel=1e-12)


def test_kaup_below_threshold_stays_finite():
    g = Grid(1, 32, 4 * math.pi)
    p = CaseParams(eps=0.04, family="kaup")
    s = _state(g, 2, amp=0.1)
    traj = evolve(IntegratorConfig(dt=1e-2, t_end=1.0), KaupSystem(p, g), s.stack())
    assert traj.verdict.healthy
    assert np.all(np.isfinite(traj.final))


def test_non_finite_state_rejected():
    g = Grid(1, 16)
    eta = np.zeros(g.shape)
    eta[0] = np.inf
    with pytest.raises(Exception):
        rhs_abcd_1d(CASE_7, State(g, eta, (np.zeros(g.shape),)))
