"""Conserved quantities, energy functionals and run-health monitoring.

All integrals are grid quadratures of pointwise products (exact for the
band-limited products that arise with 2/3 truncation); fractional derivatives
``Lambda^s`` are Fourier multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .spectral_ops import Field, Grid, curl, grad, lap, sobolev_norm, spectral_derivative, xsk_norm
from .systems import TOL, CaseParams, State, require_noncavitating
from .transforms import DerivativeBundle, StencilError


class UnsupportedCaseError(ValueError):
    """No closed-form functional is available for these parameters."""


def _ip(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    return grid.integrate(np.real(f * np.conj(g)))


def _sq(grid: Grid, f: np.ndarray) -> float:
    return _ip(grid, f, f)


def _mult(grid: Grid, symbol: np.ndarray, f: np.ndarray) -> np.ndarray:
    return grid.ifft(symbol * grid.fft(f))


# --------------------------------------------------------------------------- Hamiltonian


def hamiltonian(p: CaseParams, s: State) -> float:
    """Conserved functional for ``b = d`` members of the family and for the full-dispersion system."""
    g = s.grid
    u = np.stack(s.vel)
    speed2 = np.sum(u * u, axis=0)
    if p.family == "full_dispersion":
        from .spectral_ops import p_eps, t_eps

        op = t_eps(p.eps) if p.beta_fd == 0 else p_eps(p.eps, p.beta_fd)
        sym = np.real(op.on(g))
        kinetic = sum(g.parseval_weight * float(np.sum(sym * np.abs(g.fft(c)) ** 2)) for c in u)
        return 0.5 * (kinetic + _sq(g, s.eta) + p.eps * g.integrate(s.eta * speed2))
    if p.family not in ("abcd",) or abs(p.b - p.d) > TOL:
        raise UnsupportedCaseError("Hamiltonian available only for b = d or the full-dispersion system")
    grad_eta2 = np.sum(grad(g, s.eta) ** 2, axis=0)
    grad_u2 = sum(np.sum(grad(g, c) ** 2, axis=0) for c in u)
    density = -p.c * p.eps * grad_eta2 - p.a * p.eps * grad_u2 + s.eta**2 + speed2 + p.eps * s.eta * speed2
    return 0.5 * g.integrate(density)


# --------------------------------------------------------------------------- symmetrized energy


def symmetrizer_kind(p: CaseParams) -> str:
    z = lambda x: abs(x) <= TOL  # noqa: E731
    if p.family == "fifth_order":
        return "fifth_order"
    if p.family != "abcd":
        raise UnsupportedCaseError(f"no symmetrized energy for family {p.family!r}")
    if z(p.a) and z(p.c) and z(p.d) and p.b > TOL:
        return "b"
    if z(p.a) and z(p.b) and z(p.c) and p.d > TOL:
        return "d"
    if z(p.b) and z(p.c) and z(p.d) and p.a < -TOL:
        return "a_neg"
    raise UnsupportedCaseError(
        f"no symmetrized energy for (a,b,c,d) = ({p.a:g}, {p.b:g}, {p.c:g}, {p.d:g})"
    )


def energy_symmetrized(p: CaseParams, s: State, sorder: float = 1.6) -> float:
    """``E_s(U)`` built from the case's symmetrizer applied to ``W = Lambda^s U``."""
    kind = symmetrizer_kind(p)
    g, eps = s.grid, p.eps
    q = require_noncavitating(s.eta, eps)
    lam = (1.0 + g.ksq) ** (0.5 * sorder)
    w0 = _mult(g, lam, s.eta)
    w = [_mult(g, lam, c) for c in s.vel]
    u = s.vel

    if kind == "b":
        mass = 1.0 + p.b * eps * g.ksq
        m0 = _mult(g, mass, w0)
        return _sq(g, m0) + sum(_ip(g, _mult(g, mass, wj), q * wj) for wj in w)

    if kind == "d":
        mass = 1.0 + p.d * eps * g.ksq
        sw0 = w0 + eps * sum(uj * wj for uj, wj in zip(u, w))
        total = _ip(g, _mult(g, mass, w0), sw0)
        cross = sum(uj * lap(g, wj) for uj, wj in zip(u, w))
        for ui, wi in zip(u, w):
            swi = eps * ui * w0 + q * _mult(g, mass, wi) + p.d * eps**3 * ui * cross
            total += _ip(g, _mult(g, mass, wi), swi)
        return total

    if kind == "a_neg":
        sw0 = w0 + eps * sum(uj * wj for uj, wj in zip(u, w))
        total = _ip(g, w0, sw0)
        for ui, wi in zip(u, w):
            total += _ip(g, wi, eps * ui * w0 + q * wi + p.a * eps * lap(g, wi))
        return total

    # fifth order, 1D
    k2 = g.ksq
    m_eta = 1.0 + p.b * eps * k2 + p.b1 * eps**2 * k2**2
    m_u = 1.0 + p.d * eps * k2 + p.d1 * eps**2 * k2**2
    w1 = w[0]
    s0 = w0 - p.c * eps * _mult(g, k2, w0) - eps**2 * s.eta * _mult(g, k2, w0)
    s1 = q * w1 - p.a * eps * _mult(g, k2, w1) - (p.a - 1.0 / 3.0) * eps**2 * s.eta * _mult(g, k2, w1)
    return _ip(g, _mult(g, m_eta, w0), s0) + _ip(g, _mult(g, m_u, w1), s1)


def reference_norm_sq(p: CaseParams, s: State, sorder: float = 1.6) -> float:
    """Squared norm that ``E_s`` is equivalent to for the case's symmetrizer."""
    kind = symmetrizer_kind(p)
    eta = Field(s.grid, s.eta)
    vel = [Field(s.grid, c) for c in s.vel]
    if kind == "b":
        ke, ku = 2, 1
    elif kind == "d":
        ke, ku = 1, 2
    elif kind == "a_neg":
        return sobolev_norm(eta, sorder) ** 2 + sum(xsk_norm(c, sorder, 1, p.eps) ** 2 for c in vel)
    else:
        ke = ku = 3
    return xsk_norm(eta, sorder, ke, p.eps) ** 2 + sum(xsk_norm(c, sorder, ku, p.eps) ** 2 for c in vel)


# --------------------------------------------------------------------------- quasilinear energies


def _eta_level(g: Grid, q: np.ndarray, eps: float, e: np.ndarray, e_t: np.ndarray) -> float:
    """``|e_t|^2 + eps|grad e_t|^2 + (q grad e|grad e) + 2 eps (q Lap e|Lap e) + eps^2 (q grad Lap e|grad Lap e)``."""
    ge, ge_t = grad(g, e), grad(g, e_t)
    le = lap(g, e)
    gle = grad(g, le)
    return (_sq(g, e_t) + eps * sum(_sq(g, c) for c in ge_t)
            + sum(_ip(g, q * c, c) for c in ge) + 2 * eps * _ip(g, q * le, le)
            + eps**2 * sum(_ip(g, q * c, c) for c in gle))


def _v_level(g: Grid, q: np.ndarray, eps: float, w: np.ndarray, w_t: np.ndarray) -> float:
    """``(w_t/q|w_t) + |div w|^2 + eps|grad div w|^2``."""
    from .spectral_ops import div

    dw = div(g, w)
    return sum(_ip(g, c / q, c) for c in w_t) + _sq(g, dw) + eps * sum(_sq(g, c) for c in grad(g, dw))


def energy_zero(grid: Grid, eta: np.ndarray, v: np.ndarray, eps: float) -> float:
    """``|eta|^2 + eps|grad eta|^2 + (v/q|v)``, the undifferentiated level of ``E``."""
    v = np.asarray(v).reshape((grid.dim,) + grid.shape)
    value = _sq(grid, eta) + eps * sum(_sq(grid, c) for c in grad(grid, eta))
    if np.any(v):
        q = require_noncavitating(eta, eps)
        value += sum(_ip(grid, c / q, c) for c in v)
    return value


def energy_quasilinear(bundle: DerivativeBundle, eps: float) -> tuple[float, float]:
    """``(E, total_E)`` for the ``(eta, v)`` system (1D needs 2 time derivatives, 2D needs 3)."""
    g = bundle.grid
    levels = g.dim + 1
    bundle.require(levels)
    eta, v = bundle.eta, bundle.v
    q = require_noncavitating(eta[0], eps)
    energy = energy_zero(g, eta[0], v[0], eps)
    for k in range(levels - 1):
        energy += _eta_level(g, q, eps, eta[k], eta[k + 1]) + _v_level(g, q, eps, v[k], v[k + 1])

    def x(a: np.ndarray, s: int, k: int) -> float:
        return xsk_norm(Field(g, a), s, k, eps) ** 2

    total = 0.0
    top = g.dim + 1  # spatial index of the undifferentiated eta
    for k in range(levels):
        total += x(eta[k], top - k, top + 1 - k)
        if k < levels - 1:
            total += sum(x(c, top - k, top - k) for c in v[k])
        else:
            total += sum(_sq(g, c) for c in v[k])
    return energy, total


# --------------------------------------------------------------------------- structure checks


def check_noncavitation(s: State, eps: float, h: float) -> float:
    return float(np.min(1.0 + eps * s.eta)) - h


def curl_norm(s: State) -> float:
    if s.grid.dim != 2:
        return 0.0
    return float(np.max(np.abs(curl(s.grid, np.stack(s.vel)))))


def mass(s: State) -> float:
    return float(np.mean(s.eta))


# --------------------------------------------------------------------------- reports and monitor


@dataclass(frozen=True)
class EnergyReport:
    time: float
    hamiltonian: float | None
    symmetrized_energy: float | None
    quasilinear_E: float | None
    total_E: float | None
    eta_hs: float
    vel_hs: float
    eta_x: float
    vel_x: float
    noncavitation_margin: float
    curl_norm: float
    mass: float
    finite: bool = True

    @property
    def monitored_energy(self) -> float:
        for value in (self.symmetrized_energy, self.quasilinear_E):
            if value is not None:
                return value
        return self.eta_x**2 + self.vel_x**2


def _safe(fn, *args):
    try:
        return fn(*args)
    except (UnsupportedCaseError, StencilError):
        return None


def build_report(p: CaseParams, s: State, *, h: float = 0.0, sorder: float = 1.6,
                 bundle: DerivativeBundle | None = None, velocity_is_v: bool = False) -> EnergyReport:
    """Snapshot of every diagnostic that applies to ``p``; non-finite states give a tagged report."""
    nan = float("nan")
    if not s.is_finite():
        return EnergyReport(s.time, None, None, None, None, nan, nan, nan, nan, nan, nan, nan, finite=False)
    margin = check_noncavitation(s, p.eps, h)
    ham = sym = None
    if margin + h > 0 and not velocity_is_v:
        ham = _safe(hamiltonian, p, s)
        sym = _safe(energy_symmetrized, p, s, sorder)
    qe = total = None
    if bundle is not None and margin + h > 0:
        qe, total = energy_quasilinear(bundle, p.eps)
    eta_f = Field(s.grid, s.eta)
    vel_f = [Field(s.grid, c) for c in s.vel]
    ke, ku = (1, 1) if velocity_is_v else (2, 1)
    return EnergyReport(
        time=s.time,
        hamiltonian=ham,
        symmetrized_energy=sym,
        quasilinear_E=qe,
        total_E=total,
        eta_hs=sobolev_norm(eta_f, sorder),
        vel_hs=math.sqrt(sum(sobolev_norm(c, sorder) ** 2 for c in vel_f)),
        eta_x=xsk_norm(eta_f, sorder, ke, p.eps),
        vel_x=math.sqrt(sum(xsk_norm(c, sorder, ku, p.eps) ** 2 for c in vel_f)),
        noncavitation_margin=margin,
        curl_norm=curl_norm(s),
        mass=mass(s),
    )


@dataclass(frozen=True)
class Verdict:
    healthy: bool
    t_star: float | None = None
    reason: str = ""


@dataclass
class BlowupMonitor:
    """Streaming check: non-finite values, depth margin <= 0, or energy above ``growth_factor`` times its start."""

    growth_factor: float = 16.0
    baseline: float | None = None
    verdict: Verdict = field(default_factory=lambda: Verdict(True))

    def update(self, report: EnergyReport) -> Verdict:
        if not self.verdict.healthy:
            return self.verdict
        values = [report.eta_hs, report.vel_hs, report.noncavitation_margin, report.monitored_energy]
        if not report.finite or not all(math.isfinite(x) for x in values):
            self.verdict = Verdict(False, report.time, "non-finite values")
        elif report.noncavitation_margin <= 0:
            self.verdict = Verdict(False, report.time, "non-cavitation margin <= 0")
        else:
            energy = report.monitored_energy
            if self.baseline is None:
                self.baseline = energy
            elif energy > self.growth_factor * self.baseline:
                self.verdict = Verdict(False, report.time, f"energy above {self.growth_factor:g}x initial")
        return self.verdict


def blowup_monitor(reports: Iterable[EnergyReport], growth_factor: float = 16.0) -> Verdict:
    monitor = BlowupMonitor(growth_factor)
    for report in reports:
        if not monitor.update(report).healthy:
            break
    return monitor.verdict


def energy_growth_coefficient(times: Iterator[float] | np.ndarray, energies: np.ndarray, eps: float) -> float:
    """Smallest ``C1`` with ``|1/y0 - 1/y(t)| <= C1 eps t`` for ``y = E^(1/2)`` on the sampled times.

    This is the integrated form of ``|d/dt E^(1/2)| <= C1 eps E``; the bound is
    two-sided because the systems are reversible under ``(t, u) -> (-t, -u)``.
    """
    t = np.asarray(list(times) if not isinstance(times, np.ndarray) else times, dtype=float)
    y = np.sqrt(np.asarray(energies, dtype=float))
    mask = t > 0
    if not np.any(mask):
        return 0.0
    coeff = np.abs(1.0 / y[0] - 1.0 / y[mask]) / (eps * t[mask])
    return float(np.max(coeff))
