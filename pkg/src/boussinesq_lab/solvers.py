"""Time integration, the mollifier-regularized scheme and its delta-convergence study."""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .diagnostics import BlowupMonitor, EnergyReport, Verdict
from .spectral_ops import Field, Grid, ParameterError, mollifier_profile, sobolev_norm, xsk_norm
from .systems import CavitationError, SpectralSystem, State, require_noncavitating

SCHEMES = ("rk4_integrating_factor", "rk4_plain")
RK4_STABILITY_BUDGET = 2.8  # imaginary-axis limit of classical RK4 is 2*sqrt(2)


class StabilityError(ValueError):
    """Plain RK4 time step exceeds the stability budget of the stiffest mode."""


class NonFiniteError(ArithmeticError):
    """A step produced non-finite values."""


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4_integrating_factor"
    dt: float = 1e-3
    t_end: float = 1.0
    report_every: int = 1
    dealias: bool = True

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ParameterError("t_end must be non-negative")
        if self.report_every < 1:
            raise ParameterError("report_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


# --------------------------------------------------------------------------- propagator


def _phi_weights(s2: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``f1, f2`` with ``exp(hL) = I + f1 L + f2 L^2`` whenever ``L^3 = s2 L``."""
    osc = np.sqrt(np.maximum(-s2, 0.0)) * h
    grow = np.sqrt(np.maximum(s2, 0.0)) * h
    f1_osc = h * np.sinc(osc / np.pi)
    f2_osc = 0.5 * h**2 * np.sinc(osc / (2 * np.pi)) ** 2
    safe = np.where(grow > 0, grow, 1.0)
    f1_grow = np.where(grow > 0, h * np.sinh(safe) / safe, h)
    half = np.where(grow > 0, np.sinh(0.5 * safe) / (0.5 * safe), 1.0)
    f2_grow = 0.5 * h**2 * half**2
    positive = s2 > 0
    return np.where(positive, f1_grow, f1_osc), np.where(positive, f2_grow, f2_osc)


def linear_propagator(system: SpectralSystem, h: float) -> np.ndarray:
    """Per-mode ``exp(h L)`` in closed form."""
    L, L2 = system.linear_symbol, system.linear_symbol_sq
    f1, f2 = _phi_weights(system.s2, h)
    eye = np.eye(L.shape[0]).reshape(L.shape[:2] + (1,) * (L.ndim - 2))
    return eye + f1 * L + f2 * L2


def _apply(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,j...->i...", m, x)


class Stepper:
    """One RK4 step on stacked spectra; the integrating-factor variant is the Lawson form."""

    def __init__(self, system: SpectralSystem, cfg: IntegratorConfig):
        self.system, self.cfg, self.dt = system, cfg, cfg.dt
        self.keep = np.ones(system.grid.shape, dtype=bool)
        if system.real_fields:
            self.keep &= ~system.grid.nyquist_mask
        if cfg.scheme == "rk4_integrating_factor":
            self.e_full = linear_propagator(system, cfg.dt)
            self.e_half = linear_propagator(system, 0.5 * cfg.dt)
        else:
            if np.any(system.s2 > 0):
                raise StabilityError("system has exponentially growing linear modes")
            omega = float(np.max(system.frequency()))
            if cfg.dt * omega > RK4_STABILITY_BUDGET:
                raise StabilityError(
                    f"dt*omega_max = {cfg.dt * omega:.4g} exceeds {RK4_STABILITY_BUDGET}; "
                    f"use dt <= {RK4_STABILITY_BUDGET / omega:.3g} or the integrating-factor scheme"
                )

    def _n(self, uh: np.ndarray) -> np.ndarray:
        return np.where(self.keep, self.system.nonlinear_hat(uh), 0.0)

    def step(self, uh: np.ndarray) -> np.ndarray:
        dt = self.dt
        if self.cfg.scheme == "rk4_plain":
            f = lambda x: np.where(self.keep, self.system.linear_hat(x), 0.0) + self._n(x)  # noqa: E731
            k1 = f(uh)
            k2 = f(uh + 0.5 * dt * k1)
            k3 = f(uh + 0.5 * dt * k2)
            k4 = f(uh + dt * k3)
            return uh + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        eh, ef = self.e_half, self.e_full
        e_u = _apply(eh, uh)
        k1 = self._n(uh)
        k2 = self._n(_apply(eh, uh + 0.5 * dt * k1))
        k3 = self._n(e_u + 0.5 * dt * k2)
        k4 = self._n(_apply(ef, uh) + dt * _apply(eh, k3))
        return (_apply(ef, uh) + dt / 6.0 * (_apply(ef, k1) + 2.0 * _apply(eh, k2 + k3) + k4))


def step(cfg: IntegratorConfig, system: SpectralSystem, s: State) -> State:
    """Advance a physical-space state by one step."""
    stepper = Stepper(system, cfg)
    uh = stepper.step(system.to_hat(s.stack()))
    out = system.from_hat(uh)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"non-finite values after step from t={s.time}")
    return State.from_stack(s.grid, out, s.time + cfg.dt)


# --------------------------------------------------------------------------- evolve


Reporter = Callable[[float, np.ndarray], EnergyReport]


@dataclass
class Trajectory:
    times: list[float]
    states: list[np.ndarray]
    reports: list[EnergyReport]
    verdict: Verdict
    final: np.ndarray
    final_time: float


def evolve(cfg: IntegratorConfig, system: SpectralSystem, u0: np.ndarray, *, t0: float = 0.0,
           reporter: Reporter | None = None, monitor: BlowupMonitor | None = None,
           keep_states: bool = True) -> Trajectory:
    """Integrate ``u0`` (physical stack) to ``t0 + t_end``, reporting every ``report_every`` steps.

    A non-finite step, a depth collapse inside the nonlinearity, or a monitor
    trigger ends the run with a blown-up verdict; no exception escapes for those.
    """
    stepper = Stepper(system, cfg)
    uh = np.where(stepper.keep, system.to_hat(np.asarray(u0)), 0.0)
    times, states, reports = [], [], []
    verdict = Verdict(True)
    current = system.from_hat(uh)
    t = t0

    def record(t_now: float, values: np.ndarray) -> Verdict:
        times.append(t_now)
        if keep_states:
            states.append(values.copy())
        if reporter is not None:
            report = reporter(t_now, values)
            reports.append(report)
            if monitor is not None:
                return monitor.update(report)
        if not np.all(np.isfinite(values)):
            return Verdict(False, t_now, "non-finite values")
        return Verdict(True)

    verdict = record(t, current)
    for k in range(1, cfg.n_steps + 1):
        if not verdict.healthy:
            break
        t = t0 + k * cfg.dt
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                uh = stepper.step(uh)
        except CavitationError as exc:
            verdict = Verdict(False, t, f"cavitation: {exc}")
            break
        current = system.from_hat(uh)
        if not np.all(np.isfinite(current)):
            verdict = Verdict(False, t, "non-finite values")
            if k % cfg.report_every == 0:
                record(t, current)
            break
        if k % cfg.report_every == 0:
            verdict = record(t, current)
    return Trajectory(times, states, reports, verdict, current, t)


# --------------------------------------------------------------------------- mollified scheme


@dataclass(frozen=True)
class MollifiedConfig:
    delta: float
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self) -> None:
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ParameterError("delta must be positive")

    def nyquist_symbol(self, grid: Grid) -> float:
        """``phi(delta * xi_Nyquist)``; equal to 1 when the mollifier is transparent on the grid."""
        return float(mollifier_profile(self.delta * grid.k_nyquist * math.sqrt(grid.dim)))


class MollifiedSystem(SpectralSystem):
    """Regularized ``(eta, v)`` system in 1D with mollifier ``J`` of symbol ``phi(delta xi)``.

    ``eta_t = -J v_x``,
    ``v_t = -(1 + eps J eta)(1 - eps d_x^2) J eta_x - eps J^2 d_x(|J^2 v|^2 / (1 + eps J eta))``.
    """

    def __init__(self, eps: float, delta: float | None, grid: Grid, dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        if grid.dim != 1:
            raise ParameterError("the mollified system is one-dimensional")
        self.eps, self.delta, self.n_fields = eps, delta, 2
        self.phi = np.ones(grid.shape) if delta is None else mollifier_profile(delta * grid.kabs)

    def build_linear_symbol(self) -> np.ndarray:
        ik = self.grid.ik[0]
        L = np.zeros((2, 2) + self.grid.shape, dtype=complex)
        L[0, 1] = -ik * self.phi
        L[1, 0] = -ik * (1.0 + self.eps * self.grid.ksq) * self.phi
        return L

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        g, eps, phi, ik = self.grid, self.eps, self.phi, self.grid.ik[0]
        eta_m = self.phys(phi * uh[0])
        q = require_noncavitating(eta_m, eps)
        slope = self.phys(ik * (1.0 + eps * g.ksq) * phi * uh[0])
        w = self.phys(phi**2 * uh[1])
        out = np.zeros_like(uh)
        out[1] = -eps * self.proj(eta_m * slope) - eps * phi**2 * ik * self.proj(w * w / q)
        return out


def rhs_mollified(mcfg: MollifiedConfig, eta: Field, v: Field, eps: float) -> State:
    system = MollifiedSystem(eps, mcfg.delta, eta.grid, dealias=mcfg.integrator.dealias)
    s = State(eta.grid, eta.values, (v.values,))
    return State.from_stack(eta.grid, system.from_hat(system.rhs_hat(system.to_hat(s.stack()))))


def eta_v_distance(grid: Grid, a: np.ndarray, b: np.ndarray, eps: float) -> float:
    """``(|d eta|^2_{X^0_eps} + |d v|^2_{L^2})^(1/2)`` between two ``(eta, v)`` stacks."""
    d_eta = xsk_norm(Field(grid, a[0] - b[0]), 0.0, 1, eps)
    d_v = sobolev_norm(Field(grid, a[1] - b[1]), 0.0)
    return math.sqrt(d_eta**2 + d_v**2)


@dataclass
class CauchyReport:
    deltas: list[float]
    eps: float
    distances: dict[tuple[float, float], float]
    slope: float | None
    intercept: float | None
    degenerate: bool
    flagged: bool
    verdicts: dict[float, Verdict]
    finals: dict[float, np.ndarray]
    reference_final: np.ndarray | None
    grid: Grid
    t_end: float

    def fitted_distance(self, delta: float) -> float:
        if self.slope is None or self.intercept is None:
            return 0.0
        return float(math.exp(self.intercept) * delta**self.slope)


DEGENERATE_DISTANCE = 1e-12


def _run_regularized(eps: float, delta: float | None, grid: Grid, cfg: IntegratorConfig,
                     u0: np.ndarray, every: int) -> Trajectory:
    system = MollifiedSystem(eps, delta, grid, dealias=cfg.dealias)
    sampled = IntegratorConfig(cfg.scheme, cfg.dt, cfg.t_end, every, cfg.dealias)
    return evolve(sampled, system, u0)


def cauchy_study(deltas: Sequence[float], cfg: IntegratorConfig, eps: float, s0: State,
                 samples: int = 4, workers: int = 1, with_reference: bool = True) -> CauchyReport:
    """Evolve the regularized system for each delta and fit pairwise distances against ``max(delta, delta')``.

    ``s0`` carries ``(eta, v)``.  Distances are maxima over ``samples`` evenly
    spaced report times.  ``with_reference`` also runs the unregularized system.
    """
    deltas = sorted(set(float(d) for d in deltas), reverse=True)
    if len(deltas) < 3:
        raise ParameterError("cauchy_study needs at least three deltas")
    grid = s0.grid
    every = max(1, cfg.n_steps // max(samples, 1))
    u0 = s0.stack()
    keys: list[float | None] = list(deltas) + ([None] if with_reference else [])
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        runs = dict(zip(keys, pool.map(lambda d: _run_regularized(eps, d, grid, cfg, u0, every), keys)))
    verdicts = {d: runs[d].verdict for d in deltas}
    flagged = not all(v.healthy for v in verdicts.values())
    distances: dict[tuple[float, float], float] = {}
    for i, d1 in enumerate(deltas):
        for d2 in deltas[i + 1:]:
            a, b = runs[d1].states, runs[d2].states
            m = min(len(a), len(b))
            distances[(d1, d2)] = max(eta_v_distance(grid, a[k], b[k], eps) for k in range(m))
    slope = intercept = None
    degenerate = all(d < DEGENERATE_DISTANCE for d in distances.values())
    if not degenerate and not flagged:
        xs = np.log([max(pair) for pair in distances])
        ys = np.log([max(d, 1e-300) for d in distances.values()])
        slope, intercept = (float(c) for c in np.polyfit(xs, ys, 1))
    reference = runs[None].final if with_reference else None
    return CauchyReport(deltas, eps, distances, slope, intercept, degenerate, flagged, verdicts,
                        {d: runs[d].final for d in deltas}, reference, grid, cfg.t_end)


class LimitFitError(ValueError):
    """The Cauchy study has no usable fit."""


@dataclass
class LimitProxy:
    state: State
    delta: float
    error_bar: float
    residual: float | None

    @property
    def within_bar(self) -> bool:
        return self.residual is not None and self.residual <= self.error_bar + DEGENERATE_DISTANCE


def limit_extract(report: CauchyReport) -> LimitProxy:
    """Finest-delta run as the limit proxy with error bar from the fitted line at that delta.

    The residual is its distance to the unregularized run at the final time.
    """
    if report.flagged:
        raise LimitFitError("a regularized run blew up; no limit proxy")
    finest = min(report.deltas)
    if report.degenerate:
        bar = 0.0
    elif report.slope is None:
        raise LimitFitError("slope fit failed")
    else:
        bar = report.fitted_distance(finest)
    final = report.finals[finest]
    residual = None
    if report.reference_final is not None:
        residual = eta_v_distance(report.grid, final, report.reference_final, report.eps)
    return LimitProxy(State.from_stack(report.grid, final, report.t_end), finest, bar, residual)


# --------------------------------------------------------------------------- field dumps

MAGIC = b"BSQ1"
_HEADER = struct.Struct("<4sqqddd")


def write_field_dump(path: str | Path, grid: Grid, eps: float, time: float, fields: np.ndarray) -> None:
    """Header ``BSQ1, dim, n, L, eps, time`` (little-endian) then row-major float64 field data."""
    data = np.ascontiguousarray(np.asarray(fields, dtype="<f8"))
    if data.shape[-grid.dim:] != grid.shape:
        raise ParameterError("field dump does not match grid")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.dim, grid.n, grid.length, eps, time))
        fh.write(data.tobytes(order="C"))


def read_field_dump(path: str | Path) -> tuple[Grid, float, float, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, dim, n, length, eps, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"not a field dump: magic {magic!r}")
    grid = Grid(int(dim), int(n), float(length))
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    per_field = int(np.prod(grid.shape))
    if data.size % per_field:
        raise ValueError("truncated field dump")
    return grid, float(eps), float(time), data.reshape((data.size // per_field,) + grid.shape).copy()
