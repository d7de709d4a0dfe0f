"""Right-hand sides of the Boussinesq-type evolution systems and the case registry.

Every system is a :class:`SpectralSystem`: an explicit ODE ``U_t = L U + N(U)``
on stacked Fourier coefficients.  ``L`` is a per-mode matrix whose cube is a
scalar multiple of itself (``L^3 = s2 L``), which is what the integrating-factor
stepper exploits.  Mass operators such as ``1 - b eps Delta`` are inverted
inside both parts, so callers only ever see time derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .spectral_ops import Field, Grid, InvalidFieldError, ParameterError, t_eps, p_eps

TOL = 1e-12


class ValidationError(ValueError):
    """Case parameters rejected; ``reasons`` lists every failed condition."""

    def __init__(self, reasons: Sequence[str]):
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


class ConstraintViolation(ValidationError):
    pass


class IllPosedError(ValidationError):
    pass


class NoRegistryMatch(ValidationError):
    pass


class CavitationError(ValueError):
    """Total depth ``1 + eps*eta`` is not bounded below by a positive constant."""


def require_noncavitating(eta: np.ndarray, eps: float, h: float = 0.0) -> np.ndarray:
    """Return ``q = 1 + eps*eta`` after checking ``min q > h``."""
    q = 1.0 + eps * np.real(eta)
    low = float(np.min(q))
    if not low > h:
        raise CavitationError(f"min(1 + eps*eta) = {low:.6g} <= {h:g}")
    return q


class ResolutionError(ValueError):
    """Grid resolves modes on which the system is linearly ill-posed."""


FAMILIES = ("abcd", "bathymetry", "fifth_order", "full_dispersion", "kaup")
EXTENDED = "EXTENDED"


@dataclass(frozen=True)
class CaseParams:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    eps: float = 0.1
    tau: float = 0.0
    family: str = "abcd"
    case_id: str | None = None
    a1: float = 0.0
    b1: float = 0.0
    c1: float = 0.0
    d1: float = 0.0
    beta_fd: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ParameterError(f"eps must be positive, got {self.eps}")
        for name in ("a", "b", "c", "d", "tau", "a1", "b1", "c1", "d1", "beta_fd"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")


def _zero(x: float) -> bool:
    return abs(x) <= TOL


def _pos(x: float) -> bool:
    return x > TOL


def _neg(x: float) -> bool:
    return x < -TOL


def _eq(x: float, y: float) -> bool:
    return abs(x - y) <= TOL


# Sign-pattern predicates on (a, b, c, d); first match wins.
CASE_REGISTRY: tuple[tuple[int, str, Callable[[float, float, float, float], bool]], ...] = (
    (1, "b>0, d=0, a<0, c<0", lambda a, b, c, d: _pos(b) and _zero(d) and _neg(a) and _neg(c)),
    (2, "b>0, d=0, a=0, c<0", lambda a, b, c, d: _pos(b) and _zero(d) and _zero(a) and _neg(c)),
    (3, "b=0, d>0, a<0, c<0", lambda a, b, c, d: _zero(b) and _pos(d) and _neg(a) and _neg(c)),
    (4, "b!=d, b>0, d>0, a<0, c<0 | b=0, d>0, a=0, c<0",
     lambda a, b, c, d: (not _eq(b, d) and _pos(b) and _pos(d) and _neg(a) and _neg(c))
     or (_zero(b) and _pos(d) and _zero(a) and _neg(c))),
    (5, "b!=d, b>0, d>0, a=0, c<0",
     lambda a, b, c, d: not _eq(b, d) and _pos(b) and _pos(d) and _zero(a) and _neg(c)),
    (6, "b=d>0, a<0, c<0 | b>0, d=0, a<0, c=0",
     lambda a, b, c, d: (_eq(b, d) and _pos(b) and _neg(a) and _neg(c))
     or (_pos(b) and _zero(d) and _neg(a) and _zero(c))),
    (7, "b>0, d=0, a=c=0 | b=d>0, a=0, c<0",
     lambda a, b, c, d: (_pos(b) and _zero(d) and _zero(a) and _zero(c))
     or (_eq(b, d) and _pos(b) and _zero(a) and _neg(c))),
    (8, "b>0, d>0, a<0, c=0 | b=0, d>0, a=c=0",
     lambda a, b, c, d: (_pos(b) and _pos(d) and _neg(a) and _zero(c))
     or (_zero(b) and _pos(d) and _zero(a) and _zero(c))),
    (9, "b=0, d>0, a<0, c=0", lambda a, b, c, d: _zero(b) and _pos(d) and _neg(a) and _zero(c)),
    (10, "b>0, d>0, a=c=0", lambda a, b, c, d: _pos(b) and _pos(d) and _zero(a) and _zero(c)),
    (11, "b=d=0, a<0, c<0", lambda a, b, c, d: _zero(b) and _zero(d) and _neg(a) and _neg(c)),
    (12, "b=d=0, a=0, c<0", lambda a, b, c, d: _zero(b) and _zero(d) and _zero(a) and _neg(c)),
    (13, "b=d=0, a<0, c=0", lambda a, b, c, d: _zero(b) and _zero(d) and _neg(a) and _zero(c)),
)


def registry_case(a: float, b: float, c: float, d: float) -> int | None:
    for number, _, pred in CASE_REGISTRY:
        if pred(a, b, c, d):
            return number
    return None


def _abcd_violations(p: CaseParams) -> tuple[list[str], list[str]]:
    constraint, posed = [], []
    total = p.a + p.b + p.c + p.d
    if abs(total - (1.0 / 3.0 - p.tau)) > TOL:
        constraint.append(f"a+b+c+d = {total:.15g} != 1/3 - tau = {1.0 / 3.0 - p.tau:.15g}")
    signs = p.b >= -TOL and p.d >= -TOL
    cond1 = signs and p.a <= TOL and p.c <= TOL
    cond2 = signs and _eq(p.a, p.c)
    if not (cond1 or cond2):
        posed.append(
            f"linearly ill-posed: need (a<=0, c<=0, b>=0, d>=0) or (a=c, b>=0, d>=0), "
            f"got (a,b,c,d) = ({p.a:g}, {p.b:g}, {p.c:g}, {p.d:g})"
        )
    return constraint, posed


def validate_params(p: CaseParams) -> CaseParams:
    """Check constraints and return ``p`` tagged with its registry case."""
    if p.family in ("abcd", "bathymetry"):
        constraint, posed = _abcd_violations(p)
        if constraint:
            raise ConstraintViolation(constraint + posed)
        if posed:
            raise IllPosedError(posed)
        number = registry_case(p.a, p.b, p.c, p.d)
        if number is None:
            raise NoRegistryMatch([f"(a,b,c,d) = ({p.a:g}, {p.b:g}, {p.c:g}, {p.d:g}) matches no listed case"])
        return replace(p, case_id=str(number) if p.family == "abcd" else EXTENDED)
    if p.family == "fifth_order":
        bad = []
        checks = [
            (p.b >= -TOL, "b>=0"), (_pos(p.b1), "b1>0"), (_neg(p.a), "a<0"), (_zero(p.a1), "a1=0"),
            (p.d >= -TOL, "d>=0"), (_pos(p.d1), "d1>0"), (_neg(p.c), "c<0"), (_zero(p.c1), "c1=0"),
        ]
        bad = [f"fifth-order BBM-type case needs {label}" for ok, label in checks if not ok]
        if bad:
            raise IllPosedError(bad)
        return replace(p, case_id=EXTENDED)
    if p.family == "full_dispersion":
        if p.beta_fd < 0:
            raise IllPosedError(["beta_fd must be >= 0"])
        return replace(p, case_id=EXTENDED)
    return replace(p, case_id=EXTENDED)


@dataclass(frozen=True, eq=False)
class State:
    """Surface elevation with one velocity component per axis."""

    grid: Grid
    eta: np.ndarray
    vel: tuple[np.ndarray, ...]
    time: float = 0.0

    def __post_init__(self) -> None:
        vel = tuple(np.asarray(v) for v in self.vel)
        object.__setattr__(self, "vel", vel)
        object.__setattr__(self, "eta", np.asarray(self.eta))
        if len(vel) != self.grid.dim:
            raise InvalidFieldError(f"{len(vel)} velocity components on a {self.grid.dim}D grid")
        for arr in (self.eta, *vel):
            if arr.shape != self.grid.shape:
                raise InvalidFieldError("state component does not match grid")

    def stack(self) -> np.ndarray:
        return np.stack((self.eta, *self.vel))

    @classmethod
    def from_stack(cls, grid: Grid, arr: np.ndarray, time: float = 0.0) -> "State":
        return cls(grid, arr[0], tuple(arr[1:]), time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.stack())))

    @property
    def eta_field(self) -> Field:
        return Field(self.grid, self.eta)

    @property
    def vel_fields(self) -> tuple[Field, ...]:
        return tuple(Field(self.grid, v) for v in self.vel)


@dataclass(frozen=True, eq=False)
class BathymetryProfile:
    beta_field: Field

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.beta_field.values)))


class SpectralSystem:
    """Explicit ODE ``U_t = L U + N(U)`` on stacked spectra of shape ``(m, *grid.shape)``."""

    n_fields: int
    real_fields: bool = True

    def __init__(self, grid: Grid, dealias: bool = True, nonlinear: bool = True):
        self.grid = grid
        self.dealias = dealias
        self.nonlinear = nonlinear

    def build_linear_symbol(self) -> np.ndarray:
        raise NotImplementedError

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def linear_symbol(self) -> np.ndarray:
        L = np.asarray(self.build_linear_symbol(), dtype=complex)
        L.flags.writeable = False
        return L

    @cached_property
    def linear_symbol_sq(self) -> np.ndarray:
        return np.einsum("ij...,jk...->ik...", self.linear_symbol, self.linear_symbol)

    @cached_property
    def s2(self) -> np.ndarray:
        """Per-mode scalar with ``L^3 = s2 L``: half the trace of ``L^2``."""
        return 0.5 * np.real(np.einsum("ii...->...", self.linear_symbol_sq))

    def frequency(self) -> np.ndarray:
        """Linear angular frequency per mode (imaginary part of the eigenvalues)."""
        return np.sqrt(np.maximum(-self.s2, 0.0))

    def linear_hat(self, uh: np.ndarray) -> np.ndarray:
        return np.einsum("ij...,j...->i...", self.linear_symbol, uh)

    def nonlinear_hat(self, uh: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros_like(uh)
        return self.nonlinear_terms(uh)

    def rhs_hat(self, uh: np.ndarray) -> np.ndarray:
        return self.linear_hat(uh) + self.nonlinear_hat(uh)

    # helpers shared by subclasses
    def to_hat(self, arrays: np.ndarray) -> np.ndarray:
        return self.grid.fft(np.asarray(arrays))

    def from_hat(self, uh: np.ndarray) -> np.ndarray:
        return self.grid.ifft(uh, real=self.real_fields)

    def phys(self, fh: np.ndarray) -> np.ndarray:
        return self.grid.ifft(fh, real=self.real_fields)

    def proj(self, values: np.ndarray) -> np.ndarray:
        """Spectrum of a pointwise product, 2/3-truncated when dealiasing is on."""
        spec = self.grid.fft(values)
        if self.dealias:
            spec = np.where(self.grid.dealias_mask, spec, 0.0)
        return spec


def _velocity_stack(grid: Grid, eta_row: Sequence[np.ndarray], vel_rows: Sequence[np.ndarray]) -> np.ndarray:
    m = 1 + grid.dim
    L = np.zeros((m, m) + grid.shape, dtype=complex)
    for j in range(grid.dim):
        L[0, 1 + j] = eta_row[j]
        L[1 + j, 0] = vel_rows[j]
    return L


class AbcdSystem(SpectralSystem):
    """The (a,b,c,d) system in 1D or 2D, optionally with slowly varying bathymetry."""

    def __init__(self, p: CaseParams, grid: Grid, beta: BathymetryProfile | None = None,
                 dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        _require_well_posed(p)
        if beta is not None and beta.beta_field.grid != grid:
            raise InvalidFieldError("bathymetry grid mismatch")
        self.p = p
        self.beta = beta
        self.n_fields = 1 + grid.dim
        eps, g = p.eps, grid
        self.hb = 1.0 / (1.0 + p.b * eps * g.ksq)
        self.hd = 1.0 / (1.0 + p.d * eps * g.ksq)

    def build_linear_symbol(self) -> np.ndarray:
        p, g = self.p, self.grid
        a_part = -self.hb * (1.0 - p.a * p.eps * g.ksq)
        c_part = -self.hd * (1.0 - p.c * p.eps * g.ksq)
        return _velocity_stack(g, [a_part * ikj for ikj in g.ik], [c_part * ikj for ikj in g.ik])

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        g, eps = self.grid, self.p.eps
        eta = self.phys(uh[0])
        vel = [self.phys(uh[1 + j]) for j in range(g.dim)]
        if self.beta is not None:
            eta = eta - self.beta.beta_field.values
        out = np.empty_like(uh)
        out[0] = -eps * self.hb * sum(g.ik[j] * self.proj(eta * vel[j]) for j in range(g.dim))
        kinetic = self.proj(0.5 * sum(v * v for v in vel))
        for j in range(g.dim):
            out[1 + j] = -eps * self.hd * g.ik[j] * kinetic
        return out


def _require_well_posed(p: CaseParams) -> None:
    _, posed = _abcd_violations(p)
    if posed:
        raise IllPosedError(posed)


class FifthOrderSystem(SpectralSystem):
    """Fifth-order Boussinesq system (1D) with fourth-order mass operators."""

    def __init__(self, p: CaseParams, grid: Grid, dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        if grid.dim != 1:
            raise ParameterError("the fifth-order system is one-dimensional")
        if p.family != "fifth_order":
            raise ParameterError("fifth-order system needs family='fifth_order' parameters")
        self.p = p
        self.n_fields = 2
        e, k2 = p.eps, grid.ksq
        self.mb = 1.0 + p.b * e * k2 + p.b1 * e**2 * k2**2
        self.md = 1.0 + p.d * e * k2 + p.d1 * e**2 * k2**2

    def build_linear_symbol(self) -> np.ndarray:
        p, e, k2, ik = self.p, self.p.eps, self.grid.ksq, self.grid.ik[0]
        top = -ik * (1.0 - p.a * e * k2 + p.a1 * e**2 * k2**2) / self.mb
        bottom = -ik * (1.0 - p.c * e * k2 + p.c1 * e**2 * k2**2) / self.md
        return _velocity_stack(self.grid, [top], [bottom])

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        p, e, k2, ik = self.p, self.p.eps, self.grid.ksq, self.grid.ik[0]
        eta, u = self.phys(uh[0]), self.phys(uh[1])
        u_x, u_xx, u_xxx = (self.phys(ik**n * uh[1]) for n in (1, 2, 3))
        eta_xx = self.phys(ik**2 * uh[0])
        out = np.empty_like(uh)
        out[0] = -(
            e * (1.0 + p.b * e * k2) * ik * self.proj(eta * u)
            + (p.a + p.b - 1.0 / 3.0) * e**2 * ik * self.proj(eta * u_xx)
        ) / self.mb
        out[1] = -(
            e * (1.0 - p.c * e * k2) * ik * self.proj(0.5 * u * u)
            + e**2 * ik * self.proj(eta * eta_xx)
            - (p.c + p.d - 1.0) * e**2 * self.proj(u_x * u_xx)
            - (p.c + p.d) * e**2 * self.proj(u * u_xxx)
        ) / self.md
        return out


class FullDispersionSystem(SpectralSystem):
    """Full-dispersion system with ``T_eps`` (or capillary ``P_eps``) on the velocity divergence."""

    def __init__(self, p: CaseParams, grid: Grid, with_surface_tension: bool = False,
                 dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        self.p = p
        self.n_fields = 1 + grid.dim
        op = p_eps(p.eps, p.beta_fd) if with_surface_tension else t_eps(p.eps)
        self.dispersion = np.real(op.on(grid))

    def build_linear_symbol(self) -> np.ndarray:
        g = self.grid
        return _velocity_stack(g, [-self.dispersion * ikj for ikj in g.ik], [-ikj for ikj in g.ik])

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        return _transport_nonlinearity(self, uh, self.p.eps)


def _transport_nonlinearity(system: SpectralSystem, uh: np.ndarray, eps: float) -> np.ndarray:
    g = system.grid
    eta = system.phys(uh[0])
    vel = [system.phys(uh[1 + j]) for j in range(g.dim)]
    out = np.empty_like(uh)
    out[0] = -eps * sum(g.ik[j] * system.proj(eta * vel[j]) for j in range(g.dim))
    kinetic = system.proj(0.5 * sum(v * v for v in vel))
    for j in range(g.dim):
        out[1 + j] = -eps * g.ik[j] * kinetic
    return out


class KaupSystem(SpectralSystem):
    """Kaup system; linearly ill-posed for ``xi^2 > 3/eps``, hence the resolution gate."""

    def __init__(self, p: CaseParams, grid: Grid, allow_ill_posed: bool = False,
                 dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        if grid.dim != 1:
            raise ParameterError("the Kaup system is one-dimensional")
        if grid.k_nyquist**2 > 3.0 / p.eps and not allow_ill_posed:
            raise ResolutionError(
                f"Nyquist^2 = {grid.k_nyquist**2:.6g} exceeds 3/eps = {3.0 / p.eps:.6g}; "
                "pass allow_ill_posed=True to override"
            )
        self.p = p
        self.n_fields = 2

    def build_linear_symbol(self) -> np.ndarray:
        ik, k2 = self.grid.ik[0], self.grid.ksq
        return _velocity_stack(self.grid, [-ik * (1.0 - self.p.eps * k2 / 3.0)], [-ik])

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        return _transport_nonlinearity(self, uh, self.p.eps)


def _evaluate(system: SpectralSystem, s: State) -> State:
    if not s.is_finite():
        raise InvalidFieldError("non-finite state")
    uh = system.to_hat(s.stack())
    return State.from_stack(s.grid, system.from_hat(system.rhs_hat(uh)), s.time)


def make_system(p: CaseParams, grid: Grid, **kwargs) -> SpectralSystem:
    """System object for ``p.family`` (bathymetry needs ``beta=``)."""
    if p.family in ("abcd", "bathymetry"):
        return AbcdSystem(p, grid, **kwargs)
    if p.family == "fifth_order":
        return FifthOrderSystem(p, grid, **kwargs)
    if p.family == "full_dispersion":
        return FullDispersionSystem(p, grid, **kwargs)
    return KaupSystem(p, grid, **kwargs)


def rhs_abcd_1d(p: CaseParams, s: State, nonlinear: bool = True, dealias: bool = True) -> State:
    if s.grid.dim != 1:
        raise ParameterError("rhs_abcd_1d needs a 1D state")
    return _evaluate(AbcdSystem(p, s.grid, nonlinear=nonlinear, dealias=dealias), s)


def rhs_abcd_2d(p: CaseParams, s: State, nonlinear: bool = True, dealias: bool = True) -> State:
    if s.grid.dim != 2:
        raise ParameterError("rhs_abcd_2d needs a 2D state")
    return _evaluate(AbcdSystem(p, s.grid, nonlinear=nonlinear, dealias=dealias), s)


def rhs_bathymetry(p: CaseParams, beta: BathymetryProfile, s: State, nonlinear: bool = True) -> State:
    return _evaluate(AbcdSystem(p, s.grid, beta=beta, nonlinear=nonlinear), s)


def rhs_fifth_order(p: CaseParams, s: State, nonlinear: bool = True) -> State:
    return _evaluate(FifthOrderSystem(p, s.grid, nonlinear=nonlinear), s)


def rhs_full_dispersion(p: CaseParams, s: State, with_surface_tension: bool = False,
                        nonlinear: bool = True) -> State:
    return _evaluate(FullDispersionSystem(p, s.grid, with_surface_tension, nonlinear=nonlinear), s)


def rhs_kaup(p: CaseParams, s: State, allow_ill_posed: bool = False, nonlinear: bool = True) -> State:
    return _evaluate(KaupSystem(p, s.grid, allow_ill_posed, nonlinear=nonlinear), s)
