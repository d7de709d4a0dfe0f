"""Changes of unknowns: diagonalized forms, the ``(eta, v)`` reduction, tilde-eta, projections.

Diagonalized variables come with their own :class:`SpectralSystem` so they can be
evolved directly.  In 2D the eigen-variables ``v1, v2`` are complex, so those
systems set ``real_fields = False``.

Time-derivative bundles (:class:`DerivativeBundle`) hold ``eta, eta_t, eta_tt, ...``
and the matching velocity levels; they feed the quasilinear residual and the
quasilinear energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral_ops import (
    Field,
    Grid,
    InvalidFieldError,
    ParameterError,
    div,
    grad,
    lap,
    spectral_derivative,
)
from .systems import (
    AbcdSystem,
    CaseParams,
    SpectralSystem,
    State,
    require_noncavitating,
)


class CaseMismatchError(ValueError):
    """Transform applied outside the case or dimension it is defined for."""


class StencilError(ValueError):
    """Snapshot count does not match the requested finite-difference stencil."""


def _j(grid: Grid, eps: float) -> np.ndarray:
    return np.sqrt(1.0 + eps * grid.ksq)


def _apply(grid: Grid, symbol: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = grid.ifft(symbol * grid.fft(values), real=False)
    return out.real if not np.iscomplexobj(values) and np.isrealobj(symbol) else out


def _riesz(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    r = grid.kabs
    safe = np.where(r > 0, r, 1.0)
    return tuple(np.where(r > 0, 1j * kj / safe, 0.0) for kj in grid.k)


def _require_dim(grid: Grid, dim: int, what: str) -> None:
    if grid.dim != dim:
        raise CaseMismatchError(f"{what} needs a {dim}D grid, got {grid.dim}D")


# --------------------------------------------------------------------------- 1D diagonal forms


def _case_state(s: State) -> None:
    if not s.is_finite():
        raise InvalidFieldError("non-finite state")


def diagonalize_a_neg_1d(s: State, eps: float) -> tuple[Field, Field]:
    """``zeta = (eta + J u)/2``, ``v = (eta - J u)/2`` for ``a = -1, b = c = d = 0``."""
    _require_dim(s.grid, 1, "diagonalize_a_neg_1d")
    _case_state(s)
    ju = _apply(s.grid, _j(s.grid, eps), s.vel[0])
    return Field(s.grid, 0.5 * (s.eta + ju)), Field(s.grid, 0.5 * (s.eta - ju))


def undiagonalize_a_neg_1d(zeta: Field, v: Field, eps: float, time: float = 0.0) -> State:
    g = zeta.grid
    _require_dim(g, 1, "undiagonalize_a_neg_1d")
    eta = zeta.values + v.values
    u = _apply(g, 1.0 / _j(g, eps), zeta.values - v.values)
    return State(g, eta, (u,), time)


def diagonalize_c_neg_1d(s: State, eps: float) -> tuple[Field, Field]:
    """``zeta = (J eta + u)/2``, ``v = (-J eta + u)/2`` for ``c = -1, a = b = d = 0``."""
    _require_dim(s.grid, 1, "diagonalize_c_neg_1d")
    _case_state(s)
    jeta = _apply(s.grid, _j(s.grid, eps), s.eta)
    return Field(s.grid, 0.5 * (jeta + s.vel[0])), Field(s.grid, 0.5 * (-jeta + s.vel[0]))


def undiagonalize_c_neg_1d(zeta: Field, v: Field, eps: float, time: float = 0.0) -> State:
    g = zeta.grid
    _require_dim(g, 1, "undiagonalize_c_neg_1d")
    eta = _apply(g, 1.0 / _j(g, eps), zeta.values - v.values)
    return State(g, eta, (zeta.values + v.values,), time)


class Diagonal1DSystem(SpectralSystem):
    """``zeta_t + J d_x zeta + (eps/2) N1 = 0``, ``v_t - J d_x v + (eps/2) N2 = 0``."""

    def __init__(self, eps: float, grid: Grid, which: str, dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        _require_dim(grid, 1, "Diagonal1DSystem")
        if which not in ("a_neg", "c_neg"):
            raise CaseMismatchError(f"unknown diagonal case {which!r}")
        self.eps, self.which, self.n_fields = eps, which, 2
        self.jsym = _j(grid, eps)

    def build_linear_symbol(self) -> np.ndarray:
        ikj = self.grid.ik[0] * self.jsym
        L = np.zeros((2, 2) + self.grid.shape, dtype=complex)
        L[0, 0], L[1, 1] = -ikj, ikj
        return L

    def nonlinear_terms(self, wh: np.ndarray) -> np.ndarray:
        g, ik, J = self.grid, self.grid.ik[0], self.jsym
        diff, total = wh[0] - wh[1], wh[0] + wh[1]
        if self.which == "a_neg":
            eta, u = self.phys(total), self.phys(diff / J)
            u_x = self.phys(ik * diff / J)
            flux = ik * self.proj(eta * u)
            transport = J * self.proj(u * u_x)
            n1, n2 = flux + transport, flux - transport
        else:
            eta, u = self.phys(diff / J), self.phys(total)
            u_x = self.phys(ik * total)
            flux = ik * J * self.proj(u * eta)
            transport = self.proj(u * u_x)
            n1, n2 = flux + transport, -flux + transport
        return -0.5 * self.eps * np.stack((n1, n2))


def rhs_diag_a_neg_1d(zeta: Field, v: Field, eps: float) -> tuple[Field, Field]:
    return _diag_rhs(Diagonal1DSystem(eps, zeta.grid, "a_neg"), (zeta, v))


def rhs_diag_c_neg_1d(zeta: Field, v: Field, eps: float) -> tuple[Field, Field]:
    return _diag_rhs(Diagonal1DSystem(eps, zeta.grid, "c_neg"), (zeta, v))


def _diag_rhs(system: SpectralSystem, fields: Sequence[Field]) -> tuple[Field, ...]:
    wh = system.to_hat(np.stack([f.values for f in fields]))
    out = system.from_hat(system.rhs_hat(wh))
    return tuple(Field(system.grid, row) for row in out)


# --------------------------------------------------------------------------- 2D diagonal forms


def _matrices_2d(grid: Grid, eps: float, which: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode ``(P, P^-1)`` mapping ``(zeta, v1, v2) <-> (eta, u1, u2)``."""
    if which not in ("a_neg", "c_neg"):
        raise CaseMismatchError(f"unknown diagonal case {which!r}")
    J = _j(grid, eps)
    r1, r2 = _riesz(grid)
    zero = np.zeros(grid.shape, dtype=complex)
    one = np.ones(grid.shape, dtype=complex)
    if which == "a_neg":
        p = [[zero, 1j * one, -1j * one],
             [-r2 / J, r1 / J, r1 / J],
             [r1 / J, r2 / J, r2 / J]]
        pinv = [[zero, r2 * J, -r1 * J],
                [-0.5j * one, -0.5 * r1 * J, -0.5 * r2 * J],
                [0.5j * one, -0.5 * r1 * J, -0.5 * r2 * J]]
    else:
        p = [[zero, 1j / J, -1j / J],
             [-r2, r1, r1],
             [r1, r2, r2]]
        pinv = [[zero, r2, -r1],
                [-0.5j * J, -0.5 * r1, -0.5 * r2],
                [0.5j * J, -0.5 * r1, -0.5 * r2]]
    return np.array(p), np.array(pinv)


def _matvec(m: np.ndarray, xh: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,j...->i...", m, xh)


def diagonalize_2d(s: State, eps: float, which: str) -> tuple[Field, Field, Field]:
    """Eigen-variables ``(zeta, v1, v2)``; ``zeta`` carries the vorticity."""
    _require_dim(s.grid, 2, "diagonalize_2d")
    _case_state(s)
    _, pinv = _matrices_2d(s.grid, eps, which)
    w = s.grid.ifft(_matvec(pinv, s.grid.fft(s.stack())), real=False)
    return tuple(Field(s.grid, row) for row in w)


def undiagonalize_2d(zeta: Field, v1: Field, v2: Field, eps: float, which: str, time: float = 0.0) -> State:
    g = zeta.grid
    _require_dim(g, 2, "undiagonalize_2d")
    p, _ = _matrices_2d(g, eps, which)
    w = np.stack((zeta.values, v1.values, v2.values)).astype(complex)
    u = g.ifft(_matvec(p, g.fft(w)), real=True)
    return State.from_stack(g, u, time)


class Diagonal2DSystem(SpectralSystem):
    """``W_t = -D W - eps P^-1 N(P W)`` with ``D = diag(0, i|xi|J, -i|xi|J)``."""

    real_fields = False

    def __init__(self, eps: float, grid: Grid, which: str, dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        _require_dim(grid, 2, "Diagonal2DSystem")
        self.eps, self.which, self.n_fields = eps, which, 3
        self.p, self.pinv = _matrices_2d(grid, eps, which)

    def build_linear_symbol(self) -> np.ndarray:
        omega = self.grid.kabs * _j(self.grid, self.eps)
        L = np.zeros((3, 3) + self.grid.shape, dtype=complex)
        L[1, 1], L[2, 2] = -1j * omega, 1j * omega
        return L

    def nonlinear_terms(self, wh: np.ndarray) -> np.ndarray:
        g = self.grid
        uh = _matvec(self.p, wh)
        eta, u1, u2 = (self.phys(row) for row in uh)
        n = np.empty_like(uh)
        n[0] = g.ik[0] * self.proj(eta * u1) + g.ik[1] * self.proj(eta * u2)
        kinetic = self.proj(0.5 * (u1 * u1 + u2 * u2))
        n[1], n[2] = g.ik[0] * kinetic, g.ik[1] * kinetic
        return -self.eps * _matvec(self.pinv, n)


def rhs_diag_2d(zeta: Field, v1: Field, v2: Field, eps: float, which: str) -> tuple[Field, Field, Field]:
    return _diag_rhs(Diagonal2DSystem(eps, zeta.grid, which), (zeta, v1, v2))


def pushforward_rhs(p: CaseParams, w: Sequence[Field], which: str) -> tuple[Field, ...]:
    """``P^-1 rhs(P W)`` through the original (eta, u) system: the oracle for diagonal forms."""
    g = w[0].grid
    system = AbcdSystem(p, g)
    if g.dim == 1:
        undo = undiagonalize_a_neg_1d if which == "a_neg" else undiagonalize_c_neg_1d
        redo = diagonalize_a_neg_1d if which == "a_neg" else diagonalize_c_neg_1d
        s = undo(w[0], w[1], p.eps)
        ds = State.from_stack(g, system.from_hat(system.rhs_hat(system.to_hat(s.stack()))))
        return redo(ds, p.eps)
    p_mat, pinv = _matrices_2d(g, p.eps, which)
    wh = g.fft(np.stack([f.values for f in w]).astype(complex))
    uh = _matvec(p_mat, wh)
    u = g.ifft(uh, real=True)
    rh = system.rhs_hat(g.fft(u))
    return tuple(Field(g, row) for row in g.ifft(_matvec(pinv, rh), real=False))


# --------------------------------------------------------------------------- (eta, v) reduction


def to_v_variable(s: State, eps: float) -> State:
    """``v = (1 + eps*eta) u`` pointwise."""
    q = require_noncavitating(s.eta, eps)
    return State(s.grid, s.eta, tuple(q * u for u in s.vel), s.time)


def from_v_variable(s: State, eps: float) -> State:
    q = require_noncavitating(s.eta, eps)
    return State(s.grid, s.eta, tuple(v / q for v in s.vel), s.time)


class EtaVSystem(SpectralSystem):
    """``eta_t = -div v``, ``v_t = -q(grad eta - eps grad Lap eta) - eps div(v (x) v / q)``, ``q = 1 + eps*eta``."""

    def __init__(self, eps: float, grid: Grid, dealias: bool = True, nonlinear: bool = True):
        super().__init__(grid, dealias, nonlinear)
        self.eps, self.n_fields = eps, 1 + grid.dim

    def build_linear_symbol(self) -> np.ndarray:
        g = self.grid
        L = np.zeros((self.n_fields, self.n_fields) + g.shape, dtype=complex)
        for j in range(g.dim):
            L[0, 1 + j] = -g.ik[j]
            L[1 + j, 0] = -g.ik[j] * (1.0 + self.eps * g.ksq)
        return L

    def nonlinear_terms(self, uh: np.ndarray) -> np.ndarray:
        g, eps = self.grid, self.eps
        eta = self.phys(uh[0])
        q = require_noncavitating(eta, eps)
        vel = [self.phys(uh[1 + j]) for j in range(g.dim)]
        dispersive = (1.0 + eps * g.ksq) * uh[0]
        out = np.zeros_like(uh)
        for i in range(g.dim):
            slope = self.phys(g.ik[i] * dispersive)
            flux = sum(g.ik[j] * self.proj(vel[i] * vel[j] / q) for j in range(g.dim))
            out[1 + i] = -eps * self.proj(eta * slope) - eps * flux
        return out


def _eta_v_rhs(eta: np.ndarray, vel: Sequence[np.ndarray], eps: float, grid: Grid) -> State:
    system = EtaVSystem(eps, grid)
    s = State(grid, eta, tuple(vel))
    _case_state(s)
    return State.from_stack(grid, system.from_hat(system.rhs_hat(system.to_hat(s.stack()))))


def rhs_eta_v_1d(eta: Field, v: Field, eps: float) -> State:
    _require_dim(eta.grid, 1, "rhs_eta_v_1d")
    return _eta_v_rhs(eta.values, (v.values,), eps, eta.grid)


def rhs_eta_v_2d(eta: Field, v: Sequence[Field], eps: float) -> State:
    _require_dim(eta.grid, 2, "rhs_eta_v_2d")
    return _eta_v_rhs(eta.values, tuple(f.values for f in v), eps, eta.grid)


# --------------------------------------------------------------------------- derivative bundles


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """``eta[k]`` and ``v[k]`` are the k-th time derivatives; ``v[k]`` has shape ``(dim, *grid.shape)``."""

    grid: Grid
    eta: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.eta) != len(self.v) or not self.eta:
            raise StencilError("eta and v bundles must have the same non-zero depth")
        for e, w in zip(self.eta, self.v):
            if e.shape != self.grid.shape or w.shape != (self.grid.dim,) + self.grid.shape:
                raise InvalidFieldError("bundle level does not match grid")

    @property
    def order(self) -> int:
        return len(self.eta) - 1

    def require(self, order: int) -> None:
        if self.order < order:
            raise StencilError(f"bundle carries {self.order} time derivatives, {order} needed")


def _binom(n: int, k: int) -> int:
    return math.comb(n, k)


def nested_bundle(grid: Grid, eta: np.ndarray, v: np.ndarray, eps: float, order: int = 2) -> DerivativeBundle:
    """Exact time derivatives of an ``(eta, v)`` state obtained by differentiating the system.

    Products are formed pointwise without truncation, so the result is the
    analytic derivative of the trigonometric interpolant.
    """
    v = np.asarray(v, dtype=float).reshape((grid.dim,) + grid.shape)
    q = require_noncavitating(eta, eps)
    etas, vs, ws = [np.asarray(eta, dtype=float)], [v], [1.0 / q]

    def g_of(e: np.ndarray) -> np.ndarray:
        return grad(grid, e - eps * lap(grid, e))

    for n in range(order):
        etas.append(-div(grid, vs[n]))
        qk = [q if k == 0 else eps * etas[k] for k in range(n + 1)]
        # (1/q)^(k) from differentiating q * (1/q) = 1
        while len(ws) < n + 1:
            k = len(ws)
            ws.append(-sum(_binom(k, m) * eps * etas[m] * ws[k - m] for m in range(1, k + 1)) / q)
        pressure = sum(_binom(n, k) * qk[k] * g_of(etas[n - k]) for k in range(n + 1))
        tensor = np.zeros((grid.dim, grid.dim) + grid.shape)
        for k1 in range(n + 1):
            for k2 in range(n + 1 - k1):
                k3 = n - k1 - k2
                coef = math.factorial(n) // (math.factorial(k1) * math.factorial(k2) * math.factorial(k3))
                tensor += coef * np.einsum("i...,j...->ij...", vs[k1], vs[k2]) * ws[k3]
        flux = np.stack([div(grid, tensor[i]) for i in range(grid.dim)])
        vs.append(-pressure - eps * flux)
    return DerivativeBundle(grid, tuple(etas), tuple(vs))


_STENCILS = {
    # snapshots -> (first, second, third) derivative weights, centered
    3: ((np.array([-0.5, 0.0, 0.5]), 1), (np.array([1.0, -2.0, 1.0]), 2), None),
    5: (
        (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 1),
        (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
        (np.array([-0.5, 1.0, 0.0, -1.0, 0.5]), 3),
    ),
}
STENCIL_SNAPSHOTS = {2: 3, 4: 5}


def stencil_bundle(grid: Grid, eta_snaps: Sequence[np.ndarray], v_snaps: Sequence[np.ndarray],
                   dt: float, stencil_order: int = 2) -> DerivativeBundle:
    """Central-difference bundle at the middle snapshot (order 2: 3 snapshots, order 4: 5)."""
    if stencil_order not in STENCIL_SNAPSHOTS:
        raise StencilError(f"stencil order must be 2 or 4, got {stencil_order}")
    need = STENCIL_SNAPSHOTS[stencil_order]
    if len(eta_snaps) != need or len(v_snaps) != need:
        raise StencilError(f"order-{stencil_order} stencil needs {need} snapshots, got {len(eta_snaps)}")
    if not dt > 0:
        raise StencilError("dt must be positive")
    e = np.stack([np.asarray(x, dtype=float) for x in eta_snaps])
    w = np.stack([np.asarray(x, dtype=float).reshape((grid.dim,) + grid.shape) for x in v_snaps])
    mid = need // 2
    etas, vs = [e[mid]], [w[mid]]
    for entry in _STENCILS[need]:
        if entry is None:
            break
        weights, power = entry
        etas.append(np.tensordot(weights, e, axes=1) / dt**power)
        vs.append(np.tensordot(weights, w, axes=1) / dt**power)
    return DerivativeBundle(grid, tuple(etas), tuple(vs))


# --------------------------------------------------------------------------- quasilinear residual


def quasilinear_residual(bundle: DerivativeBundle, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals ``(res_f, res_g)`` of the second-order-in-time form of the 1D ``(eta, v)`` system."""
    g = bundle.grid
    _require_dim(g, 1, "quasilinear_residual")
    bundle.require(2)
    eta, eta_t, eta_tt = bundle.eta[:3]
    v, v_t, v_tt = (x[0] for x in bundle.v[:3])
    q = require_noncavitating(eta, eps)

    def d(f: np.ndarray, n: int = 1) -> np.ndarray:
        return spectral_derivative(g, f, 1, n)

    eta_x, eta_xxx = d(eta), d(eta, 3)
    v_x = d(v)
    f = (2 * eps * v_x**2 / q
         - 2 * eps**2 * v * v_x * eta_x / q**2
         - eps**2 * d(eta_x * v**2 / q**2))
    res_f = (eta_tt - d(q * eta_x) + eps * d(q * eta_xxx)
             + (2 * eps * v / q) * d(eta_t) - f)
    gsrc = (-(eps * eta_t / q) * (eta_x - eps * eta_xxx)
            - 2 * eps * v_x * v_t / q**2
            + (eps**2 / q) * d(v**2 * eta_t / q**2))
    res_g = (v_tt / q - d(v, 2) + eps * d(v, 4)
             + (2 * eps * v / q) * d(v_t / q) - gsrc)
    return res_f, res_g


@dataclass(frozen=True)
class TransferReport:
    mass_residual: float
    space_residual: float
    energy_ratio: float | None


def regularity_transfer_check(bundle: DerivativeBundle, eps: float) -> TransferReport:
    """Sup norms of ``div v + eta_t`` and ``(1 - eps Lap) grad eta + v_t/q + (eps/q) div(v (x) v / q)``."""
    g = bundle.grid
    bundle.require(1)
    eta, eta_t = bundle.eta[:2]
    v, v_t = bundle.v[:2]
    q = require_noncavitating(eta, eps)
    mass = div(g, v) + eta_t
    space = grad(g, eta - eps * lap(g, eta)) + v_t / q
    for i in range(g.dim):
        space[i] += (eps / q) * sum(spectral_derivative(g, v[i] * v[j] / q, j + 1) for j in range(g.dim))
    ratio = None
    if bundle.order >= g.dim + 1 and any(np.any(x) for x in bundle.eta + bundle.v):
        from .diagnostics import energy_quasilinear

        e_val, total = energy_quasilinear(bundle, eps)
        ratio = total / e_val if e_val > 0 else None
    return TransferReport(float(np.max(np.abs(mass))), float(np.max(np.abs(space))), ratio)


# --------------------------------------------------------------------------- tilde-eta


def tilde_eta_transform(s: State, eps: float) -> State:
    """``eta~ = (1 - eps Lap) eta``, velocity unchanged."""
    return State(s.grid, s.eta - eps * lap(s.grid, s.eta), s.vel, s.time)


def inverse_tilde_eta_transform(s: State, eps: float) -> State:
    eta = s.grid.ifft(s.grid.fft(s.eta) / (1.0 + eps * s.grid.ksq))
    return State(s.grid, eta, s.vel, s.time)


def tilde_eta_remainder(s_tilde: State, eps: float) -> np.ndarray:
    """The order-``eps**2`` source of the eta~ equation, evaluated on ``eta = J^-2 eta~``."""
    g = s_tilde.grid
    eta = inverse_tilde_eta_transform(s_tilde, eps).eta
    u = np.stack(s_tilde.vel)
    if g.dim == 1:
        d = lambda f, n=1: spectral_derivative(g, f, 1, n)  # noqa: E731
        u0 = u[0]
        return eps**2 * (2 * d(eta, 2) * d(u0) + 3 * d(eta) * d(u0, 2) + eta * d(u0, 3))
    return eps**2 * (lap(g, div(g, eta * u)) - div(g, u * lap(g, eta)))


def rhs_tilde_eta(s_tilde: State, eps: float, remainder: bool = True) -> State:
    """Time derivative of ``(eta~, u)`` for the ``c = -1`` system written in tilde variables.

    ``eta~_t = -(1 - eps Lap) div u - eps div(eta~ u) + R``, ``u_t = -grad eta~ - eps grad |u|^2/2``.
    """
    g = s_tilde.grid
    _case_state(s_tilde)

    def trunc(values: np.ndarray) -> np.ndarray:
        return g.ifft(np.where(g.dealias_mask, g.fft(values), 0.0))

    u = np.stack(s_tilde.vel)
    eta_t = -div(g, u - eps * np.stack([lap(g, c) for c in u])) - eps * div(g, np.stack([trunc(s_tilde.eta * c) for c in u]))
    if remainder:
        eta_t = eta_t + tilde_eta_remainder(s_tilde, eps)
    u_t = -grad(g, s_tilde.eta) - eps * grad(g, trunc(0.5 * np.sum(u * u, axis=0)))
    return State(g, eta_t, tuple(u_t), s_tilde.time)


# --------------------------------------------------------------------------- projection


def curl_free_projection(u: Sequence[Field]) -> tuple[Field, Field]:
    """Gradient part ``xi (xi . u^) / |xi|^2`` of a planar field; the mean is kept.

    The wavenumber of an axis is taken as zero at its Nyquist index, where an odd
    symbol has no real meaning; modes with vanishing effective wavenumber other
    than the mean are dropped.  This keeps the projector real and idempotent.
    """
    g = u[0].grid
    if g.dim != 2 or len(u) != 2:
        raise ParameterError("curl_free_projection needs a 2D vector field")
    uh = [f.spectrum for f in u]
    keff = [np.where(np.abs(kj) >= g.k_nyquist * (1 - 1e-12), 0.0, kj) for kj in g.k]
    ksq = keff[0] ** 2 + keff[1] ** 2
    mean = g.ksq == 0
    safe = np.where(ksq > 0, ksq, 1.0)
    dot = (keff[0] * uh[0] + keff[1] * uh[1]) / safe
    out = []
    for j in range(2):
        proj = np.where(mean, uh[j], np.where(ksq > 0, keff[j] * dot, 0.0))
        out.append(Field.from_spectrum(g, proj, real=u[j].is_real))
    return out[0], out[1]
