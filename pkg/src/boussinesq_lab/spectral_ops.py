"""Periodic grids, discrete Fourier transforms and Fourier-multiplier operators.

Every operator in the package is a :class:`MultiplierOp`: a symbol ``m(xi)``
evaluated on the signed FFT wavenumber table of a :class:`Grid` and applied
mode by mode.  Transforms are unnormalized ``numpy.fft`` transforms; norms
use the matching Parseval weight ``L**dim / n**(2*dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

Symbol = Callable[[tuple[np.ndarray, ...]], np.ndarray]


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidFieldError(ValueError):
    """A field contains non-finite values or does not match its grid."""


class SymbolDomainError(ValueError):
    """A multiplier symbol is undefined at a resolved wavenumber."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, length)**dim`` with ``n`` points per axis."""

    dim: int
    n: int
    length: float = 2.0 * math.pi

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ParameterError(f"n must be even and >= 8, got {self.n}")
        if self.n & (self.n - 1):
            raise ParameterError(f"n must be a power of two, got {self.n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ParameterError(f"length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def parseval_weight(self) -> float:
        """Factor turning ``sum |fft(f)|**2`` into ``integral |f|**2``."""
        return self.length**self.dim / float(self.n) ** (2 * self.dim)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Signed per-axis table ``2*pi*j/L`` in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.length / self.n)

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        axis = np.arange(self.n) * self.dx
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def ik(self) -> tuple[np.ndarray, ...]:
        return tuple(1j * kj for kj in self.k)

    @cached_property
    def ksq(self) -> np.ndarray:
        return sum(kj**2 for kj in self.k)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.ksq)

    @cached_property
    def k_nyquist(self) -> float:
        return np.pi * self.n / self.length

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule (per axis)."""
        cut = (2.0 / 3.0) * self.k_nyquist
        keep = np.ones(self.shape, dtype=bool)
        for kj in self.k:
            keep &= np.abs(kj) <= cut * (1 + 1e-12)
        return keep

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes that touch the Nyquist index on some axis."""
        hit = np.zeros(self.shape, dtype=bool)
        nyq = self.n // 2
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = nyq
            hit[tuple(index)] = True
        return hit

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=tuple(range(-self.dim, 0)))

    def ifft(self, spectrum: np.ndarray, real: bool = True) -> np.ndarray:
        out = np.fft.ifftn(spectrum, axes=tuple(range(-self.dim, 0)))
        return out.real if real else out

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid rule, exact for trigonometric polynomials below the grid limit."""
        return float(np.sum(values) * self.cell_volume)


@dataclass(frozen=True, eq=False)
class Field:
    """A scalar field sampled on a grid; ``spectrum`` is computed lazily."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            raise InvalidFieldError(f"shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @cached_property
    def spectrum(self) -> np.ndarray:
        return self.grid.fft(self.values)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray, real: bool = True) -> "Field":
        return cls(grid, grid.ifft(spectrum, real=real))


@dataclass(frozen=True)
class MultiplierOp:
    """Fourier multiplier ``(Op f)^(xi) = m(xi) f^(xi)``.

    ``symbol`` receives the tuple of per-axis wavenumber arrays.  Set
    ``real_to_real`` when ``m(-xi) = conj(m(xi))`` so outputs are kept real.
    """

    name: str
    symbol: Symbol
    real_to_real: bool = True
    params: tuple = field(default=())

    def on(self, grid: Grid) -> np.ndarray:
        return _symbol_on_grid(self, grid)

    def __call__(self, f: Field) -> Field:
        return apply_multiplier(self, f)

    def __matmul__(self, other: "MultiplierOp") -> "MultiplierOp":
        first, second = self.symbol, other.symbol
        return MultiplierOp(
            f"{self.name}@{other.name}",
            lambda xi: first(xi) * second(xi),
            self.real_to_real and other.real_to_real,
            (self, other),
        )


@lru_cache(maxsize=512)
def _symbol_on_grid(op: MultiplierOp, grid: Grid) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.asarray(op.symbol(grid.k), dtype=complex)
    m = np.broadcast_to(m, grid.shape)
    if not np.all(np.isfinite(m)):
        raise SymbolDomainError(f"symbol of {op.name} is undefined at a resolved mode")
    m.flags.writeable = False
    return m


def apply_multiplier(op: MultiplierOp, f: Field) -> Field:
    if not isinstance(f, Field):
        raise InvalidFieldError("apply_multiplier expects a Field")
    m = op.on(f.grid)
    real = op.real_to_real and f.is_real
    return Field.from_spectrum(f.grid, m * f.spectrum, real=real)


def _check_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive, got {value}")


def _check_nonnegative(name: str, value: float) -> None:
    if not (value >= 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be non-negative, got {value}")


def _abs(xi: tuple[np.ndarray, ...]) -> np.ndarray:
    return np.sqrt(sum(x**2 for x in xi))


def _sq(xi: tuple[np.ndarray, ...]) -> np.ndarray:
    return sum(x**2 for x in xi)


def identity() -> MultiplierOp:
    return MultiplierOp("identity", lambda xi: np.ones_like(xi[0]))


def derivative(axis: int = 1, order: int = 1) -> MultiplierOp:
    """Partial derivative ``d^order / dx_axis^order`` (axes numbered from 1)."""
    if axis not in (1, 2) or order < 0:
        raise ParameterError(f"bad derivative axis={axis} order={order}")

    def symbol(xi):
        if axis > len(xi):
            raise ParameterError(f"axis {axis} on a {len(xi)}D grid")
        return (1j * xi[axis - 1]) ** order

    return MultiplierOp(f"d{axis}^{order}", symbol, params=(axis, order))


def laplacian() -> MultiplierOp:
    return MultiplierOp("laplacian", lambda xi: -_sq(xi))


def bessel_potential(s: float) -> MultiplierOp:
    """``Lambda^s = (1 - Delta)^(s/2)``."""
    return MultiplierOp(f"Lambda^{s}", lambda xi: (1.0 + _sq(xi)) ** (0.5 * s), params=(s,))


def abs_d(s: float) -> MultiplierOp:
    """``|D|^s``; the zero mode is set to 0 unless ``s == 0``."""

    def symbol(xi):
        r = _abs(xi)
        if s == 0:
            return np.ones_like(r)
        return np.where(r > 0, np.where(r > 0, r, 1.0) ** s, 0.0)

    return MultiplierOp(f"|D|^{s}", symbol, params=(s,))


def j_eps(eps: float) -> MultiplierOp:
    _check_positive("eps", eps)
    return MultiplierOp("J_eps", lambda xi: np.sqrt(1.0 + eps * _sq(xi)), params=(eps,))


def j_eps_inv(eps: float) -> MultiplierOp:
    _check_positive("eps", eps)
    return MultiplierOp("J_eps^-1", lambda xi: 1.0 / np.sqrt(1.0 + eps * _sq(xi)), params=(eps,))


def helmholtz(coef: float) -> MultiplierOp:
    """Forward mass operator ``1 - coef*Delta``."""
    _check_nonnegative("coef", coef)
    return MultiplierOp("helmholtz", lambda xi: 1.0 + coef * _sq(xi), params=(coef,))


def helmholtz_inv(coef: float) -> MultiplierOp:
    """Inverse mass operator ``(1 - coef*Delta)^-1``."""
    _check_nonnegative("coef", coef)
    return MultiplierOp("helmholtz^-1", lambda xi: 1.0 / (1.0 + coef * _sq(xi)), params=(coef,))


def r_eps_symbol(xi1: np.ndarray, eps: float) -> np.ndarray:
    return 1j * xi1 / (np.sqrt(1.0 + eps * xi1**2) + math.sqrt(eps) * np.abs(xi1))


def r_eps(eps: float) -> MultiplierOp:
    """Skew-adjoint 1D operator with symbol ``i xi / ((1+eps xi^2)^(1/2) + eps^(1/2)|xi|)``."""
    _check_positive("eps", eps)

    def symbol(xi):
        if len(xi) != 1:
            raise ParameterError("r_eps is one-dimensional")
        return r_eps_symbol(xi[0], eps)

    return MultiplierOp("R_eps", symbol, params=(eps,))


def hilbert() -> MultiplierOp:
    """Hilbert transform, symbol ``-i sign(xi)`` (0 at the zero mode)."""

    def symbol(xi):
        if len(xi) != 1:
            raise ParameterError("hilbert is one-dimensional")
        return -1j * np.sign(xi[0])

    return MultiplierOp("hilbert", symbol)


def riesz(axis: int) -> MultiplierOp:
    """Riesz transform ``R_j``, symbol ``i xi_j / |xi|`` (0 at the zero mode)."""
    if axis not in (1, 2):
        raise ParameterError(f"riesz axis must be 1 or 2, got {axis}")

    def symbol(xi):
        if len(xi) != 2:
            raise ParameterError("riesz transforms need a 2D grid")
        r = _abs(xi)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, 1j * xi[axis - 1] / safe, 0.0)

    return MultiplierOp(f"R{axis}", symbol, params=(axis,))


def tanh_ratio(z: np.ndarray) -> np.ndarray:
    """``tanh(z)/z`` with the value 1 at ``z = 0``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    series = 1.0 - z**2 / 3.0 + 2.0 * z**4 / 15.0
    return np.where(small, series, np.tanh(safe) / safe)


def t_eps(eps: float) -> MultiplierOp:
    """Water-wave multiplier ``tanh(sqrt(eps)|xi|)/(sqrt(eps)|xi|)``."""
    _check_positive("eps", eps)
    return MultiplierOp("T_eps", lambda xi: tanh_ratio(math.sqrt(eps) * _abs(xi)), params=(eps,))


def p_eps(eps: float, beta: float) -> MultiplierOp:
    """Capillary variant ``(1 + beta eps |xi|^2)^(1/2) T_eps``."""
    _check_positive("eps", eps)
    _check_nonnegative("beta", beta)
    if beta == 0:
        return MultiplierOp("P_eps", t_eps(eps).symbol, params=(eps, beta))
    return MultiplierOp(
        "P_eps",
        lambda xi: np.sqrt(1.0 + beta * eps * _sq(xi)) * tanh_ratio(math.sqrt(eps) * _abs(xi)),
        params=(eps, beta),
    )


def mollifier_profile(s: np.ndarray) -> np.ndarray:
    """Bump ``phi``: 1 on ``|s| <= 1/2``, ``exp(1 - 1/(1-(2|s|-1)^2))`` up to ``|s| = 1``, then 0."""
    a = np.abs(np.asarray(s, dtype=float))
    r = 2.0 * a - 1.0
    inside = (a > 0.5) & (a < 1.0)
    r_safe = np.where(inside, r, 0.0)
    bump = np.exp(1.0 - 1.0 / (1.0 - r_safe**2))
    return np.where(a <= 0.5, 1.0, np.where(inside, bump, 0.0))


def mollifier(delta: float) -> MultiplierOp:
    """Spectral mollifier ``J_delta`` with symbol ``phi(delta |xi|)``."""
    _check_positive("delta", delta)
    return MultiplierOp("J_delta", lambda xi: mollifier_profile(delta * _abs(xi)), params=(delta,))


def dealias(f: Field) -> Field:
    """2/3-rule truncation; idempotent."""
    spec = np.where(f.grid.dealias_mask, f.spectrum, 0.0)
    return Field.from_spectrum(f.grid, spec, real=f.is_real)


def _finite(f: Field) -> None:
    if not np.all(np.isfinite(f.values)):
        raise InvalidFieldError("non-finite field")


def sobolev_norm(f: Field, s: float) -> float:
    """``|f|_{H^s}`` as a Parseval-normalized spectral sum with weight ``(1+|xi|^2)^s``."""
    _finite(f)
    weight = (1.0 + f.grid.ksq) ** s
    return math.sqrt(f.grid.parseval_weight * float(np.sum(weight * np.abs(f.spectrum) ** 2)))


def xsk_norm(f: Field, s: float, k: int, eps: float) -> float:
    """``|f|_{X^s_{eps^k}} = (|f|_{H^s}^2 + eps^k |f|_{H^{s+k}}^2)^(1/2)``."""
    return math.sqrt(sobolev_norm(f, s) ** 2 + eps**k * sobolev_norm(f, s + k) ** 2)


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """Real ``L^2`` inner product by grid quadrature."""
    return grid.integrate(np.real(f * np.conj(g)))


def spectral_derivative(grid: Grid, values: np.ndarray, axis: int = 1, order: int = 1) -> np.ndarray:
    """``d^order values / dx_axis^order`` for real or complex arrays of grid shape."""
    spec = (grid.ik[axis - 1] ** order) * grid.fft(values)
    return grid.ifft(spec, real=not np.iscomplexobj(values))


def grad(grid: Grid, values: np.ndarray) -> np.ndarray:
    return np.stack([spectral_derivative(grid, values, j + 1) for j in range(grid.dim)])


def div(grid: Grid, vec: np.ndarray) -> np.ndarray:
    return sum(spectral_derivative(grid, vec[j], j + 1) for j in range(grid.dim))


def lap(grid: Grid, values: np.ndarray) -> np.ndarray:
    return grid.ifft(-grid.ksq * grid.fft(values), real=not np.iscomplexobj(values))


def curl(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Scalar curl ``d1 u2 - d2 u1`` of a planar vector field."""
    if grid.dim != 2:
        raise ParameterError("curl needs a 2D grid")
    return spectral_derivative(grid, vec[1], 1) - spectral_derivative(grid, vec[0], 2)
