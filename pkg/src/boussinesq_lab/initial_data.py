"""Initial-data recipes.

Every recipe returns a physical ``State`` carrying ``(eta, u)``.  Randomness
comes from one 64-bit seed: ``SeedSequence(seed).spawn(1 + dim)`` gives one
child stream for ``eta`` and one per velocity component, in that order.
Amplitudes are checked against the depth bound ``1 + eps eta >= h`` and never
rescaled.
"""

from __future__ import annotations

import numpy as np

from .config import DataSection
from .spectral_ops import Field, Grid
from .systems import CavitationError, State
from .transforms import curl_free_projection


def _centered(grid: Grid) -> np.ndarray:
    """Squared distance from the box center."""
    return sum((x - grid.length / 2) ** 2 for x in grid.x)


def _profile(grid: Grid, data: DataSection) -> np.ndarray:
    if data.family == "gaussian_hump":
        return np.exp(-_centered(grid) / data.width**2)
    if data.family == "solitary_like":
        return np.cosh(np.sqrt(_centered(grid)) / data.width) ** -2
    if data.family == "cosine_modes":
        k0 = 2 * np.pi / grid.length
        out = sum(np.cos(m * k0 * x) for m in data.modes for x in grid.x)
        return out / max(np.max(np.abs(out)), 1e-300)
    raise ValueError(data.family)


def random_bandlimited_field(grid: Grid, rng: np.random.Generator, power: float,
                             kmax: float | None = None, kmin: float = 0.0) -> np.ndarray:
    """Zero-mean real field with random phases and spectrum ``|k|^-power`` on ``kmin <= |k| <= kmax``.

    Normalized to unit sup norm.  ``kmax`` defaults to the dealiased band.
    """
    k = grid.kabs
    top = kmax if kmax is not None else 2.0 / 3.0 * grid.k_nyquist
    band = (k > max(kmin, 0.0)) & (k <= top) & grid.dealias_mask
    amp = np.where(band, np.where(band, k, 1.0) ** -power, 0.0)
    phase = np.exp(2j * np.pi * rng.random(grid.shape))
    values = grid.ifft(amp * phase * np.prod(grid.shape))
    values = values - values.mean()
    peak = np.max(np.abs(values))
    return values / peak if peak > 0 else values


def make_initial_state(grid: Grid, data: DataSection, eps: float, h: float = 0.0) -> State:
    """Build ``(eta, u)`` from ``data``; raises ``CavitationError`` if ``min(1 + eps eta) < h``."""
    children = np.random.SeedSequence(data.seed).spawn(1 + grid.dim)
    if data.family == "random_bandlimited":
        rngs = [np.random.default_rng(c) for c in children]
        eta = data.amplitude * random_bandlimited_field(grid, rngs[0], data.spectrum_power, data.kmax)
        vel = [data.velocity_ratio * data.amplitude
               * random_bandlimited_field(grid, r, data.spectrum_power, data.kmax) for r in rngs[1:]]
    else:
        eta = data.amplitude * _profile(grid, data)
        vel = [data.velocity_ratio * eta.copy() for _ in range(grid.dim)]
    if grid.dim == 2 and data.curl_free:
        vel = [f.values for f in curl_free_projection([Field(grid, v) for v in vel])]
    depth = 1.0 + eps * eta
    if np.min(depth) < h:
        raise CavitationError(
            f"initial data violates 1 + eps*eta >= {h:g} (min depth {np.min(depth):.4g}); lower data.amplitude")
    return State(grid, eta, tuple(vel))
