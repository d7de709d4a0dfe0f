import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from boussinesq_lab.spectral_ops import Grid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_field(grid: Grid, seed: int, kmax: float | None = None, amp: float = 0.3) -> np.ndarray:
    """Real band-limited field with sup norm ``amp``."""
    rng = np.random.default_rng(seed)
    top = grid.k_nyquist - 1 if kmax is None else kmax
    keep = np.ones(grid.shape, dtype=bool)
    for kj in grid.k:
        keep &= np.abs(kj) <= top
    spec = np.where(keep, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), 0.0)
    values = grid.ifft(spec)
    return amp * values / np.max(np.abs(values))


seeds = st.integers(min_value=0, max_value=2**32 - 1)
small_eps = st.floats(min_value=1e-3, max_value=0.2)


@pytest.fixture
def grid1() -> Grid:
    return Grid(1, 64)


@pytest.fixture
def grid2() -> Grid:
    return Grid(2, 32)
