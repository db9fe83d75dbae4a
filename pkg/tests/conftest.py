import numpy as np
import pytest

from d2d_isac import (RngStream, build_radar_environment, default_config,
                      sample_channels, sample_geometry)
from d2d_isac.sensing import TransmitCovariance


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def realization(cfg):
    """One deterministic default-scale instance shared by read-only tests."""
    geo = sample_geometry(cfg, RngStream(123, "geometry"))
    ch = sample_channels(cfg, geo, RngStream(123, "fading"))
    env = build_radar_environment(cfg)
    return ch, env


@pytest.fixture(scope="session")
def random_covariance():
    """Factory for random Hermitian PSD transmit covariances of given power."""

    def make(gen: np.random.Generator, n_cue: int, n_tx: int,
             power: float) -> TransmitCovariance:
        blocks = []
        for _ in range(n_cue + 1):
            A = gen.standard_normal((n_tx, n_tx)) + 1j * gen.standard_normal((n_tx, n_tx))
            blocks.append(A @ A.conj().T)
        total = sum(float(np.real(np.trace(B))) for B in blocks)
        scale = power / total
        return TransmitCovariance(
            per_cue=np.stack([B * scale for B in blocks[1:]]),
            radar=blocks[0] * scale,
        )

    return make
