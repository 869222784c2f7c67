"""Block Rayleigh flat fading with AWGN.

SNR convention: every scheme sends unit average energy per channel use and
each fade has unit variance, so the average SNR per receive antenna is
``1 / sigma2`` and ``sigma2 = 10 ** (-snr_db / 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import SplitMix64


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Fading matrices ``H_(i)`` for the ``p`` uses of a block, shape (p, n_r, n_t)."""

    blocks: np.ndarray

    @property
    def p(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_r(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_t(self) -> int:
        return self.blocks.shape[2]

    def block_diagonal(self) -> np.ndarray:
        """The ``(p*n_r) x (p*n_t)`` matrix ``D``."""
        return scipy.linalg.block_diag(*self.blocks).astype(np.complex128)


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"noise variance must be positive, got {self.sigma2}")


def draw_channel(rng: SplitMix64, p: int, n_t: int, n_r: int) -> ChannelRealization:
    """I.i.d. CN(0, 1) fades, filled use by use, row-major within each ``H_(i)``."""
    if min(p, n_t, n_r) < 1:
        raise ValueError("channel dimensions must be positive")
    return ChannelRealization(rng.gaussian(p * n_r * n_t).reshape(p, n_r, n_t))


def apply_channel(real: ChannelRealization, antennas, amplitudes) -> np.ndarray:
    """Noiseless received vector of length ``p * n_r``.

    Segment ``i`` is column ``antennas[i]`` of ``H_(i)`` scaled by
    ``amplitudes[i]``.
    """
    antennas = np.asarray(antennas, dtype=np.int64)
    amplitudes = np.asarray(amplitudes, dtype=np.complex128)
    if antennas.shape != (real.p,) or amplitudes.shape != (real.p,):
        raise ValueError(f"expected {real.p} channel uses, got {antennas.shape} / {amplitudes.shape}")
    if antennas.size and (antennas.min() < 0 or antennas.max() >= real.n_t):
        raise ValueError("antenna index out of range")
    cols = real.blocks[np.arange(real.p), :, antennas]  # (p, n_r)
    return (cols * amplitudes[:, None]).ravel()


def snr_to_sigma2(snr_db: float) -> NoiseSpec:
    return NoiseSpec(10.0 ** (-float(snr_db) / 10.0))


def add_noise(rng: SplitMix64, y_clean, noise: NoiseSpec) -> np.ndarray:
    y_clean = np.asarray(y_clean, dtype=np.complex128)
    return y_clean + rng.gaussian(y_clean.size, noise.sigma2).reshape(y_clean.shape)
