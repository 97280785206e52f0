"""Block-fading Rayleigh multipath channel and the superposed received signal."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TAPS = 4


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray

    @property
    def L(self) -> int:
        return len(self.taps)

    def freq_response(self, M: int) -> np.ndarray:
        """M-point DFT of the zero-padded taps."""
        return np.fft.fft(self.taps, n=M)

    def apply(self, signal: np.ndarray) -> np.ndarray:
        """Linear convolution truncated to the input span."""
        return np.convolve(signal, self.taps)[: len(signal)]


def flat_channel(gain: complex = 1.0) -> ChannelRealization:
    return ChannelRealization(np.array([gain], dtype=complex))


def draw_channel(rng: np.random.Generator, L: int = DEFAULT_TAPS) -> ChannelRealization:
    """i.i.d. CN(0, 1/L) taps: uniform power-delay profile with unit total average power."""
    if L < 1:
        raise ValueError("tap count must be >= 1")
    taps = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2 * L)
    return ChannelRealization(taps)


def channel_rng(seed: int, ue_id: int, trial: int = -1) -> np.random.Generator:
    """Generator keyed by (seed, UE, trial); trial -1 is the fixed per-scenario draw."""
    return np.random.default_rng([seed, ue_id, trial + 1])


def draw_channels(seed: int, ue_ids, L: int, trial: int = -1) -> dict:
    return {u: draw_channel(channel_rng(seed, u, trial), L) for u in ue_ids}


def received_signal(tx, noise_variance: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Sum of per-UE channel outputs plus circular complex Gaussian noise.

    ``tx`` is a sequence of ``(samples, ChannelRealization)`` pairs that all span
    the same number of samples.
    """
    tx = list(tx)
    if not tx:
        raise ValueError("no transmitted signals")
    n = len(tx[0][0])
    out = np.zeros(n, dtype=complex)
    for samples, ch in tx:
        if len(samples) != n:
            raise ValueError(f"signal spans differ: {len(samples)} vs {n} samples")
        out += ch.apply(np.asarray(samples, dtype=complex))
    if noise_variance > 0:
        if rng is None:
            raise ValueError("noise requires an rng")
        out += np.sqrt(noise_variance / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return out
