"""DFT-s-OFDM transmit chain: QAM mapping, DFT spreading, localized mapping, IFFT + CP."""
from __future__ import annotations

import numpy as np

from .numerology import UeNumerology, scaling_factor

QAM_ORDERS = (4, 16, 64)


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def qam_constellation(order: int) -> np.ndarray:
    """Gray-mapped square QAM points, indexed by symbol value, unit average power."""
    if order not in QAM_ORDERS:
        raise ValueError(f"QAM order must be one of {QAM_ORDERS}, got {order}")
    side = int(round(np.sqrt(order)))
    bits = side.bit_length() - 1
    idx = np.arange(order)
    i_level = _gray_to_binary(idx >> bits)
    q_level = _gray_to_binary(idx & (side - 1))
    points = (2 * i_level - (side - 1)) + 1j * (2 * q_level - (side - 1))
    return points / np.sqrt(2 * (order - 1) / 3)


def modulate(symbol_indices, order: int = 64) -> np.ndarray:
    indices = np.asarray(symbol_indices)
    if indices.size and (indices.min() < 0 or indices.max() >= order):
        raise ValueError(f"symbol index out of range for {order}-QAM")
    return qam_constellation(order)[indices]


def random_symbols(rng: np.random.Generator, size, order: int = 64) -> np.ndarray:
    return modulate(rng.integers(0, order, size=size), order)


def dft_spread(x, N: int) -> np.ndarray:
    """Unnormalized forward DFT of size N."""
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != N:
        raise ValueError(f"expected {N} symbols, got {x.shape[-1]}")
    return np.fft.fft(x, axis=-1)


def map_subcarriers(S, cfg: UeNumerology) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    if S.shape[-1] != cfg.N:
        raise ValueError(f"UE {cfg.id}: expected {cfg.N} spread symbols, got {S.shape[-1]}")
    X = np.zeros(S.shape[:-1] + (cfg.M,), dtype=complex)
    X[..., cfg.band_offset:cfg.band_offset + cfg.N] = S
    return X


def synthesize_symbol(X, cfg: UeNumerology) -> np.ndarray:
    """(1/M)-scaled inverse DFT with the last ``tau_cp`` samples prepended."""
    X = np.asarray(X, dtype=complex)
    if X.shape[-1] != cfg.M:
        raise ValueError(f"UE {cfg.id}: grid has {X.shape[-1]} entries, expected {cfg.M}")
    body = np.fft.ifft(X, axis=-1)
    return np.concatenate([body[..., cfg.M - cfg.tau_cp:], body], axis=-1)


def transmit_grids(data, cfg: UeNumerology, power: float = 1.0) -> np.ndarray:
    """QAM symbols of shape (..., N) -> frequency grids (..., M) at per-subcarrier power ``power``."""
    return map_subcarriers(np.sqrt(power) * dft_spread(data, cfg.N), cfg)


def build_aligned_frame(cfg_j: UeNumerology, symbols, victim_cfg: UeNumerology) -> np.ndarray:
    """Time-align UE j's symbols with one victim symbol.

    For ``alpha >= 1`` exactly ``alpha`` grids are required and the result is one
    victim-symbol-long vector. For ``alpha < 1`` a single grid is required and the
    result has shape ``(1/alpha, victim symbol length)``: row ``p`` is the part of
    UE j's symbol seen during the victim's p-th symbol.
    """
    alpha = scaling_factor(victim_cfg, cfg_j)
    grids = np.asarray(symbols, dtype=complex)
    if grids.ndim == 1:
        grids = grids[None, :]
    if alpha >= 1:
        if alpha.denominator != 1 or grids.shape[0] != alpha:
            raise ValueError(f"expected {alpha} symbols of UE {cfg_j.id}, got {grids.shape[0]}")
        return synthesize_symbol(grids, cfg_j).reshape(-1)
    if grids.shape[0] != 1:
        raise ValueError(f"expected 1 symbol of UE {cfg_j.id}, got {grids.shape[0]}")
    spans = 1 / alpha
    return synthesize_symbol(grids[0], cfg_j).reshape(int(spans), victim_cfg.symbol_length)


def symbol_stream(grids, cfg: UeNumerology) -> np.ndarray:
    """Concatenate CP-prefixed symbols for a (num_symbols, M) array of grids."""
    return synthesize_symbol(np.atleast_2d(grids), cfg).reshape(-1)
