"""Base-station receiver chain and the differential Monte-Carlo INI measurement."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import draw_channels, received_signal
from .numerology import Scenario, UeNumerology, ensure_valid
from .waveform import random_symbols, symbol_stream, transmit_grids

DOMAINS = ("symbol", "subcarrier")


@dataclass
class IniProfile:
    """Per-index INI power (linear) seen by ``victim``.

    ``domain="symbol"`` indexes the despread symbols x~(n) after demapping and the
    size-N inverse DFT; ``domain="subcarrier"`` indexes the victim's active FFT
    bins before despreading. ``reference`` is the victim's desired power per index
    in the same domain and is the 0 dBc level.
    """

    victim: int
    kind: str
    power: np.ndarray
    domain: str = "symbol"
    reference: float = 1.0

    def db(self, floor: float = 1e-300) -> np.ndarray:
        return 10 * np.log10(np.maximum(self.power, floor))

    def dbc(self, floor: float = 1e-300) -> np.ndarray:
        return self.db(floor) - 10 * np.log10(self.reference)

    def rows(self):
        for n, (p, d) in enumerate(zip(self.power, self.db())):
            yield {"kind": self.kind, "domain": self.domain, "victim": self.victim,
                   "subcarrier_index": n, "power_linear": float(p), "power_db": float(d)}


def demodulate_symbol(r, cfg: UeNumerology) -> np.ndarray:
    """Drop the cyclic prefix and take the unnormalized M-point DFT."""
    r = np.asarray(r, dtype=complex)
    if r.shape[-1] != cfg.symbol_length:
        raise ValueError(f"UE {cfg.id}: expected {cfg.symbol_length} samples, got {r.shape[-1]}")
    return np.fft.fft(r[..., cfg.tau_cp:], axis=-1)


def demap(R, cfg: UeNumerology) -> np.ndarray:
    return np.asarray(R)[..., cfg.band_offset:cfg.band_offset + cfg.N]


def recover_symbols(R, cfg: UeNumerology) -> np.ndarray:
    """Demap the active band and apply the (1/N)-scaled size-N inverse DFT."""
    return np.fft.ifft(demap(R, cfg), axis=-1)


def _victim_outputs(signal, cfg: UeNumerology, domain: str) -> np.ndarray:
    R = demodulate_symbol(signal.reshape(-1, cfg.symbol_length), cfg)
    return recover_symbols(R, cfg) if domain == "symbol" else demap(R, cfg)


def _trial_ini(scenario: Scenario, victim: int, trial: int, seed: int, powers, channels,
               domain: str) -> np.ndarray:
    rng = np.random.default_rng([seed, 0x1A1, trial])
    F = scenario.frame_length
    if channels is None:
        channels = draw_channels(seed, scenario.ids, scenario.channel_taps, trial)
    streams = {}
    for ue, p in zip(scenario.ues, powers):
        data = random_symbols(rng, (F // ue.symbol_length, ue.N), scenario.qam_order)
        streams[ue.id] = symbol_stream(transmit_grids(data, ue, p), ue)
    everyone = received_signal([(streams[u], channels[u]) for u in scenario.ids])
    alone = received_signal([(streams[victim], channels[victim])])
    cfg = scenario.ue(victim)
    diff = _victim_outputs(everyone, cfg, domain) - _victim_outputs(alone, cfg, domain)
    return np.mean(np.abs(diff) ** 2, axis=0)


def measure_ini(scenario: Scenario, victim: int, trials: Optional[int] = None,
                seed: Optional[int] = None, *, channels: Optional[dict] = None,
                fixed_channel: Optional[bool] = None, powers=None, domain: str = "symbol",
                threads: int = 1) -> IniProfile:
    """Differential Monte-Carlo INI: interferers on minus interferers off, same randomness.

    Each trial simulates one frame spanning a whole number of symbols of every UE
    (so lower-numerology interferers are seen at every position within their
    symbol) with fresh data, no noise, and averages |difference|^2 over the
    victim's symbols in the frame and over trials. Channels are either the fixed
    scenario draw (or ``channels``) or redrawn per trial.
    """
    ensure_valid(scenario)
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}")
    trials = scenario.trials if trials is None else trials
    seed = scenario.seed if seed is None else seed
    if trials < 1:
        raise ValueError("trials must be >= 1")
    powers = scenario.power_vector() if powers is None else list(powers)
    fixed = scenario.fixed_channel if fixed_channel is None else fixed_channel
    if channels is None and fixed:
        channels = draw_channels(seed, scenario.ids, scenario.channel_taps)

    def run(chunk):
        return [_trial_ini(scenario, victim, t, seed, powers, channels, domain) for t in chunk]

    chunks = np.array_split(np.arange(trials), max(1, min(threads, trials)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    per_trial = np.stack([row for part in parts for row in part])
    power = per_trial.sum(axis=0) / trials

    cfg = scenario.ue(victim)
    p_v = powers[scenario.index(victim)]
    gain = 1.0
    if channels is not None:
        gain = float(np.mean(np.abs(demap(channels[victim].freq_response(cfg.M), cfg)) ** 2))
    ref = p_v * gain * (cfg.N if domain == "subcarrier" else 1.0)
    return IniProfile(victim, "measured", power, domain, ref)
