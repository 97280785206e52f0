"""Closed-form inter-numerology interference for DFT-s-OFDM uplink.

The INI a victim UE ``i`` sees from UE ``j`` is a linear function of UE j's
frequency-domain data times its channel response. Each interfering symbol
segment contributes a Dirichlet-type kernel evaluated between UE j's subcarrier
frequency ``nu_l / M_j`` and the victim bin frequency ``k / M_i``; the victim then
demaps its band and despreads with a size-``N_i`` inverse DFT.

Indices used throughout: ``l`` is the position inside UE j's active band (so the
absolute subcarrier is ``nu_l = band_offset_j + l``), ``k`` is an absolute bin on
the victim's ``M_i`` grid, and ``q`` (1-based) is the segment: for a
higher-numerology interferer the q-th of its ``alpha`` symbols inside the victim
symbol, for a lower-numerology interferer the victim symbol's position inside the
interferer's symbol.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .numerology import Scenario, UeNumerology, partition_users, scaling_factor
from .receiver import IniProfile, demap

SINGULAR_EPS = 1e-9


def _cis(x) -> np.ndarray:
    """exp(j 2 pi x) with the argument reduced mod 1 before scaling."""
    return np.exp(2j * np.pi * np.mod(x, 1.0))


def _reduce2(x):
    # nearest representative in [-1, 1]; exact when |x| < 1
    return x - 2.0 * np.round(x / 2.0)


def dirichlet_ratio(theta, L):
    """Sum_{m=0}^{L-1} exp(j 2 pi theta m) via its sin-ratio closed form.

    Falls back to the explicit geometric sum where |sin(pi theta)| < 1e-9.
    """
    theta = np.asarray(theta, dtype=float)
    L = np.asarray(L)
    if np.any(L < 0):
        raise ValueError("kernel length must be non-negative")
    scalar = theta.ndim == 0 and L.ndim == 0
    theta, L = np.broadcast_arrays(np.atleast_1d(theta), np.atleast_1d(L))
    r = theta - np.round(theta)
    den = np.sin(np.pi * r)
    singular = np.abs(den) < SINGULAR_EPS
    safe = np.where(singular, 1.0, den)
    out = (np.exp(1j * np.pi * _reduce2(r * (L - 1)))
           * np.sin(np.pi * _reduce2(r * L)) / safe)
    if np.any(singular):
        for idx in zip(*np.nonzero(singular)):
            m = np.arange(int(L[idx]))
            out[idx] = np.sum(_cis(r[idx] * m))
    return out[0] if scalar else out


def geometric_sum(theta, start: int, stop: int) -> complex:
    """Explicit Sum_{m=start}^{stop-1} exp(j 2 pi theta m)."""
    m = np.arange(start, stop)
    return complex(np.sum(_cis(float(theta) * m)))


@dataclass(frozen=True)
class HelperQuantities:
    nu_l: int
    nu_q: int
    kappa: Fraction
    zeta: Fraction
    V_q: int
    tau_alpha: Fraction
    alpha: Fraction


def helper_quantities(l: int, k: int, q: int, cfg_i: UeNumerology, cfg_j: UeNumerology) -> HelperQuantities:
    """Exact index quantities for interferer j onto victim i.

    ``nu_q`` is the segment boundary: for a higher-numerology interferer the
    sample where its q-th symbol ends, ``q (M_j + tau_cp_j)``; for a lower one
    the index in UE j's symbol body where the victim's q-th FFT window ends,
    ``q (M_i + tau_cp_i) - tau_cp_j``. ``V_q`` is the length of the q-th segment
    inside the victim FFT window. ``kappa`` and ``zeta`` are both the frequency
    offset ``nu_l/M_j - k/M_i``.
    """
    alpha = scaling_factor(cfg_i, cfg_j)
    if alpha == 1:
        raise ValueError("equal numerologies produce no INI terms")
    if q < 1:
        raise ValueError("segment index q is 1-based")
    nu_l = cfg_j.band_offset + l
    offset = Fraction(nu_l, cfg_j.M) - Fraction(k, cfg_i.M)
    tau_alpha = (1 / alpha - 1) * cfg_i.tau_cp
    if alpha > 1:
        if q > alpha:
            raise ValueError(f"q={q} exceeds alpha={alpha}")
        nu_q = q * cfg_j.symbol_length
        V_q = cfg_j.symbol_length - (cfg_i.tau_cp if q == 1 else 0)
    else:
        if q > 1 / alpha:
            raise ValueError(f"q={q} exceeds 1/alpha={1 / alpha}")
        nu_q = q * cfg_i.symbol_length - cfg_j.tau_cp
        V_q = cfg_i.M
    return HelperQuantities(nu_l, nu_q, offset, offset, V_q, tau_alpha, alpha)


def kernel_ranges(q: int, cfg_i: UeNumerology, cfg_j: UeNumerology) -> list[tuple[int, int]]:
    """Half-open m-ranges whose geometric sums the Q kernels evaluate."""
    h = helper_quantities(0, 0, q, cfg_i, cfg_j)
    if h.alpha > 1:
        if q == 1:
            return [(cfg_i.tau_cp, cfg_j.symbol_length)]
        return [((q - 1) * cfg_j.symbol_length, h.nu_q)]
    if q == 1:
        tau_a = int(h.tau_alpha)
        return [(cfg_j.M - tau_a, cfg_j.M), (0, cfg_i.M - tau_a)]
    return [(h.nu_q - cfg_i.M, h.nu_q)]


def q_high(l, k, q: int, cfg_i: UeNumerology, cfg_j: UeNumerology):
    """Kernel for an interferer with higher numerology (shorter symbols).

    Equals Sum_{m=0}^{V_q-1} exp(j 2 pi kappa m). ``l`` and ``k`` may be arrays.
    """
    h = helper_quantities(0, 0, q, cfg_i, cfg_j)
    if h.alpha <= 1:
        raise ValueError("q_high needs alpha_ij > 1")
    return dirichlet_ratio(_offset(l, k, cfg_i, cfg_j), h.V_q)


def q_low(l, k, q: int, cfg_i: UeNumerology, cfg_j: UeNumerology):
    """Kernel for an interferer with lower numerology (longer symbols).

    For q=1 the victim window straddles UE j's cyclic prefix, giving the sum of
    a ``tau_alpha``-long piece at the end of UE j's body and an
    ``M_i - tau_alpha``-long piece at its start; for q>1 it is one ``M_i``-long
    piece starting at ``nu_q - M_i``.
    """
    h = helper_quantities(0, 0, q, cfg_i, cfg_j)
    if h.alpha >= 1:
        raise ValueError("q_low needs alpha_ij < 1")
    zeta = _offset(l, k, cfg_i, cfg_j)
    M_i = cfg_i.M
    if q == 1:
        tau_a = int(h.tau_alpha)
        q1 = dirichlet_ratio(zeta, tau_a)
        q2 = dirichlet_ratio(zeta, M_i - tau_a)
        return q1 * _cis(zeta * (cfg_j.M - tau_a)) + q2
    return dirichlet_ratio(zeta, M_i) * _cis(zeta * (h.nu_q - M_i))


def _offset(l, k, cfg_i, cfg_j):
    l = np.asarray(l)
    k = np.asarray(k)
    return (cfg_j.band_offset + l) / cfg_j.M - k / cfg_i.M


def _segment_matrix(cfg_i: UeNumerology, cfg_j: UeNumerology, q: int) -> np.ndarray:
    """Map from UE j's band data (X*H, length N_j) to victim band bins (length N_i)."""
    l = np.arange(cfg_j.N)[:, None]
    k = cfg_i.band_offset + np.arange(cfg_i.N)[None, :]
    nu_l = cfg_j.band_offset + l
    theta = _offset(l, k, cfg_i, cfg_j)
    alpha = scaling_factor(cfg_i, cfg_j)
    if alpha > 1:
        start = cfg_i.tau_cp if q == 1 else (q - 1) * cfg_j.symbol_length
        # window start, per-segment CP delay of UE j, receiver FFT time origin
        phase = _cis(theta * start - nu_l * q * cfg_j.tau_cp / cfg_j.M
                     + k * cfg_i.tau_cp / cfg_i.M)
        kern = q_high(l, k, q, cfg_i, cfg_j)
    else:
        h = helper_quantities(0, 0, q, cfg_i, cfg_j)
        phase = _cis(k * (h.nu_q - cfg_i.M) / cfg_i.M)
        kern = q_low(l, k, q, cfg_i, cfg_j)
    return phase * kern / cfg_j.M


@dataclass(frozen=True)
class IniTerm:
    """One (interferer, segment) block of the coefficient table.

    ``subcarrier[l, t]`` maps X_j(nu_l) H_j(nu_l) to the victim's t-th active bin,
    ``symbol[l, n]`` to its n-th despread symbol. ``weight`` is the fraction of
    victim symbols that see this segment (1 for higher-numerology segments,
    alpha for lower-numerology positions).
    """

    interferer: int
    q: int
    higher: bool
    weight: float
    subcarrier: np.ndarray
    symbol: np.ndarray

    def matrix(self, domain: str) -> np.ndarray:
        return self.symbol if domain == "symbol" else self.subcarrier


@dataclass(frozen=True)
class IniCoefficients:
    victim: int
    terms: tuple

    def for_interferer(self, j: int) -> list[IniTerm]:
        return [t for t in self.terms if t.interferer == j]

    @property
    def count(self) -> int:
        return sum(t.symbol.size for t in self.terms)


@lru_cache(maxsize=256)
def _coefficients(ues: tuple, victim: int) -> IniCoefficients:
    scenario = Scenario(ues=ues)
    part = partition_users(victim, scenario)
    cfg_i = scenario.ue(victim)
    terms = []
    for ue in scenario.ues:
        if ue.id in part.higher:
            alpha = scaling_factor(cfg_i, ue)
            for q in range(1, int(alpha) + 1):
                G = _segment_matrix(cfg_i, ue, q)
                terms.append(IniTerm(ue.id, q, True, 1.0, G, np.fft.ifft(G, axis=1)))
        elif ue.id in part.lower:
            beta = 1 / scaling_factor(cfg_i, ue)
            for q in range(1, int(beta) + 1):
                G = _segment_matrix(cfg_i, ue, q)
                terms.append(IniTerm(ue.id, q, False, 1 / float(beta), G, np.fft.ifft(G, axis=1)))
    for t in terms:
        t.subcarrier.setflags(write=False)
        t.symbol.setflags(write=False)
    return IniCoefficients(victim, tuple(terms))


def ini_coefficients(scenario: Scenario, victim: int) -> IniCoefficients:
    """Coefficient table for ``victim``; depends only on the numerologies, so it is cached."""
    return _coefficients(tuple(scenario.ues), victim)


def _band_response(channel, cfg: UeNumerology) -> np.ndarray:
    return demap(channel.freq_response(cfg.M), cfg)


def _ini(n, victim, scenario, channels, data, higher: bool, position: int, domain: str):
    coeffs = ini_coefficients(scenario, victim)
    cfg_i = scenario.ue(victim)
    out = np.zeros(cfg_i.N, dtype=complex)
    for term in coeffs.terms:
        if term.higher != higher:
            continue
        cfg_j = scenario.ue(term.interferer)
        grids = np.asarray(data[term.interferer], dtype=complex)
        if grids.ndim == 1:
            grids = grids[None]
        if higher:
            X = grids[term.q - 1]
        else:
            if term.q != position:
                continue
            X = grids[0]
        XH = demap(X, cfg_j) * _band_response(channels[term.interferer], cfg_j)
        out = out + XH @ term.matrix(domain)
    return out if n is None else out[..., n]


def ini_high(n, victim: int, scenario: Scenario, channels: dict, data: dict, domain: str = "symbol"):
    """INI from higher-numerology UEs at despread index ``n`` (``None`` for all n).

    ``data[j]`` holds UE j's ``alpha_ij`` frequency grids (one per segment),
    shape ``(alpha, M_j)`` or ``(alpha, batch, M_j)`` for a batch of draws.
    """
    return _ini(n, victim, scenario, channels, data, True, 1, domain)


def ini_low(n, victim: int, scenario: Scenario, channels: dict, data: dict, position: int = 1,
            domain: str = "symbol"):
    """INI from lower-numerology UEs at index ``n`` for the victim symbol at ``position``.

    ``data[j]`` holds UE j's single frequency grid covering the victim symbol.
    """
    return _ini(n, victim, scenario, channels, data, False, position, domain)


def total_ini(n, victim: int, scenario: Scenario, channels: dict, data: dict, position: int = 1,
              domain: str = "symbol"):
    return (ini_high(n, victim, scenario, channels, data, domain)
            + ini_low(n, victim, scenario, channels, data, position, domain))


def interference_gains(victim: int, scenario: Scenario, channels: dict, domain: str = "symbol") -> np.ndarray:
    """Matrix A of shape (K, N_i): expected INI power = powers @ A.

    Spread symbols are uncorrelated across subcarriers with E|X_j|^2 = p_j N_j,
    so only |coefficient|^2 |H_j|^2 survives the expectation.
    """
    coeffs = ini_coefficients(scenario, victim)
    A = np.zeros((len(scenario.ues), scenario.ue(victim).N))
    for term in coeffs.terms:
        cfg_j = scenario.ue(term.interferer)
        h2 = np.abs(_band_response(channels[term.interferer], cfg_j)) ** 2
        A[scenario.index(term.interferer)] += (
            term.weight * cfg_j.N * (h2 @ np.abs(term.matrix(domain)) ** 2))
    return A


def desired_gain(victim: int, scenario: Scenario, channels: dict, domain: str = "symbol") -> np.ndarray:
    """Desired power per unit transmit power on each victim index.

    Without equalization a despread symbol collects the band-averaged |H|^2; a
    subcarrier bin sees its own |H(k)|^2 times the N-fold spreading gain.
    """
    cfg = scenario.ue(victim)
    h2 = np.abs(_band_response(channels[victim], cfg)) ** 2
    if domain == "symbol":
        return np.full(cfg.N, h2.mean())
    return cfg.N * h2


def expected_ini_power(victim: int, scenario: Scenario, channels: dict, powers=None,
                       domain: str = "symbol", n: Optional[int] = None):
    """E|I_i(n)|^2 over the data, averaged over victim symbol positions."""
    powers = scenario.power_vector() if powers is None else list(powers)
    p = np.asarray(powers, dtype=float) @ interference_gains(victim, scenario, channels, domain)
    return p if n is None else p[n]


def analytic_profile(scenario: Scenario, victim: int, channels, powers=None,
                     domain: str = "symbol") -> IniProfile:
    """Analytic profile for one channel dict, or averaged over a list of channel dicts."""
    channel_sets = channels if isinstance(channels, (list, tuple)) else [channels]
    powers = scenario.power_vector() if powers is None else list(powers)
    power = np.mean([expected_ini_power(victim, scenario, ch, powers, domain)
                     for ch in channel_sets], axis=0)
    p_v = powers[scenario.index(victim)]
    gain = np.mean([desired_gain(victim, scenario, ch, domain).mean() for ch in channel_sets])
    return IniProfile(victim, "analytic", power, domain, p_v * gain)
