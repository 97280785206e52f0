"""Per-UE numerology configuration, scenario container and bandwidth partition checks."""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

ALLOWED_MU = (6, 7, 8, 9, 10)
CP_DIVISOR = 16


class ScenarioError(ValueError):
    """Raised when a scenario fails validation; ``errors`` holds every message."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class UeNumerology:
    """Frame parameters of one UE.

    ``band_offset`` is the index of the first active subcarrier on the UE's own
    ``M``-point grid; ``delta_f`` is the subcarrier spacing in Hz.
    """

    id: int
    mu: int
    N: int
    band_offset: int = 0
    delta_f: float = 60e3

    @property
    def M(self) -> int:
        return 2 ** self.mu

    @property
    def N_z(self) -> int:
        return self.M - self.N

    @property
    def tau_cp(self) -> int:
        return self.M // CP_DIVISOR

    @property
    def symbol_length(self) -> int:
        return self.M + self.tau_cp

    @property
    def sample_rate(self) -> float:
        return self.M * self.delta_f

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.N, self.M)

    @property
    def band(self) -> tuple[Fraction, Fraction]:
        """Occupied band as fractions of the shared sampling bandwidth."""
        start = Fraction(self.band_offset, self.M)
        return start, start + self.fraction


@dataclass(frozen=True)
class UserPartition:
    victim: int
    higher: frozenset
    lower: frozenset
    same: frozenset


@dataclass(frozen=True)
class Scenario:
    """Full experiment description.

    Powers and noise are linear Watts. ``powers`` of ``None`` means every UE
    transmits at ``p_max``.
    """

    ues: tuple
    noise_variance: float = 1e-6
    p_max: float = 0.1
    powers: Optional[tuple] = None
    p_out: float = 0.0
    se_floors: Optional[tuple] = None
    channel_taps: int = 4
    seed: int = 42
    trials: int = 2000
    fixed_channel: bool = True
    qam_order: int = 64

    def __post_init__(self):
        object.__setattr__(self, "ues", tuple(self.ues))
        if self.powers is not None:
            object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if self.se_floors is not None:
            object.__setattr__(self, "se_floors", tuple(float(x) for x in self.se_floors))

    @property
    def ids(self) -> list[int]:
        return [ue.id for ue in self.ues]

    def ue(self, ue_id: int) -> UeNumerology:
        for ue in self.ues:
            if ue.id == ue_id:
                return ue
        raise KeyError(f"unknown UE id {ue_id}")

    def index(self, ue_id: int) -> int:
        return self.ids.index(ue_id)

    def power_vector(self) -> list[float]:
        if self.powers is None:
            return [self.p_max] * len(self.ues)
        return list(self.powers)

    def floors(self) -> list[float]:
        if self.se_floors is None:
            return [0.0] * len(self.ues)
        return list(self.se_floors)

    @property
    def frame_length(self) -> int:
        """Samples in the shortest span holding a whole number of symbols of every UE."""
        return max(ue.symbol_length for ue in self.ues)

    def with_powers(self, powers) -> "Scenario":
        return replace(self, powers=tuple(powers))


def scaling_factor(cfg_i: UeNumerology, cfg_j: UeNumerology) -> Fraction:
    """Numerology scaling factor ``M_i / M_j`` as an exact fraction."""
    return Fraction(cfg_i.M, cfg_j.M)


def partition_users(victim: int, scenario: Scenario) -> UserPartition:
    cfg_i = scenario.ue(victim)
    higher, lower, same = set(), set(), set()
    for ue in scenario.ues:
        if ue.id == victim:
            continue
        a = scaling_factor(cfg_i, ue)
        if a > 1:
            higher.add(ue.id)
        elif a < 1:
            lower.add(ue.id)
        else:
            same.add(ue.id)
    return UserPartition(victim, frozenset(higher), frozenset(lower), frozenset(same))


def assign_bands(mus: Sequence[int], n_active: Sequence[int], delta_f_1: float = 60e3,
                 ids: Optional[Sequence[int]] = None) -> list[UeNumerology]:
    """Place UE bands contiguously from the bottom of the bandwidth in list order.

    Subcarrier spacings are derived from UE 1's spacing so that ``M * delta_f``
    is common to all UEs.
    """
    if len(mus) != len(n_active):
        raise ValueError("mus and n_active must have the same length")
    ids = list(ids) if ids is not None else list(range(1, len(mus) + 1))
    fs = (2 ** mus[0]) * delta_f_1
    start = Fraction(0)
    out = []
    errors = []
    for ue_id, mu, n in zip(ids, mus, n_active):
        M = 2 ** mu
        offset = start * M
        if offset.denominator != 1:
            errors.append(f"UE {ue_id}: band start {start} is not on its {M}-point grid")
            offset = Fraction(int(offset))
        out.append(UeNumerology(id=ue_id, mu=mu, N=int(n), band_offset=int(offset), delta_f=fs / M))
        start += Fraction(int(n), M)
    if errors:
        raise ScenarioError(errors)
    return out


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return every violated condition; an empty list means the scenario is valid."""
    errors = []
    ues = scenario.ues
    if not ues:
        return ["scenario has no UEs"]
    ids = [ue.id for ue in ues]
    if len(set(ids)) != len(ids):
        errors.append(f"duplicate UE ids: {ids}")

    for ue in ues:
        if ue.mu not in ALLOWED_MU:
            errors.append(f"UE {ue.id}: mu={ue.mu} not in {list(ALLOWED_MU)}")
        if not 1 <= ue.N <= ue.M:
            errors.append(f"UE {ue.id}: active subcarriers N={ue.N} outside [1, {ue.M}]")
        if ue.band_offset < 0 or ue.band_offset + ue.N > ue.M:
            errors.append(f"UE {ue.id}: band [{ue.band_offset}, {ue.band_offset + ue.N}) "
                          f"does not fit the {ue.M}-point grid")
        if ue.delta_f <= 0:
            errors.append(f"UE {ue.id}: subcarrier spacing must be positive")

    total = sum((ue.fraction for ue in ues), Fraction(0))
    if total != 1:
        errors.append(f"bandwidth fractions sum to {total} (deficit {1 - total})")

    rates = {ue.sample_rate for ue in ues}
    if max(rates) - min(rates) > 1e-9 * max(rates):
        errors.append("M * delta_f differs across UEs: " +
                      ", ".join(f"UE {ue.id}: {ue.sample_rate:g} Hz" for ue in ues))

    # Bands must tile [0, 1) without gap or overlap.
    edge = Fraction(0)
    for ue in sorted(ues, key=lambda u: u.band[0]):
        lo, hi = ue.band
        if lo < edge:
            errors.append(f"UE {ue.id}: band starting at {lo} overlaps the previous band ending at {edge}")
        elif lo > edge:
            errors.append(f"UE {ue.id}: gap in bandwidth between {edge} and {lo}")
        edge = max(edge, hi)

    if scenario.channel_taps < 1:
        errors.append("channel taps must be >= 1")
    else:
        tau_min = min(ue.tau_cp for ue in ues)
        if scenario.channel_taps > tau_min + 1:
            errors.append(f"channel with {scenario.channel_taps} taps exceeds the shortest "
                          f"cyclic prefix ({tau_min} samples)")
    if scenario.noise_variance < 0:
        errors.append("noise variance must be >= 0")
    if not 0 <= scenario.p_out < 1:
        errors.append(f"outage probability {scenario.p_out} outside [0, 1)")
    if scenario.p_max <= 0:
        errors.append("p_max must be positive")
    if scenario.powers is not None:
        if len(scenario.powers) != len(ues):
            errors.append(f"{len(scenario.powers)} powers given for {len(ues)} UEs")
        for ue_id, p in zip(ids, scenario.powers):
            if not 0 <= p <= scenario.p_max:
                errors.append(f"UE {ue_id}: power {p} outside [0, p_max]")
    if scenario.se_floors is not None:
        if len(scenario.se_floors) != len(ues):
            errors.append(f"{len(scenario.se_floors)} SE floors given for {len(ues)} UEs")
        for ue_id, lam in zip(ids, scenario.se_floors):
            if lam < 0:
                errors.append(f"UE {ue_id}: SE floor must be >= 0")
    if scenario.qam_order not in (4, 16, 64):
        errors.append(f"QAM order {scenario.qam_order} not in (4, 16, 64)")
    return errors


def ensure_valid(scenario: Scenario) -> Scenario:
    errors = validate_scenario(scenario)
    if errors:
        raise ScenarioError(errors)
    return scenario


def make_scenario(mus, n_active, delta_f_1=60e3, **kwargs) -> Scenario:
    """Build and validate a scenario with bands assigned in UE order."""
    return ensure_valid(Scenario(ues=assign_bands(mus, n_active, delta_f_1), **kwargs))


def frame_aligned(cfg_i: UeNumerology, cfg_j: UeNumerology) -> bool:
    """True when ``alpha_ij`` symbols of UE j span exactly one symbol of UE i."""
    return Fraction(cfg_i.symbol_length) == scaling_factor(cfg_i, cfg_j) * cfg_j.symbol_length
