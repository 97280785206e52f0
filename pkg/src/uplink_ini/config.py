"""YAML scenario files with line-anchored schema errors."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .numerology import ALLOWED_MU, Scenario, ScenarioError, assign_bands, validate_scenario
from .optimizer import NumerologyTemplate


class ConfigError(ValueError):
    """Schema or I/O problem in a scenario file; each message carries its location."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UeSection(_Strict):
    mu: int
    n_active: int = Field(gt=0)
    delta_f_khz: Optional[float] = None
    mu_candidates: Optional[List[int]] = None


class ChannelSection(_Strict):
    taps: int = Field(default=4, ge=1)
    seed: int = 42


class NoiseSection(_Strict):
    sigma2: float = Field(ge=0)


class PowerSection(_Strict):
    p_max_mw: float = Field(gt=0)
    allocation: Union[Literal["uniform", "optimized"], List[float]] = "uniform"


class OutageSection(_Strict):
    p_out: float = Field(default=0.0, ge=0, lt=1)


class FloorsSection(_Strict):
    # "lambda" is a Python keyword, hence the alias
    lambda_: List[float] = Field(alias="lambda")


class ExperimentSection(_Strict):
    trials: int = Field(default=2000, ge=1)
    fixed_channel: bool = True
    qam_order: Literal[4, 16, 64] = 64
    victim: int = 1
    domain: Literal["symbol", "subcarrier"] = "symbol"
    objective: Literal["min", "ue_mean"] = "min"
    gradient: Literal["full", "own"] = "full"
    alpha_candidates: List[int] = [2, 4, 8]
    sir_powers_mw: List[float] = [1.0, 10.0, 100.0]
    samples: int = Field(default=200, ge=1)
    power_sweep_mw: List[float] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0]
    channel_draws: int = Field(default=3, ge=1)


class ScenarioFile(_Strict):
    ues: List[UeSection] = Field(min_length=1)
    channel: ChannelSection
    noise: NoiseSection
    power: PowerSection
    outage: OutageSection = OutageSection()
    floors: Optional[FloorsSection] = None
    experiment: ExperimentSection = ExperimentSection()


@dataclass
class LoadedScenario:
    scenario: Scenario
    experiment: ExperimentSection
    allocation: Union[str, list]
    mu_candidates: tuple
    path: Optional[str] = None
    warnings: list = field(default_factory=list)

    def template(self, **overrides) -> NumerologyTemplate:
        sc = self.scenario
        if overrides:
            sc = replace(sc, **overrides)
        return NumerologyTemplate(
            fractions=tuple(ue.fraction for ue in sc.ues),
            mu_candidates=self.mu_candidates,
            base=sc,
            sample_rate=sc.ues[0].sample_rate,
        )


def _node_line(root, loc) -> Optional[int]:
    """1-based line of the deepest YAML node reachable along ``loc``."""
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _fmt(path: str, line, where: str, msg: str) -> str:
    return f"{path}:{line}: {where}: {msg}" if line else f"{path}: {where}: {msg}"


def parse_scenario(text: str, path: str = "<string>") -> LoadedScenario:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        raise ConfigError([_fmt(path, line, "yaml", str(getattr(exc, "problem", exc)))]) from exc
    if not isinstance(data, dict):
        raise ConfigError([_fmt(path, 1, "document", "expected a mapping of sections")])
    try:
        cfg = ScenarioFile.model_validate(data)
    except ValidationError as exc:
        errors = []
        for err in exc.errors():
            loc = [x for x in err["loc"] if not (isinstance(x, str) and x.startswith(("list[", "literal[")))]
            where = ".".join(str(x) for x in loc) or "document"
            if err["type"] == "missing":
                msg = f"missing required field '{loc[-1]}'"
                line = _node_line(root, loc[:-1])
            else:
                msg = err["msg"]
                line = _node_line(root, loc)
            errors.append(_fmt(path, line, where, msg))
        raise ConfigError(errors) from exc

    mus = [u.mu for u in cfg.ues]
    n_active = [u.n_active for u in cfg.ues]
    first = cfg.ues[0]
    delta_f_1 = (first.delta_f_khz or 60.0) * 1e3
    loc_errors = []
    try:
        ues = assign_bands(mus, n_active, delta_f_1)
    except ScenarioError as exc:
        raise ConfigError([_fmt(path, _node_line(root, ["ues"]), "ues", e) for e in exc.errors]) from exc
    for i, (sec, ue) in enumerate(zip(cfg.ues, ues)):
        if sec.delta_f_khz is not None and abs(sec.delta_f_khz * 1e3 - ue.delta_f) > 1e-6 * ue.delta_f:
            loc_errors.append(_fmt(path, _node_line(root, ["ues", i, "delta_f_khz"]), f"ues.{i}.delta_f_khz",
                                   f"{sec.delta_f_khz} kHz breaks the common sample rate "
                                   f"(expected {ue.delta_f / 1e3:g} kHz)"))
    if cfg.floors is not None and len(cfg.floors.lambda_) != len(ues):
        loc_errors.append(_fmt(path, _node_line(root, ["floors", "lambda"]), "floors.lambda",
                               f"{len(cfg.floors.lambda_)} values for {len(ues)} UEs"))
    allocation = cfg.power.allocation
    p_max = cfg.power.p_max_mw * 1e-3
    powers = None
    if isinstance(allocation, list):
        if len(allocation) != len(ues):
            loc_errors.append(_fmt(path, _node_line(root, ["power", "allocation"]), "power.allocation",
                                   f"{len(allocation)} powers for {len(ues)} UEs"))
        powers = tuple(p * 1e-3 for p in allocation)
    if loc_errors:
        raise ConfigError(loc_errors)

    exp = cfg.experiment
    scenario = Scenario(
        ues=tuple(ues),
        noise_variance=cfg.noise.sigma2,
        p_max=p_max,
        powers=powers,
        p_out=cfg.outage.p_out,
        se_floors=tuple(cfg.floors.lambda_) if cfg.floors else None,
        channel_taps=cfg.channel.taps,
        seed=cfg.channel.seed,
        trials=exp.trials,
        fixed_channel=exp.fixed_channel,
        qam_order=exp.qam_order,
    )
    errors = validate_scenario(scenario)
    if errors:
        raise ScenarioError([f"{path}: {e}" for e in errors])
    candidates = []
    for sec in cfg.ues:
        cands = list(sec.mu_candidates) if sec.mu_candidates else [sec.mu]
        if sec.mu not in cands:
            cands.append(sec.mu)
        candidates.append(tuple(sorted(set(c for c in cands if c in ALLOWED_MU) | {sec.mu})))
    return LoadedScenario(scenario, exp, allocation, tuple(candidates), path)


def load_scenario(path) -> LoadedScenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read file: {exc.strerror or exc}"]) from exc
    return parse_scenario(text, str(path))

