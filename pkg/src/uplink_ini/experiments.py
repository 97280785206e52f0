"""Experiment runners behind the CLI: INI profiles, SIR CDF, optimized-vs-uniform sweep.

Every runner returns plain row dicts so the CLI can write CSV with a fixed
column order. Randomness is keyed by (seed, experiment index) only, so results
do not depend on the number of worker threads.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from math import log2

import numpy as np

from .channel import draw_channel, draw_channels
from .config import LoadedScenario
from .ini_analytic import analytic_profile, desired_gain, expected_ini_power
from .numerology import ALLOWED_MU, ScenarioError, assign_bands, validate_scenario
from .optimizer import build_se_model, optimize_power, select_numerology, uniform_lambda
from .receiver import measure_ini

log = logging.getLogger(__name__)

INI_COLUMNS = ["kind", "domain", "victim", "subcarrier_index", "power_linear", "power_db", "power_dbc"]
SIR_COLUMNS = ["power_mw", "sir_db", "cdf", "sample", "alphas"]
OPT_COLUMNS = ["p_max_mw", "lambda_optimized", "lambda_uniform", "gain_pct", "best_M"]
CANDIDATE_COLUMNS = ["p_max_mw", "draw", "candidate_M", "iterations", "lambda", "lambda_uniform", "powers_mw"]
TRACE_COLUMNS = ["p_max_mw", "draw", "candidate_M", "iteration", "lambda"]


def _fmt_M(mus) -> str:
    return "/".join(str(2 ** m) for m in mus)


def resolve_powers(loaded: LoadedScenario, channels: dict) -> list:
    sc = loaded.scenario
    if loaded.allocation == "optimized":
        exp = loaded.experiment
        model = build_se_model(sc, channels, exp.domain, exp.objective, exp.gradient)
        return list(optimize_power(model).powers)
    return sc.power_vector()


def run_ini(loaded: LoadedScenario, analytic: bool = True, measured: bool = True, trials=None,
            seed=None, victim=None, domain=None, threads: int = 1) -> list:
    sc = loaded.scenario
    exp = loaded.experiment
    seed = sc.seed if seed is None else seed
    trials = exp.trials if trials is None else trials
    victim = exp.victim if victim is None else victim
    domain = domain or exp.domain
    sc.ue(victim)
    if exp.fixed_channel:
        channel_sets = draw_channels(seed, sc.ids, sc.channel_taps)
    else:
        channel_sets = [draw_channels(seed, sc.ids, sc.channel_taps, t) for t in range(trials)]
    base = channel_sets if isinstance(channel_sets, dict) else channel_sets[0]
    powers = resolve_powers(loaded, base)
    profiles = []
    if analytic:
        profiles.append(analytic_profile(sc, victim, channel_sets, powers, domain))
    if measured:
        profiles.append(measure_ini(sc, victim, trials, seed,
                                    channels=channel_sets if exp.fixed_channel else None,
                                    fixed_channel=exp.fixed_channel, powers=powers,
                                    domain=domain, threads=threads))
    rows = []
    for prof in profiles:
        for row, dbc in zip(prof.rows(), prof.dbc()):
            row["power_dbc"] = float(dbc)
            rows.append(row)
    return rows


def _alpha_scenario(loaded: LoadedScenario, alphas):
    """Scenario with UE 1 as configured and UE k at mu_1 - log2(alpha_1k)."""
    sc = loaded.scenario
    mu1 = sc.ues[0].mu
    mus = [mu1] + [mu1 - int(log2(a)) for a in alphas]
    n_active = []
    for ue, mu in zip(sc.ues, mus):
        n = ue.fraction * 2 ** mu
        if n.denominator != 1 or n < 1:
            return None
        n_active.append(int(n))
    if any(mu not in ALLOWED_MU for mu in mus):
        return None
    try:
        ues = assign_bands(mus, n_active, sc.ues[0].delta_f, ids=sc.ids)
    except ScenarioError:
        return None
    cand = replace(sc, ues=tuple(ues))
    return None if validate_scenario(cand) else cand


def feasible_alphas(loaded: LoadedScenario) -> list:
    """Candidate scaling factors usable for every non-reference UE."""
    sc = loaded.scenario
    out = []
    for a in loaded.experiment.alpha_candidates:
        if a < 1 or a & (a - 1):
            log.warning("alpha %s is not a power of two; skipped", a)
            continue
        if _alpha_scenario(loaded, [a] * (len(sc.ues) - 1)) is None:
            log.warning("alpha %s infeasible with M_1=%d and mu in %s; skipped", a, sc.ues[0].M,
                        list(ALLOWED_MU))
            continue
        out.append(a)
    return out


def run_sir_cdf(loaded: LoadedScenario, powers_mw=None, samples=None, seed=None,
                fixed_channel: bool = False) -> list:
    """Empirical CDF of UE 1's average SIR under random numerologies and channels.

    All UEs transmit at the given per-subcarrier power; SIR is the ratio of mean
    desired power to mean INI power over UE 1's despread symbols.
    """
    sc = loaded.scenario
    exp = loaded.experiment
    if len(sc.ues) < 2:
        raise ScenarioError(["sir-cdf needs at least two UEs"])
    seed = sc.seed if seed is None else seed
    samples = exp.samples if samples is None else samples
    powers_mw = exp.sir_powers_mw if powers_mw is None else powers_mw
    alphas = feasible_alphas(loaded)
    if not alphas:
        raise ScenarioError(["no feasible alpha candidates"])
    victim = sc.ids[0]
    fixed = draw_channels(seed, sc.ids, sc.channel_taps) if fixed_channel else None
    rows = []
    for pi, p_mw in enumerate(powers_mw):
        draws = []
        for s in range(samples):
            rng = np.random.default_rng([seed, 0x51, pi, s])
            pick = [alphas[i] for i in rng.integers(0, len(alphas), size=len(sc.ues) - 1)]
            scen = _alpha_scenario(loaded, pick)
            channels = fixed or {u: draw_channel(rng, sc.channel_taps) for u in sc.ids}
            p = [p_mw * 1e-3] * len(sc.ues)
            signal = p[0] * desired_gain(victim, scen, channels).mean()
            ini = expected_ini_power(victim, scen, channels, p).mean()
            sir = np.inf if ini == 0 else 10 * np.log10(signal / ini)
            draws.append((sir, s, "/".join(map(str, pick))))
        draws.sort(key=lambda d: (d[0], d[1]))
        for rank, (sir, s, tag) in enumerate(draws, start=1):
            rows.append({"power_mw": p_mw, "sir_db": float(sir), "cdf": rank / samples,
                         "sample": s, "alphas": tag})
    return rows


def run_optimize(loaded: LoadedScenario, powers_mw=None, draws=None, seed=None, threads: int = 1,
                 compare_uniform: bool = True):
    """Sweep p_max; per point average Lambda over channel draws for the numerology search
    and for the configured numerologies at uniform full power.

    Returns (summary rows, candidate rows, trace rows).
    """
    sc = loaded.scenario
    exp = loaded.experiment
    seed = sc.seed if seed is None else seed
    powers_mw = exp.power_sweep_mw if powers_mw is None else powers_mw
    draws = exp.channel_draws if draws is None else draws
    summary, cand_rows, trace_rows = [], [], []
    for p_mw in powers_mw:
        p_max = p_mw * 1e-3
        base = replace(sc, p_max=p_max, powers=None)
        template = loaded.template(p_max=p_max, powers=None)
        lam_opt, lam_uni, picks = [], [], []
        for d in range(draws):
            channels = draw_channels(seed, sc.ids, sc.channel_taps, -1 if exp.fixed_channel and draws == 1 else d)
            sel = select_numerology(template, channels, exp.domain, exp.objective, exp.gradient, threads=threads)
            lam_opt.append(sel.lam)
            picks.append(_fmt_M(sel.mus))
            model = build_se_model(base, channels, exp.domain, exp.objective, exp.gradient)
            lam_uni.append(uniform_lambda(model))
            for c in sel.candidates:
                tag = _fmt_M(c.mus)
                cand_rows.append({"p_max_mw": p_mw, "draw": d, "candidate_M": tag, "iterations": c.iterations,
                                  "lambda": c.lam, "lambda_uniform": c.uniform_lam,
                                  "powers_mw": "/".join(f"{x * 1e3:.6g}" for x in c.powers)})
                for r, value in enumerate(c.trace):
                    trace_rows.append({"p_max_mw": p_mw, "draw": d, "candidate_M": tag,
                                       "iteration": r, "lambda": value})
        opt = float(np.mean(lam_opt))
        uni = float(np.mean(lam_uni))
        row = {"p_max_mw": p_mw, "lambda_optimized": opt,
               "lambda_uniform": uni if compare_uniform else "",
               "gain_pct": 100 * (opt - uni) / uni if compare_uniform and uni > 0 else "",
               "best_M": max(set(picks), key=lambda m: (picks.count(m), m))}
        summary.append(row)
    return summary, cand_rows, trace_rows
