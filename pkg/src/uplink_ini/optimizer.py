"""Max-min spectral efficiency: SE model, SCA power allocation, numerology search."""
from __future__ import annotations

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import cvxpy as cp
import numpy as np

from .ini_analytic import desired_gain, interference_gains
from .numerology import Scenario, ScenarioError, assign_bands, validate_scenario

log = logging.getLogger(__name__)

# cvxpy keeps its DPP curvature scope in a module global, so problem construction
# and solves from several threads must not overlap
_CVXPY_LOCK = threading.Lock()

LN2 = np.log(2.0)
TIE_TOL = 1e-9


class InfeasibleFloorsError(RuntimeError):
    def __init__(self, ues, best):
        self.ues = sorted(ues)
        self.best = best
        super().__init__(f"SE floors cannot be met; violating UEs {self.ues}")


def spectral_efficiency(p_d, p_I, noise_variance: float, p_out: float = 0.0):
    """(1 - P_out) log2(1 + p_d / (p_I + sigma^2))."""
    p_d = np.asarray(p_d, dtype=float)
    p_I = np.asarray(p_I, dtype=float)
    return (1.0 - p_out) * np.log2(1.0 + p_d / (p_I + noise_variance))


def lambda_objective(se, mode: str = "min") -> float:
    """Minimum SE over all UEs and subcarriers, or (``mode="ue_mean"``) over per-UE means."""
    rows = [np.asarray(r, dtype=float).ravel() for r in se]
    if not rows or any(r.size == 0 for r in rows):
        raise ValueError("empty SE matrix")
    if mode == "min":
        return float(min(r.min() for r in rows))
    if mode == "ue_mean":
        return float(min(r.mean() for r in rows))
    raise ValueError(f"unknown objective mode {mode!r}")


@dataclass
class SeModel:
    """Everything the power optimizer needs for a fixed numerology assignment.

    ``desired[i]`` is g_i(n), so p_d,i(n) = p_i g_i(n); ``interference[i]`` is
    the (K, N_i) matrix A_i with p_I,i(n) = p @ A_i.
    """

    desired: list
    interference: list
    noise_variance: float
    p_max: float
    p_out: float = 0.0
    se_floors: Optional[np.ndarray] = None
    objective: str = "min"
    gradient: str = "full"

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        if not 0 <= self.p_out < 1:
            raise ValueError("outage probability must be in [0, 1)")
        K = len(self.desired)
        self.se_floors = np.zeros(K) if self.se_floors is None else np.asarray(self.se_floors, float)
        if np.any(self.se_floors < 0):
            raise ValueError("SE floors must be >= 0")
        if self.objective not in ("min", "ue_mean"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.gradient not in ("full", "own"):
            raise ValueError(f"unknown gradient scope {self.gradient!r}")

    @property
    def K(self) -> int:
        return len(self.desired)

    def ini_power(self, p) -> list:
        p = np.asarray(p, dtype=float)
        return [p @ A for A in self.interference]

    def se(self, p) -> list:
        p = np.asarray(p, dtype=float)
        return [spectral_efficiency(p[i] * g, pI, self.noise_variance, self.p_out)
                for i, (g, pI) in enumerate(zip(self.desired, self.ini_power(p)))]

    def lam(self, p) -> float:
        return lambda_objective(self.se(p), self.objective)

    def subtrahend(self, p) -> list:
        """log2(p_I,i(n) + sigma^2) for every UE and index."""
        return [np.log2(pI + self.noise_variance) for pI in self.ini_power(p)]


def build_se_model(scenario: Scenario, channels: dict, domain: str = "symbol",
                   objective: str = "min", gradient: str = "full") -> SeModel:
    desired = [desired_gain(u, scenario, channels, domain) for u in scenario.ids]
    interference = [interference_gains(u, scenario, channels, domain) for u in scenario.ids]
    return SeModel(desired, interference, scenario.noise_variance, scenario.p_max,
                   scenario.p_out, np.asarray(scenario.floors()), objective, gradient)


@dataclass
class TaylorBound:
    """Affine overestimator D (p - p_hat) + Upsilon of log2(p_I + sigma^2)."""

    upsilon: float
    gradient: np.ndarray
    anchor: np.ndarray

    def __call__(self, p) -> float:
        return float(self.gradient @ (np.asarray(p, float) - self.anchor) + self.upsilon)


def _gradients(model: SeModel, p_hat) -> list:
    """d/dp_j log2(p_I,i(n) + sigma^2) as (N_i, K) arrays."""
    out = []
    for i, A in enumerate(model.interference):
        denom = (np.asarray(p_hat, float) @ A + model.noise_variance) * LN2
        D = (A / denom).T
        if model.gradient == "own":
            own = np.zeros_like(D)
            own[:, i] = D[:, i]
            D = own
        out.append(D)
    return out


def taylor_upper_bound(p_hat, victim_index: int, n: int, model: SeModel) -> TaylorBound:
    p_hat = np.asarray(p_hat, dtype=float)
    ups = float(model.subtrahend(p_hat)[victim_index][n])
    D = _gradients(model, p_hat)[victim_index][n]
    return TaylorBound(ups, D, p_hat.copy())


@dataclass
class OptimizerState:
    r: int
    p_hat: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False

    @property
    def lam(self) -> float:
        return self.history[-1]


class _Subproblem:
    """Convexified max-min problem; rebuilt values are pushed through cvxpy parameters."""

    def __init__(self, model: SeModel, offsets: bool):
        self.model = model
        A_max = max((float(A.max()) for A in model.interference if A.size), default=0.0)
        g_max = max(float(g.max()) for g in model.desired)
        # rescale log arguments to O(1); the common constant cancels in the SE difference
        self.scale = model.noise_variance + model.p_max * max(A_max, g_max)
        with _CVXPY_LOCK:
            self._build(model, offsets, model.noise_variance / self.scale)

    def _build(self, model: SeModel, offsets: bool, s_noise: float):
        K = model.K
        self.x = cp.Variable(K)
        self.t = cp.Variable()
        self.D = []
        self.c = []
        cons = [self.x >= 0, self.x <= 1]
        factor = 1.0 - model.p_out
        for i, (g, A) in enumerate(zip(model.desired, model.interference)):
            T = model.p_max * A.T / self.scale
            T[:, i] += model.p_max * g / self.scale
            D = cp.Parameter((len(g), K))
            c = cp.Parameter(len(g))
            self.D.append(D)
            self.c.append(c)
            expr = cp.log(T @ self.x + s_noise) / LN2 - D @ self.x - c
            lam = model.se_floors[i] / factor
            if model.objective == "ue_mean":
                expr = cp.sum(expr) / len(g)
            if offsets:
                cons.append(expr - lam >= self.t)
            else:
                cons.append(expr >= self.t)
                if lam > 0:
                    cons.append(expr >= lam)
        self.problem = cp.Problem(cp.Maximize(self.t), cons)

    def solve(self, p_hat):
        m = self.model
        x_hat = np.asarray(p_hat, float) / m.p_max
        scaled = replace(m, p_max=1.0, noise_variance=m.noise_variance / self.scale,
                         interference=[m.p_max * A / self.scale for A in m.interference])
        ups = scaled.subtrahend(x_hat)
        for D_par, c_par, D, u in zip(self.D, self.c, _gradients(scaled, x_hat), ups):
            D_par.value = D
            c_par.value = u - D @ x_hat
        try:
            with _CVXPY_LOCK:
                self.problem.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            log.debug("subproblem solver failed", exc_info=True)
            return None
        if self.x.value is None or self.problem.status not in ("optimal", "optimal_inaccurate"):
            return None
        return np.clip(self.x.value, 0.0, 1.0) * m.p_max


def _floor_slack(model: SeModel, p) -> float:
    se = model.se(p)
    if model.objective == "ue_mean":
        return min(float(s.mean()) - f for s, f in zip(se, model.se_floors))
    return min(float(s.min()) - f for s, f in zip(se, model.se_floors))


def _surrogate(model: SeModel, p, p_hat, offsets: bool) -> float:
    """Concave lower bound of the objective built at ``p_hat``, evaluated at ``p``."""
    p = np.asarray(p, float)
    p_hat = np.asarray(p_hat, float)
    vals = []
    for i, (g, pI, ups, D) in enumerate(zip(model.desired, model.ini_power(p),
                                            model.subtrahend(p_hat), _gradients(model, p_hat))):
        s = (1 - model.p_out) * (np.log2(pI + model.noise_variance + p[i] * g)
                                 - (D @ (p - p_hat) + ups))
        s = s.mean() if model.objective == "ue_mean" else s.min()
        vals.append(s - model.se_floors[i] if offsets else s)
    return float(min(vals))


def _objective(model: SeModel, p, offsets: bool) -> float:
    return _floor_slack(model, p) if offsets else model.lam(p)


def sca_power_step(state: OptimizerState, model: SeModel, subproblem: Optional[_Subproblem] = None,
                   offsets: bool = False) -> np.ndarray:
    """One SCA step; returns the new point, or ``state.p_hat`` if it does not improve."""
    sub = subproblem or _Subproblem(model, offsets)
    p_new = sub.solve(state.p_hat)
    if p_new is None:
        return state.p_hat
    current = _objective(model, state.p_hat, offsets)
    if _objective(model, p_new, offsets) < current:
        return state.p_hat
    if not offsets and _floor_slack(model, p_new) < -1e-6 and _floor_slack(model, state.p_hat) >= -1e-6:
        return state.p_hat
    return p_new


def _run_sca(model: SeModel, init, max_iter: int, tol: float, offsets: bool) -> OptimizerState:
    sub = _Subproblem(model, offsets)
    state = OptimizerState(0, np.clip(np.asarray(init, float), 0, model.p_max))
    state.history.append(_objective(model, state.p_hat, offsets))
    for r in range(1, max_iter + 1):
        p_new = sca_power_step(state, model, sub, offsets)
        value = _objective(model, p_new, offsets)
        state.r = r
        step = value - state.history[-1]
        state.p_hat = p_new
        state.history.append(value)
        if abs(step) < tol:
            state.converged = True
            break
    return state


@dataclass
class OptimizeResult:
    powers: np.ndarray
    lam: float
    trace: list
    iterations: int
    converged: bool
    start: Optional[np.ndarray] = None


def optimize_power(model: SeModel, init=None, max_iter: int = 100, tol: float = 1e-4) -> OptimizeResult:
    """SCA on the max-min SE for fixed numerologies.

    With ``init=None`` two starts are run, uniform p_max/2 and uniform p_max,
    and the better is returned; an explicit ``init`` runs a single start.
    """
    starts = ([np.full(model.K, model.p_max / 2), np.full(model.K, model.p_max)]
              if init is None else [np.asarray(init, float)])
    best = None
    for start in starts:
        if _floor_slack(model, start) < -1e-9:
            phase1 = _run_sca(model, start, max_iter, tol, offsets=True)
            if phase1.history[-1] < -1e-6:
                se = model.se(phase1.p_hat)
                red = (lambda s: s.mean()) if model.objective == "ue_mean" else (lambda s: s.min())
                bad = [i for i, (s, f) in enumerate(zip(se, model.se_floors)) if red(s) < f - 1e-6]
                raise InfeasibleFloorsError(bad, phase1.p_hat)
            start = phase1.p_hat
        state = _run_sca(model, start, max_iter, tol, offsets=False)
        if best is None or state.history[-1] > best.lam:
            best = OptimizeResult(state.p_hat.copy(), state.history[-1], list(state.history),
                                  state.r, state.converged, np.asarray(start, float))
    return best


def uniform_lambda(model: SeModel) -> float:
    return model.lam(np.full(model.K, model.p_max))


@dataclass(frozen=True)
class NumerologyTemplate:
    """Scenario skeleton for the numerology search: fixed bandwidth fractions and
    per-UE candidate exponents. ``base`` supplies everything else."""

    fractions: tuple
    mu_candidates: tuple
    base: Scenario
    sample_rate: float = 256 * 60e3

    def candidates(self):
        """Yield (mus, scenario or None, reason) for every combination of exponents."""
        for mus in itertools.product(*self.mu_candidates):
            try:
                n_active = []
                for f, mu in zip(self.fractions, mus):
                    n = Fraction(f) * 2 ** mu
                    if n.denominator != 1 or n < 1:
                        raise ScenarioError([f"fraction {f} is not a whole number of subcarriers at mu={mu}"])
                    n_active.append(int(n))
                ues = assign_bands(mus, n_active, self.sample_rate / 2 ** mus[0], ids=self.base.ids)
                sc = replace(self.base, ues=tuple(ues))
                errors = validate_scenario(sc)
                if errors:
                    raise ScenarioError(errors)
                yield mus, sc, ""
            except ScenarioError as exc:
                yield mus, None, str(exc)


@dataclass
class CandidateResult:
    mus: tuple
    lam: float
    powers: np.ndarray
    iterations: int
    trace: list
    uniform_lam: float


@dataclass
class SelectionResult:
    mus: tuple
    scenario: Scenario
    powers: np.ndarray
    lam: float
    candidates: list
    skipped: list


def select_numerology(template: NumerologyTemplate, channels: dict, domain: str = "symbol",
                      objective: str = "min", gradient: str = "full", threads: int = 1,
                      max_iter: int = 100, tol: float = 1e-4) -> SelectionResult:
    """Exhaustive search over exponent assignments, SCA power allocation for each.

    Ties in Lambda go to the smallest sum of exponents, then lexicographic order.
    """
    feasible, skipped = [], []
    for mus, sc, reason in template.candidates():
        if sc is None:
            skipped.append((mus, reason))
            log.info("skipping mu=%s: %s", mus, reason)
        else:
            feasible.append((mus, sc))
    if not feasible:
        raise ScenarioError(["no feasible numerology assignment"] + [r for _, r in skipped])

    def run(item):
        mus, sc = item
        model = build_se_model(sc, channels, domain, objective, gradient)
        res = optimize_power(model, max_iter=max_iter, tol=tol)
        return CandidateResult(mus, res.lam, res.powers, res.iterations, res.trace, uniform_lambda(model))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, feasible))
    else:
        results = [run(item) for item in feasible]
    top = max(r.lam for r in results)
    tied = [(r, sc) for r, (_, sc) in zip(results, feasible) if r.lam >= top - TIE_TOL]
    best, sc = min(tied, key=lambda rs: (sum(rs[0].mus), rs[0].mus))
    return SelectionResult(best.mus, sc, best.powers, best.lam, results, skipped)
