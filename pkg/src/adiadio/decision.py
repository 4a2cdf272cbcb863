"""Solvability verdicts from the adiabatic emulation.

The loop mirrors the physical protocol: evolve a reference system, measure a
histogram, take the observed state of least squared polynomial value as the
candidate ground state, then corroborate against truncated models grown until
their exact distributions agree with the reference within epsilon.  A zero
candidate (or an exact zero anywhere in the allowed model range) settles
has_solution with an integer-verified witness.  Otherwise the candidate must
survive elimination: if the model range holds a strictly smaller value the
candidate is spurious and the run time grows; if candidate and model ground
agree, its reference probability must not decay as the run time is doubled
and quadrupled, and model agreement must persist there.  Only then, and only
when the truncation fluctuation stays below the candidate energy, is
no_solution_within_confidence declared.  Everything observable lands in the
trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import (Distribution, QuantumState, TruncationTailError,
                        coherent_initial_state, evolve, probabilities)
from .fock import FockBasis, enumerate_basis
from .operators import (CoherentParams, OperatorMatrix, Schedule, build_hi,
                        build_hp, default_schedule, get_ramp)
from .poly import Polynomial, evaluate
from .sampling import SamplingPlan, candidate_state, sample_histogram, sup_distance
from .serialize import dumps
from .spectral import DegenerateGapError, gap_and_time, spectral_flow

__all__ = [
    "DecisionConfig",
    "DecisionReport",
    "fluctuation_estimate",
    "run_decision",
]

# reference/model cutoff defaults by variable count; one mode is cheap enough
# to push further, three modes already cost C(N+3,3) states
_DEFAULT_CUTOFF = {1: 16, 2: 12}
_DEFAULT_CUTOFF_MANY = 10

VERDICT_HAS_SOLUTION = "has_solution"
VERDICT_NO_SOLUTION = "no_solution_within_confidence"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DecisionConfig:
    """Knobs for the decision loop; None means resolve from the polynomial."""

    epsilon: float = 0.1
    confidence: float = 0.9
    seed: int = 2026
    initial_T: float = 5.0
    t_growth: float = 2.0
    max_T: float = 500.0
    initial_model_cutoff: int = 4
    cutoff_step: int = 2
    max_model_cutoff: int | None = None
    reference_cutoff: int | None = None
    alpha: float = 0.5
    ramp: str = "linear"
    trend_margin: float = 0.02
    grid_points: int = 41
    levels: int = 6
    max_iterations: int = 12
    evolve_tol: float = 1e-4
    jobs: int = 1

    def resolve(self, num_vars: int) -> "ResolvedConfig":
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.initial_T <= 0.0 or self.max_T < self.initial_T:
            raise ValueError("need 0 < initial_T <= max_T")
        if self.t_growth <= 1.0:
            raise ValueError("t_growth must exceed 1")
        default = _DEFAULT_CUTOFF.get(num_vars, _DEFAULT_CUTOFF_MANY)
        reference = self.reference_cutoff if self.reference_cutoff is not None else default
        max_model = self.max_model_cutoff if self.max_model_cutoff is not None else reference
        if max_model > reference:
            raise ValueError("max_model_cutoff cannot exceed reference_cutoff")
        if self.initial_model_cutoff < 1:
            raise ValueError("initial_model_cutoff must be at least 1")
        if self.cutoff_step < 1:
            raise ValueError("cutoff_step must be at least 1")
        return ResolvedConfig(base=self, reference_cutoff=reference,
                              max_model_cutoff=max_model)


@dataclass(frozen=True)
class ResolvedConfig:
    base: DecisionConfig
    reference_cutoff: int
    max_model_cutoff: int

    def to_dict(self) -> dict:
        d = {k: getattr(self.base, k) for k in (
            "epsilon", "confidence", "seed", "initial_T", "t_growth", "max_T",
            "initial_model_cutoff", "cutoff_step", "alpha", "ramp",
            "trend_margin", "grid_points", "levels", "max_iterations",
            "evolve_tol", "jobs")}
        d["reference_cutoff"] = self.reference_cutoff
        d["max_model_cutoff"] = self.max_model_cutoff
        return d


@dataclass
class DecisionReport:
    """Verdict plus everything needed to audit how it was reached."""

    verdict: str
    equation: str
    witness: tuple[int, ...] | None
    e_candidate: int | None
    e_ground_estimate: float | None
    delta: float | None
    confidence: float
    epsilon: float
    iterations: int
    reason: str | None
    config: dict
    trace: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "equation": self.equation,
            "witness": list(self.witness) if self.witness is not None else None,
            "e_candidate": self.e_candidate,
            "e_ground_estimate": self.e_ground_estimate,
            "delta": self.delta,
            "confidence": self.confidence,
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "reason": self.reason,
            "config": self.config,
            "trace": self.trace,
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(dumps(self.to_dict()))
            fh.write("\n")


def fluctuation_estimate(model_energies, residual_bound: float = 0.0) -> float:
    """Truncation-fluctuation width: spread of ground-energy estimates across
    accepted truncations plus the eigensolver residual bound."""
    values = [float(v) for v in model_energies]
    if not values:
        raise ValueError("need at least one model energy")
    if residual_bound < 0.0:
        raise ValueError("residual_bound must be nonnegative")
    return max(values) - min(values) + residual_bound


class _System:
    """Basis, operators, and initial state for one cutoff, built lazily."""

    def __init__(self, p: Polynomial, cutoff: int, alpha: float):
        self.cutoff = cutoff
        self.basis = enumerate_basis(p.num_vars, cutoff)
        self._coherent = CoherentParams.uniform(alpha, p.num_vars)
        self.hi = build_hi(self._coherent, self.basis)
        self.hp = build_hp(p, self.basis)
        self._psi0 = None
        # H_P is diagonal with exact integer entries, so its ground energy
        # over this truncation is an exact integer minimum
        self.exact_min = None
        self.exact_argmin = None
        for state in self.basis.states:
            v = evaluate(p, state)
            sq = v * v
            if self.exact_min is None or sq < self.exact_min:
                self.exact_min = sq
                self.exact_argmin = state
                if sq == 0:
                    break

    @property
    def psi0(self) -> QuantumState:
        # built on demand: the exact range scan never needs a state, so a
        # scan-only cutoff must not trip the coherent tail guard
        if self._psi0 is None:
            self._psi0 = coherent_initial_state(self._coherent, self.basis)
        return self._psi0

    def hp_norm_bound(self) -> float:
        return float(np.abs(self.hp.entries.diagonal()).max())


class _Engine:
    """Caches evolutions keyed by (cutoff, T) so trend and persistence reuse."""

    def __init__(self, p: Polynomial, cfg: ResolvedConfig):
        self.p = p
        self.cfg = cfg
        self.ramp = get_ramp(cfg.base.ramp)
        self.systems: dict[int, _System] = {}
        self.dists: dict[tuple[int, float], Distribution] = {}
        self.evolutions = 0

    def system(self, cutoff: int) -> _System:
        if cutoff not in self.systems:
            self.systems[cutoff] = _System(self.p, cutoff, self.cfg.base.alpha)
        return self.systems[cutoff]

    def distribution(self, cutoff: int, T: float) -> Distribution:
        key = (cutoff, T)
        if key not in self.dists:
            sys = self.system(cutoff)
            sched = Schedule(total_time=T, ramp=self.ramp,
                             grid=np.linspace(0.0, 1.0, 11))
            # distributions only feed epsilon-scale sup comparisons, so the
            # evolver may halve to a matching (looser) tolerance
            state = evolve(sys.hi, sys.hp, sched, sys.psi0,
                           halving_tol=self.cfg.base.evolve_tol)
            self.evolutions += 1
            self.dists[key] = probabilities(state)
        return self.dists[key]


def run_decision(p: Polynomial, config: DecisionConfig | None = None) -> DecisionReport:
    """Decide whether p has a nonnegative integer root, within the emulation.

    Returns has_solution (with an exactly verified witness),
    no_solution_within_confidence (with the ground estimate and truncation
    fluctuation), or inconclusive (with the blocking reason).
    """
    cfg_in = config or DecisionConfig()
    equation = p.to_text()

    trace: list[dict] = []

    def report(verdict: str, *, witness=None, e_candidate=None,
               e_ground=None, delta=None, confidence=0.0, iterations=0,
               reason=None, cfg_dict=None) -> DecisionReport:
        return DecisionReport(
            verdict=verdict, equation=equation, witness=witness,
            e_candidate=e_candidate, e_ground_estimate=e_ground, delta=delta,
            confidence=confidence, epsilon=cfg_in.epsilon,
            iterations=iterations, reason=reason,
            config=cfg_dict or {}, trace=trace)

    # constant equations need no quantum machinery at all
    if p.is_constant():
        value = p.constant_value()
        trace.append({"event": "constant_equation", "value": value})
        if value == 0:
            return report(VERDICT_HAS_SOLUTION, witness=(0,) * p.num_vars,
                          e_candidate=0, e_ground=0.0, delta=0.0,
                          confidence=1.0)
        return report(VERDICT_NO_SOLUTION, e_candidate=value * value,
                      e_ground=float(value * value), delta=0.0,
                      confidence=1.0,
                      reason="constant equation never vanishes")

    cfg = cfg_in.resolve(p.num_vars)
    cfg_dict = cfg.to_dict()
    trace.append({"event": "start", "equation": equation, "config": cfg_dict})

    engine = _Engine(p, cfg)
    base = cfg.base
    scan = engine.system(cfg.max_model_cutoff)
    T = base.initial_T

    for iteration in range(1, base.max_iterations + 1):
        trace.append({"event": "iteration", "index": iteration, "T": T})

        ref_dist = engine.distribution(cfg.reference_cutoff, T)
        plan = SamplingPlan(epsilon=base.epsilon, confidence=base.confidence,
                            seed=base.seed + (iteration - 1))
        hist = sample_histogram(ref_dist, plan, jobs=1)
        cand, e_cand = candidate_state(hist, p)
        trace.append({
            "event": "candidate",
            "state": list(cand),
            "e_candidate": e_cand,
            "repetitions": plan.repetitions,
            "seed": plan.seed,
            "top_observed": [{"state": list(s), "p": pr}
                             for s, pr in hist.top_states(5)],
        })

        if e_cand == 0:
            assert evaluate(p, cand) == 0
            trace.append({"event": "verdict", "verdict": VERDICT_HAS_SOLUTION,
                          "witness": list(cand), "route": "sampled"})
            return report(VERDICT_HAS_SOLUTION, witness=cand, e_candidate=0,
                          e_ground=0.0, delta=0.0, confidence=1.0,
                          iterations=iteration, cfg_dict=cfg_dict)

        # grow truncated models until two of them agree with the reference
        accepted: list[_System] = []
        m = base.initial_model_cutoff
        while m <= cfg.max_model_cutoff and len(accepted) < 2:
            try:
                sysm = engine.system(m)
                model_dist = engine.distribution(m, T)
            except TruncationTailError as exc:
                # cutoff too small to even hold the initial state
                trace.append({"event": "model_skipped", "cutoff": m,
                              "reason": str(exc)})
                m += base.cutoff_step
                continue
            sup = sup_distance(model_dist, ref_dist)
            ok = sup < base.epsilon
            trace.append({"event": "model", "cutoff": m, "sup_distance": sup,
                          "accepted": ok, "e_ground_exact": sysm.exact_min})
            if ok:
                accepted.append(sysm)
            m += base.cutoff_step
        # the exact scan over the full allowed range always participates:
        # H_P is diagonal, so this is its exact ground energy at max cutoff
        trace.append({"event": "range_scan", "cutoff": cfg.max_model_cutoff,
                      "e_min": scan.exact_min,
                      "argmin": list(scan.exact_argmin)})

        if scan.exact_min == 0:
            witness = scan.exact_argmin
            assert evaluate(p, witness) == 0
            trace.append({"event": "verdict", "verdict": VERDICT_HAS_SOLUTION,
                          "witness": list(witness), "route": "model_scan"})
            return report(VERDICT_HAS_SOLUTION, witness=witness,
                          e_candidate=e_cand, e_ground=0.0, delta=0.0,
                          confidence=1.0, iterations=iteration,
                          cfg_dict=cfg_dict)

        if not accepted:
            trace.append({"event": "verdict",
                          "verdict": VERDICT_INCONCLUSIVE,
                          "reason": "no truncated model matched the reference"})
            return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                          iterations=iteration,
                          reason="no truncated model matched the reference "
                                 f"within epsilon={base.epsilon}",
                          cfg_dict=cfg_dict)
        if len(accepted) < 2:
            trace.append({"event": "verdict",
                          "verdict": VERDICT_INCONCLUSIVE,
                          "reason": "only one truncation available"})
            return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                          iterations=iteration,
                          reason="fluctuation estimate needs at least two "
                                 "agreeing truncations; raise max_model_cutoff",
                          cfg_dict=cfg_dict)

        energies = [float(s.exact_min) for s in accepted] + [float(scan.exact_min)]
        residual = 1e-9 * max(s.hp_norm_bound() for s in accepted)
        delta = fluctuation_estimate(energies, residual)
        e_ground = float(scan.exact_min)
        trace.append({"event": "fluctuation", "delta": delta,
                      "energies": energies, "residual_bound": residual})

        if sum(cand) > cfg.max_model_cutoff:
            # candidate beyond the allowed model range: no model can contain
            # it, so grow T and hope the distribution concentrates lower
            trace.append({"event": "candidate_outside_models",
                          "state": list(cand)})
            grown = _grow_T(engine, accepted[-1], T, trace)
            if grown is None:
                return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                              iterations=iteration,
                              reason="candidate lies outside the model range "
                                     "and the time budget is exhausted",
                              cfg_dict=cfg_dict)
            T = grown
            continue

        if scan.exact_min < e_cand:
            # scenario 1: the model range holds something strictly lower, so
            # the candidate is not the ground state; eliminate it and rerun
            # slower
            trace.append({"event": "scenario", "kind": 1,
                          "e_scan": scan.exact_min, "e_candidate": e_cand})
            grown = _grow_T(engine, accepted[-1], T, trace)
            if grown is None:
                return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                              iterations=iteration,
                              reason="candidate eliminated but the time "
                                     "budget is exhausted",
                              cfg_dict=cfg_dict)
            T = grown
            continue

        # scenario 2: candidate energy equals the exact model ground energy
        trace.append({"event": "scenario", "kind": 2,
                      "e_scan": scan.exact_min, "e_candidate": e_cand})
        t2, t4 = 2.0 * T, 4.0 * T
        p1 = ref_dist.probability_of(cand)
        p2 = engine.distribution(cfg.reference_cutoff, t2).probability_of(cand)
        p4 = engine.distribution(cfg.reference_cutoff, t4).probability_of(cand)
        spurious = p4 <= p1 - base.trend_margin
        trace.append({"event": "trend", "times": [T, t2, t4],
                      "probabilities": [p1, p2, p4],
                      "margin": base.trend_margin, "spurious": spurious})
        if spurious:
            grown = _grow_T(engine, accepted[-1], T, trace)
            if grown is None:
                return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                              iterations=iteration,
                              reason="candidate probability decays with T "
                                     "and the time budget is exhausted",
                              cfg_dict=cfg_dict)
            T = grown
            continue

        largest = accepted[-1]
        persists = True
        for tt in (t2, t4):
            supd = sup_distance(engine.distribution(largest.cutoff, tt),
                                engine.distribution(cfg.reference_cutoff, tt))
            trace.append({"event": "persistence", "cutoff": largest.cutoff,
                          "T": tt, "sup_distance": supd,
                          "accepted": supd < base.epsilon})
            if not supd < base.epsilon:
                persists = False
                break
        if not persists:
            grown = _grow_T(engine, largest, T, trace)
            if grown is None:
                return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                              iterations=iteration,
                              reason="model agreement does not persist at "
                                     "larger T and the time budget is exhausted",
                              cfg_dict=cfg_dict)
            T = grown
            continue

        if delta < float(e_cand):
            trace.append({"event": "verdict",
                          "verdict": VERDICT_NO_SOLUTION,
                          "e_ground_estimate": e_ground, "delta": delta})
            return report(VERDICT_NO_SOLUTION, e_candidate=e_cand,
                          e_ground=e_ground, delta=delta,
                          confidence=base.confidence, iterations=iteration,
                          cfg_dict=cfg_dict)

        trace.append({"event": "verdict", "verdict": VERDICT_INCONCLUSIVE,
                      "reason": "fluctuation not below candidate energy"})
        return report(VERDICT_INCONCLUSIVE, e_candidate=e_cand,
                      e_ground=e_ground, delta=delta, iterations=iteration,
                      reason="truncation fluctuation is not below the "
                             "candidate energy",
                      cfg_dict=cfg_dict)

    return report(VERDICT_INCONCLUSIVE, iterations=base.max_iterations,
                  reason="iteration budget exhausted", cfg_dict=cfg_dict)


def _grow_T(engine: _Engine, model: _System, T: float,
            trace: list[dict]) -> float | None:
    """Next run time from the gap heuristic, or None when the budget is spent."""
    base = engine.cfg.base
    t_min = 0.0
    try:
        # interior grid: symmetric equations are exactly degenerate at s = 1,
        # where no finite estimate exists; the heuristic lives on [0, 1)
        grid = np.linspace(0.0, 1.0, base.grid_points + 1)[:-1]
        sched = Schedule(total_time=max(T, 1.0), ramp=engine.ramp, grid=grid)
        m = min(base.levels, model.basis.size)
        if m >= 2:
            flow = spectral_flow(model.hi, model.hp, sched, m, jobs=base.jobs)
            gap = gap_and_time(flow, model.hi, model.hp, refine=False)
            t_min = gap.t_min
            trace.append({"event": "gap_estimate", "cutoff": model.cutoff,
                          "gap": gap.gap, "gap_location": gap.gap_location,
                          "delta_h_norm": gap.delta_h_norm, "t_min": gap.t_min})
    except DegenerateGapError as err:
        trace.append({"event": "gap_degenerate", "cutoff": model.cutoff,
                      "s": err.s, "gap": err.gap})
    t_new = min(max(base.t_growth * T, min(t_min, base.max_T)), base.max_T)
    if t_new <= T:
        trace.append({"event": "time_budget_exhausted", "T": T})
        return None
    trace.append({"event": "grow_T", "from": T, "to": t_new})
    return t_new
