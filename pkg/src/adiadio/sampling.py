"""Measurement emulation: seeded histograms over evolved distributions.

Sampling uses the counter-based Philox generator so histograms are exactly
reproducible from (seed, jobs): worker w draws its share from an independent
stream keyed by (seed, w), and partitioning the repetitions over workers is
deterministic, so the same pair always yields the same counts regardless of
scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import Distribution
from .poly import Polynomial, evaluate
from .serialize import dumps

__all__ = [
    "IncomparableBasesError",
    "repetitions_needed",
    "SamplingPlan",
    "sample_histogram",
    "candidate_state",
    "sup_distance",
    "export_histogram",
]


class IncomparableBasesError(ValueError):
    """Distributions live on bases that cannot be aligned state-by-state."""


def repetitions_needed(epsilon: float, confidence: float) -> int:
    """Smallest repetition count with sup-norm error <= epsilon at the given
    confidence: ceil(1 / (epsilon^2 (1 - confidence)))."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence!r}")
    bound = 1.0 / (epsilon * epsilon * (1.0 - confidence))
    # rounding slack keeps e.g. (0.5, 0.9) at the exact bound 40 instead of
    # ceiling the representation noise up to 41
    return int(math.ceil(bound * (1.0 - 1e-12)))


@dataclass(frozen=True)
class SamplingPlan:
    """Accuracy target, confidence, seed, and the repetition count they imply.

    repetitions defaults to the bound and may only be raised above it.
    """

    epsilon: float
    confidence: float
    seed: int
    repetitions: int | None = None

    def __post_init__(self):
        bound = repetitions_needed(self.epsilon, self.confidence)
        if self.repetitions is None:
            object.__setattr__(self, "repetitions", bound)
        elif self.repetitions < bound:
            raise ValueError(
                f"{self.repetitions} repetitions is below the required bound {bound}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "confidence": self.confidence,
            "seed": int(self.seed),
            "repetitions": int(self.repetitions),
        }


def _worker_counts(total: int, jobs: int) -> list[int]:
    base, extra = divmod(total, jobs)
    return [base + (1 if w < extra else 0) for w in range(jobs)]


def sample_histogram(dist: Distribution, plan: SamplingPlan,
                     jobs: int = 1) -> Distribution:
    """Draw plan.repetitions outcomes and return the empirical distribution.

    The result carries integer counts, source "sampled_histogram", and
    accuracy = plan.epsilon.  Bit-identical for fixed (seed, jobs).
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    dim = dist.basis.size
    counts = np.zeros(dim, dtype=np.int64)
    for w, cnt in enumerate(_worker_counts(plan.repetitions, jobs)):
        if cnt == 0:
            continue
        gen = np.random.Generator(
            np.random.Philox(key=np.array([plan.seed, w], dtype=np.uint64)))
        draws = gen.choice(dim, size=cnt, p=dist.probs)
        counts += np.bincount(draws, minlength=dim)
    probs = counts.astype(np.float64) / float(plan.repetitions)
    probs /= probs.sum()
    return Distribution(basis=dist.basis, probs=probs,
                        source="sampled_histogram", accuracy=plan.epsilon,
                        counts=counts)


def candidate_state(hist: Distribution, p: Polynomial) -> tuple[tuple[int, ...], int]:
    """Observed state minimizing the exact squared polynomial value.

    Ties go to the higher count, then to lexicographic state order.  Returns
    (state, exact squared value).
    """
    if hist.counts is None:
        raise ValueError("candidate selection needs a sampled histogram with counts")
    if p.num_vars != hist.basis.num_modes:
        raise ValueError(
            f"polynomial has {p.num_vars} variables, basis has {hist.basis.num_modes} modes")
    best: tuple[int, int, tuple[int, ...]] | None = None
    for idx in np.nonzero(hist.counts)[0]:
        state = hist.basis.states[int(idx)]
        v = evaluate(p, state)
        key = (v * v, -int(hist.counts[idx]), state)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("histogram holds no observations")
    return best[2], best[0]


def sup_distance(a: Distribution, b: Distribution) -> float:
    """Sup-norm distance between distributions on comparable bases.

    Bases are comparable when equal, or when one's state list is a prefix of
    the other's (total-occupation truncations at different cutoffs); the
    shorter vector is zero-padded.
    """
    pa, pb = a.probs, b.probs
    if a.basis is not b.basis:
        sa, sb = a.basis.states, b.basis.states
        if a.basis.num_modes != b.basis.num_modes or a.basis.scheme != b.basis.scheme:
            raise IncomparableBasesError(
                "bases differ in mode count or truncation scheme")
        if len(sa) <= len(sb):
            if sb[:len(sa)] != sa:
                raise IncomparableBasesError(
                    "smaller basis is not a prefix of the larger one")
            pa = np.concatenate([pa, np.zeros(len(sb) - len(sa))])
        else:
            if sa[:len(sb)] != sb:
                raise IncomparableBasesError(
                    "smaller basis is not a prefix of the larger one")
            pb = np.concatenate([pb, np.zeros(len(sa) - len(sb))])
    return float(np.max(np.abs(pa - pb))) if len(pa) else 0.0


def export_histogram(hist: Distribution, plan: SamplingPlan,
                     path: str | None = None) -> dict:
    """JSON payload for a sampled histogram: plan, basis, nonzero counts."""
    if hist.counts is None:
        raise ValueError("not a sampled histogram")
    payload = {
        "basis": hist.basis.meta(),
        "plan": plan.to_dict(),
        "counts": [
            {"state": list(hist.basis.states[int(i)]), "count": int(hist.counts[i])}
            for i in np.nonzero(hist.counts)[0]
        ],
    }
    if path is not None:
        with open(path, "w") as fh:
            fh.write(dumps(payload))
            fh.write("\n")
    return payload
