"""Truncated multimode Fock bases.

The default truncation keeps every state with total occupation at or below
the cutoff, ordered by ascending total and then lexicographically.  That
ordering is prefix-stable: growing the cutoff appends states, so indices keep
their meaning and distributions over nested bases stay directly comparable.
A per-mode truncation (each occupation capped separately) is available as an
alternative; it uses the same (total, lex) ordering but is not prefix-stable
in the cutoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["MAX_STATES", "BasisSizeError", "FockBasis", "enumerate_basis", "index_of"]

MAX_STATES = 2_000_000

SCHEMES = ("total", "per_mode")


class BasisSizeError(ValueError):
    """Requested basis exceeds the state-count cap."""


@dataclass(frozen=True)
class FockBasis:
    """Immutable enumeration of occupation tuples with a reverse index."""

    num_modes: int
    cutoff: int
    scheme: str
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def meta(self) -> dict:
        return {
            "num_modes": self.num_modes,
            "cutoff": self.cutoff,
            "scheme": self.scheme,
            "size": self.size,
        }


def _compositions(total: int, parts: int):
    # ascending lexicographic within a fixed total
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_basis(num_modes: int, cutoff: int, scheme: str = "total",
                    max_states: int = MAX_STATES) -> FockBasis:
    """Build the truncated basis for `num_modes` modes.

    scheme "total": states with sum(n) <= cutoff, C(cutoff+K, K) of them.
    scheme "per_mode": states with each n_i <= cutoff, (cutoff+1)^K of them.
    Both use ascending (total, lex) ordering.  Raises BasisSizeError before
    allocating anything when the count would exceed max_states.
    """
    if num_modes < 1:
        raise ValueError("num_modes must be at least 1")
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown truncation scheme {scheme!r}")

    if scheme == "total":
        size = math.comb(cutoff + num_modes, num_modes)
    else:
        size = (cutoff + 1) ** num_modes
    if size > max_states:
        raise BasisSizeError(
            f"basis would hold {size} states, above the cap of {max_states}; "
            "lower the cutoff or raise max_states")

    states: list[tuple[int, ...]] = []
    if scheme == "total":
        for total in range(cutoff + 1):
            states.extend(_compositions(total, num_modes))
    else:
        for total in range(num_modes * cutoff + 1):
            for s in _compositions(total, num_modes):
                if max(s) <= cutoff:
                    states.append(s)
    index = {s: i for i, s in enumerate(states)}
    return FockBasis(num_modes=num_modes, cutoff=cutoff, scheme=scheme,
                     states=tuple(states), index=index)


def index_of(basis: FockBasis, occupations) -> int | None:
    """Index of an occupation tuple, or None when it lies outside the basis."""
    occ = tuple(occupations)
    if len(occ) != basis.num_modes:
        raise ValueError(
            f"occupation tuple has {len(occ)} modes, expected {basis.num_modes}")
    return basis.index.get(occ)
