"""Online greedy screening: skip a warmup prefix, then keep an item exactly
when it participates in the current optimum over the items kept so far.

Because the offline solver's tie order is total and consistent across
prefixes, deciding against the kept-items-plus-newcomer set is equivalent
to deciding against the full prefix; the test suite checks this prefix
consistency explicitly on small instances.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

from .core import ConfigError, ConstraintSpec, InputError, Instance, Item, validate_instance
from .matching import Solution, optimal_matching

__all__ = ["TraceStep", "GreedyResult", "warmup_length", "greedy_screen"]


@dataclass(frozen=True, slots=True)
class TraceStep:
    step: int
    item_id: int
    retained: bool
    running_value: float


@dataclass(frozen=True, slots=True)
class GreedyResult:
    """Kept ids in arrival order plus the final optimum over the kept items."""

    retained_ids: tuple[int, ...]
    final_solution: Solution
    trace: tuple[TraceStep, ...] | None = None


def warmup_length(n: int, k: int, delta: float) -> int:
    """floor(delta * n / k), evaluated in exact rational arithmetic.

    The float ``delta`` is taken at its exact binary value, so the floor
    never drifts across an integer boundary through rounding.
    """
    if not isinstance(n, int) or n < 0:
        raise ConfigError(f"n must be a nonnegative integer, got {n!r}")
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if not (0.0 <= delta <= 1.0) or delta != delta:
        raise ConfigError(f"delta must lie in [0, 1], got {delta!r}")
    num, den = float(delta).as_integer_ratio()
    return (num * n) // (den * k)


def _screen_single_property(
    entries: Sequence[tuple[int, Item]],
    spec: ConstraintSpec,
    warmup: int,
    trace: bool,
) -> tuple[list[Item], list[TraceStep] | None]:
    # Keep a min-heap of the current top-k (value, id) pairs; an arrival is
    # in the optimum over kept-plus-self iff it beats the k-th best kept.
    k = spec.k
    heap: list[tuple[float, int]] = []
    kept: list[Item] = []
    steps: list[TraceStep] | None = [] if trace else None
    for pos, item in entries:
        if pos < warmup:
            if steps is not None:
                steps.append(TraceStep(pos, item.id, False, math.fsum(v for v, _ in heap)))
            continue
        entry = (item.props[0], item.id)
        if len(heap) < k:
            heapq.heappush(heap, entry)
            retained = True
        elif entry > heap[0]:
            heapq.heapreplace(heap, entry)
            retained = True
        else:
            retained = False
        if retained:
            kept.append(item)
        if steps is not None:
            steps.append(TraceStep(pos, item.id, retained, math.fsum(v for v, _ in heap)))
    return kept, steps


def _screen_general(
    entries: Sequence[tuple[int, Item]],
    spec: ConstraintSpec,
    warmup: int,
    trace: bool,
) -> tuple[list[Item], list[TraceStep] | None]:
    kept: list[Item] = []
    steps: list[TraceStep] | None = [] if trace else None
    running = 0.0
    for pos, item in entries:
        if pos < warmup:
            if steps is not None:
                steps.append(TraceStep(pos, item.id, False, running))
            continue
        sol = optimal_matching(kept + [item], spec)
        retained = item.id in sol.real_ids()
        if retained:
            kept.append(item)
        # rejected items never displace anyone, so the optimum is unchanged
        running = sol.value
        if steps is not None:
            steps.append(TraceStep(pos, item.id, retained, running))
    return kept, steps


def screen_entries(
    entries: Sequence[tuple[int, Item]],
    spec: ConstraintSpec,
    warmup: int,
    trace: bool = False,
) -> tuple[list[Item], list[TraceStep] | None]:
    """Greedy pass over (original position, item) pairs.

    Positions are compared against ``warmup``, so a filtered subsequence
    keeps its original stream geometry.  Used by both ``greedy_screen``
    and the combined pipeline.
    """
    if spec.d == 1:
        return _screen_single_property(entries, spec, warmup, trace)
    return _screen_general(entries, spec, warmup, trace)


def greedy_screen(
    stream: Instance,
    spec: ConstraintSpec,
    warmup: int,
    trace: bool = False,
) -> GreedyResult:
    """Screen a full stream; returns kept ids and the optimum over them.

    Raises ``InputError`` when the stream fails validation or the warmup
    exceeds the stream length.
    """
    violations = validate_instance(stream, spec)
    if violations:
        first = violations[0]
        raise InputError(
            f"invalid stream: {len(violations)} violation(s), first is {first.kind} ({first.detail})"
        )
    if not isinstance(warmup, int) or warmup < 0 or warmup > stream.n:
        raise InputError(f"warmup must lie in 0..{stream.n}, got {warmup!r}")
    entries = [(item.id, item) for item in stream.items]
    kept, steps = screen_entries(entries, spec, warmup, trace)
    final = optimal_matching(kept, spec)
    return GreedyResult(
        retained_ids=tuple(item.id for item in kept),
        final_solution=final,
        trace=tuple(steps) if steps is not None else None,
    )
