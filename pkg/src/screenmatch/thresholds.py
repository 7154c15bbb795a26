"""Threshold policies: retain an item iff some possessed property's value
clears that property's threshold.

``ABOVE`` (float infinity) is the "retain nothing for this property"
sentinel; a finite threshold t retains values >= t, equality included.
Two learners are provided: thresholds read off an optimal assignment of a
training sample (the minimum assigned value per property), and top-m order
statistics per property.  ``quantile_policy_net`` builds the grid of
empirical quantile policies used by the convergence experiments.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import IO, Sequence

from .core import ConfigError, ConstraintSpec, InputError, Instance, Item
from .matching import optimal_matching

__all__ = [
    "ABOVE",
    "is_above",
    "ThresholdsPolicy",
    "RetentionStats",
    "NetSizeError",
    "apply_policy",
    "screen_with_policy",
    "learn_optimal_thresholds",
    "learn_topm_thresholds",
    "retention_slack",
    "value_slack",
    "quantile_policy_net",
    "read_policy",
    "write_policy",
]

# Sentinel threshold: no finite value reaches it, so the property retains nothing.
ABOVE = float("inf")


def is_above(t: float) -> bool:
    return math.isinf(t) and t > 0


class NetSizeError(RuntimeError):
    """Policy net would exceed the configured cap."""


@dataclass(frozen=True, slots=True)
class ThresholdsPolicy:
    """One threshold per property; entries are floats in [0, 1] or ``ABOVE``."""

    t: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.t) == 0:
            raise ConfigError("policy needs at least one threshold")
        for x in self.t:
            if not (is_above(x) or (0.0 <= x <= 1.0)):
                raise ConfigError(f"threshold {x!r} is neither in [0, 1] nor ABOVE")

    @property
    def d(self) -> int:
        return len(self.t)


@dataclass(frozen=True, slots=True)
class RetentionStats:
    """Counts per property, the total retained, and (when a constraint spec
    was supplied) the optimal assignment value of the retained items."""

    per_property: tuple[int, ...]
    total: int
    value: float | None


def apply_policy(policy: ThresholdsPolicy, item: Item) -> bool:
    """True iff some possessed property's value clears its threshold."""
    t = policy.t
    for p, v in item.props.items():
        if v >= t[p]:
            return True
    return False


def screen_with_policy(
    policy: ThresholdsPolicy,
    inst: Instance,
    spec: ConstraintSpec | None = None,
) -> tuple[tuple[Item, ...], RetentionStats]:
    """Filter a stream through a policy.

    Returns the retained items in arrival order and retention statistics.
    The per-property count for property p counts items that possess p and
    clear t[p] (one item can count toward several properties); the total
    counts distinct retained items.
    """
    if spec is not None and policy.d != spec.d:
        raise ConfigError(f"policy has {policy.d} thresholds but spec has {spec.d} properties")
    t = policy.t
    retained: list[Item] = []
    per_prop = [0] * policy.d
    for item in inst.items:
        hit = False
        for p, v in item.props.items():
            if v >= t[p]:
                per_prop[p] += 1
                hit = True
        if hit:
            retained.append(item)
    value = None
    if spec is not None:
        value = optimal_matching(retained, spec).value
    return tuple(retained), RetentionStats(tuple(per_prop), len(retained), value)


def learn_optimal_thresholds(train: Instance, spec: ConstraintSpec) -> ThresholdsPolicy:
    """Thresholds read off an optimal assignment of the training sample.

    For each property the threshold is the smallest value among the real
    items the optimum assigns to it; properties filled only by dummies
    (or an empty training sample) get threshold 0.
    """
    solution = optimal_matching(train.items, spec)
    by_id = {item.id: item for item in train.items}
    mins: dict[int, float] = {}
    for item_id, prop in solution.assignment:
        if item_id in by_id:
            v = by_id[item_id].props[prop]
            if prop not in mins or v < mins[prop]:
                mins[prop] = v
    return ThresholdsPolicy(tuple(mins.get(p, 0.0) for p in range(spec.d)))


def learn_topm_thresholds(
    train: Instance, spec: ConstraintSpec, m: Sequence[int]
) -> ThresholdsPolicy:
    """Per property p: the m[p]-th largest training value among items
    possessing p, or 0 when fewer than m[p] such items exist."""
    if len(m) != spec.d:
        raise ConfigError(f"m must have {spec.d} entries, got {len(m)}")
    if any((not isinstance(x, int)) or x < 1 for x in m):
        raise ConfigError(f"m entries must be positive integers, got {tuple(m)}")
    out = []
    for p in range(spec.d):
        vals = sorted(
            (item.props[p] for item in train.items if p in item.props), reverse=True
        )
        out.append(vals[m[p] - 1] if len(vals) >= m[p] else 0.0)
    return ThresholdsPolicy(tuple(out))


def _check_slack_args(k: int, d: int, delta: float, c0: float) -> None:
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if not isinstance(d, int) or d < 1:
        raise ConfigError(f"d must be a positive integer, got {d!r}")
    if not (0.0 < delta <= 1.0):
        raise ConfigError(f"delta must lie in (0, 1], got {delta!r}")
    if not (c0 >= 0.0):
        raise ConfigError(f"c0 must be nonnegative, got {c0!r}")


def retention_slack(k: int, d: int, n: int, delta: float, c0: float = 1.0) -> int:
    """How many extra items per property to keep so that, with probability
    at least 1 - delta, per-property retention counts concentrate across a
    sample of size n: ceil(c0 * sqrt(k * (ln(max(d,2)) * ln(n/k) + ln(1/delta))))."""
    _check_slack_args(k, d, delta, c0)
    if not isinstance(n, int) or n <= k:
        raise ConfigError(f"n must be an integer above k={k}, got {n!r}")
    return math.ceil(
        c0 * math.sqrt(k * (math.log(max(d, 2)) * math.log(n / k) + math.log(1 / delta)))
    )


def value_slack(k: int, d: int, delta: float, c0: float = 1.0) -> float:
    """Additive value-error scale: c0 * sqrt(k * (d * ln(max(k,2)) + ln(1/delta)))."""
    _check_slack_args(k, d, delta, c0)
    return c0 * math.sqrt(k * (d * math.log(max(k, 2)) + math.log(1 / delta)))


def quantile_policy_net(
    train: Instance,
    spec: ConstraintSpec,
    n: int,
    k: int,
    max_net_size: int = 20000,
) -> tuple[ThresholdsPolicy, ...]:
    """Cartesian product of per-property empirical quantile thresholds.

    Per property the grid targets retention mass j/(d*n) for
    j = 0..min(10*d*k, available mass), realized as order statistics of the
    training sample; j = 0 becomes ``ABOVE`` and 0 is always appended.  An
    empty training sample yields the single all-zero policy.  Raises
    ``NetSizeError`` when the product would exceed ``max_net_size``.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    d = spec.d
    if train.n == 0:
        return (ThresholdsPolicy((0.0,) * d),)

    per_property: list[list[float]] = []
    for p in range(d):
        vals = sorted((item.props[p] for item in train.items if p in item.props), reverse=True)
        grid: list[float] = [ABOVE]
        j_cap = 10 * d * k
        for j in range(1, j_cap + 1):
            count = round(j * train.n / (d * n))
            if count < 1:
                continue
            if count > len(vals):
                break
            grid.append(vals[count - 1])
        grid.append(0.0)
        per_property.append(list(dict.fromkeys(grid)))

    size = math.prod(len(g) for g in per_property)
    if size > max_net_size:
        raise NetSizeError(
            f"policy net would hold {size} policies; raise max_net_size to at least {size}"
        )
    return tuple(ThresholdsPolicy(ts) for ts in itertools.product(*per_property))


def write_policy(policy: ThresholdsPolicy, fh: IO[str]) -> None:
    encoded = ["ABOVE" if is_above(x) else x for x in policy.t]
    json.dump({"t": encoded}, fh, sort_keys=True)
    fh.write("\n")


def read_policy(fh: IO[str], source: str = "<policy>") -> ThresholdsPolicy:
    try:
        obj = json.load(fh)
        raw = obj["t"]
        t = tuple(ABOVE if x == "ABOVE" else float(x) for x in raw)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: malformed policy ({exc})") from exc
    try:
        return ThresholdsPolicy(t)
    except ConfigError as exc:
        raise InputError(f"{source}: {exc}") from exc
