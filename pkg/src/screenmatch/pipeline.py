"""Combined screening: learn a threshold policy on a training sample, then
run the online greedy pass over the policy-filtered stream.

Two modes:

- ``value-approx``: thresholds read off the training sample's optimal
  assignment; cheap, aims at near-optimal final value.
- ``exact-opt``: per-property top-(k + slack) thresholds, where the slack
  grows like sqrt(k log ...) so that with probability 1 - delta the
  filtered stream still contains a full-stream optimum.

The failure budget delta is split across three sources (threshold
coverage, retention-count convergence, greedy warmup); the warmup is
counted in original stream positions, so filtering never shortens it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ConfigError, ConstraintSpec, InputError, Instance, validate_instance
from .greedy import screen_entries, warmup_length
from .matching import Solution, exact_solution_value, optimal_matching
from .thresholds import (
    ThresholdsPolicy,
    apply_policy,
    is_above,
    learn_optimal_thresholds,
    learn_topm_thresholds,
    retention_slack,
)

__all__ = ["PIPELINE_MODES", "PipelineConfig", "PipelineResult", "run_pipeline"]

PIPELINE_MODES = ("value-approx", "exact-opt")


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Mode, failure budget, slack constant, and the delta split.

    ``delta_split`` weights the budget across (threshold coverage,
    convergence, greedy warmup); it must be nonnegative and sum to 1.
    """

    mode: str
    delta: float
    c0: float = 1.0
    delta_split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        if self.mode not in PIPELINE_MODES:
            raise ConfigError(f"mode must be one of {PIPELINE_MODES}, got {self.mode!r}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not (self.c0 >= 0.0):
            raise ConfigError(f"c0 must be nonnegative, got {self.c0!r}")
        if len(self.delta_split) != 3 or any(w < 0.0 for w in self.delta_split):
            raise ConfigError(f"delta_split needs three nonnegative weights, got {self.delta_split}")
        if abs(sum(self.delta_split) - 1.0) > 1e-12:
            raise ConfigError(f"delta_split must sum to 1, got {self.delta_split}")


@dataclass(frozen=True, slots=True)
class PipelineResult:
    policy: ThresholdsPolicy
    retained_after_policy: int
    retained_final: int
    final_solution: Solution
    optimal_vs_fullstream: bool
    value_gap: float

    def to_json_obj(self) -> dict:
        return {
            "policy": {"t": ["ABOVE" if is_above(x) else x for x in self.policy.t]},
            "retained_after_policy": self.retained_after_policy,
            "retained_final": self.retained_final,
            "final_solution": self.final_solution.to_json_obj(),
            "optimal_vs_fullstream": self.optimal_vs_fullstream,
            "value_gap": self.value_gap,
        }


def run_pipeline(
    train: Instance,
    stream: Instance,
    spec: ConstraintSpec,
    cfg: PipelineConfig,
) -> PipelineResult:
    """Learn on ``train``, screen ``stream``, and compare against the
    full-stream optimum (diagnostic, computed offline)."""
    for name, inst in (("train", train), ("stream", stream)):
        violations = validate_instance(inst, spec)
        if violations:
            first = violations[0]
            raise InputError(
                f"invalid {name}: {len(violations)} violation(s), first is "
                f"{first.kind} ({first.detail})"
            )

    n, k = stream.n, spec.k
    w_cover, w_conv, w_warm = cfg.delta_split
    if cfg.mode == "value-approx":
        policy = learn_optimal_thresholds(train, spec)
    else:
        slack = retention_slack(k, spec.d, max(n, k + 1), cfg.delta * w_conv, cfg.c0)
        policy = learn_topm_thresholds(train, spec, [k + slack] * spec.d)

    warmup = warmup_length(n, k, cfg.delta * w_warm)
    survivors = [(item.id, item) for item in stream.items if apply_policy(policy, item)]
    kept, _ = screen_entries(survivors, spec, warmup)
    final = optimal_matching(kept, spec)

    full = optimal_matching(stream.items, spec)
    exact_final = exact_solution_value(stream.items, final)
    exact_full = exact_solution_value(stream.items, full)
    return PipelineResult(
        policy=policy,
        retained_after_policy=len(survivors),
        retained_final=len(kept),
        final_solution=final,
        optimal_vs_fullstream=(exact_final == exact_full),
        value_gap=full.value - final.value,
    )
