"""Per-subject streaming state and early-decision policies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .classifier import LevelConfig, Vector, add, chunk_vector, text_vector, zeros
from .model import Model

Item = Union[str, Sequence[str]]


class Status(str, Enum):
    PENDING = "pending"
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class EarlyPolicy:
    """When to emit an early positive decision.

    ``threshold``: accumulated positive value strictly above the negative one.
    ``slope_ratio``: the latest positive change is more than ``ratio_min``
    times the negative change and larger than ``min_change``.
    ``composite``: fires if any member does.
    """

    kind: str = "threshold"
    positive_index: int = 1
    negative_index: int = 0
    ratio_min: float = 4.0
    min_change: float = 0.0
    members: tuple["EarlyPolicy", ...] = ()

    def __post_init__(self):
        if self.kind not in ("threshold", "slope_ratio", "composite"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "slope_ratio":
            if not self.ratio_min > 0:
                raise ValueError("ratio_min must be positive")
            if self.min_change < 0:
                raise ValueError("min_change must be non-negative")
        if self.kind == "composite" and not self.members:
            raise ValueError("composite policy needs members")

    @classmethod
    def threshold(cls, positive_index: int = 1, negative_index: int = 0) -> "EarlyPolicy":
        return cls("threshold", positive_index, negative_index)

    @classmethod
    def slope_ratio(cls, ratio_min: float = 4.0, min_change: float = 0.0, positive_index: int = 1, negative_index: int = 0) -> "EarlyPolicy":
        return cls("slope_ratio", positive_index, negative_index, ratio_min, min_change)

    @classmethod
    def composite(cls, *members: "EarlyPolicy") -> "EarlyPolicy":
        first = members[0]
        return cls("composite", first.positive_index, first.negative_index, members=tuple(members))

    @classmethod
    def delta(cls, ratio_min: float = 4.0, min_change: float = 0.0, positive_index: int = 1, negative_index: int = 0) -> "EarlyPolicy":
        """Threshold or slope ratio, whichever fires first."""
        return cls.composite(
            cls.threshold(positive_index, negative_index),
            cls.slope_ratio(ratio_min, min_change, positive_index, negative_index),
        )

    def fires(self, acc: Sequence[float], delta: Sequence[float]) -> Optional[str]:
        """Name of the (first) rule that fires, or None."""
        if self.kind == "threshold":
            return "threshold" if acc[self.positive_index] > acc[self.negative_index] else None
        if self.kind == "slope_ratio":
            d_pos = delta[self.positive_index]
            d_neg = delta[self.negative_index]
            if d_pos <= self.min_change:
                return None
            if d_neg <= 0:
                return "slope_ratio"
            return "slope_ratio" if d_pos / d_neg > self.ratio_min else None
        for m in self.members:
            name = m.fires(acc, delta)
            if name:
                return name
        return None


def slope_ratio(delta: Sequence[float], positive_index: int = 1, negative_index: int = 0) -> float:
    d_neg = delta[negative_index]
    if d_neg <= 0:
        return math.inf if delta[positive_index] > 0 else 0.0
    return delta[positive_index] / d_neg


@dataclass
class SubjectState:
    subject_id: str
    acc: Vector
    last_delta: Vector
    items_seen: int = 0
    steps: int = 0
    status: Status = Status.PENDING
    decided_at: Optional[int] = None
    fired: Optional[str] = None
    history: Optional[list[Vector]] = None

    @classmethod
    def new(cls, subject_id: str, n_categories: int, keep_history: bool = False) -> "SubjectState":
        z = zeros(n_categories)
        return cls(subject_id, z, z, history=[] if keep_history else None)

    @property
    def decided(self) -> bool:
        return self.status is not Status.PENDING


@dataclass
class TrajectoryPoint:
    step: int
    k: int
    acc: Vector
    delta: Vector
    fired: Optional[str]


def item_vector(model: Model, item: Item, level_config: LevelConfig) -> tuple[Vector, int]:
    """Vector of one stream item and the number of writings it holds."""
    if isinstance(item, str):
        return text_vector(model, item, level_config), 1
    return chunk_vector(model, item, level_config), len(item)


def feed(state: SubjectState, model: Model, item: Item, policy: EarlyPolicy, level_config: Optional[LevelConfig] = None) -> tuple[SubjectState, Status]:
    """Process one writing (a string) or one chunk (a list of writings).

    Only the new item is classified; the accumulated vector summarizes
    everything seen before.  Once decided, later items still advance
    ``acc`` and ``items_seen`` but never change the decision.
    """
    level_config = level_config or LevelConfig.default()
    delta, n_writings = item_vector(model, item, level_config)
    state.acc = add(state.acc, delta)
    state.last_delta = delta
    state.items_seen += n_writings
    state.steps += 1
    if state.history is not None:
        state.history.append(delta)
    if not state.decided:
        name = policy.fires(state.acc, delta)
        if name:
            state.status = Status.POSITIVE
            state.decided_at = state.items_seen
            state.fired = name
    return state, state.status


def finalize(state: SubjectState) -> Status:
    if not state.decided:
        state.status = Status.NEGATIVE
        state.decided_at = state.items_seen
    return state.status


@dataclass
class SubjectRun:
    subject_id: str
    decision: Status
    k: int
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    acc: Vector = ()


def run_subject(
    model: Model,
    items: Iterable[Item],
    policy: EarlyPolicy,
    level_config: Optional[LevelConfig] = None,
    subject_id: str = "",
    stop_on_decision: bool = False,
) -> SubjectRun:
    """Stream a subject's items through ``feed`` and close the decision.

    With ``stop_on_decision`` reading stops at the first positive decision;
    the decision and ``k`` are the same either way.
    """
    level_config = level_config or LevelConfig.default()
    state = SubjectState.new(subject_id, model.n_categories)
    trajectory = []
    for item in items:
        was_decided = state.decided
        feed(state, model, item, policy, level_config)
        fired = state.fired if (state.decided and not was_decided) else None
        trajectory.append(TrajectoryPoint(state.steps, state.items_seen, state.acc, state.last_delta, fired))
        if stop_on_decision and state.decided:
            break
    decision = finalize(state)
    return SubjectRun(subject_id, decision, state.decided_at, trajectory, state.acc)


TRAJECTORY_FIELDS = ("item_index", "k", "acc_neg", "acc_pos", "delta_neg", "delta_pos", "fired_policy")


def write_trajectory_csv(run: SubjectRun, path, positive_index: int = 1, negative_index: int = 0) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(TRAJECTORY_FIELDS)
        for p in run.trajectory:
            w.writerow(
                [
                    p.step,
                    p.k,
                    repr(p.acc[negative_index]),
                    repr(p.acc[positive_index]),
                    repr(p.delta[negative_index]),
                    repr(p.delta[positive_index]),
                    p.fired or "",
                ]
            )
