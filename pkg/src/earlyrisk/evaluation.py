"""Time-aware early-detection metrics and the streaming evaluation harness."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .classifier import LevelConfig
from .data import NEGATIVE, POSITIVE, DataError, LabeledStream
from .model import Model
from .stream import EarlyPolicy, Status, run_subject

DEFAULT_DEADLINES = (5, 10, 30, 50, 75, 100)

# eRisk 2017 pilot task costs
ERISK_C_FP = 0.129
ERISK_C_FN = 1.0
ERISK_C_TP = 1.0


@dataclass(frozen=True)
class ErdeConfig:
    o: int = 50
    c_fp: float = ERISK_C_FP
    c_fn: float = ERISK_C_FN
    c_tp: float = ERISK_C_TP

    def __post_init__(self):
        if self.o < 1:
            raise ValueError(f"deadline o must be >= 1, got {self.o}")
        if min(self.c_fp, self.c_fn, self.c_tp) < 0:
            raise ValueError("costs must be non-negative")


def latency_cost(k: int, o: int) -> float:
    """``1 - 1 / (1 + e^(k - o))``, evaluated without overflow."""
    x = k - o
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _as_label(v) -> str:
    if isinstance(v, Status):
        v = v.value
    if v in ("p", POSITIVE):
        return POSITIVE
    if v in ("n", NEGATIVE):
        return NEGATIVE
    raise ValueError(f"expected a positive/negative label, got {v!r}")


def erde(decision, truth, k: int, cfg: ErdeConfig) -> float:
    """Early Risk Detection Error of one subject."""
    d = _as_label(decision)
    t = _as_label(truth)
    if d == POSITIVE and t == NEGATIVE:
        return cfg.c_fp
    if d == NEGATIVE and t == POSITIVE:
        return cfg.c_fn
    if d == POSITIVE:
        return latency_cost(k, cfg.o) * cfg.c_tp
    return 0.0


def chunk_split(items: Sequence, m: int = 10) -> list[list]:
    """Contiguous balanced partition into ``m`` chunks; earlier chunks take the remainder."""
    if m < 1:
        raise ValueError("number of chunks must be >= 1")
    q, r = divmod(len(items), m)
    out = []
    pos = 0
    for i in range(m):
        size = q + (1 if i < r else 0)
        out.append(list(items[pos:pos + size]))
        pos += size
    return out


@dataclass
class SubjectDecision:
    subject_id: str
    decision: str
    k: int
    truth: Optional[str] = None


@dataclass
class MetricsReport:
    erde: dict[int, float]
    f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined: list[str] = field(default_factory=list)
    subjects: list[SubjectDecision] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["erde"] = {str(o): v for o, v in self.erde.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def rows(self) -> list[tuple[str, str, float]]:
        rows = [("erde", str(o), v) for o, v in self.erde.items()]
        rows += [("f1", "", self.f1), ("precision", "", self.precision), ("recall", "", self.recall)]
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(("metric", "o", "value"))
            for metric, o, v in self.rows():
                w.writerow((metric, o, repr(v)))


def score_decisions(
    decisions: Sequence[SubjectDecision],
    deadlines: Sequence[int] = DEFAULT_DEADLINES,
    c_fp: float = ERISK_C_FP,
    c_fn: float = ERISK_C_FN,
    c_tp: float = ERISK_C_TP,
) -> MetricsReport:
    """ERDE_o (mean over subjects, in percent) and positive-class F1/precision/recall."""
    if not decisions:
        raise DataError("cannot evaluate an empty dataset")
    for s in decisions:
        if s.truth is None:
            raise DataError(f"subject {s.subject_id!r} has no label")
    n = len(decisions)
    erdes = {}
    for o in deadlines:
        cfg = ErdeConfig(o, c_fp, c_fn, c_tp)
        total = 0.0
        for s in decisions:
            total += erde(s.decision, s.truth, s.k, cfg)
        erdes[o] = 100.0 * total / n
    tp = sum(1 for s in decisions if s.decision == POSITIVE and s.truth == POSITIVE)
    fp = sum(1 for s in decisions if s.decision == POSITIVE and s.truth == NEGATIVE)
    fn = sum(1 for s in decisions if s.decision == NEGATIVE and s.truth == POSITIVE)
    tn = n - tp - fp - fn
    undefined = []
    if tp + fp == 0:
        precision = 0.0
        undefined.append("precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        undefined.append("recall")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        undefined.append("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(erdes, f1, precision, recall, tp, fp, tn, fn, undefined, list(decisions))


def stream_items(stream: LabeledStream, mode: str = "per_post", chunks: int = 10) -> list:
    if mode == "per_post":
        return list(stream.items)
    if mode == "chunked":
        return chunk_split(stream.items, chunks)
    raise ValueError(f"unknown mode {mode!r}")


_worker: dict = {}


def _init_worker(model, policy, level_config, mode, chunks):
    _worker.update(model=model, policy=policy, level_config=level_config, mode=mode, chunks=chunks)


def _decide(stream: LabeledStream) -> SubjectDecision:
    w = _worker
    run = run_subject(
        w["model"],
        stream_items(stream, w["mode"], w["chunks"]),
        w["policy"],
        w["level_config"],
        subject_id=stream.subject_id,
        stop_on_decision=True,
    )
    return SubjectDecision(stream.subject_id, run.decision.value, run.k, stream.truth)


def decide_all(
    model: Model,
    policy: EarlyPolicy,
    dataset: Sequence[LabeledStream],
    mode: str = "per_post",
    chunks: int = 10,
    level_config: Optional[LevelConfig] = None,
    jobs: int = 1,
) -> list[SubjectDecision]:
    """Early decision for every subject, in dataset order."""
    level_config = level_config or LevelConfig.default()
    if model.gv_cache is None:
        model.update_global_values()
    args = (model, policy, level_config, mode, chunks)
    if jobs <= 1 or len(dataset) < 2:
        _init_worker(*args)
        return [_decide(s) for s in dataset]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=args) as ex:
        return list(ex.map(_decide, dataset, chunksize=max(1, len(dataset) // (4 * jobs))))


def evaluate(
    model: Model,
    policy: EarlyPolicy,
    dataset: Sequence[LabeledStream],
    mode: str = "per_post",
    deadlines: Sequence[int] = DEFAULT_DEADLINES,
    chunks: int = 10,
    c_fp: float = ERISK_C_FP,
    c_fn: float = ERISK_C_FN,
    c_tp: float = ERISK_C_TP,
    level_config: Optional[LevelConfig] = None,
    jobs: int = 1,
) -> MetricsReport:
    if not dataset:
        raise DataError("cannot evaluate an empty dataset")
    t0 = time.perf_counter()
    decisions = decide_all(model, policy, dataset, mode, chunks, level_config, jobs)
    report = score_decisions(decisions, deadlines, c_fp, c_fn, c_tp)
    report.wall_time = time.perf_counter() - t0
    return report
