"""Cross-validated hyper-parameter search with coarse-to-fine smoothness refinement."""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .classifier import LevelConfig
from .data import POSITIVE, DataError, LabeledStream
from .evaluation import ERISK_C_FN, ERISK_C_FP, ERISK_C_TP, decide_all, score_decisions
from .model import Hyperparams, Model, Tokenizer
from .stream import EarlyPolicy


@dataclass(frozen=True)
class SearchSpec:
    folds: int = 4
    objective: str = "erde"  # "erde" (minimized at deadline ``o``) or "f1" (maximized)
    o: int = 50
    sigma_center: float = 0.5
    sigma_steps: tuple[float, ...] = (0.1, 0.01, 0.001)
    sigma_k: int = 5
    lambda_grid: tuple[float, ...] = (1.0,)
    rho_grid: tuple[float, ...] = (1.0,)
    seed: int = 0
    c_fp: float = ERISK_C_FP
    c_fn: float = ERISK_C_FN
    c_tp: float = ERISK_C_TP

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if not self.lambda_grid or not self.rho_grid:
            raise ValueError("lambda and rho grids must be non-empty")
        if self.objective not in ("erde", "f1"):
            raise ValueError(f"unknown objective {self.objective!r}")


def kfold_split(subjects: Sequence[LabeledStream], folds: int, seed: int = 0) -> list[list[int]]:
    """Label-stratified fold assignment; returns subject indices per fold."""
    by_label: dict[str, list[int]] = {}
    for i, s in enumerate(subjects):
        if s.truth is None:
            raise DataError(f"subject {s.subject_id!r} has no label")
        by_label.setdefault(s.truth, []).append(i)
    for label, idx in by_label.items():
        if len(idx) < folds:
            raise DataError(f"only {len(idx)} {label!r} subjects for {folds} folds")
    rng = random.Random(seed)
    out: list[list[int]] = [[] for _ in range(folds)]
    offset = 0
    for label in sorted(by_label):
        idx = list(by_label[label])
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            out[(j + offset) % folds].append(i)
        offset += len(idx)
    return [sorted(f) for f in out]


def sigma_candidates(center: float, step: float, k_max: int = 5) -> list[float]:
    """``center +- k*step`` for ``k`` in ``[0, k_max]``, restricted to (0, 1]."""
    vals = {round(center + k * step, 10) for k in range(-k_max, k_max + 1)}
    return sorted(v for v in vals if 0.0 < v <= 1.0)


def refine_sigma(score: Callable[[float], float], spec: SearchSpec = SearchSpec()) -> tuple[float, float, list[tuple[float, float]]]:
    """Minimize ``score`` over successively finer grids centered on the previous best.

    Ties go to the smaller sigma.  Returns ``(sigma, score, evaluated)``,
    where ``evaluated`` lists every ``(sigma, score)`` in evaluation order.
    """
    center = spec.sigma_center
    seen: dict[float, float] = {}
    evaluated = []
    best = None
    for step in spec.sigma_steps:
        level = []
        for s in sigma_candidates(center, step, spec.sigma_k):
            if s not in seen:
                seen[s] = score(s)
                evaluated.append((s, seen[s]))
            level.append((seen[s], s))
        best = min(level)
        center = best[1]
    return best[1], best[0], evaluated


def _fold_models(dataset: Sequence[LabeledStream], folds: list[list[int]], categories: Sequence[str], tokenizer: Tokenizer) -> list[Model]:
    out = []
    for f in range(len(folds)):
        held = set(folds[f])
        m = Model(list(categories), tokenizer=tokenizer)
        for i, s in enumerate(dataset):
            if i in held:
                continue
            for text in s.items:
                m.learn_document(text, s.truth)
        out.append(m)
    return out


@dataclass
class CrossValidator:
    """Scores hyper-parameters by k-fold cross-validation of early decisions.

    Term counts do not depend on hyper-parameters, so each fold's training
    profiles are counted once and re-valued for every candidate.
    """

    dataset: Sequence[LabeledStream]
    spec: SearchSpec = field(default_factory=SearchSpec)
    policy: Optional[EarlyPolicy] = None
    level_config: Optional[LevelConfig] = None
    tokenizer: Tokenizer = field(default_factory=Tokenizer)
    jobs: int = 1

    def __post_init__(self):
        self.folds = kfold_split(self.dataset, self.spec.folds, self.spec.seed)
        labels = sorted({s.truth for s in self.dataset})
        if POSITIVE not in labels or len(labels) != 2:
            raise DataError(f"tuning needs binary positive/negative labels, got {labels}")
        self.categories = labels
        self.models = _fold_models(self.dataset, self.folds, labels, self.tokenizer)
        if self.policy is None:
            self.policy = EarlyPolicy.threshold(labels.index(POSITIVE), 1 - labels.index(POSITIVE))

    def fold_scores(self, hp: Hyperparams) -> list[float]:
        out = []
        for f, base in enumerate(self.models):
            model = base.with_hyperparams(hp)
            val = [self.dataset[i] for i in self.folds[f]]
            decisions = decide_all(model, self.policy, val, "per_post", level_config=self.level_config, jobs=self.jobs)
            spec = self.spec
            rep = score_decisions(decisions, (spec.o,), spec.c_fp, spec.c_fn, spec.c_tp)
            out.append(rep.erde[spec.o] if spec.objective == "erde" else rep.f1)
        return out

    def score(self, hp: Hyperparams) -> float:
        """Mean fold score, oriented so that lower is better."""
        scores = self.fold_scores(hp)
        mean = sum(scores) / len(scores)
        return mean if self.spec.objective == "erde" else -mean


def search_sigma(cv: CrossValidator, lam: float = 1.0, rho: float = 1.0) -> tuple[float, float]:
    sigma, score, _ = refine_sigma(lambda s: cv.score(Hyperparams(s, lam, rho)), cv.spec)
    return sigma, score


@dataclass
class GridRow:
    lam: float
    rho: float
    sigma: float
    fold_scores: list[float]
    mean: float


def grid_search(cv: CrossValidator) -> list[GridRow]:
    """Nested sigma refinement for every (lambda, rho); rows ranked best first."""
    rows = []
    for lam in cv.spec.lambda_grid:
        for rho in cv.spec.rho_grid:
            sigma, _ = search_sigma(cv, lam, rho)
            folds = cv.fold_scores(Hyperparams(sigma, lam, rho))
            rows.append(GridRow(lam, rho, sigma, folds, sum(folds) / len(folds)))
    sign = 1.0 if cv.spec.objective == "erde" else -1.0
    rows.sort(key=lambda r: (sign * r.mean, r.lam, r.rho, r.sigma))
    return rows


def format_score_table(rows: Sequence[GridRow]) -> str:
    n_folds = max((len(r.fold_scores) for r in rows), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "rho", "sigma"] + [f"fold_{i}" for i in range(n_folds)] + ["mean"])
    for r in rows:
        w.writerow([repr(r.lam), repr(r.rho), repr(r.sigma)] + [repr(s) for s in r.fold_scores] + [repr(r.mean)])
    return buf.getvalue()


def write_score_table(rows: Sequence[GridRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(format_score_table(rows))


def best_config(rows: Sequence[GridRow], spec: SearchSpec) -> dict:
    best = rows[0]
    return {
        "hyperparams": {"sigma": best.sigma, "lambda": best.lam, "rho": best.rho},
        "objective": spec.objective,
        "o": spec.o,
        "score": best.mean,
    }


def write_best_config(rows: Sequence[GridRow], spec: SearchSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(best_config(rows, spec), f, indent=2)
        f.write("\n")
