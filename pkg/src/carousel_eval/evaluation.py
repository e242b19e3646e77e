"""Individual (per-list NDCG) and conditional carousel (page NDCG2D) evaluation.

In the carousel setting a candidate is scored as the last row of a page whose
upper rows are produced by a fixed set of models. Every carousel is generated
independently: a model does not know what the others show.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .data import DataSplit, InteractionMatrix
from .metrics import (
    EVEN,
    DiscountWeights,
    hit_heatmap,
    ndcg_at_k_batch,
    page_ndcg2d_batch,
)
from .recommenders import Model, recommend_batch

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["model", "individual_ndcg", "carousel_ndcg2d", "individual_rank", "carousel_rank", "delta_rank"]


@dataclass(frozen=True)
class EvaluationConfig:
    k: int = 10
    weights: DiscountWeights = EVEN
    fixed_models: tuple[str, ...] = ()
    candidate_models: tuple[str, ...] = ()
    exclude_seen: bool = True
    # minimum held-out rating counted as relevant; None means any interaction
    relevance_threshold: float | None = None
    normalize: bool = True
    batch_size: int = 1024

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "fixed_models", tuple(self.fixed_models))
        object.__setattr__(self, "candidate_models", tuple(self.candidate_models))


def relevant_counts(target: InteractionMatrix, threshold: float | None = None) -> np.ndarray:
    X = target.csr
    if threshold is None:
        return np.diff(X.indptr)
    rows = np.repeat(np.arange(X.shape[0]), np.diff(X.indptr))
    return np.bincount(rows[X.data >= threshold], minlength=X.shape[0])


def evaluable_users(target: InteractionMatrix, threshold: float | None = None) -> np.ndarray:
    """Users with at least one relevant held-out interaction."""
    return np.flatnonzero(relevant_counts(target, threshold) > 0)


def relevance_mask(target: InteractionMatrix, users: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Boolean (len(users), n_items) matrix of relevant held-out items."""
    sub = target.csr[users]
    mask = np.zeros((len(users), target.n_items), dtype=bool)
    rows = np.repeat(np.arange(len(users)), np.diff(sub.indptr))
    keep = slice(None) if threshold is None else sub.data >= threshold
    mask[rows[keep], sub.indices[keep]] = True
    return mask


class _Run:
    """Shared state for one evaluation pass: users, lists per model, batching."""

    def __init__(self, split: DataSplit, cfg: EvaluationConfig, on: str):
        self.cfg = cfg
        self.train = split.train
        self.target = split.partition(on)
        self.users = evaluable_users(self.target, cfg.relevance_threshold)
        if len(self.users) == 0:
            raise ValueError(f"no users with relevant {on} interactions to evaluate")
        self._lists: dict[int, np.ndarray] = {}

    def lists(self, model: Model) -> np.ndarray:
        key = id(model)
        if key not in self._lists:
            parts = [
                recommend_batch(model, self.train, self.users[s], self.cfg.k, self.cfg.exclude_seen)
                for s in self.batches()
            ]
            self._lists[key] = np.concatenate(parts)
        return self._lists[key]

    def batches(self):
        size = self.cfg.batch_size
        for start in range(0, len(self.users), size):
            yield slice(start, min(start + size, len(self.users)))

    def relevance(self, batch: slice) -> np.ndarray:
        return relevance_mask(self.target, self.users[batch], self.cfg.relevance_threshold)

    def pages(self, rows: Sequence[Model], batch: slice) -> np.ndarray:
        return np.stack([self.lists(m)[batch] for m in rows], axis=1)

    def individual(self, model: Model) -> np.ndarray:
        out = np.empty(len(self.users))
        lists = self.lists(model)
        for b in self.batches():
            out[b] = ndcg_at_k_batch(lists[b], self.relevance(b), self.cfg.k)
        return out

    def page(self, rows: Sequence[Model]) -> np.ndarray:
        out = np.empty(len(self.users))
        for b in self.batches():
            out[b] = page_ndcg2d_batch(self.pages(rows, b), self.relevance(b), self.cfg.weights, self.cfg.normalize)
        return out

    def heatmap(self, rows: Sequence[Model]) -> np.ndarray:
        grid = np.zeros((len(rows), self.cfg.k), dtype=np.int64)
        for b in self.batches():
            grid += hit_heatmap(self.pages(rows, b), self.relevance(b))
        return grid


def individual_values(model: Model, split: DataSplit, cfg: EvaluationConfig, on: str = "test") -> tuple[np.ndarray, np.ndarray]:
    """Per-user NDCG@k as ``(users, values)``."""
    run = _Run(split, cfg, on)
    return run.users, run.individual(model)


def evaluate_individual(model: Model, split: DataSplit, cfg: EvaluationConfig = EvaluationConfig(), on: str = "test") -> float:
    """Mean NDCG@k of the model's own list over users with held-out interactions."""
    return float(individual_values(model, split, cfg, on)[1].mean())


def page_values(
    fixed: Sequence[Model],
    candidate: Model,
    split: DataSplit,
    cfg: EvaluationConfig,
    on: str = "test",
) -> tuple[np.ndarray, np.ndarray]:
    run = _Run(split, cfg, on)
    return run.users, run.page([*fixed, candidate])


def evaluate_page(
    fixed: Sequence[Model],
    candidate: Model,
    split: DataSplit,
    cfg: EvaluationConfig = EvaluationConfig(),
    on: str = "test",
) -> float:
    """Mean NDCG2D of the page ``fixed + [candidate]`` (one carousel per model)."""
    return float(page_values(fixed, candidate, split, cfg, on)[1].mean())


@dataclass
class ModelResult:
    individual_ndcg: float
    carousel_ndcg2d: float | None = None
    individual_rank: int | None = None
    carousel_rank: int | None = None

    @property
    def delta_rank(self) -> int | None:
        if self.individual_rank is None or self.carousel_rank is None:
            return None
        return self.individual_rank - self.carousel_rank


@dataclass
class MetricReport:
    per_model: dict[str, ModelResult]
    n_users_evaluated: int
    baselines: dict[str, float] = field(default_factory=dict)
    heatmaps: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def rows(self) -> list[list]:
        out = [[name, value, None, None, None, None] for name, value in self.baselines.items()]
        ranked = sorted(self.per_model.items(), key=lambda kv: kv[1].individual_rank)
        for name, r in ranked:
            out.append([name, r.individual_ndcg, r.carousel_ndcg2d, r.individual_rank, r.carousel_rank, r.delta_rank])
        return out

    def to_csv(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in self.rows():
                writer.writerow(["" if v is None else (f"{v:.6f}" if isinstance(v, float) else v) for v in row])

    def format_table(self) -> str:
        lines = [f"{'model':<16}{'NDCG':>10}{'NDCG2D':>10}{'rank':>6}{'rank2D':>8}{'delta':>7}"]
        for name, ind, car, r1, r2, d in self.rows():
            fmt = lambda v, spec: "--" if v is None else format(v, spec)
            lines.append(f"{name:<16}{ind:>10.4f}{fmt(car, '>10.4f'):>10}{fmt(r1, 'd'):>6}{fmt(r2, 'd'):>8}{fmt(d, '+d'):>7}")
        return "\n".join(lines)


def _ranks(values: Mapping[str, float]) -> dict[str, int]:
    order = sorted(values, key=lambda name: (-values[name], name))
    return {name: rank for rank, name in enumerate(order, 1)}


def rank_candidates(
    models: Mapping[str, Model],
    split: DataSplit,
    cfg: EvaluationConfig,
    on: str = "test",
    heatmaps: bool = False,
) -> MetricReport:
    """Score candidates under both protocols and rank them.

    ``models`` must contain every name in ``cfg.fixed_models``; candidates
    default to all remaining models. Fixed models get a baseline row with
    their individual NDCG only.
    """
    missing = [name for name in (*cfg.fixed_models, *cfg.candidate_models) if name not in models]
    if missing:
        raise KeyError(f"models not provided: {missing}")
    candidates = list(cfg.candidate_models) or [n for n in models if n not in cfg.fixed_models]
    if len(candidates) < 2:
        raise ValueError("ranking needs at least two candidates")
    run = _Run(split, cfg, on)
    fixed = [models[name] for name in cfg.fixed_models]

    results = {}
    maps = {}
    for name in candidates:
        model = models[name]
        rows = [*fixed, model]
        results[name] = ModelResult(
            individual_ndcg=float(run.individual(model).mean()),
            carousel_ndcg2d=float(run.page(rows).mean()),
        )
        if heatmaps:
            maps[name] = run.heatmap(rows)
        log.info("%s: NDCG %.4f NDCG2D %.4f", name, results[name].individual_ndcg, results[name].carousel_ndcg2d)
    for name, rank in _ranks({n: r.individual_ndcg for n, r in results.items()}).items():
        results[name].individual_rank = rank
    for name, rank in _ranks({n: r.carousel_ndcg2d for n, r in results.items()}).items():
        results[name].carousel_rank = rank
    baselines = {name: float(run.individual(models[name]).mean()) for name in cfg.fixed_models if name not in results}
    return MetricReport(results, len(run.users), baselines, maps)


def greedy_page_builder(
    pool: Mapping[str, Model],
    n_rows: int,
    split: DataSplit,
    cfg: EvaluationConfig,
    on: str = "test",
) -> list[str]:
    """Grow a page row by row, each time adding the model with the best page NDCG2D."""
    if n_rows < 1 or n_rows > len(pool):
        raise ValueError(f"n_rows must be in [1, {len(pool)}]")
    run = _Run(split, cfg, on)
    chosen: list[str] = []
    for _ in range(n_rows):
        scores = {
            name: float(run.page([*(pool[c] for c in chosen), model]).mean())
            for name, model in pool.items()
            if name not in chosen
        }
        best = min(scores, key=lambda name: (-scores[name], name))
        log.info("row %d: %s (NDCG2D %.4f)", len(chosen) + 1, best, scores[best])
        chosen.append(best)
    return chosen
