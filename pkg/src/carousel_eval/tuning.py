"""Seeded random hyperparameter search maximizing validation NDCG@k."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .data import DataSplit, ItemContentMatrix
from .evaluation import EvaluationConfig, evaluate_individual
from .recommenders import FitError, check_family, fit_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dimension:
    low: float
    high: float
    integer: bool = False
    log: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"empty range [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise ValueError("log-uniform ranges need a positive lower bound")

    def sample(self, rng: np.random.Generator):
        if self.log:
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            value = rng.uniform(self.low, self.high)
        if self.integer:
            return int(min(max(round(value), self.low), self.high))
        return float(value)

    def __contains__(self, value) -> bool:
        return self.low <= value <= self.high


SearchSpace = Mapping[str, Dimension]

DEFAULT_SPACES: dict[str, dict[str, Dimension]] = {
    "TopPopular": {},
    "ItemKNNHybrid": {
        "topK": Dimension(5, 1000, integer=True, log=True),
        "shrink": Dimension(0, 1000),
        "icm_weight": Dimension(0.01, 100, log=True),
    },
    "RP3beta": {
        "topK": Dimension(5, 1000, integer=True, log=True),
        "alpha": Dimension(0, 2),
        "beta": Dimension(0, 2),
    },
    "EASE": {"l2": Dimension(1, 1e5, log=True)},
    "FunkSVD": {
        "f": Dimension(8, 256, integer=True),
        "learn_rate": Dimension(1e-4, 1e-1, log=True),
        "reg": Dimension(1e-5, 1e-1, log=True),
        "epochs": Dimension(10, 300, integer=True),
        "negative_quota": Dimension(0.0, 0.5),
    },
    "NMF": {
        "f": Dimension(8, 256, integer=True),
        "iterations": Dimension(50, 500, integer=True),
    },
}

# model families whose fit takes a seed; the search seed is passed through
_SEEDED = {"FunkSVD", "NMF"}
_TRIAL_ERRORS = (FitError, ValueError, ArithmeticError, MemoryError, np.linalg.LinAlgError)


@dataclass
class Trial:
    index: int
    params: dict
    validation_ndcg: float
    train_time: float
    error: str = ""


@dataclass
class TrialLog:
    family: str
    seed: int
    trials: list[Trial] = field(default_factory=list)

    @property
    def best(self) -> Trial:
        # first trial wins ties
        return max(self.trials, key=lambda t: (t.validation_ndcg, -t.index))

    @property
    def best_params(self) -> dict:
        return dict(self.best.params)

    def to_csv(self, path: Union[str, os.PathLike]) -> None:
        names = sorted({k for t in self.trials for k in t.params})
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "validation_ndcg", "train_time", "error", *names])
            for t in self.trials:
                writer.writerow(
                    [t.index, repr(t.validation_ndcg), f"{t.train_time:.3f}", t.error, *(t.params.get(n, "") for n in names)]
                )

    def write_best(self, path: Union[str, os.PathLike]) -> None:
        payload = {
            "family": self.family,
            "seed": self.seed,
            "validation_ndcg": self.best.validation_ndcg,
            "params": self.best_params,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_best_params(path: Union[str, os.PathLike]) -> tuple[str, dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return payload["family"], payload["params"]


def sample_params(family: str, space: SearchSpace, rng: np.random.Generator, seed: int) -> dict:
    params = {name: dim.sample(rng) for name, dim in space.items()}
    if family in _SEEDED:
        params["seed"] = seed
    return params


def random_search(
    family: str,
    split: DataSplit,
    space: SearchSpace | None = None,
    budget: int = 50,
    seed: int = 0,
    icm: ItemContentMatrix | None = None,
    k: int = 10,
) -> TrialLog:
    """Sample ``budget`` points, fit on train, score NDCG@k on validation.

    Trials that fail to fit are logged with value 0 and do not stop the search.
    """
    check_family(family)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    space = DEFAULT_SPACES[family] if space is None else space
    cfg = EvaluationConfig(k=k)
    rng = np.random.default_rng(seed)
    trials = TrialLog(family, seed)
    n_points = budget if space else 1
    for index in range(n_points):
        params = sample_params(family, space, rng, seed)
        start = time.perf_counter()
        error = ""
        try:
            model = fit_model(family, split.train, params, icm)
            value = evaluate_individual(model, split, cfg, on="validation")
        except _TRIAL_ERRORS as exc:
            value, error = 0.0, f"{type(exc).__name__}: {exc}"
            log.warning("%s trial %d failed: %s", family, index, error)
        elapsed = time.perf_counter() - start
        trials.trials.append(Trial(index, params, value, elapsed, error))
        log.info("%s trial %d: %.4f %s (%.1fs)", family, index, value, params, elapsed)
    return trials
