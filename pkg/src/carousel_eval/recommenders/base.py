"""Trained model containers, top-k recommendation and model persistence."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp

from ..data import InteractionMatrix
from ..metrics import EMPTY

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class FitError(RuntimeError):
    """Training produced an unusable model (divergence, non-finite values)."""


@dataclass(frozen=True, eq=False)
class ItemScoresModel:
    """One global score per item, identical for every user."""

    scores: np.ndarray
    family: str = "TopPopular"
    params: dict = field(default_factory=dict)
    personalized = False

    def score(self, train: InteractionMatrix, users: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.scores, (len(users), len(self.scores))).copy()


@dataclass(frozen=True, eq=False)
class SimilarityModel:
    """Sparse item x item similarity; user scores are ``profile @ S``."""

    similarity: sp.csr_matrix
    family: str
    params: dict = field(default_factory=dict)
    binary_profile: bool = False
    personalized = True

    def score(self, train: InteractionMatrix, users: np.ndarray) -> np.ndarray:
        X = train.binary if self.binary_profile else train.csr
        return np.asarray((X[users] @ self.similarity).todense())


@dataclass(frozen=True, eq=False)
class DenseSimilarityModel:
    """Dense item x item weights with a zero diagonal (EASE)."""

    weights: np.ndarray
    family: str = "EASE"
    params: dict = field(default_factory=dict)
    personalized = True

    def score(self, train: InteractionMatrix, users: np.ndarray) -> np.ndarray:
        return np.asarray(train.binary[users] @ self.weights)


@dataclass(frozen=True, eq=False)
class FactorModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    family: str
    params: dict = field(default_factory=dict)
    personalized = True

    @property
    def n_factors(self) -> int:
        return self.item_factors.shape[1]

    def score(self, train: InteractionMatrix, users: np.ndarray) -> np.ndarray:
        return self.user_factors[users] @ self.item_factors.T


Model = Union[ItemScoresModel, SimilarityModel, DenseSimilarityModel, FactorModel]


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` highest finite scores, ties by ascending index."""
    finite = np.flatnonzero(np.isfinite(scores))
    if len(finite) > k:
        vals = scores[finite]
        kth = np.partition(vals, len(vals) - k)[len(vals) - k]
        finite = finite[vals >= kth]
    order = np.lexsort((finite, -scores[finite]))
    return finite[order[:k]]


def user_scores(model: Model, train: InteractionMatrix, users: np.ndarray, exclude_seen: bool = True) -> np.ndarray:
    """Dense (len(users), n_items) scores; seen items are -inf when excluded.

    Personalized models fall back to popularity for users without training
    interactions.
    """
    users = np.asarray(users, dtype=np.intp)
    scores = np.array(model.score(train, users), dtype=np.float64)
    if model.personalized:
        cold = train.user_degrees()[users] == 0
        if cold.any():
            log.debug("%s: %d cold users fall back to popularity", model.family, int(cold.sum()))
            scores[cold] = train.item_popularity
    if exclude_seen:
        sub = train.csr[users]
        rows = np.repeat(np.arange(len(users)), np.diff(sub.indptr))
        scores[rows, sub.indices] = -np.inf
    return scores


def recommend_batch(
    model: Model,
    train: InteractionMatrix,
    users: np.ndarray,
    k: int,
    exclude_seen: bool = True,
) -> np.ndarray:
    """Top-k lists for many users as a (len(users), k) array padded with ``EMPTY``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = user_scores(model, train, users, exclude_seen)
    out = np.full((len(scores), k), EMPTY, dtype=np.int64)
    for row, s in enumerate(scores):
        items = top_k(s, k)
        out[row, : len(items)] = items
    return out


def recommend(
    model: Model,
    train: InteractionMatrix,
    user: int,
    k: int,
    exclude_seen: bool = True,
) -> np.ndarray:
    if not 0 <= user < train.n_users:
        raise IndexError(f"user index {user} out of range")
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = user_scores(model, train, np.array([user]), exclude_seen)[0]
    return top_k(scores, k)


def save_model(model: Model, path: Union[str, os.PathLike]) -> None:
    meta = {"version": FORMAT_VERSION, "kind": type(model).__name__, "family": model.family, "params": model.params}
    arrays = {}
    if isinstance(model, ItemScoresModel):
        arrays["scores"] = model.scores
    elif isinstance(model, SimilarityModel):
        S = model.similarity.tocsr()
        arrays.update(data=S.data, indices=S.indices, indptr=S.indptr, shape=np.asarray(S.shape))
        meta["binary_profile"] = model.binary_profile
    elif isinstance(model, DenseSimilarityModel):
        arrays["weights"] = model.weights
    elif isinstance(model, FactorModel):
        arrays.update(user_factors=model.user_factors, item_factors=model.item_factors)
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.asarray(json.dumps(meta)), **arrays)


def load_model(path: Union[str, os.PathLike]) -> Model:
    with np.load(path, allow_pickle=False) as f:
        meta = json.loads(str(f["meta"]))
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model file version {meta.get('version')}")
        kind, family, params = meta["kind"], meta["family"], meta["params"]
        if kind == "ItemScoresModel":
            return ItemScoresModel(f["scores"], family, params)
        if kind == "SimilarityModel":
            S = sp.csr_matrix((f["data"], f["indices"], f["indptr"]), shape=tuple(f["shape"]))
            return SimilarityModel(S, family, params, meta.get("binary_profile", False))
        if kind == "DenseSimilarityModel":
            return DenseSimilarityModel(f["weights"], family, params)
        if kind == "FactorModel":
            return FactorModel(f["user_factors"], f["item_factors"], family, params)
    raise ValueError(f"unknown model kind {kind!r}")
