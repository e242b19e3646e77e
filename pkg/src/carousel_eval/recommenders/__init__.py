"""The six model families and a name-based registry used by tuning and the CLI."""

from __future__ import annotations

from ..data import InteractionMatrix, ItemContentMatrix
from .base import (
    DenseSimilarityModel,
    FactorModel,
    FitError,
    ItemScoresModel,
    Model,
    SimilarityModel,
    load_model,
    recommend,
    recommend_batch,
    save_model,
    top_k,
    user_scores,
)
from .ease import fit_ease
from .factorization import fit_funksvd, fit_nmf
from .neighborhood import fit_itemknn_hybrid, fit_rp3beta
from .params import (
    EASEParams,
    FunkSVDParams,
    ItemKNNParams,
    NMFParams,
    RP3betaParams,
    TopPopularParams,
)


def fit_top_popular(train: InteractionMatrix, params: TopPopularParams | None = None) -> ItemScoresModel:
    """Score every item by the number of users that interacted with it."""
    if train.nnz == 0:
        raise ValueError("TopPopular needs a non-empty training matrix")
    return ItemScoresModel(train.item_popularity.copy(), "TopPopular", {})


PARAMS = {
    "TopPopular": TopPopularParams,
    "ItemKNNHybrid": ItemKNNParams,
    "RP3beta": RP3betaParams,
    "EASE": EASEParams,
    "FunkSVD": FunkSVDParams,
    "NMF": NMFParams,
}
FAMILIES = tuple(PARAMS)


def check_family(name: str) -> str:
    if name not in PARAMS:
        raise ValueError(f"unknown model {name!r}; valid identifiers: {', '.join(FAMILIES)}")
    return name


def fit_model(
    family: str,
    train: InteractionMatrix,
    params=None,
    icm: ItemContentMatrix | None = None,
) -> Model:
    """Fit ``family`` with ``params`` (a params record, a dict, or None for defaults)."""
    check_family(family)
    if params is None:
        params = PARAMS[family]()
    elif isinstance(params, dict):
        params = PARAMS[family].from_dict(params)
    if family == "TopPopular":
        return fit_top_popular(train)
    if family == "ItemKNNHybrid":
        return fit_itemknn_hybrid(train, icm, params)
    if family == "RP3beta":
        return fit_rp3beta(train, params)
    if family == "EASE":
        return fit_ease(train, params)
    if family == "FunkSVD":
        return fit_funksvd(train, params)
    return fit_nmf(train, params)


__all__ = [
    "DenseSimilarityModel",
    "EASEParams",
    "FAMILIES",
    "FactorModel",
    "FitError",
    "FunkSVDParams",
    "ItemKNNParams",
    "ItemScoresModel",
    "Model",
    "NMFParams",
    "PARAMS",
    "RP3betaParams",
    "SimilarityModel",
    "TopPopularParams",
    "check_family",
    "fit_ease",
    "fit_funksvd",
    "fit_itemknn_hybrid",
    "fit_model",
    "fit_nmf",
    "fit_rp3beta",
    "fit_top_popular",
    "load_model",
    "recommend",
    "recommend_batch",
    "save_model",
    "top_k",
    "user_scores",
]
