from __future__ import annotations

import numpy as np
import scipy.linalg

from ..data import InteractionMatrix
from .base import DenseSimilarityModel
from .params import EASEParams

MAX_ITEMS = 25_000


def ease_weights(X, l2: float) -> np.ndarray:
    """Closed-form EASE weights for a (binary) user x item matrix ``X``.

    ``B = I - P diagMat(1 / diag(P))`` with ``P = (X^T X + l2 I)^-1``, i.e.
    ``B[i, j] = -P[i, j] / P[j, j]`` off the diagonal and exactly 0 on it.
    """
    if not l2 > 0:
        raise ValueError(f"l2 must be > 0, got {l2}")
    gram = X.T @ X
    gram = gram.toarray() if hasattr(gram, "toarray") else np.array(gram, dtype=np.float64)
    gram = gram.astype(np.float64, copy=False)
    gram[np.diag_indices_from(gram)] += l2
    factor = scipy.linalg.cho_factor(gram, lower=True, overwrite_a=True, check_finite=True)
    P = scipy.linalg.cho_solve(factor, np.eye(gram.shape[0]), overwrite_b=True)
    B = P / -np.diag(P)
    np.fill_diagonal(B, 0.0)
    return B


def fit_ease(train: InteractionMatrix, params: EASEParams = EASEParams(), max_items: int = MAX_ITEMS) -> DenseSimilarityModel:
    if train.n_items > max_items:
        raise MemoryError(
            f"EASE needs a dense {train.n_items}x{train.n_items} matrix; raise max_items (now {max_items}) to allow it"
        )
    return DenseSimilarityModel(ease_weights(train.binary, params.l2), "EASE", params.as_dict())
