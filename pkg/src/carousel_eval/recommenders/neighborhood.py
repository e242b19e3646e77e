"""Item-item similarity models: hybrid cosine KNN and the RP3beta random walk."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..data import InteractionMatrix, ItemContentMatrix
from .base import SimilarityModel
from .params import ItemKNNParams, RP3betaParams

BLOCK_SIZE = 1000


def prune_columns(block: np.ndarray, col_offset: int, top_k: int) -> sp.csc_matrix:
    """Zero the diagonal and keep the ``top_k`` largest positive entries of each column.

    Ties go to the lower row index, so the result does not depend on blocking.
    """
    n_rows, n_cols = block.shape
    cols = np.arange(n_cols)
    diag_rows = cols + col_offset
    inside = diag_rows < n_rows
    block[diag_rows[inside], cols[inside]] = 0.0
    keep = min(top_k, n_rows)
    rows = np.argsort(-block, axis=0, kind="stable")[:keep]
    vals = np.take_along_axis(block, rows, axis=0)
    col_idx = np.broadcast_to(cols, rows.shape)
    positive = vals > 0
    return sp.csc_matrix(
        (vals[positive], (rows[positive], col_idx[positive])), shape=(n_rows, n_cols)
    )


def _blockwise(left: sp.csr_matrix, right: sp.csc_matrix, top_k: int, transform, block_size: int) -> sp.csr_matrix:
    """Similarity ``left @ right`` computed one column block at a time and pruned."""
    n_items = right.shape[1]
    parts = []
    for start in range(0, n_items, block_size):
        stop = min(start + block_size, n_items)
        dense = np.asarray((left @ right[:, start:stop]).todense(), dtype=np.float64)
        dense = transform(dense, start, stop)
        parts.append(prune_columns(dense, start, top_k))
    S = sp.hstack(parts, format="csr") if parts else sp.csr_matrix((n_items, n_items))
    S.sort_indices()
    return S


def fit_itemknn_hybrid(
    train: InteractionMatrix,
    icm: ItemContentMatrix | None,
    params: ItemKNNParams = ItemKNNParams(),
    block_size: int = BLOCK_SIZE,
) -> SimilarityModel:
    """Cosine similarity with shrinkage over ratings stacked with weighted item features.

    Item i is the column ``[train[:, i]; icm_weight * icm[i, :]^T]``.
    """
    stack = [train.csr]
    if icm is not None:
        if icm.n_items != train.n_items:
            raise ValueError(f"ICM has {icm.n_items} items, URM has {train.n_items}")
        stack.append(params.icm_weight * icm.csr.T)
    V = sp.vstack(stack, format="csc").astype(np.float64)
    norms = np.sqrt(np.asarray(V.multiply(V).sum(axis=0)).ravel())

    def cosine(dense, start, stop):
        denom = norms[:, None] * norms[None, start:stop]
        zero = denom == 0
        denom += params.shrink
        denom[zero] = 1.0
        sim = dense / denom
        sim[zero] = 0.0
        return sim

    S = _blockwise(V.T.tocsr(), V, params.topK, cosine, block_size)
    return SimilarityModel(S, "ItemKNNHybrid", params.as_dict(), binary_profile=False)


def _row_normalize(X: sp.csr_matrix) -> sp.csr_matrix:
    degree = np.asarray(X.sum(axis=1)).ravel()
    inv = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
    return sp.diags(inv) @ X


def fit_rp3beta(
    train: InteractionMatrix,
    params: RP3betaParams = RP3betaParams(),
    block_size: int = BLOCK_SIZE,
) -> SimilarityModel:
    """Two-step item -> user -> item walk, transitions raised to alpha, popularity^-beta.

    ``s_ij = sum_u P_iu[i, u]^alpha * P_ui[u, j]^alpha / pop(j)^beta``
    """
    if train.nnz == 0:
        raise ValueError("RP3beta needs a non-empty training matrix")
    X = train.binary
    p_ui = _row_normalize(X).tocsr()
    p_iu = _row_normalize(X.T.tocsr()).tocsr()
    if params.alpha != 1.0:
        p_ui.data = np.power(p_ui.data, params.alpha)
        p_iu.data = np.power(p_iu.data, params.alpha)
    popularity = train.item_popularity
    scale = np.zeros_like(popularity)
    has_pop = popularity > 0
    scale[has_pop] = np.power(popularity[has_pop], -params.beta)

    def penalize(dense, start, stop):
        dense *= scale[None, start:stop]
        return dense

    S = _blockwise(p_iu, p_ui.tocsc(), params.topK, penalize, block_size)
    return SimilarityModel(S, "RP3beta", params.as_dict(), binary_profile=True)
