"""Latent factor models: FunkSVD (per-sample SGD) and NMF (multiplicative updates)."""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp

from ..data import InteractionMatrix
from .base import FactorModel, FitError
from .params import FunkSVDParams, NMFParams

NMF_EPS = 1e-10


def funksvd_sample_loss(u: np.ndarray, v: np.ndarray, rating: float, reg: float) -> float:
    """``0.5 * (r - u.v)^2 + 0.5 * reg * (|u|^2 + |v|^2)``"""
    err = rating - u @ v
    return 0.5 * err * err + 0.5 * reg * (u @ u + v @ v)


def funksvd_sample_gradient(u: np.ndarray, v: np.ndarray, rating: float, reg: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``funksvd_sample_loss`` w.r.t. the user and item vectors."""
    err = rating - u @ v
    return -err * v + reg * u, -err * u + reg * v


# fastmath lets the dot product vectorize; results stay run-to-run deterministic
@numba.njit(cache=True, fastmath=True)
def _sgd_epoch(users, items, ratings, order, U, V, learn_rate, reg):
    n_factors = U.shape[1]
    for idx in order:
        u = users[idx]
        i = items[idx]
        pred = 0.0
        for f in range(n_factors):
            pred += U[u, f] * V[i, f]
        err = ratings[idx] - pred
        for f in range(n_factors):
            uf = U[u, f]
            vf = V[i, f]
            U[u, f] = uf + learn_rate * (err * vf - reg * uf)
            V[i, f] = vf + learn_rate * (err * uf - reg * vf)


@numba.njit(cache=True)
def _unobserved(indptr, indices, u, i):
    """Mask of (u, i) pairs absent from a CSR matrix with sorted column indices."""
    out = np.empty(len(u), dtype=np.bool_)
    for n in range(len(u)):
        row = indices[indptr[u[n]]:indptr[u[n] + 1]]
        pos = np.searchsorted(row, i[n])
        out[n] = pos == len(row) or row[pos] != i[n]
    return out


def _sample_negatives(rng, users, csr, n_samples):
    """Unobserved (user, item) pairs; users follow the activity distribution."""
    u = users[rng.integers(0, len(users), n_samples)]
    i = rng.integers(0, csr.shape[1], n_samples)
    unseen = _unobserved(csr.indptr, csr.indices, u, i)
    return u[unseen], i[unseen]


def funksvd(
    users: np.ndarray,
    items: np.ndarray,
    ratings: np.ndarray,
    shape: tuple[int, int],
    params: FunkSVDParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample SGD on ``r_ui ~ U_u . V_i``, one seeded shuffle per epoch.

    With ``negative_quota > 0`` each epoch also visits freshly sampled
    unobserved pairs with target 0, making up that share of the epoch.
    """
    rng = np.random.default_rng(params.seed)
    scale = 1.0 / np.sqrt(params.f)
    U = rng.random((shape[0], params.f)) * scale
    V = rng.random((shape[1], params.f)) * scale
    users = np.ascontiguousarray(users, dtype=np.int64)
    items = np.ascontiguousarray(items, dtype=np.int64)
    ratings = np.ascontiguousarray(ratings, dtype=np.float64)
    n_negative = int(round(params.negative_quota * len(ratings) / (1.0 - params.negative_quota)))
    if n_negative:
        observed = sp.csr_matrix((np.ones(len(users)), (users, items)), shape=shape)
        observed.sum_duplicates()
    for epoch in range(1, params.epochs + 1):
        if n_negative:
            neg_u, neg_i = _sample_negatives(rng, users, observed, n_negative)
            ep_users = np.concatenate([users, neg_u])
            ep_items = np.concatenate([items, neg_i])
            ep_ratings = np.concatenate([ratings, np.zeros(len(neg_u))])
        else:
            ep_users, ep_items, ep_ratings = users, items, ratings
        order = rng.permutation(len(ep_ratings))
        _sgd_epoch(ep_users, ep_items, ep_ratings, order, U, V, params.learn_rate, params.reg)
        if not (np.isfinite(U).all() and np.isfinite(V).all()):
            raise FitError(f"FunkSVD diverged at epoch {epoch}")
    return U, V


def fit_funksvd(train: InteractionMatrix, params: FunkSVDParams = FunkSVDParams()) -> FactorModel:
    """Fit ``r_ui ~ U_u . V_i`` on the observed ratings, no bias terms.

    Sampled zero targets are added only when ``params.negative_quota > 0``.
    """
    coo = train.csr.tocoo()
    U, V = funksvd(coo.row, coo.col, coo.data, train.csr.shape, params)
    return FactorModel(U, V, "FunkSVD", params.as_dict())


@numba.njit(cache=True)
def _csr_matmul(indptr, indices, data, B, out):
    n_cols = out.shape[1]
    for r in range(len(indptr) - 1):
        for j in range(n_cols):
            out[r, j] = 0.0
        for p in range(indptr[r], indptr[r + 1]):
            c = indices[p]
            v = data[p]
            for j in range(n_cols):
                out[r, j] += v * B[c, j]
    return out


def _product(X, B: np.ndarray) -> np.ndarray:
    """``X @ B``; CSR inputs go through a compiled kernel (scipy's is single-pass scalar)."""
    if sp.issparse(X):
        out = np.empty((X.shape[0], B.shape[1]))
        return _csr_matmul(X.indptr, X.indices, X.data, np.ascontiguousarray(B), out)
    return X @ B


@numba.njit(cache=True)
def _multiplicative_step(A, num, den):
    """``A *= num / (den + eps)`` in place; False if any entry became non-finite."""
    finite = True
    for r in range(A.shape[0]):
        for j in range(A.shape[1]):
            value = A[r, j] * (num[r, j] / (den[r, j] + NMF_EPS))
            A[r, j] = value
            if not np.isfinite(value):
                finite = False
    return finite


def nmf_objective(X, U: np.ndarray, V: np.ndarray) -> float:
    """Squared Frobenius error ``|X - U V^T|^2`` without densifying ``X``."""
    XV = X @ V
    sq = X.multiply(X).sum() if sp.issparse(X) else np.sum(X * X)
    return float(sq - 2.0 * np.sum(U * XV) + np.sum((U.T @ U) * (V.T @ V)))


def nmf(X, n_factors: int, iterations: int, seed: int, callback=None) -> tuple[np.ndarray, np.ndarray]:
    """Lee-Seung multiplicative updates for ``min |X - U V^T|_F^2`` with ``U, V >= 0``.

    ``callback(iteration, U, V)`` runs after every full (U, V) update.
    """
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)
        if X.nnz and X.data.min() < 0:
            raise ValueError("NMF needs a non-negative matrix")
        mean = X.sum() / (X.shape[0] * X.shape[1])
    else:
        X = np.asarray(X, dtype=np.float64)
        if (X < 0).any():
            raise ValueError("NMF needs a non-negative matrix")
        mean = X.mean()
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(mean, NMF_EPS) / n_factors)
    U = rng.random((X.shape[0], n_factors)) * scale
    V = rng.random((X.shape[1], n_factors)) * scale
    XT = X.T.tocsr() if sp.issparse(X) else X.T
    for it in range(1, iterations + 1):
        finite = _multiplicative_step(U, _product(X, V), U @ (V.T @ V))
        finite &= _multiplicative_step(V, _product(XT, U), V @ (U.T @ U))
        if not finite:
            raise FitError(f"NMF produced non-finite factors at iteration {it}")
        if callback is not None:
            callback(it, U, V)
    return U, V


def fit_nmf(train: InteractionMatrix, params: NMFParams = NMFParams()) -> FactorModel:
    """NMF of the binarized interaction matrix."""
    U, V = nmf(train.binary, params.f, params.iterations, params.seed)
    return FactorModel(U, V, "NMF", params.as_dict())
