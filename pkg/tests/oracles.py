"""Reference computations that share no code with the package."""

import itertools
import math
from fractions import Fraction

import numpy as np


def ndcg2d_bruteforce(page, relevant, w_row=1.0, w_col=1.0):
    """Each relevant item earns the gain of its best (lowest-discount) cell, once."""
    n_rows, n_cols = len(page), len(page[0])
    disc = {(r, c): math.log2(w_row * r + w_col * c + 2) for r in range(n_rows) for c in range(n_cols)}
    if not relevant:
        return 0.0
    dcg = 0.0
    for item in relevant:
        cells = [disc[rc] for rc in disc if page[rc[0]][rc[1]] == item]
        if cells:
            dcg += 1.0 / min(cells)
    best = sorted((1.0 / d for d in disc.values()), reverse=True)
    ideal = sum(best[: min(len(relevant), n_rows * n_cols)])
    return dcg / ideal


def ndcg2d_vectorized_oracle(pages, subsets, n_items, w_row=1.0, w_col=1.0):
    """Same rule as ``ndcg2d_bruteforce`` for (N, R, C) pages and (S, n_items) 0/1 subsets."""
    _, n_rows, n_cols = pages.shape
    r, c = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    gain = 1.0 / np.log2(w_row * r + w_col * c + 2)
    best_gain = np.stack([np.where(pages == x, gain, 0.0).max(axis=(1, 2)) for x in range(n_items)], axis=1)
    dcg = best_gain @ subsets.T
    ideal_curve = np.concatenate([[0.0], np.cumsum(np.sort(gain.ravel())[::-1])])
    sizes = subsets.sum(axis=1).astype(int)
    ideal = ideal_curve[np.minimum(sizes, n_rows * n_cols)]
    return np.divide(dcg, ideal, out=np.zeros_like(dcg), where=ideal > 0)


def two_hop_paths(adjacency):
    """Exact item -> user -> item walk probabilities by enumerating every path."""
    A = [[Fraction(int(v)) for v in row] for row in adjacency]
    n_users, n_items = len(A), len(A[0])
    user_deg = [sum(row) for row in A]
    item_deg = [sum(A[u][i] for u in range(n_users)) for i in range(n_items)]
    S = [[Fraction(0)] * n_items for _ in range(n_items)]
    for i, j in itertools.product(range(n_items), repeat=2):
        if i == j:
            continue
        for u in range(n_users):
            if A[u][i] and A[u][j]:
                S[i][j] += (1 / item_deg[i]) * (1 / user_deg[u])
    return S


def inverse_3x3(M):
    """Adjugate inverse of a 3x3 matrix, in exact rationals."""
    m = [[Fraction(v).limit_denominator(10**12) for v in row] for row in M]
    det = (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]]
            cof[i][j] = (-1) ** (i + j) * minor
    return [[cof[j][i] / det for j in range(3)] for i in range(3)]


def ease_from_inverse(X, l2, inverse=np.linalg.inv):
    G = X.T @ X + l2 * np.eye(X.shape[1])
    P = np.asarray(inverse(G), dtype=np.float64)
    B = np.empty_like(P)
    for i in range(P.shape[0]):
        for j in range(P.shape[1]):
            B[i, j] = 0.0 if i == j else -P[i, j] / P[j, j]
    return B


def central_difference(fn, x, step=1e-5):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        hi, lo = x.copy(), x.copy()
        hi[idx] += step
        lo[idx] -= step
        grad[idx] = (fn(hi) - fn(lo)) / (2 * step)
    return grad


def rank_reversal_data():
    """5 items, k=2: popular items 0/1 from filler users; evaluated users only have test items.

    Users 0-5 hold item 0 in test, users 6-9 hold item 2, users 10-14 are
    filler users whose training rows make 0 and 1 the most popular items.
    """
    n_users, n_items = 15, 5
    train = np.zeros((n_users, n_items))
    test = np.zeros((n_users, n_items))
    train[10:15, 0] = 4
    train[10:15, 1] = 4
    train[10, 2] = 3
    test[0:6, 0] = 5
    test[6:10, 2] = 5
    return train, test
