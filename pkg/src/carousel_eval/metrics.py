"""Per-list NDCG and the two-dimensional, deduplicating NDCG2D for carousel pages.

A page is a grid whose rows are carousels. Cell (r, c) (1-indexed) is
discounted by ``log2(w_row*(r-1) + w_col*(c-1) + 2)``, so the top-left cell
has discount 1 and a single row reduces to the usual DCG discount. Users are
assumed to look at cells in ascending-discount order; an item only earns
gain the first time it is seen in that order.

Empty cells (shorter lists) are encoded as ``EMPTY`` (-1) and never score.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

EMPTY = -1


@dataclass(frozen=True)
class DiscountWeights:
    row: float = 1.0
    col: float = 1.0

    def __post_init__(self):
        if self.row < 0 or self.col < 0:
            raise ValueError("discount weights must be non-negative")
        if self.row == 0 and self.col == 0:
            raise ValueError("discount weights cannot both be zero")


EVEN = DiscountWeights(1.0, 1.0)


def discount2d(row: int, col: int, weights: DiscountWeights = EVEN) -> float:
    if row < 1 or col < 1:
        raise ValueError("row and col are 1-indexed")
    return math.log2(weights.row * (row - 1) + weights.col * (col - 1) + 2)


def discount_grid(n_rows: int, n_cols: int, weights: DiscountWeights = EVEN) -> np.ndarray:
    """Discount for every cell, shape (n_rows, n_cols)."""
    return np.array(
        [[discount2d(r, c, weights) for c in range(1, n_cols + 1)] for r in range(1, n_rows + 1)]
    )


@lru_cache(maxsize=256)
def scan_order(n_rows: int, n_cols: int, weights: DiscountWeights = EVEN) -> tuple[tuple[int, int], ...]:
    """All cells by ascending discount, ties broken by (row, col)."""
    if n_rows < 1 or n_cols < 1:
        raise ValueError("page must have at least one row and one column")
    cells = [(r, c) for r in range(1, n_rows + 1) for c in range(1, n_cols + 1)]
    # compare the log argument rounded, so float noise in weighted sums does not break ties
    return tuple(
        sorted(cells, key=lambda rc: (round(weights.row * (rc[0] - 1) + weights.col * (rc[1] - 1), 9), rc))
    )


@lru_cache(maxsize=256)
def _scan_arrays(n_rows: int, n_cols: int, weights: DiscountWeights):
    order = scan_order(n_rows, n_cols, weights)
    flat = np.array([(r - 1) * n_cols + (c - 1) for r, c in order], dtype=np.intp)
    gains = np.array([1.0 / discount2d(r, c, weights) for r, c in order])
    ideal = np.empty(len(order) + 1)
    ideal[0] = 0.0
    acc = 0.0
    for i, g in enumerate(gains, 1):
        acc += g
        ideal[i] = acc
    flat.flags.writeable = gains.flags.writeable = ideal.flags.writeable = False
    return flat, gains, ideal


def ideal_dcg2d(n_rows: int, n_cols: int, n_relevant: int, weights: DiscountWeights = EVEN) -> float:
    """Best DCG2D reachable: relevant items on the first cells of the scan order."""
    _, _, ideal = _scan_arrays(n_rows, n_cols, weights)
    return float(ideal[min(n_relevant, n_rows * n_cols)])


def ndcg_at_k(items: Sequence[int], relevant: Iterable[int], k: int) -> float:
    """Binary-relevance NDCG over the first ``k`` positions of a ranked list.

    A list shorter than ``k`` is treated as padded with non-relevant items.
    """
    relevant = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    if not relevant:
        return 0.0
    dcg = 0.0
    for pos, item in enumerate(items[:k], 1):
        if item in relevant:
            dcg += 1.0 / math.log2(pos + 1)
    idcg = 0.0
    for pos in range(1, min(len(relevant), k) + 1):
        idcg += 1.0 / math.log2(pos + 1)
    return dcg / idcg


def as_page(page) -> list[list[int]]:
    """Validate a page (sequence of equal-length carousels)."""
    rows = [list(row) for row in page]
    if not rows or not rows[0]:
        raise ValueError("page must have at least one non-empty carousel")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ValueError(f"page is not rectangular: carousel lengths {[len(r) for r in rows]}")
    return rows


def dcg2d(page, relevant: Iterable[int], weights: DiscountWeights = EVEN) -> float:
    """Un-normalized DCG2D: scan cells, reward each relevant item at its first cell only."""
    grid = as_page(page)
    relevant = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    rewarded = set()
    total = 0.0
    for r, c in scan_order(len(grid), len(grid[0]), weights):
        item = grid[r - 1][c - 1]
        if item in relevant and item not in rewarded:
            rewarded.add(item)
            total += 1.0 / discount2d(r, c, weights)
    return total


def page_ndcg2d(
    page,
    relevant: Iterable[int],
    weights: DiscountWeights = EVEN,
    normalize: bool = True,
) -> float:
    grid = as_page(page)
    relevant = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    if not relevant:
        return 0.0
    value = dcg2d(grid, relevant, weights)
    if not normalize:
        return value
    return value / ideal_dcg2d(len(grid), len(grid[0]), len(relevant), weights)


def _gather(relevant: np.ndarray, idx: np.ndarray) -> np.ndarray:
    if relevant.ndim == 2:
        return np.take_along_axis(relevant, idx, axis=1)
    return np.take_along_axis(relevant, idx[:, None, :], axis=2)


def ndcg_at_k_batch(lists: np.ndarray, relevant: np.ndarray, k: int) -> np.ndarray:
    """Vectorised ``ndcg_at_k``.

    ``lists`` is (N, L) of item indices padded with ``EMPTY``; ``relevant`` is a
    boolean (N, n_items) mask.
    """
    lists = np.asarray(lists)[:, :k]
    relevant = np.asarray(relevant, dtype=bool)
    valid = lists >= 0
    hit = _gather(relevant, np.where(valid, lists, 0)) & valid
    gains = 1.0 / np.log2(np.arange(2, k + 2, dtype=np.float64))
    dcg = hit.astype(np.float64) @ gains[: lists.shape[1]]
    ideal = np.concatenate([[0.0], np.cumsum(gains)])
    idcg = ideal[np.minimum(relevant.sum(axis=-1), k)]
    return np.divide(dcg, idcg, out=np.zeros_like(dcg), where=idcg > 0)


def first_seen_mask(pages: np.ndarray, weights: DiscountWeights = EVEN) -> tuple[np.ndarray, np.ndarray]:
    """Items in scan order per page, and whether each cell is the item's first sighting."""
    pages = np.asarray(pages)
    n, n_rows, n_cols = pages.shape
    flat, _, _ = _scan_arrays(n_rows, n_cols, weights)
    seq = pages.reshape(n, n_rows * n_cols)[:, flat]
    first = seq >= 0
    for p in range(1, seq.shape[1]):
        first[:, p] &= ~(seq[:, :p] == seq[:, p:p + 1]).any(axis=1)
    return seq, first


def page_ndcg2d_batch(
    pages: np.ndarray,
    relevant: np.ndarray,
    weights: DiscountWeights = EVEN,
    normalize: bool = True,
) -> np.ndarray:
    """Vectorised ``page_ndcg2d``.

    ``pages`` is (N, R, C); ``relevant`` is a boolean mask of shape (N, n_items),
    or (N, S, n_items) to score each page against S relevance sets at once.
    """
    pages = np.asarray(pages)
    if pages.ndim != 3:
        raise ValueError("pages must be a (N, rows, cols) array")
    relevant = np.asarray(relevant, dtype=bool)
    _, n_rows, n_cols = pages.shape
    _, gains, ideal = _scan_arrays(n_rows, n_cols, weights)
    seq, first = first_seen_mask(pages, weights)
    idx = np.where(seq >= 0, seq, 0)
    if relevant.ndim == 2:
        hit = _gather(relevant, idx) & first
    else:
        hit = _gather(relevant, idx) & first[:, None, :]
    dcg = hit.astype(np.float64) @ gains
    if not normalize:
        return dcg
    idcg = ideal[np.minimum(relevant.sum(axis=-1), n_rows * n_cols)]
    return np.divide(dcg, idcg, out=np.zeros_like(dcg), where=idcg > 0)


def hit_heatmap(pages, relevant, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Per-cell count of pages whose item at that cell is relevant (before dedup).

    ``relevant`` is either a boolean (N, n_items) mask or a sequence of item sets.
    """
    if isinstance(pages, np.ndarray) and isinstance(relevant, np.ndarray):
        if pages.ndim != 3:
            raise ValueError("pages must be a (N, rows, cols) array")
        if shape is not None and pages.shape[1:] != tuple(shape):
            raise ValueError(f"page shape {pages.shape[1:]} does not match {shape}")
        n, n_rows, n_cols = pages.shape
        seq = pages.reshape(n, -1)
        hit = _gather(relevant.astype(bool), np.where(seq >= 0, seq, 0)) & (seq >= 0)
        return hit.sum(axis=0).reshape(n_rows, n_cols).astype(np.int64)

    pages = [as_page(p) for p in pages]
    relevant = list(relevant)
    if len(pages) != len(relevant):
        raise ValueError("one relevance set per page is required")
    if shape is None:
        if not pages:
            raise ValueError("shape is required when there are no pages")
        shape = (len(pages[0]), len(pages[0][0]))
    grid = np.zeros(shape, dtype=np.int64)
    for page, rel in zip(pages, relevant):
        if (len(page), len(page[0])) != tuple(shape):
            raise ValueError(f"page shape {(len(page), len(page[0]))} does not match {tuple(shape)}")
        for r, row in enumerate(page):
            for c, item in enumerate(row):
                if item in rel:
                    grid[r, c] += 1
    return grid


def write_grid_csv(grid: np.ndarray, path: Union[str, os.PathLike]) -> None:
    """Row-major ``row,col,value`` CSV with 1-indexed coordinates."""
    grid = np.asarray(grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                value = grid[r, c]
                writer.writerow([r + 1, c + 1, repr(float(value)) if grid.dtype.kind == "f" else int(value)])
