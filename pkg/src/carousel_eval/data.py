"""MovieLens ingestion, sparse interaction matrices and the random holdout split."""

from __future__ import annotations

import io
import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

log = logging.getLogger(__name__)

Source = Union[str, os.PathLike, bytes, BinaryIO]

FORMATS = ("double-colon", "tab")
RATING_RANGE = (0.5, 5.0)
_DELIMITERS = {"double-colon": b"::", "tab": b"\t"}
_YEAR_RE = re.compile(r"\((\d{4})\)\s*$")


class ParseError(ValueError):
    """Raised for malformed or empty input files."""


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_bytes()
    return source.read()


def infer_format(path: Union[str, os.PathLike]) -> str:
    """``ratings.dat`` style files use ``::``; anything else is treated as tab separated."""
    return "double-colon" if str(path).endswith(".dat") else "tab"


@dataclass(frozen=True)
class InteractionSet:
    """Deduplicated (user, item, rating, timestamp) records held column-wise."""

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray

    def __len__(self) -> int:
        return len(self.users)

    @property
    def records(self) -> list[tuple]:
        return list(
            zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist(), self.timestamps.tolist())
        )

    def subset(self, mask: np.ndarray) -> "InteractionSet":
        return InteractionSet(self.users[mask], self.items[mask], self.ratings[mask], self.timestamps[mask])

    def to_bytes(self, fmt: str = "double-colon") -> bytes:
        sep = _DELIMITERS[fmt].decode()
        lines = [
            f"{u}{sep}{i}{sep}{r!r}{sep}{t}"
            for u, i, r, t in zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist(), self.timestamps.tolist())
        ]
        return ("\n".join(lines) + "\n").encode()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InteractionSet):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("users", "items", "ratings", "timestamps")
        )

    __hash__ = None


def _check_line(lineno: int, line: bytes, delim: bytes) -> None:
    parts = line.split(delim)
    if len(parts) != 4:
        raise ParseError(f"line {lineno}: expected 4 fields, got {len(parts)}: {line[:80]!r}")
    try:
        int(parts[0]), int(parts[1]), int(parts[3])
        rating = float(parts[2])
    except ValueError:
        raise ParseError(f"line {lineno}: non-numeric field in {line[:80]!r}") from None
    if not RATING_RANGE[0] <= rating <= RATING_RANGE[1]:
        raise ParseError(f"line {lineno}: rating {rating} outside {RATING_RANGE}")


def _locate_bad_line(data: bytes, delim: bytes) -> None:
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.strip()
        if line:
            _check_line(lineno, line, delim)


def deduplicate(users, items, ratings, timestamps) -> InteractionSet:
    """Keep one record per (user, item): the latest timestamp, later rows winning exact ties.

    The output is sorted by (user, item).
    """
    order = np.lexsort((np.arange(len(users)), timestamps, items, users))
    u, i = users[order], items[order]
    last = np.ones(len(order), dtype=bool)
    last[:-1] = (u[1:] != u[:-1]) | (i[1:] != i[:-1])
    keep = order[last]
    return InteractionSet(users[keep], items[keep], ratings[keep], timestamps[keep])


def parse_interactions(source: Source, fmt: str = "double-colon") -> InteractionSet:
    """Parse ``UserID::MovieID::Rating::Timestamp`` or tab separated ``u.data`` rows."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    delim = _DELIMITERS[fmt]
    data = _read_bytes(source)
    if not data.strip():
        raise ParseError("no interactions")
    text = data.replace(delim, b"\t") if fmt == "double-colon" else data
    try:
        df = pd.read_csv(
            io.BytesIO(text),
            sep="\t",
            header=None,
            dtype={0: np.int64, 1: np.int64, 2: np.float64, 3: np.int64},
            engine="c",
        )
        if df.shape[1] != 4:
            raise ValueError("wrong field count")
    except (ValueError, pd.errors.ParserError):
        _locate_bad_line(data, delim)
        raise
    df.columns = ["user", "item", "rating", "timestamp"]
    ratings = df["rating"].to_numpy()
    if np.isnan(ratings).any() or ((ratings < RATING_RANGE[0]) | (ratings > RATING_RANGE[1])).any():
        _locate_bad_line(data, delim)
    if len(df) == 0:
        raise ParseError("no interactions")
    return deduplicate(
        df["user"].to_numpy(), df["item"].to_numpy(), ratings, df["timestamp"].to_numpy()
    )


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Sparse user x item matrix (CSR) with external id <-> dense index maps."""

    csr: sp.csr_matrix
    user_ids: np.ndarray
    item_ids: np.ndarray

    def __post_init__(self):
        if self.csr.shape != (len(self.user_ids), len(self.item_ids)):
            raise ValueError("matrix shape does not match id maps")

    @property
    def n_users(self) -> int:
        return self.csr.shape[0]

    @property
    def n_items(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @cached_property
    def user_index(self) -> dict:
        return {u: idx for idx, u in enumerate(self.user_ids.tolist())}

    @cached_property
    def item_index(self) -> dict:
        return {i: idx for idx, i in enumerate(self.item_ids.tolist())}

    @cached_property
    def binary(self) -> sp.csr_matrix:
        X = self.csr.copy()
        X.data = np.ones_like(X.data)
        return X

    @cached_property
    def item_popularity(self) -> np.ndarray:
        """Number of users that interacted with each item."""
        return np.bincount(self.csr.indices, minlength=self.n_items).astype(np.float64)

    def user_items(self, user: int) -> np.ndarray:
        return self.csr.indices[self.csr.indptr[user]:self.csr.indptr[user + 1]]

    def user_degrees(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    def to_interactions(self) -> InteractionSet:
        """Back to records; timestamps are not stored in the matrix and come back as 0."""
        coo = self.csr.tocoo()
        return InteractionSet(
            self.user_ids[coo.row], self.item_ids[coo.col], coo.data.astype(np.float64), np.zeros(coo.nnz, np.int64)
        )


def build_matrix(
    interactions: InteractionSet,
    user_ids: np.ndarray | None = None,
    item_ids: np.ndarray | None = None,
) -> InteractionMatrix:
    """Build a CSR matrix. Id maps default to the sorted distinct ids present."""
    if user_ids is None:
        user_ids = np.unique(interactions.users)
    if item_ids is None:
        item_ids = np.unique(interactions.items)
    rows = np.searchsorted(user_ids, interactions.users)
    cols = np.searchsorted(item_ids, interactions.items)
    if len(rows) and (
        rows.max() >= len(user_ids)
        or cols.max() >= len(item_ids)
        or not np.array_equal(user_ids[rows], interactions.users)
        or not np.array_equal(item_ids[cols], interactions.items)
    ):
        raise ValueError("interaction ids missing from the id maps")
    X = sp.csr_matrix(
        (interactions.ratings.astype(np.float64), (rows, cols)), shape=(len(user_ids), len(item_ids))
    )
    X.sum_duplicates()
    X.sort_indices()
    return InteractionMatrix(X, np.asarray(user_ids), np.asarray(item_ids))


@dataclass(frozen=True, eq=False)
class ItemContentMatrix:
    """Binary item x feature matrix aligned with an InteractionMatrix's item index."""

    csr: sp.csr_matrix
    feature_names: list[str]
    skipped_rows: int = 0

    @property
    def n_items(self) -> int:
        return self.csr.shape[0]

    @property
    def n_features(self) -> int:
        return self.csr.shape[1]

    def features_of(self, item: int) -> set[str]:
        cols = self.csr.indices[self.csr.indptr[item]:self.csr.indptr[item + 1]]
        return {self.feature_names[c] for c in cols}


def parse_item_features(
    movies: Source,
    item_index: dict,
    tags: Source | None = None,
) -> ItemContentMatrix:
    """Genre, release-year and lower-cased tag features from ``movies.dat``/``tags.dat``.

    ``item_index`` maps external movie ids to the URM column index; rows for
    other movies are skipped and counted in ``skipped_rows``.
    """
    item_features: dict[int, set[str]] = defaultdict(set)
    skipped = 0
    for lineno, raw in enumerate(_read_bytes(movies).decode("utf-8", errors="replace").splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("::")
        if len(parts) != 3:
            raise ParseError(f"movies line {lineno}: expected 3 fields")
        try:
            movie = int(parts[0])
        except ValueError:
            raise ParseError(f"movies line {lineno}: bad movie id {parts[0]!r}") from None
        if movie not in item_index:
            skipped += 1
            continue
        feats = item_features[item_index[movie]]
        for genre in parts[2].split("|"):
            genre = genre.strip()
            if genre and genre != "(no genres listed)":
                feats.add(f"genre:{genre}")
        year = _YEAR_RE.search(parts[1])
        if year:
            feats.add(f"year:{year.group(1)}")

    if tags is not None:
        for lineno, raw in enumerate(_read_bytes(tags).decode("utf-8", errors="replace").splitlines(), 1):
            if not raw.strip():
                continue
            parts = raw.split("::")
            if len(parts) != 4:
                raise ParseError(f"tags line {lineno}: expected 4 fields")
            try:
                movie = int(parts[1])
            except ValueError:
                raise ParseError(f"tags line {lineno}: bad movie id {parts[1]!r}") from None
            if movie not in item_index:
                skipped += 1
                continue
            tag = parts[2].strip().lower()
            if tag:
                item_features[item_index[movie]].add(f"tag:{tag}")

    if skipped:
        log.warning("skipped %d feature rows for items outside the interaction matrix", skipped)
    names = sorted({f for feats in item_features.values() for f in feats})
    col = {name: c for c, name in enumerate(names)}
    rows, cols = [], []
    for item, feats in item_features.items():
        for f in feats:
            rows.append(item)
            cols.append(col[f])
    n_items = max(item_index.values(), default=-1) + 1
    X = sp.csr_matrix(
        (np.ones(len(rows)), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n_items, len(names)),
    )
    X.sort_indices()
    return ItemContentMatrix(X, names, skipped)


@dataclass(frozen=True, eq=False)
class DataSplit:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    seed: int
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def partition(self, name: str) -> InteractionMatrix:
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]

    def manifest(self) -> str:
        lines = [
            f"seed: {self.seed}",
            "ratios: " + ", ".join(repr(float(r)) for r in self.ratios),
            f"n_users: {self.train.n_users}",
            f"n_items: {self.train.n_items}",
            f"train: {self.train.nnz}",
            f"validation: {self.validation.nnz}",
            f"test: {self.test.nnz}",
        ]
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, os.PathLike]) -> None:
        arrays = {"user_ids": self.train.user_ids, "item_ids": self.train.item_ids}
        for name in ("train", "validation", "test"):
            X = self.partition(name).csr
            arrays[f"{name}_data"] = X.data
            arrays[f"{name}_indices"] = X.indices
            arrays[f"{name}_indptr"] = X.indptr
        arrays["seed"] = np.asarray(self.seed)
        arrays["ratios"] = np.asarray(self.ratios, dtype=np.float64)
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "DataSplit":
        with np.load(path, allow_pickle=False) as f:
            users, items = f["user_ids"], f["item_ids"]
            shape = (len(users), len(items))
            mats = {
                name: InteractionMatrix(
                    sp.csr_matrix((f[f"{name}_data"], f[f"{name}_indices"], f[f"{name}_indptr"]), shape=shape),
                    users,
                    items,
                )
                for name in ("train", "validation", "test")
            }
            return cls(seed=int(f["seed"]), ratios=tuple(f["ratios"].tolist()), **mats)


def validate_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError("ratios must have three entries (train, validation, test)")
    if any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise ValueError(f"ratios must be non-negative with a positive train share, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    return ratios


def holdout_split(
    interactions: InteractionSet,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 42,
) -> DataSplit:
    """Assign every interaction to train/validation/test with one seeded uniform draw each.

    The draw is global over interactions, so partition sizes are binomial
    around the requested ratios. All three matrices share the full id maps.
    """
    ratios = validate_ratios(ratios)
    if len(interactions) < 10:
        raise ValueError("holdout_split needs at least 10 interactions")
    draws = np.random.default_rng(seed).random(len(interactions))
    cut_train, cut_val = ratios[0], ratios[0] + ratios[1]
    label = np.where(draws < cut_train, 0, np.where(draws < cut_val, 1, 2))
    # float cumulative sums can leave a sliver for an empty partition
    if ratios[2] == 0.0:
        label[label == 2] = 1 if ratios[1] > 0 else 0

    user_ids = np.unique(interactions.users)
    item_ids = np.unique(interactions.items)
    parts = [build_matrix(interactions.subset(label == p), user_ids, item_ids) for p in range(3)]
    return DataSplit(parts[0], parts[1], parts[2], seed=seed, ratios=ratios)
