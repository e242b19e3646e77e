import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carousel_eval.data import (
    DataSplit,
    InteractionSet,
    ParseError,
    build_matrix,
    holdout_split,
    parse_interactions,
    parse_item_features,
)


def test_parse_double_colon_row():
    s = parse_interactions(b"1::122::5::838985046\n")
    assert s.records == [(1, 122, 5.0, 838985046)]


def test_parse_tab_rows_from_stream():
    s = parse_interactions(io.BytesIO(b"196\t242\t3\t881250949\n186\t302\t3\t891717742\n22\t377\t1\t878887116\n"), "tab")
    assert len(s) == 3
    assert (196, 242, 3.0, 881250949) in s.records


def test_duplicate_pair_keeps_latest_timestamp():
    s = parse_interactions(b"1::10::2::200\n1::10::4::100\n")
    assert s.records == [(1, 10, 2.0, 200)]
    s = parse_interactions(b"1::10::4::100\n1::10::2::200\n")
    assert s.records == [(1, 10, 2.0, 200)]


def test_half_star_ratings_are_accepted():
    assert parse_interactions(b"5::7::0.5::1\n").ratings.tolist() == [0.5]


@pytest.mark.parametrize(
    "payload, line",
    [
        (b"1::2::3::4\n1::2::3\n", 2),
        (b"1::2::3::4\n2::3::4::5\n1::x::3::4\n", 3),
        (b"1::2::3::4\n1::3::7::4\n", 2),
        (b"1::2::3::4::5\n", 1),
    ],
)
def test_malformed_row_names_line(payload, line):
    with pytest.raises(ParseError, match=f"line {line}"):
        parse_interactions(payload)


@pytest.mark.parametrize("payload", [b"", b"\n  \n"])
def test_empty_source(payload):
    with pytest.raises(ParseError, match="no interactions"):
        parse_interactions(payload)


interaction_rows = st.lists(
    st.tuples(
        st.integers(1, 50),
        st.integers(1, 50),
        st.sampled_from([0.5, 1.0, 2.5, 3.0, 4.5, 5.0]),
        st.integers(0, 10**9),
    ),
    min_size=1,
    max_size=60,
)


@settings(max_examples=60, deadline=None)
@given(interaction_rows, st.sampled_from(["double-colon", "tab"]))
def test_serialization_round_trip(rows, fmt):
    sep = "::" if fmt == "double-colon" else "\t"
    payload = "".join(f"{u}{sep}{i}{sep}{r}{sep}{t}\n" for u, i, r, t in rows).encode()
    parsed = parse_interactions(payload, fmt)
    assert parse_interactions(parsed.to_bytes(fmt), fmt) == parsed
    pairs = list(zip(parsed.users.tolist(), parsed.items.tolist()))
    assert len(pairs) == len(set(pairs)) == len({(u, i) for u, i, _, _ in rows})


def _interactions(n, n_users=40, n_items=25, seed=0):
    rng = np.random.default_rng(seed)
    keys = rng.choice(n_users * n_items, size=n, replace=False)
    return InteractionSet(
        keys // n_items + 100, keys % n_items + 1000, rng.integers(1, 6, n).astype(float), rng.integers(0, 10**6, n)
    )


def test_matrix_structure_and_id_maps():
    s = _interactions(300)
    X = build_matrix(s)
    assert X.csr.has_sorted_indices
    for u in range(X.n_users):
        cols = X.user_items(u)
        assert np.all(np.diff(cols) > 0)
    for ext in np.unique(s.users):
        assert X.user_ids[X.user_index[ext]] == ext
    for ext in np.unique(s.items):
        assert X.item_ids[X.item_index[ext]] == ext
    assert X.nnz == len(s)


def test_split_partitions_interactions():
    s = _interactions(600)
    split = holdout_split(s, (0.8, 0.1, 0.1), seed=5)
    parts = [split.train, split.validation, split.test]
    assert len({(p.n_users, p.n_items) for p in parts}) == 1
    assert all(np.array_equal(p.user_ids, split.train.user_ids) for p in parts)
    supports = [set(zip(*p.csr.nonzero())) for p in parts]
    assert not (supports[0] & supports[1] or supports[0] & supports[2] or supports[1] & supports[2])
    full = build_matrix(s)
    assert supports[0] | supports[1] | supports[2] == set(zip(*full.csr.nonzero()))
    total = (split.train.csr + split.validation.csr + split.test.csr) - full.csr
    assert abs(total).sum() == 0


def test_split_is_deterministic():
    s = _interactions(500)
    a = holdout_split(s, seed=11)
    b = holdout_split(s, seed=11)
    for name in ("train", "validation", "test"):
        assert (a.partition(name).csr != b.partition(name).csr).nnz == 0
    assert a.manifest() == b.manifest()
    c = holdout_split(s, seed=12)
    assert (a.train.csr != c.train.csr).nnz > 0


def test_degenerate_ratios_put_everything_in_train():
    s = _interactions(200)
    split = holdout_split(s, (1.0, 0.0, 0.0), seed=1)
    assert split.train.nnz == 200
    assert split.validation.nnz == split.test.nnz == 0


def test_split_rejects_bad_input():
    s = _interactions(200)
    with pytest.raises(ValueError, match="sum to 1"):
        holdout_split(s, (0.5, 0.1, 0.1))
    with pytest.raises(ValueError, match="at least 10"):
        holdout_split(_interactions(9), (0.8, 0.1, 0.1))


def test_split_size_concentrates_at_ml10m_scale():
    # binomial(10_000_054, 0.8) has sd ~1265; 0.5% of the target is > 30 sd
    n = 10_000_054
    idx = np.arange(n)
    s = InteractionSet(idx // 200, idx % 200, np.ones(n), np.zeros(n, np.int64))
    split = holdout_split(s, (0.8, 0.1, 0.1), seed=42)
    assert abs(split.train.nnz - 8_000_043) < 0.005 * 8_000_043
    assert split.train.nnz + split.validation.nnz + split.test.nnz == n


def test_split_save_load_and_manifest(tmp_path):
    split = holdout_split(_interactions(300), seed=3)
    split.save(tmp_path / "split.npz")
    loaded = DataSplit.load(tmp_path / "split.npz")
    assert loaded.manifest() == split.manifest()
    assert (loaded.test.csr != split.test.csr).nnz == 0
    assert "seed: 3" in split.manifest() and "train: " in split.manifest()


MOVIES = b"""1::Toy Story (1995)::Animation|Comedy
2::Heat (1995)::Action
3::Untitled::Drama
99::Not Rated (2001)::Horror
"""
TAGS = b"""5::1::Pixar::1
6::1::pixar::2
5::2::heist::3
5::77::orphan::4
"""


def test_item_features_from_movies_and_tags():
    icm = parse_item_features(MOVIES, {1: 0, 2: 1, 3: 2}, TAGS)
    assert icm.features_of(0) == {"genre:Animation", "genre:Comedy", "year:1995", "tag:pixar"}
    assert icm.features_of(1) == {"genre:Action", "year:1995", "tag:heist"}
    # unparseable year: only the genre survives
    assert icm.features_of(2) == {"genre:Drama"}
    assert icm.skipped_rows == 2
    # one binary entry for a tag applied twice
    assert icm.csr[0].toarray().max() == 1
    assert icm.n_items == 3


def test_item_without_tags_has_genre_and_year_only():
    icm = parse_item_features(b"7::Alien (1979)::Horror\n", {7: 0})
    assert icm.features_of(0) == {"genre:Horror", "year:1979"}
