import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carousel_eval.metrics import (
    EMPTY,
    DiscountWeights,
    dcg2d,
    discount2d,
    discount_grid,
    hit_heatmap,
    ideal_dcg2d,
    ndcg_at_k,
    ndcg_at_k_batch,
    page_ndcg2d,
    page_ndcg2d_batch,
    scan_order,
    write_grid_csv,
)

from oracles import ndcg2d_bruteforce

A, B, C, D = 0, 1, 2, 3


@pytest.mark.parametrize("weights", [DiscountWeights(1, 1), DiscountWeights(2, 1), DiscountWeights(0, 3)])
def test_top_left_discount_is_one(weights):
    assert discount2d(1, 1, weights) == 1.0


def test_discount_examples():
    assert discount2d(1, 3) == 2.0
    assert discount2d(2, 2, DiscountWeights(2, 1)) == math.log2(5)
    with pytest.raises(ValueError):
        discount2d(0, 1)


@pytest.mark.parametrize("row, col", [(-1, 1), (0, 0)])
def test_invalid_weights(row, col):
    with pytest.raises(ValueError):
        DiscountWeights(row, col)


def test_ndcg_examples():
    assert ndcg_at_k([5], {5}, 1) == 1.0
    assert ndcg_at_k([4, 5], {5}, 2) == pytest.approx(1 / math.log2(3), abs=1e-15)
    assert round(ndcg_at_k([4, 5], {5}, 2), 4) == 0.6309
    assert ndcg_at_k([1, 2, 3], {9}, 3) == 0.0
    assert ndcg_at_k([1, 2, 3], set(), 3) == 0.0


def test_ndcg_short_list_counts_as_padded():
    assert ndcg_at_k([7], {7, 8}, 3) == pytest.approx(1 / (1 + 1 / math.log2(3)))


def test_scan_order_examples():
    assert scan_order(1, 4) == ((1, 1), (1, 2), (1, 3), (1, 4))
    assert scan_order(2, 2) == ((1, 1), (1, 2), (2, 1), (2, 2))
    # log arguments: (1,1)=2 (1,2)=3 (1,3)=4 (2,1)=4 (2,2)=5 (2,3)=6
    assert scan_order(2, 3, DiscountWeights(2, 1)) == ((1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3))


def test_scan_order_breaks_float_noise_ties_lexicographically():
    # 0.1*2 and 0.2*1 differ in the last bit but are the same discount
    order = scan_order(3, 3, DiscountWeights(0.2, 0.1))
    assert order.index((1, 3)) < order.index((2, 1))


def test_page_examples():
    assert page_ndcg2d([[A, B], [A, C]], {A}) == 1.0
    assert page_ndcg2d([[B, C], [D, A]], {A}) == 0.5
    assert page_ndcg2d([[B, C], [D, A]], set()) == 0.0


def test_non_rectangular_page_is_rejected():
    with pytest.raises(ValueError, match="rectangular"):
        page_ndcg2d([[A, B], [C]], {A})


def test_empty_cells_never_score():
    assert page_ndcg2d([[EMPTY, A]], {A}) == pytest.approx(1 / math.log2(3))
    pages = np.array([[[EMPTY, A]]])
    rel = np.zeros((1, 4), dtype=bool)
    rel[0, A] = True
    assert page_ndcg2d_batch(pages, rel)[0] == pytest.approx(1 / math.log2(3))


def test_heatmap_examples():
    rel = [{A}]
    grid = hit_heatmap([[[A, B], [C, D]]], rel)
    assert grid.tolist() == [[1, 0], [0, 0]]
    grid = hit_heatmap([[[A, B]], [[C, B]]], [{B}, {B}])
    assert grid.tolist() == [[0, 2]]
    assert hit_heatmap([], [], shape=(2, 3)).tolist() == [[0, 0, 0], [0, 0, 0]]


def test_heatmap_counts_before_dedup():
    assert hit_heatmap([[[A, B], [A, C]]], [{A}]).tolist() == [[1, 0], [1, 0]]


def test_heatmap_shape_mismatch():
    with pytest.raises(ValueError, match="does not match"):
        hit_heatmap([[[A, B]], [[A], [B]]], [{A}, {A}])
    with pytest.raises(ValueError, match="does not match"):
        hit_heatmap(np.zeros((1, 2, 2), dtype=int), np.ones((1, 4), dtype=bool), shape=(3, 2))


def test_heatmap_array_path_matches_set_path():
    rng = np.random.default_rng(1)
    pages = rng.integers(-1, 6, (40, 3, 4))
    rel = rng.random((40, 6)) < 0.4
    sets = [set(np.flatnonzero(r).tolist()) for r in rel]
    assert np.array_equal(hit_heatmap(pages, rel), hit_heatmap(pages.tolist(), sets))


def test_write_grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    write_grid_csv(discount_grid(2, 2), path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["row", "col", "value"]
    assert rows[1:] == [["1", "1", "1.0"], ["1", "2", repr(math.log2(3))], ["2", "1", repr(math.log2(3))], ["2", "2", "2.0"]]


weights_st = (
    st.tuples(st.floats(0, 4), st.floats(0, 4))
    .filter(lambda w: w[0] > 0 or w[1] > 0)
    .map(lambda w: DiscountWeights(*w))
)


@st.composite
def pages(draw, max_rows=4, max_cols=6, n_items=8):
    n_rows = draw(st.integers(1, max_rows))
    n_cols = draw(st.integers(1, max_cols))
    cells = st.integers(0, n_items - 1)
    page = [draw(st.lists(cells, min_size=n_cols, max_size=n_cols)) for _ in range(n_rows)]
    rel = draw(st.sets(st.integers(0, n_items - 1)))
    return page, rel


@settings(max_examples=300)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=20, unique=True), st.sets(st.integers(0, 30)))
def test_single_row_page_reduces_to_ndcg(items, rel):
    assert abs(page_ndcg2d([items], rel) - ndcg_at_k(items, rel, len(items))) <= 1e-12


@settings(max_examples=300)
@given(pages(), weights_st)
def test_copy_row_adds_nothing(case, weights):
    page, rel = case
    for row in page:
        assert dcg2d([*page, row], rel, weights) == dcg2d(page, rel, weights)


@settings(max_examples=300)
@given(pages(), weights_st)
def test_value_in_unit_interval(case, weights):
    page, rel = case
    assert 0.0 <= page_ndcg2d(page, rel, weights) <= 1.0 + 1e-12


@settings(max_examples=200)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 20), weights_st)
def test_prefix_of_scan_order_is_perfect(n_rows, n_cols, n_rel, weights):
    order = scan_order(n_rows, n_cols, weights)
    page = [[100 + r * n_cols + c for c in range(n_cols)] for r in range(n_rows)]
    rel = {page[r - 1][c - 1] for r, c in order[:n_rel]}
    assert page_ndcg2d(page, rel, weights) == pytest.approx(1.0, abs=1e-12)
    # moving a relevant item off the prefix loses value
    if n_rel < n_rows * n_cols:
        r, c = order[n_rel - 1]
        r2, c2 = order[-1]
        if discount2d(r, c, weights) < discount2d(r2, c2, weights):
            swapped = set(rel) - {page[r - 1][c - 1]} | {page[r2 - 1][c2 - 1]}
            assert page_ndcg2d(page, swapped, weights) < 1.0


@settings(max_examples=200)
@given(st.integers(1, 6), st.integers(1, 6), weights_st)
def test_discount_monotone(row, col, weights):
    d = discount2d(row, col, weights)
    assert d <= discount2d(row + 1, col, weights)
    assert d <= discount2d(row, col + 1, weights)


@settings(max_examples=300)
@given(pages(), weights_st)
def test_matches_bruteforce_oracle(case, weights):
    page, rel = case
    expected = ndcg2d_bruteforce(page, rel, weights.row, weights.col)
    assert abs(page_ndcg2d(page, rel, weights) - expected) <= 1e-12


@settings(max_examples=200)
@given(pages(), st.sampled_from([(1.0, math.sqrt(2)), (math.pi, 1.0), (0.7, math.e)]))
def test_transpose_with_swapped_weights(case, w):
    # irrational weight ratios keep all discounts distinct on these shapes
    page, rel = case
    transposed = [list(col) for col in zip(*page)]
    w1, w2 = DiscountWeights(*w), DiscountWeights(w[1], w[0])
    assert dcg2d(page, rel, w1) == dcg2d(transposed, rel, w2)
    n_rows, n_cols = len(page), len(page[0])
    assert ideal_dcg2d(n_rows, n_cols, len(rel), w1) == ideal_dcg2d(n_cols, n_rows, len(rel), w2)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5), weights_st, st.booleans())
def test_batch_matches_scalar(seed, n_rows, n_cols, weights, normalize):
    rng = np.random.default_rng(seed)
    batch = rng.integers(-1, 7, (16, n_rows, n_cols))
    rel = rng.random((16, 7)) < 0.3
    got = page_ndcg2d_batch(batch, rel, weights, normalize)
    for n in range(16):
        items = set(np.flatnonzero(rel[n]).tolist())
        expected = page_ndcg2d(batch[n].tolist(), items, weights, normalize) if items else 0.0
        assert abs(got[n] - expected) <= 1e-12


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_list_batch_matches_scalar(seed, k):
    rng = np.random.default_rng(seed)
    lists = rng.integers(-1, 15, (20, k))
    rel = rng.random((20, 15)) < 0.2
    got = ndcg_at_k_batch(lists, rel, k)
    for n in range(20):
        expected = ndcg_at_k(lists[n].tolist(), set(np.flatnonzero(rel[n]).tolist()), k)
        assert abs(got[n] - expected) <= 1e-12
