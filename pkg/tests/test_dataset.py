import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rctree.dataset import (
    LEFT,
    RIGHT,
    Dataset,
    DatasetError,
    Region,
    SplitRule,
    enumerate_candidate_splits,
    load_csv,
    split_region,
)


def test_load_csv_round_trip(write_csv):
    path = write_csv("a,b,y\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n")
    data = load_csv(path, "y")
    assert data.n == 4 and data.p == 2
    assert data.feature_names == ("a", "b")
    np.testing.assert_array_equal(data.outcomes, [0, 1, 1, 0])
    np.testing.assert_array_equal(data.features[:, 1], [2, 4, 6, 8])


def test_load_csv_outcome_by_index_and_position(write_csv):
    path = write_csv("y,a\n1,0.5\n0,1.5\n")
    data = load_csv(path, 0)
    np.testing.assert_array_equal(data.outcomes, [1, 0])
    assert data.feature_names == ("a",)


def test_non_binary_outcome_names_row(write_csv):
    path = write_csv("a,y\n1,0\n2,1\n3,2\n")
    with pytest.raises(DatasetError, match="row 3"):
        load_csv(path, "y")


def test_empty_file(write_csv):
    with pytest.raises(DatasetError, match="no observations"):
        load_csv(write_csv(""), "y")
    with pytest.raises(DatasetError, match="no observations"):
        load_csv(write_csv("a,y\n"), "y")


@pytest.mark.parametrize("cell", ["nan", "inf", "abc", ""])
def test_bad_feature_cell_names_row_and_column(write_csv, cell):
    path = write_csv(f"a,b,y\n1,2,0\n3,{cell},1\n")
    with pytest.raises(DatasetError, match=r"row 2, column 'b'"):
        load_csv(path, "y")


def test_missing_outcome_column(write_csv):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(write_csv("a,b\n1,0\n"), "y")


def test_dataset_validation():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 1)), [0, 3])
    with pytest.raises(DatasetError):
        Dataset(np.array([[np.nan], [1.0]]), [0, 1])
    data = Dataset(np.zeros((2, 1)), [0, 1])
    assert not data.features.flags.writeable


def _line(values, y=None):
    values = np.asarray(values, dtype=float)
    y = np.zeros(len(values)) if y is None else y
    return Dataset(values.reshape(-1, 1), np.asarray(y, dtype=int))


def test_split_region_forced_partition():
    data = _line([1, 2, 3, 4])
    left, right = split_region(data.full_region(), SplitRule(0, 2.5), data)
    np.testing.assert_array_equal(left.indices, [0, 1])
    np.testing.assert_array_equal(right.indices, [2, 3])
    assert left.path == ((0, 2.5, LEFT),) and right.path == ((0, 2.5, RIGHT),)


def test_split_region_rejects_empty_child():
    data = _line([1, 2, 3, 4])
    with pytest.raises(DatasetError, match="impermissible split"):
        split_region(data.full_region(), SplitRule(0, 0.5), data)


def test_split_region_two_singletons():
    data = _line([3.0, 7.0])
    left, right = split_region(data.full_region(), SplitRule(0, 5.0), data)
    assert len(left) == len(right) == 1


def test_candidates_midpoints():
    data = _line([3, 1, 2])
    rules = enumerate_candidate_splits(data.full_region(), data)
    assert rules == [SplitRule(0, 1.5), SplitRule(0, 2.5)]


def test_candidates_identical_features():
    data = _line([2, 2, 2])
    assert enumerate_candidate_splits(data.full_region(), data) == []


def test_candidates_skip_constant_feature():
    data = Dataset(np.array([[1.0, 5.0], [2.0, 5.0]]), [0, 1])
    assert enumerate_candidate_splits(data.full_region(), data) == [SplitRule(0, 1.5)]


def test_candidates_need_two_observations():
    data = _line([1, 2])
    with pytest.raises(DatasetError):
        enumerate_candidate_splits(Region([0]), data)


def test_midpoint_between_adjacent_floats_stays_permissible():
    a = 1.0
    b = np.nextafter(a, 2.0)
    data = _line([a, b])
    (rule,) = enumerate_candidate_splits(data.full_region(), data)
    left, right = split_region(data.full_region(), rule, data)
    assert len(left) == len(right) == 1


matrices = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.lists(st.integers(-5, 5), min_size=2, max_size=2), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
        st.lists(st.integers(0, 50), min_size=1, max_size=4),
    )
)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_split_sequences_reproduce_from_rules(case):
    rows, y, picks = case
    data = Dataset(np.array(rows, dtype=float), y)
    region = data.full_region()
    for pick in picks:
        rules = enumerate_candidate_splits(region, data) if len(region) >= 2 else []
        if not rules:
            break
        left, right = split_region(region, rules[pick % len(rules)], data)
        np.testing.assert_array_equal(np.sort(np.concatenate([left.indices, right.indices])), region.indices)
        assert np.intersect1d(left.indices, right.indices).size == 0
        for child in (left, right):
            assert child == Region.from_path(data, child.path)
            assert np.all(np.diff(child.indices) > 0)
        region = left if pick % 2 else right


@settings(max_examples=40, deadline=None)
@given(matrices, st.randoms(use_true_random=False))
def test_candidates_invariant_to_row_order(case, rnd):
    rows, y, _ = case
    X = np.array(rows, dtype=float)
    order = list(range(len(rows)))
    rnd.shuffle(order)
    a = Dataset(X, y)
    b = Dataset(X[order], np.asarray(y)[order])
    assert enumerate_candidate_splits(a.full_region(), a) == enumerate_candidate_splits(b.full_region(), b)
