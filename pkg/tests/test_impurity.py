import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rctree.dataset import Dataset, DatasetError, Region, SplitRule, enumerate_candidate_splits
from rctree.impurity import GINI, gain_profile, information_gain, measure_by_name, region_proportion


def _data(y, x=None):
    y = np.asarray(y)
    x = np.arange(len(y), dtype=float) if x is None else np.asarray(x, dtype=float)
    return Dataset(x.reshape(-1, 1), y)


def _gini_gain_loops(data, region, rule):
    # independent recomputation with explicit loops
    def gini(rows):
        pos = sum(int(data.outcomes[i]) for i in rows)
        p = pos / len(rows)
        return 2 * p * (1 - p)

    rows = list(region.indices)
    left = [i for i in rows if data.features[i, rule.feature_index] <= rule.threshold]
    right = [i for i in rows if i not in left]
    return gini(rows) - len(left) / len(rows) * gini(left) - len(right) / len(rows) * gini(right)


def test_gini_values():
    np.testing.assert_allclose(GINI.value(np.array([0.0, 0.5, 1.0, 0.25])), [0.0, 0.5, 0.0, 0.375])
    assert measure_by_name("gini") is GINI
    with pytest.raises(ValueError):
        measure_by_name("entropy")


@pytest.mark.parametrize("y, expected", [([1, 1, 0, 0], 0.5), ([1, 1, 1], 1.0), ([1, 0, 0, 0], 0.25)])
def test_region_proportion(y, expected):
    data = _data(y)
    assert region_proportion(data.full_region(), data) == expected


def test_region_proportion_empty():
    data = _data([0, 1])
    with pytest.raises(DatasetError):
        region_proportion(Region([]), data)


def test_perfect_split_gain():
    data = _data([1, 1, 0, 0])
    assert information_gain(data.full_region(), SplitRule(0, 1.5), data) == pytest.approx(0.5, abs=1e-15)


def test_mirrored_children_gain_zero():
    data = _data([1, 0, 1, 0])
    assert information_gain(data.full_region(), SplitRule(0, 1.5), data) == pytest.approx(0.0, abs=1e-15)


def test_pure_parent_gain_zero():
    data = _data([1, 1, 1, 1, 1])
    for rule in enumerate_candidate_splits(data.full_region(), data):
        assert information_gain(data.full_region(), rule, data) == 0.0


def test_impermissible_rule():
    data = _data([1, 0])
    with pytest.raises(DatasetError, match="impermissible"):
        information_gain(data.full_region(), SplitRule(0, 5.0), data)


def test_gain_profile_against_loops():
    data = Dataset(np.array([[1, 0], [2, 1], [3, 0], [4, 1], [5, 1.0]]), [0, 0, 1, 1, 1])
    region = data.full_region()
    rules = [SplitRule(0, 2.5), SplitRule(1, 0.5), SplitRule(0, 1.5)]
    np.testing.assert_allclose(
        gain_profile(region, rules, data), [_gini_gain_loops(data, region, r) for r in rules], atol=1e-15
    )
    assert gain_profile(region, rules[:1], data).shape == (1,)
    perm = [2, 0, 1]
    np.testing.assert_array_equal(
        gain_profile(region, [rules[i] for i in perm], data), gain_profile(region, rules, data)[perm]
    )


labels = st.lists(st.integers(0, 1), min_size=2, max_size=40)


@settings(max_examples=100, deadline=None)
@given(labels, st.data())
def test_gini_gain_nonnegative_and_matches_loops(y, draw):
    x = draw.draw(st.lists(st.integers(0, 6), min_size=len(y), max_size=len(y)))
    data = _data(y, x)
    region = data.full_region()
    for rule in enumerate_candidate_splits(region, data):
        g = information_gain(region, rule, data)
        assert g >= -1e-15
        assert g == pytest.approx(_gini_gain_loops(data, region, rule), abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(labels)
def test_gain_symmetric_under_child_relabeling(y):
    # negating the feature swaps which child is left; the gain must not change
    x = np.arange(len(y), dtype=float)
    a, b = _data(y, x), _data(y, -x)
    for t in x[:-1] + 0.5:
        assert information_gain(a.full_region(), SplitRule(0, t), a) == pytest.approx(
            information_gain(b.full_region(), SplitRule(0, -t - 1e-9), b), abs=1e-14
        )
