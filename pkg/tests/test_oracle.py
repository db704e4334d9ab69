import pytest
from hypothesis import given, settings, strategies as st

from errors import ParamError
from oracle import brute_force_balance, compositions, even_split_feasible, even_split_loads, optimal_balance


def test_even_split():
    assert even_split_loads([2, 3], [5, 6]) == [3, 2, 2, 2, 2]
    assert even_split_loads([2, 0], [4, 0], item_size=10) == [20, 20]
    assert optimal_balance([4], [8]) == 0


@pytest.mark.parametrize('nodes, items', [([1], [1, 2]), ([-1], [2]), ([0], [3])])
def test_even_split_rejects_bad_groups(nodes, items):
    with pytest.raises(ParamError):
        even_split_loads(nodes, items)


def test_compositions():
    assert list(compositions(3, 2)) == [(0, 3), (1, 2), (2, 1), (3, 0)]
    assert list(compositions(2, 1)) == [(2,)]
    assert len(list(compositions(4, 3))) == 15


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(0, 6)), min_size=1, max_size=2))
def test_even_split_is_the_optimum(groups):
    node_counts = [n for n, _ in groups]
    items = [i for _, i in groups]
    assert optimal_balance(node_counts, items) == pytest.approx(brute_force_balance(node_counts, items))


def test_enumeration_is_bounded():
    with pytest.raises(ParamError):
        brute_force_balance([10, 10], [30, 30])


def test_clusters_without_nodes_count_as_even():
    assert brute_force_balance([0, 0], [0, 0]) == 0.0
    assert optimal_balance([], []) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(0, 6)), min_size=1, max_size=2))
def test_empty_groups_do_not_change_the_optimum(groups):
    node_counts = [n for n, _ in groups]
    items = [i for _, i in groups]
    assert brute_force_balance([0] + node_counts, [0] + items) == brute_force_balance(node_counts, items)


def test_disjoint_options_fit_exactly():
    assert even_split_feasible([(1, {0}), (1, {1})], [0, 1])
    assert even_split_feasible([(3, {0, 1}), (1, {2, 3}), (2, {1, 2, 3})], [0, 1, 2, 3])


def test_crowded_option_is_infeasible():
    assert not even_split_feasible([(2, {0}), (1, {0, 1})], [0, 1])


def test_unreachable_node_is_infeasible():
    assert not even_split_feasible([(1, {0})], [0, 1])


def test_feasibility_needs_nodes():
    with pytest.raises(ParamError):
        even_split_feasible([(1, {0})], [])
