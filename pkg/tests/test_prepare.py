"""
데이터 준비 유틸리티 테스트
"""

import numpy as np
import pytest

from conftest import random_history
from lowrank_hawkes.inference.errors import HawkesInputError
from lowrank_hawkes.inference.prepare import filter_rare_types, network_from_history, realization_split, time_split
from lowrank_hawkes.inference.types import EventHistory


@pytest.fixture
def history():
    return EventHistory.from_arrays(
        4,
        [(0.0, 10.0), (10.0, 20.0), (0.0, 30.0)],
        [[(1.0, 0), (2.0, 2), (3.0, 0)], [(12.0, 2), (15.0, 0)], [(5.0, 3), (25.0, 0)]],
    )


class TestFilterRareTypes:

    def test_renumbers_kept_types(self, history):
        filtered, kept = filter_rare_types(history, min_count=2)
        np.testing.assert_array_equal(kept, [0, 2])
        assert filtered.d == 2
        np.testing.assert_array_equal(filtered.realizations[0].types, [0, 1, 0])
        np.testing.assert_array_equal(filtered.realizations[2].times, [25.0])

    def test_nothing_left(self, history):
        with pytest.raises(HawkesInputError):
            filter_rare_types(history, min_count=100)


class TestTimeSplit:

    def test_straddling_realization_is_cut(self, history):
        train, test = time_split(history, 10.0)
        assert train.H == 2 and test.H == 2
        assert (train.realizations[1].t_minus, train.realizations[1].t_plus) == (0.0, 10.0)
        np.testing.assert_array_equal(train.realizations[1].times, [5.0])
        assert (test.realizations[1].t_minus, test.realizations[1].t_plus) == (10.0, 30.0)
        np.testing.assert_array_equal(test.realizations[1].times, [25.0])
        assert train.n + test.n == history.n

    def test_all_before(self, history):
        train, test = time_split(history, 100.0)
        assert train.H == 3 and test.H == 0


class TestRealizationSplit:

    def test_disjoint_and_sized(self):
        history = random_history(np.random.default_rng(0), 3, 50, 5)
        train, test = realization_split(history, 0.2, seed=1)
        assert test.H == 10 and train.H == 40
        assert train.n + test.n == history.n

    def test_seeded(self):
        history = random_history(np.random.default_rng(0), 3, 20, 5)
        a = realization_split(history, 0.25, seed=3)[1]
        b = realization_split(history, 0.25, seed=3)[1]
        assert [r.n for r in a.realizations] == [r.n for r in b.realizations]

    @pytest.mark.parametrize("fraction", [0.0, 1.0])
    def test_invalid_fraction(self, history, fraction):
        with pytest.raises(HawkesInputError):
            realization_split(history, fraction)


class TestNetworkFromHistory:

    def test_edges_follow_order(self, history):
        network = network_from_history(history, self_loops=False)
        adj = network.adjacency
        assert adj[0, 2] == 1 and adj[2, 0] == 1
        assert adj[3, 0] == 1 and adj[0, 3] == 0
        assert adj[1].sum() == 0 and adj[:, 1].sum() == 0
        assert np.trace(adj) == 0

    def test_self_loops(self, history):
        assert np.trace(network_from_history(history).adjacency) == 4
