import itertools

import numpy as np
import pytest

from matchorder.enumeration import (
    EXHAUSTED,
    MATCH_LIMIT,
    TIME_LIMIT,
    Limits,
    compute_local_candidates,
    enumerate_matches,
    is_match,
)
from matchorder.filtering import CandidateSets, filter_candidates
from matchorder.graph import compute_stats, is_connected
from matchorder.oracle import connected_orders, oracle_match
from matchorder.ordering import order_gql, order_infrequent_label, order_qsi, order_ri

from conftest import complete_graph, make_graph, path_graph, random_instance

UNLIMITED = Limits.unlimited()


def image_tuples(q, matches):
    return {tuple(m[u] for u in range(q.vertex_count)) for m in matches}


class TestExamples:
    def test_single_vertex_calls(self):
        q = make_graph([0], [])
        g = make_graph([0, 0, 0], [])
        res = enumerate_matches(q, g, CandidateSets(((0, 1, 2),)), [0], UNLIMITED)
        assert res.match_count == 3
        assert res.enum_calls == 4
        assert res.terminated_by == EXHAUSTED

    def test_triangle_in_k4(self):
        q, g = complete_graph(3), complete_graph(4)
        res = enumerate_matches(q, g, filter_candidates(q, g), [0, 1, 2], UNLIMITED, materialize=True)
        assert res.match_count == 24 == len(oracle_match(q, g))
        assert image_tuples(q, res.matches) == oracle_match(q, g)
        # root + 4 + 4*3 + 4*3*2 calls
        assert res.enum_calls == 1 + 4 + 12 + 24

    def test_match_limit(self):
        q, g = complete_graph(3), complete_graph(4)
        res = enumerate_matches(q, g, filter_candidates(q, g), [0, 1, 2], Limits(5, None))
        assert res.match_count == 5
        assert res.terminated_by == MATCH_LIMIT

    def test_time_limit(self):
        q = path_graph([0] * 6)
        g = complete_graph(14)
        res = enumerate_matches(q, g, filter_candidates(q, g), range(6), Limits(None, 0.0))
        assert res.terminated_by == TIME_LIMIT
        assert not res.solved

    def test_rejects_disconnected_order(self):
        q = path_graph([0, 0, 0])
        with pytest.raises(ValueError):
            enumerate_matches(q, q, filter_candidates(q, q), [0, 2, 1], UNLIMITED)

    def test_empty_candidates_zero_matches(self):
        q = make_graph([1], [], 2)
        g = make_graph([0, 0], [(0, 1)])
        res = enumerate_matches(q, g, CandidateSets(((),)), [0], UNLIMITED)
        assert res.match_count == 0 and res.enum_calls == 1


class TestLocalCandidates:
    def test_no_backward(self):
        q, g = path_graph([0, 0]), path_graph([0, 0, 0])
        cands = CandidateSets(((0, 1, 2), (0, 1, 2)))
        assert compute_local_candidates(0, {}, cands, q, g) == [0, 1, 2]

    def test_single_anchor(self):
        q, g = path_graph([0, 0]), path_graph([0, 0, 0])
        cands = CandidateSets(((0, 1, 2), (0, 1, 2)))
        assert compute_local_candidates(1, {0: 1}, cands, q, g) == [0, 2]

    def test_two_anchors_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            q, g = random_instance(rng, q_range=(3, 6))
            cands = filter_candidates(q, g)
            for u in range(q.vertex_count):
                nbrs = q.adjacency_lists[u]
                if len(nbrs) < 2:
                    continue
                mapping = {w: int(rng.integers(g.vertex_count)) for w in nbrs[:2]}
                expected = [
                    v for v in cands[u]
                    if all(g.has_edge(mapping[w], v) for w in mapping)
                ]
                assert compute_local_candidates(u, mapping, cands, q, g) == expected


@pytest.fixture(scope="module")
def corpus():
    rng = np.random.default_rng(2024)
    return [random_instance(rng) for _ in range(80)]


def test_oracle_equivalence_all_heuristics(corpus):
    for q, g in corpus:
        assert is_connected(q)
        stats = compute_stats(g)
        cands = filter_candidates(q, g)
        truth = oracle_match(q, g)
        for order in (order_ri(q), order_qsi(q, stats), order_gql(q, cands), order_infrequent_label(q, stats)):
            res = enumerate_matches(q, g, cands, order, UNLIMITED, materialize=True)
            got = image_tuples(q, res.matches)
            assert got == truth
            assert res.match_count == len(truth)
            assert all(is_match(q, g, m) for m in res.matches)


def test_results_invariant_across_orders(corpus):
    for q, g in corpus[:30]:
        if q.vertex_count > 6:
            continue
        cands = filter_candidates(q, g)
        sets = {
            frozenset(image_tuples(q, enumerate_matches(q, g, cands, o, UNLIMITED, materialize=True).matches))
            for o in itertools.islice(connected_orders(q), 40)
        }
        assert len(sets) <= 1


def test_single_vertex_call_count(corpus):
    for _, g in corpus[:20]:
        q = make_graph([0], [], max(1, g.label_universe_size))
        cands = filter_candidates(q, g)
        res = enumerate_matches(q, g, cands, [0], UNLIMITED)
        assert res.enum_calls == 1 + len(cands[0])


def test_limits_against_oracle(corpus):
    for q, g in corpus:
        total = len(oracle_match(q, g))
        cands = filter_candidates(q, g)
        order = order_ri(q) if total else None
        if order is None:
            continue
        for k in (1, 5, 10):
            res = enumerate_matches(q, g, cands, order, Limits(k, None))
            assert res.match_count == min(k, total)
            assert res.terminated_by == (MATCH_LIMIT if total >= k else EXHAUSTED)


def test_is_match_rejects_bad_mappings():
    q, g = path_graph([0, 0]), path_graph([0, 0, 0])
    assert is_match(q, g, {0: 0, 1: 1})
    assert not is_match(q, g, {0: 0, 1: 2})  # not an edge
    assert not is_match(q, g, {0: 1, 1: 1})  # not injective
