import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matchorder.features import step_features
from matchorder.graph import compute_stats, extract_connected_query
from matchorder.ordering import is_connected_order
from matchorder.policy import action_mask, dumps_model, forward, init_weights
from matchorder.synthetic import skewed_label_graph
from matchorder.training import (
    METRICS_HEADER,
    EpisodeTrace,
    QueryContext,
    Step,
    TrainConfig,
    compute_rewards,
    greedy_order,
    ppo_update,
    rollout,
    signed_log1p,
    surrogate_objective,
    train,
    write_metrics_csv,
)

from conftest import complete_graph, make_graph, path_graph

G_SMALL = skewed_label_graph(60, 150, seed=3)
STATS_SMALL = compute_stats(G_SMALL)


def small_queries(count, size=5, offset=0):
    return [extract_connected_query(G_SMALL, size, offset + i) for i in range(count)]


def zero_model(layers=2, dim=8):
    m = init_weights(layers, dim, 0)
    for v in m.params.values():
        v[...] = 0.0
    return m


def lowest_id_connected_order(q):
    order, placed = [0], {0}
    while len(order) < q.vertex_count:
        nxt = min(w for u in order for w in q.adjacency_lists[u] if w not in placed)
        order.append(nxt)
        placed.add(nxt)
    return tuple(order)


def sampled_trace(model, q, seed=0):
    ctx = QueryContext.build(q, STATS_SMALL)
    return rollout(model, ctx, "sample", np.random.default_rng(seed))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"gamma": 1.0}, {"gamma": 0.0}, {"clip_eps": 1.0}, {"lr": 0.0}, {"epochs": -1}]
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.lr == 1e-3 and cfg.epochs == 100 and cfg.match_limit == 100_000


class TestRewards:
    def test_signed_log1p(self):
        assert signed_log1p(0) == 0.0
        assert math.isclose(signed_log1p(90), math.log(91))
        assert math.isclose(signed_log1p(-90), -math.log(91))

    def test_equal_counts(self):
        tr = sampled_trace(init_weights(1, 4, 0), path_graph([0, 0, 0]))
        assert compute_rewards(tr, 50, 50, TrainConfig()).r_enum == 0.0

    def test_reduction_closed_form(self):
        tr = sampled_trace(init_weights(1, 4, 0), path_graph([0, 0, 0]))
        r = compute_rewards(tr, 10, 100, TrainConfig()).r_enum
        assert math.isclose(r, math.log(91), rel_tol=1e-12)
        assert round(r, 4) == 4.5109

    def test_decayed_return(self):
        # two sampled steps, each with R_t = beta_val * valid_reward = 1
        steps = [Step(t, (), (0, 1), 0, 0.5, None, 0, 0.0) for t in (1, 2)]
        tr = EpisodeTrace(steps, (0, 1))
        cfg = TrainConfig(gamma=0.5, beta_val=10.0, beta_h=0.0)
        compute_rewards(tr, 7, 7, cfg)
        assert tr.step_rewards == [1.0, 1.0]
        assert tr.ret == 0.75

    def test_invalid_argmax_penalty(self):
        steps = [Step(1, (), (1, 2), 1, 0.5, None, 0, 0.3)]
        tr = compute_rewards(EpisodeTrace(steps, (1,)), 3, 3, TrainConfig())
        assert tr.steps[0].r_val == -0.2
        assert math.isclose(tr.steps[0].reward, -0.2 + 0.1 * 0.3)

    def test_singleton_steps_carry_only_enum_reward(self):
        tr = sampled_trace(init_weights(1, 4, 0), make_graph([0, 0], [(0, 1)]))
        compute_rewards(tr, 1, 3, TrainConfig())
        last = tr.steps[-1]
        assert not last.sampled
        assert last.r_val == 0.0 and last.reward == tr.r_enum

    def test_entropy_non_negative(self):
        model = init_weights(2, 8, 1)
        for q in small_queries(5, 6):
            tr = sampled_trace(model, q, 1)
            assert all(s.entropy >= 0 for s in tr.steps)
            assert all(math.isfinite(s.log_prob) for s in tr.steps)


class TestRollout:
    def test_zero_model_greedy_lowest_id(self):
        for q in small_queries(8, 7):
            order = greedy_order(zero_model(), q, STATS_SMALL)
            assert order.vertices == lowest_id_connected_order(q)

    def test_two_vertex_shortcut(self):
        tr = sampled_trace(init_weights(1, 4, 0), make_graph([0, 0], [(0, 1)]))
        assert tr.steps[0].sampled and not tr.steps[1].sampled
        assert tr.steps[1].action_space == (1 - tr.steps[0].action,)

    def test_sample_deterministic(self):
        model = init_weights(2, 8, 0)
        q = small_queries(1, 8)[0]
        a, b = sampled_trace(model, q, 5), sampled_trace(model, q, 5)
        assert a.order == b.order
        assert [s.prob for s in a.steps] == [s.prob for s in b.steps]

    def test_first_by_degree(self):
        q = make_graph([0] * 4, [(0, 3), (1, 3), (2, 3)])
        ctx = QueryContext.build(q, STATS_SMALL)
        tr = rollout(init_weights(1, 4, 0), ctx, "sample", np.random.default_rng(0), first_by_degree=True)
        assert tr.order[0] == 3

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError):
            greedy_order(zero_model(), make_graph([0, 0], []), STATS_SMALL)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 10), st.sampled_from(["sample", "greedy"]))
    def test_orders_always_connected(self, seed, size, mode):
        q = extract_connected_query(G_SMALL, size, seed)
        model = init_weights(2, 8, seed)
        tr = rollout(model, QueryContext.build(q, STATS_SMALL), mode, np.random.default_rng(seed))
        assert sorted(tr.order) == list(range(size))
        assert is_connected_order(q, tr.order)

    def test_score_shift_invariance(self):
        model = init_weights(2, 16, 4)
        shifted = model.copy()
        shifted.params["mlp2.bias"] += 3.25
        cfg = TrainConfig()
        for i, q in enumerate(small_queries(6, 7)):
            for mode in ("sample", "greedy"):
                ctx = QueryContext.build(q, STATS_SMALL)
                a = rollout(model, ctx, mode, np.random.default_rng(i))
                b = rollout(shifted, ctx, mode, np.random.default_rng(i))
                assert a.order == b.order
                for sa, sb in zip(a.steps, b.steps):
                    assert math.isclose(sa.entropy, sb.entropy, rel_tol=1e-12, abs_tol=1e-15)
                    if sa.sampled:
                        assert math.isclose(sa.prob, sb.prob, rel_tol=1e-12)
                assert compute_rewards(a, 5, 9, cfg).r_enum == compute_rewards(b, 5, 9, cfg).r_enum


def one_sampled_step_trace(r):
    model = init_weights(1, 4, 2)
    tr = sampled_trace(model, make_graph([0, 0], [(0, 1)]), 0)
    tr.ret = r
    return model, tr


class TestSurrogate:
    def test_identity_ratio(self):
        model = init_weights(2, 8, 0)
        traces = []
        for i, q in enumerate(small_queries(4, 6)):
            tr = sampled_trace(model, q, i)
            compute_rewards(tr, 10 + i, 20, TrainConfig())
            traces.append(tr)
        J, _ = surrogate_objective(model, traces, TrainConfig())
        expected = sum(tr.ret * sum(s.sampled for s in tr.steps) for tr in traces)
        assert math.isclose(J, expected, rel_tol=1e-12)

    @pytest.mark.parametrize("scale, r, expected", [(0.5, 1.0, 1.2), (2.0, -1.0, -0.8), (2.0, 1.0, 0.5)])
    def test_clip_closed_form(self, scale, r, expected):
        # stored prob = current / ratio, i.e. scale = 1 / ratio
        model, tr = one_sampled_step_trace(r)
        tr.steps[0].prob *= scale
        J, _ = surrogate_objective(model, [tr], TrainConfig(clip_eps=0.2))
        assert math.isclose(J, expected, rel_tol=1e-12)

    def test_clipped_term_has_no_gradient(self):
        model, tr = one_sampled_step_trace(1.0)
        tr.steps[0].prob *= 0.5
        _, grads = surrogate_objective(model, [tr], TrainConfig())
        assert all(not g.any() for g in grads.values())

    def test_sum_batch_reward(self):
        model = init_weights(1, 4, 0)
        traces = [sampled_trace(model, make_graph([0, 0], [(0, 1)]), i) for i in range(3)]
        for tr, r in zip(traces, (1.0, 2.0, -0.5)):
            tr.ret = r
        J, _ = surrogate_objective(model, traces, TrainConfig(batch_reward="sum"))
        assert math.isclose(J, 3 * 2.5)

    def test_plain_policy_gradient_direction(self):
        # theta == theta': one SGD step moves by lr * sum r * grad ln pi(a)
        model = init_weights(1, 4, 6, dropout=0.25)
        rng = np.random.default_rng(6)
        for name, arr in model.params.items():
            if name.endswith(".bias"):  # keep pre-activations off the ReLU kink
                arr += rng.uniform(0.05, 0.3, size=arr.shape)
        traces = []
        for i, q in enumerate(small_queries(3, 5)):
            tr = sampled_trace(model, q, 10 + i)
            compute_rewards(tr, 4 + 3 * i, 12, TrainConfig())
            traces.append(tr)

        def weighted_log_prob():
            total = 0.0
            for tr in traces:
                ctx = tr.context
                for s in tr.steps:
                    if not s.sampled:
                        continue
                    h = step_features(ctx.static, s.prefix, s.t)
                    dist, _ = forward(
                        model, ctx.adj, h, action_mask(ctx.q.vertex_count, s.action_space),
                        training=True, dropout_masks=s.dropout_masks,
                    )
                    total += tr.ret * math.log(dist.probs[s.action])
            return total

        cfg = TrainConfig(optimizer="sgd", lr=0.01)
        new, _ = ppo_update(model, model.copy(), traces, cfg)
        step = 1e-6
        for name, arr in model.params.items():
            for idx in list(np.ndindex(arr.shape))[:12]:
                old = arr[idx]
                arr[idx] = old + step
                plus = weighted_log_prob()
                arr[idx] = old - step
                minus = weighted_log_prob()
                arr[idx] = old
                numeric = (plus - minus) / (2 * step)
                moved = (new.params[name][idx] - old) / cfg.lr
                assert math.isclose(moved, numeric, rel_tol=1e-4, abs_tol=1e-7), name

    def test_nan_aborts(self):
        from matchorder.training import TrainingError

        model, tr = one_sampled_step_trace(float("nan"))
        with pytest.raises(TrainingError):
            ppo_update(model, model.copy(), [tr], TrainConfig())


class TestTrain:
    def test_zero_epochs_returns_init(self):
        res = train(G_SMALL, small_queries(3), TrainConfig(epochs=0, seed=5), layers=2, dim=8)
        assert res.metrics == []
        assert res.model == init_weights(2, 8, 5)

    def test_empty_queries(self):
        with pytest.raises(ValueError):
            train(G_SMALL, [], TrainConfig(epochs=1))

    def test_disconnected_query(self):
        with pytest.raises(ValueError):
            train(G_SMALL, [make_graph([0, 0], [])], TrainConfig(epochs=1))

    def test_deterministic_and_incremental(self, tmp_path):
        cfg = TrainConfig(epochs=3, seed=2, match_limit=10_000)
        a = train(G_SMALL, small_queries(6), cfg, dim=8)
        b = train(G_SMALL, small_queries(6), cfg, dim=8)
        assert dumps_model(a.model) == dumps_model(b.model)
        assert [m.row() for m in a.metrics] == [m.row() for m in b.metrics]

        inc = train(G_SMALL, small_queries(4, 7, 100), TrainConfig(epochs=10, match_limit=10_000), model=a.model)
        assert len(inc.metrics) == 10
        assert inc.model != a.model
        assert a.model == b.model  # input model untouched

        path = tmp_path / "metrics.csv"
        write_metrics_csv(inc.metrics, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(METRICS_HEADER)
        assert len(lines) == 11

    def test_all_skipped_epoch_is_noop(self):
        g = complete_graph(14)
        q = path_graph([0] * 6)
        cfg = TrainConfig(epochs=2, match_limit=None, time_limit=1e-9)
        model = init_weights(1, 4, 0)
        res = train(g, [q], cfg, model=model)
        assert [m.skipped_queries for m in res.metrics] == [1, 1]
        assert res.model == model
