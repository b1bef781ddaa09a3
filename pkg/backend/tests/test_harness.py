import statistics

import numpy as np
import pytest

from backend.app.errors import DomainError
from backend.app.game import realized_utility
from backend.app.harness import (
    GameState,
    rotate_order,
    run_experiment,
    run_game,
    run_slot,
    sweep_signal_quality,
)
from backend.app.learning import convergence_metrics
from backend.app.models import STRATEGIES, Belief
from backend.app.serialization import csv_text, parse_config


def _fairness_config(make_config, rotation_period=10):
    """u = 20/n - 5 with q = 5 always, so exactly three customers request per slot."""
    return make_config(
        customers=5,
        dishes=1,
        true_states=[5.0],
        signal_quality=1.0,
        utility={"gamma": 0.4, "cost": 5.0},
        prior=[[0.0, 0.0, 0.0, 0.0, 1.0]],
        rotation_period=rotation_period,
        slots=50,
    )


def _pooled(a, b):
    return (a.stderr**2 + b.stderr**2) ** 0.5


def test_rotate_order_schedule():
    order = [1, 2, 3, 4, 5]
    assert rotate_order(order, 100, 99) == order
    assert rotate_order(order, 100, 0) == order
    assert rotate_order(order, 100, 100) == [2, 3, 4, 5, 1]
    current = order
    for k in range(1, 6):
        current = rotate_order(current, 100, 100 * k)
    assert current == order
    with pytest.raises(DomainError):
        rotate_order(order, 0, 5)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_run_slot_accounting(small_yaml, strategy):
    cfg = parse_config(small_yaml)
    state = GameState(cfg)
    rng = np.random.default_rng(3)
    decision_rng = np.random.default_rng(4)
    for _ in range(cfg.slots):
        before = state.belief
        trace = run_slot(state, strategy, rng, decision_rng)
        decisions = trace.decisions
        assert decisions.respects_budget(cfg.effective_budget)
        totals = decisions.row_sums()

        recomputed = [0.0] * cfg.customers
        per_dish = {}
        for record in trace.signals:
            per_dish.setdefault(record.dish, set()).add(record.signal)
            recomputed[record.customer] += realized_utility(
                record.signal, totals[record.dish], record.customer, record.dish, cfg.utility
            )
        assert all(len(labels) == 1 for labels in per_dish.values())
        assert len(trace.signals) == sum(totals)
        assert trace.utilities == pytest.approx(recomputed)
        assert trace.welfare == pytest.approx(sum(recomputed))
        if strategy == "myopic":
            assert trace.belief == before
    assert state.slot == cfg.slots


def test_run_slot_without_requests_keeps_belief(make_config):
    cfg = make_config(utility={"cost": 100.0})
    state = GameState(cfg)
    trace = run_slot(state, "best-response", np.random.default_rng(0))
    assert trace.decisions.row_sums() == [0, 0]
    assert trace.welfare == 0.0
    assert trace.belief == cfg.prior
    with pytest.raises(DomainError):
        run_slot(state, "greedy", np.random.default_rng(0))


def test_random_strategy_still_learns(make_config):
    cfg = make_config(customers=4, signal_quality=0.9, slots=30)
    traces = run_game(cfg, "random", np.random.SeedSequence(12))
    assert traces[-1].belief != cfg.prior
    assert all(t.decisions.respects_budget(cfg.effective_budget) for t in traces)


def test_independent_signals_differ_between_requesters(make_config):
    cfg = make_config(customers=6, dishes=1, true_states=[3.0], signal_quality=0.3,
                      utility={"cost": 0.0}, signal_sharing="independent", slots=20)
    traces = run_game(cfg, "learning", np.random.SeedSequence(5))
    labels = {record.signal for trace in traces for record in trace.signals}
    assert len(labels) > 1
    assert any(len({r.signal for r in trace.signals}) > 1 for trace in traces)


def test_run_game_is_deterministic(small_yaml):
    cfg = parse_config(small_yaml)
    for strategy in STRATEGIES:
        first = run_game(cfg, strategy, np.random.SeedSequence(99))
        second = run_game(cfg, strategy, np.random.SeedSequence(99))
        assert first == second


def test_order_schedule_is_cycled(make_config):
    cfg = make_config(
        customers=4,
        rotation_period=2,
        slots=8,
        order_schedule=[[2, 1, 0, 3], [1, 0, 3, 2]],
    )
    orders = [trace.order for trace in run_game(cfg, "random")]
    assert orders[0] == orders[1] == [0, 1, 2, 3]
    assert orders[2] == orders[3] == [2, 1, 0, 3]
    assert orders[4] == orders[5] == [1, 0, 3, 2]
    assert orders[6] == [2, 1, 0, 3]


def test_run_experiment_single_realization_matches_run_game(small_yaml):
    cfg = parse_config(small_yaml)
    result = run_experiment(cfg, "best-response", 1, seed=21, workers=1)
    child = np.random.SeedSequence(21).spawn(1)[0]
    traces = run_game(cfg, "best-response", child)
    assert result.traces[0] == traces
    assert result.mean_welfare == pytest.approx(np.mean([t.welfare for t in traces]))
    assert result.stderr == 0.0
    assert len(result.cumulative_utility) == cfg.slots
    assert result.final_decisions == traces[-1].decisions


def test_run_experiment_reuses_child_seeds(small_yaml):
    cfg = parse_config(small_yaml)
    three = run_experiment(cfg, "random", 3, seed=5, workers=1, keep_traces=False)
    six = run_experiment(cfg, "random", 6, seed=5, workers=1, keep_traces=False)
    assert six.welfare_per_realization[:3] == three.welfare_per_realization
    assert three.traces == []
    assert len(three.convergence.strong_total) == cfg.slots


def test_run_experiment_contract(small_yaml):
    cfg = parse_config(small_yaml)
    with pytest.raises(DomainError):
        run_experiment(cfg, "random", 0)
    with pytest.raises(DomainError):
        run_experiment(cfg, "greedy", 1)


def test_rotation_equalizes_cumulative_utility(make_config):
    rotated = run_experiment(_fairness_config(make_config), "best-response", 1, workers=1)
    final = rotated.cumulative_utility[-1]
    assert final == pytest.approx([final[0]] * 5)
    assert final[0] == pytest.approx(30 * (20.0 / 3 - 5.0))

    fixed = run_experiment(
        _fairness_config(make_config, rotation_period=1000), "best-response", 1, workers=1
    )
    final = fixed.cumulative_utility[-1]
    assert final[3] == final[4] == 0.0
    assert min(final[:3]) > 0


def test_final_decisions_are_keyed_by_customer(make_config):
    result = run_experiment(_fairness_config(make_config), "best-response", 1, workers=1)
    last = result.traces[0][-1]
    # four rotations by slot 49
    assert last.order == [4, 0, 1, 2, 3]
    assert last.decisions.entries == [[1, 1, 1, 0, 0]]
    assert result.final_decisions.entries == [[1, 1, 0, 0, 1]]
    rows = csv_text(result, "ne-matrix").splitlines()
    assert rows[1:] == ["1,1,1", "1,2,1", "1,3,0", "1,4,0", "1,5,1"]


def test_sweep_single_cell_matches_experiment(small_yaml):
    cfg = parse_config(small_yaml)
    rows = sweep_signal_quality(cfg, [0.7], ["myopic"], 4, seed=3, workers=1)
    result = run_experiment(cfg.with_signal_quality(0.7), "myopic", 4, seed=3, workers=1)
    assert len(rows) == 1
    assert rows[0].w == 0.7 and rows[0].strategy == "myopic"
    assert rows[0].mean_welfare == pytest.approx(result.mean_welfare)
    assert rows[0].stderr == pytest.approx(result.stderr)
    with pytest.raises(DomainError):
        sweep_signal_quality(cfg, [], ["myopic"], 1)


def test_welfare_grows_with_signal_quality(make_config):
    cfg = make_config(customers=5, dishes=1, true_states=[5.0], slots=20)
    grid = [0.5, 0.6, 0.7, 0.8, 0.9]
    rows = sweep_signal_quality(cfg, grid, ["best-response"], 20, seed=8, workers=1)
    assert [row.w for row in rows] == grid
    for low, high in zip(rows, rows[1:]):
        assert high.mean_welfare >= low.mean_welfare - 2 * _pooled(low, high)


def _welfare_config(make_config, budget=None):
    """Dishes sit at state 2 (mean quality 2.25), below the uniform prior's mean of 3."""
    gamma = np.random.default_rng(17).uniform(0.0, 1.0, size=10)
    return make_config(
        customers=10,
        dishes=2,
        budget=budget,
        true_states=[2.0, 2.0],
        signal_quality=0.8,
        utility={"gamma": gamma.tolist(), "cost": 5.0},
        slots=40,
        seed=31,
    )


@pytest.mark.slow
@pytest.mark.parametrize("budget", [None, 1])
def test_best_response_has_highest_welfare(make_config, budget):
    cfg = _welfare_config(make_config, budget)
    results = {s: run_experiment(cfg, s, 100, workers=1, keep_traces=False) for s in STRATEGIES}
    best = results["best-response"]
    for other in ("myopic", "random", "learning"):
        assert best.mean_welfare - results[other].mean_welfare > 2 * _pooled(best, results[other])
    learning = results["learning"]
    for other in ("myopic", "random"):
        assert results[other].mean_welfare - learning.mean_welfare > 2 * _pooled(
            learning, results[other]
        )


def _first_passages(cfg, threshold=0.2):
    """Dish states are drawn per seed; the same seed gives the same states."""
    passages, weak = [], []
    labels = cfg.state_set.states
    for seed in range(20):
        states = np.random.default_rng(seed).choice(labels, size=cfg.dishes)
        game = cfg.with_updates(true_states=[float(s) for s in states])
        traces = run_game(game, "best-response", np.random.SeedSequence(seed))
        report = convergence_metrics(
            [t.belief for t in traces], game.true_states, game.signal_model, game.state_set
        )
        passage = report.first_passage(threshold)
        passages.append(passage if passage is not None else game.slots)
        weak.append(max(report.weak_distance[-1]))
    return passages, weak


@pytest.mark.slow
def test_beliefs_converge_to_true_states(make_config):
    cfg = make_config(customers=3, dishes=5, true_states=[1.0] * 5, signal_quality=0.6, slots=50)
    passages, weak = _first_passages(cfg)
    assert statistics.median(passages) <= 30
    assert max(weak) < 0.05

    budgeted = cfg.with_updates(budget=3)
    budget_passages, _ = _first_passages(budgeted)
    assert statistics.median(budget_passages) >= statistics.median(passages)


def test_point_mass_on_truth_stays_put(make_config):
    cfg = make_config(
        dishes=1,
        true_states=[4.0],
        signal_quality=1.0,
        prior=Belief.point_mass([3], 5).probs,
        slots=5,
    )
    for trace in run_game(cfg, "best-response"):
        assert trace.belief == cfg.prior
