from math import comb

import numpy as np
import pytest

from backend.app.best_response import (
    br_eibg,
    br_ibg,
    compute_n_t,
    enumerate_candidates,
    equal_share_check,
    prefix_check,
    solve_equilibrium,
    spne_oracle,
    threshold_check,
    verify_nash,
)
from backend.app.errors import CapacityError, DomainError
from backend.app.harness import random_instance
from backend.app.models import Belief, DecisionMatrix, Observation
from backend.app.serialization import parse_config


def _sure_thing(make_config, customers, cost, dishes=1, budget=None):
    """Signals reveal q=1 exactly, so u = 10/n - cost for every customer."""
    cfg = make_config(
        customers=customers,
        dishes=dishes,
        budget=budget,
        true_states=[1.0] * dishes,
        signal_quality=1.0,
        utility={"gamma": 1.0, "cost": cost},
    )
    return cfg, Belief.point_mass([0] * dishes, 5)


def _balanced(balanced_yaml):
    cfg = parse_config(balanced_yaml)
    return cfg, cfg.prior


@pytest.mark.parametrize(
    "dishes, budget, size", [(3, 2, 7), (5, 3, 26), (1, 1, 2), (4, 9, 16)]
)
def test_enumerate_candidates_sizes(dishes, budget, size):
    candidates = enumerate_candidates(dishes, budget)
    assert candidates.size == size
    assert size == 1 + sum(comb(dishes, k) for k in range(1, min(budget, dishes) + 1))
    assert len(set(candidates.combinations)) == size


def test_enumerate_candidates_order():
    combos = enumerate_candidates(3, 2).combinations
    assert combos[0] == (0, 0, 0)
    assert combos[1:4] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert combos[4:] == [(1, 1, 0), (1, 0, 1), (0, 1, 1)]
    popcounts = [sum(c) for c in combos]
    assert popcounts == sorted(popcounts)
    with pytest.raises(DomainError):
        enumerate_candidates(0, 1)


def test_br_eibg_everyone_requests(make_config):
    # point mass with an uninformative signal: E[q] = 3, u = 30/n - 1 > 0 for n <= 10
    cfg = make_config(customers=10, dishes=1, true_states=[5.0], signal_quality=0.2)
    row = Belief.point_mass([4], 5).row(0)
    n = 0
    decisions = []
    for i in range(10):
        d, m = br_eibg(row, n, i, cfg)
        decisions.append(d)
        n += d
        assert m == 9 - i
    assert decisions == [1] * 10


def test_br_eibg_only_first_requests(make_config):
    cfg, belief = _sure_thing(make_config, customers=4, cost=5.0)
    row = belief.row(0)
    assert br_eibg(row, 0, 0, cfg) == (1, 0)
    assert br_eibg(row, 1, 1, cfg) == (0, 0)
    assert br_eibg(row, 1, 3, cfg) == (0, 0)
    # the last customer facing an empty dish requests and predicts nobody after it
    assert br_eibg(row, 0, 3, cfg) == (1, 0)
    with pytest.raises(DomainError):
        br_eibg(row, 0, 4, cfg)
    with pytest.raises(DomainError):
        br_eibg(row, 2, 1, cfg)


def test_br_ibg_single_customer_picks_best_dish(make_config):
    cfg = make_config(
        customers=1,
        dishes=2,
        budget=1,
        true_states=[1.0, 1.0],
        signal_quality=1.0,
        utility={"gamma": 1.0, "cost": [1.0, 6.0]},
    )
    belief = Belief.point_mass([0, 0], 5)
    phi, prediction = br_ibg(belief, Observation(customer=0, counts=[0, 0]), cfg)
    assert phi == (1, 0)
    assert prediction.counts == [0, 0]


def test_br_ibg_all_negative_requests_nothing(make_config):
    cfg, belief = _sure_thing(make_config, customers=3, cost=20.0, dishes=3, budget=2)
    phi, prediction = br_ibg(belief, Observation(customer=1, counts=[1, 0, 1]), cfg)
    assert phi == (0, 0, 0)
    assert prediction.counts == [0, 0, 0]


def test_br_ibg_without_budget_matches_per_dish_recursion():
    rng = np.random.default_rng(17)
    for _ in range(40):
        cfg = random_instance(rng)
        cfg = cfg.with_updates(budget=cfg.dishes)
        belief = cfg.prior
        position = int(rng.integers(cfg.customers))
        counts = [int(rng.integers(position + 1)) for _ in range(cfg.dishes)]
        phi, prediction = br_ibg(belief, Observation(customer=position, counts=counts), cfg)
        for j in range(cfg.dishes):
            d, m = br_eibg(belief.row(j), counts[j], position, cfg, dish=j)
            assert phi[j] == d
            assert prediction.counts[j] == m


def test_br_ibg_literal_recursion_matches_cached():
    rng = np.random.default_rng(99)
    for _ in range(30):
        cfg = random_instance(rng, max_customers=3)
        counts = [0] * cfg.dishes
        cached = br_ibg(cfg.prior, Observation(customer=0, counts=counts), cfg)
        literal = br_ibg(cfg.prior, Observation(customer=0, counts=counts), cfg, use_cache=False)
        assert cached == literal


def test_solve_single_customer(make_config):
    cfg = make_config(
        customers=1,
        dishes=3,
        budget=2,
        true_states=[1.0, 1.0, 1.0],
        signal_quality=1.0,
        utility={"gamma": 1.0, "cost": [4.0, 12.0, 2.0]},
    )
    matrix = solve_equilibrium(cfg, Belief.point_mass([0, 0, 0], 5))
    assert matrix.entries == [[1], [0], [1]]


def test_solve_without_budget_has_threshold_rows(make_config):
    cfg = make_config(
        customers=10,
        dishes=5,
        true_states=[1.0, 2.0, 3.0, 4.0, 5.0],
        signal_quality=0.8,
        utility={"gamma": 0.5, "cost": 3.0},
    )
    belief = Belief.point_mass([0, 1, 2, 3, 4], 5)
    matrix = solve_equilibrium(cfg, belief)
    assert threshold_check(matrix)
    assert all(prefix_check(row) for row in matrix.entries)
    # better dishes attract at least as many requesters
    sums = matrix.row_sums()
    assert sums == sorted(sums)
    assert verify_nash(matrix, belief, cfg).ok


@pytest.mark.slow
def test_balanced_equal_sharing(balanced_yaml):
    cfg, belief = _balanced(balanced_yaml)
    matrix = solve_equilibrium(cfg, belief)
    assert matrix.row_sums() == [6] * 5
    assert matrix.column_sums() == [3] * 10
    assert verify_nash(matrix, belief, cfg).ok
    n_t = compute_n_t(belief.row(0), cfg)
    assert n_t == 10
    assert equal_share_check(matrix, n_t, cfg)


def test_verify_nash_detects_crowding(make_config):
    cfg, belief = _sure_thing(make_config, customers=3, cost=5.0)
    ones = DecisionMatrix(entries=[[1, 1, 1]])
    report = verify_nash(ones, belief, cfg)
    assert not report.ok
    assert report.violation.alternative == [0]
    assert report.violation.gain > 0

    solved = solve_equilibrium(cfg, belief)
    assert solved.entries == [[1, 0, 0]]
    assert verify_nash(solved, belief, cfg).ok


def test_verify_nash_reports_budget_excess(make_config):
    cfg, belief = _sure_thing(make_config, customers=2, cost=1.0, dishes=2, budget=1)
    report = verify_nash(DecisionMatrix(entries=[[1, 0], [1, 1]]), belief, cfg)
    assert not report.ok
    assert report.violation.customer == 0
    assert "budget" in report.violation.reason
    with pytest.raises(DomainError):
        verify_nash(DecisionMatrix(entries=[[1, 0, 0]]), belief, cfg)


def test_oracle_only_first_customer(make_config):
    cfg, belief = _sure_thing(make_config, customers=3, cost=5.0)
    assert spne_oracle(cfg, belief).entries == [[1, 0, 0]]


def test_oracle_single_customer_matches_solver(make_config):
    cfg = make_config(customers=1, dishes=3, budget=2, true_states=[5.0, 3.0, 1.0])
    assert spne_oracle(cfg, cfg.prior) == solve_equilibrium(cfg, cfg.prior)


def test_oracle_capacity_guard(make_config):
    cfg = make_config(customers=4, dishes=3, budget=2, true_states=[5.0, 3.0, 1.0])
    with pytest.raises(CapacityError):
        spne_oracle(cfg, cfg.prior, max_tree=1000)
    with pytest.raises(CapacityError):
        spne_oracle(make_config(customers=3, dishes=2), make_config().prior, max_tree=10)


@pytest.mark.slow
def test_solver_matches_oracle_on_random_games():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        cfg = random_instance(rng, max_customers=4, max_dishes=3, max_budget=2)
        order = rng.permutation(cfg.customers).tolist()
        solved = solve_equilibrium(cfg, cfg.prior, order)
        oracle = spne_oracle(cfg, cfg.prior, order)
        assert solved.entries == oracle.entries
        assert solved.respects_budget(cfg.effective_budget)
        assert verify_nash(solved, cfg.prior, cfg, order).ok


def test_decoupled_solution_matches_joint_search():
    rng = np.random.default_rng(7)
    for _ in range(100):
        cfg = random_instance(rng)
        cfg = cfg.with_updates(budget=cfg.dishes + int(rng.integers(0, 2)))
        joint = solve_equilibrium(cfg, cfg.prior, decouple=False)
        split = solve_equilibrium(cfg, cfg.prior)
        assert joint.entries == split.entries


def test_threshold_structure_on_random_homogeneous_games(make_config):
    rng = np.random.default_rng(5)
    for _ in range(30):
        customers = int(rng.integers(1, 13))
        dishes = int(rng.integers(1, 6))
        cfg = make_config(
            customers=customers,
            dishes=dishes,
            true_states=[float(s) for s in rng.integers(1, 6, size=dishes)],
            signal_quality=float(rng.uniform(0.2, 1.0)),
            utility={"gamma": float(rng.uniform(0.1, 1.0)), "cost": float(rng.uniform(0.5, 5.0))},
            prior=rng.dirichlet(np.ones(5), size=dishes).tolist(),
        )
        matrix = solve_equilibrium(cfg, cfg.prior)
        assert threshold_check(matrix)
        assert all(prefix_check(row) for row in matrix.entries)


def test_equal_sharing_on_random_budget_games(make_config):
    rng = np.random.default_rng(12)
    for _ in range(25):
        customers = int(rng.integers(2, 6))
        dishes = int(rng.integers(2, 5))
        budget = int(rng.integers(1, dishes))
        state = float(rng.integers(1, 6))
        prior_row = rng.dirichlet(np.ones(5)).tolist()
        cfg = make_config(
            customers=customers,
            dishes=dishes,
            budget=budget,
            true_states=[state] * dishes,
            signal_quality=float(rng.uniform(0.2, 1.0)),
            utility={"gamma": 1.0, "cost": float(rng.uniform(0.5, 15.0))},
            prior=[prior_row] * dishes,
        )
        matrix = solve_equilibrium(cfg, cfg.prior)
        n_t = compute_n_t(cfg.prior.row(0), cfg)
        assert equal_share_check(matrix, n_t, cfg), (matrix.entries, n_t)


def test_equal_sharing_with_tight_threshold(make_config):
    cfg, belief = _sure_thing(make_config, customers=3, cost=5.0, dishes=2, budget=1)
    matrix = spne_oracle(cfg, belief)
    assert matrix == solve_equilibrium(cfg, belief)
    assert compute_n_t(belief.row(0), cfg) == 1
    assert matrix.row_sums() == [1, 1]
    assert equal_share_check(matrix, 1, cfg)


def test_equal_sharing_rejects_uneven_rows(balanced_yaml):
    cfg, _ = _balanced(balanced_yaml)
    rows = [[1] * k + [0] * (10 - k) for k in (5, 7, 6, 6, 6)]
    assert not equal_share_check(DecisionMatrix(entries=rows), 10, cfg)


def test_equal_sharing_requires_homogeneous_config(make_config):
    cfg = make_config(customers=2, budget=1, utility={"gamma": [1.0, 0.5]})
    with pytest.raises(DomainError):
        equal_share_check(DecisionMatrix.empty(2, 2), 1, cfg)
    cfg = make_config(customers=2, budget=1, true_states=[5.0, 4.0])
    with pytest.raises(DomainError):
        equal_share_check(DecisionMatrix.empty(2, 2), 1, cfg)


def test_compute_n_t_examples(make_config):
    cfg = make_config(customers=40, dishes=1, true_states=[5.0], signal_quality=0.6)
    assert compute_n_t(Belief.point_mass([4], 5).row(0), cfg) == 39
    zero = make_config(dishes=1, true_states=[5.0], utility={"gamma": 0.0})
    assert compute_n_t(zero.prior.row(0), zero) == 0
    cfg, belief = _sure_thing(make_config, customers=5, cost=5.0)
    assert compute_n_t(belief.row(0), cfg) == 1
    mixed = make_config(utility={"gamma": [1.0, 0.5, 0.2]})
    with pytest.raises(DomainError):
        compute_n_t(mixed.prior.row(0), mixed)


def test_threshold_and_prefix_checks():
    assert threshold_check(DecisionMatrix(entries=[[1, 1, 0], [1, 0, 0]]))
    assert not threshold_check(DecisionMatrix(entries=[[1, 1, 0], [1, 0, 1]]))
    assert threshold_check(DecisionMatrix.empty(3, 4))
    assert prefix_check([1, 1, 0, 0])
    assert not prefix_check([0, 1, 1, 0])
