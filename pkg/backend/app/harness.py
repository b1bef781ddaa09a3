"""Slot loop, order rotation and multi-realization experiments."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .baselines import learning_decision, myopic_decision, random_decision
from .best_response import solve_equilibrium
from .config import DEFAULT_LABELS, WORKERS
from .errors import DomainError
from .game import UtilityFunction, expected_utility_table, realize_signal, realized_utility
from .learning import convergence_metrics, social_update
from .models import (
    STRATEGIES,
    Belief,
    ConvergenceReport,
    DecisionMatrix,
    ExperimentResult,
    GameConfig,
    Observation,
    SignalRecord,
    SlotTrace,
    WelfareRow,
)

logger = logging.getLogger(__name__)


def rotate_order(order: Sequence[int], period: int, slot: int) -> List[int]:
    """Cyclic shift by one at every multiple of ``period`` (slot 0 excluded)."""
    if period < 1:
        raise DomainError("rotation period must be at least 1")
    order = list(order)
    if slot > 0 and slot % period == 0:
        return order[1:] + order[:1]
    return order


class GameState:
    def __init__(self, cfg: GameConfig, utility: Optional[UtilityFunction] = None) -> None:
        self.cfg = cfg
        self.utility = utility
        self.prior = cfg.prior
        self.belief = cfg.prior
        self.order = cfg.initial_order()
        self.slot = 0
        self._rotations = 0

    def advance(self, belief: Belief) -> None:
        self.belief = belief
        self.slot += 1
        if self.slot % self.cfg.rotation_period != 0:
            return
        schedule = self.cfg.order_schedule
        if schedule:
            self.order = list(schedule[self._rotations % len(schedule)])
        else:
            self.order = rotate_order(self.order, self.cfg.rotation_period, self.slot)
        self._rotations += 1


def _decide(
    state: GameState,
    strategy: str,
    decision_rng: np.random.Generator,
) -> DecisionMatrix:
    cfg, order = state.cfg, state.order
    if strategy == "best-response":
        return solve_equilibrium(cfg, state.belief, order, state.utility)

    if strategy == "random":
        columns = [random_decision(decision_rng, cfg) for _ in range(cfg.customers)]
        return DecisionMatrix.from_columns(columns, cfg.dishes)

    belief = state.prior if strategy == "myopic" else state.belief
    table = expected_utility_table(cfg, belief, order, state.utility)
    columns: List[Tuple[int, ...]] = []
    counts = [0] * cfg.dishes
    for position in range(cfg.customers):
        if strategy == "myopic":
            obs = Observation(customer=position, counts=counts)
            column = myopic_decision(belief, obs, cfg, order, state.utility, table)
        else:
            column = learning_decision(belief, position, cfg, order, state.utility, table)
        columns.append(column)
        counts = [c + d for c, d in zip(counts, column)]
    return DecisionMatrix.from_columns(columns, cfg.dishes)


def _draw_signals(
    cfg: GameConfig, rng: np.random.Generator
) -> Dict[Tuple[int, int], float]:
    # every (position, dish) gets a draw so streams stay aligned across strategies
    model, states = cfg.signal_model, cfg.state_set
    signals: Dict[Tuple[int, int], float] = {}
    for j, theta in enumerate(cfg.true_states):
        if cfg.signal_sharing == "shared":
            q = realize_signal(theta, model, j, rng, states)
            for i in range(cfg.customers):
                signals[(i, j)] = q
        else:
            for i in range(cfg.customers):
                signals[(i, j)] = realize_signal(theta, model, j, rng, states)
    return signals


def run_slot(
    state: GameState,
    strategy: str,
    rng: np.random.Generator,
    decision_rng: Optional[np.random.Generator] = None,
) -> SlotTrace:
    """Plays one slot: decisions, dish sharing, then social learning."""
    if strategy not in STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}")
    cfg = state.cfg
    utility = state.utility or cfg.utility
    order = list(state.order)

    decisions = _decide(state, strategy, decision_rng or rng)
    drawn = _draw_signals(cfg, rng)

    totals = decisions.row_sums()
    utilities = [0.0] * cfg.customers
    records: List[SignalRecord] = []
    signals: Dict[Tuple[int, int], float] = {}
    for j, row in enumerate(decisions.entries):
        for position, d in enumerate(row):
            if not d:
                continue
            customer = order[position]
            q = drawn[(position, j)]
            signals[(position, j)] = q
            records.append(SignalRecord(customer=customer, dish=j, signal=q))
            utilities[customer] += realized_utility(q, totals[j], customer, j, utility)

    if strategy == "myopic":
        belief = state.belief
    else:
        belief = social_update(state.belief, decisions, signals, cfg.signal_model, cfg.state_set)

    trace = SlotTrace(
        slot=state.slot,
        strategy=strategy,
        order=order,
        decisions=decisions,
        signals=records,
        utilities=utilities,
        belief=belief,
        welfare=float(sum(utilities)),
    )
    state.advance(belief)
    return trace


def _streams(seed: np.random.SeedSequence) -> Tuple[np.random.Generator, np.random.Generator]:
    signal_seed, decision_seed = seed.spawn(2)
    return np.random.default_rng(signal_seed), np.random.default_rng(decision_seed)


def run_game(
    cfg: GameConfig,
    strategy: str,
    seed: Optional[np.random.SeedSequence] = None,
    utility: Optional[UtilityFunction] = None,
) -> List[SlotTrace]:
    seed = seed if seed is not None else np.random.SeedSequence(cfg.seed)
    rng, decision_rng = _streams(seed)
    state = GameState(cfg, utility)
    return [run_slot(state, strategy, rng, decision_rng) for _ in range(cfg.slots)]


def _run_realization(
    args: Tuple[GameConfig, str, np.random.SeedSequence, Optional[UtilityFunction], bool],
) -> Tuple[float, Optional[List[SlotTrace]], ConvergenceReport, np.ndarray]:
    cfg, strategy, seed, utility, keep_traces = args
    traces = run_game(cfg, strategy, seed, utility)
    welfare = float(np.mean([trace.welfare for trace in traces]))
    report = convergence_metrics(
        [trace.belief for trace in traces], cfg.true_states, cfg.signal_model, cfg.state_set
    )
    cumulative = np.cumsum(np.asarray([trace.utilities for trace in traces]), axis=0)
    return welfare, traces if keep_traces else None, report, cumulative


def _average_reports(reports: Sequence[ConvergenceReport]) -> ConvergenceReport:
    return ConvergenceReport(
        strong_distance=np.mean([r.strong_distance for r in reports], axis=0).tolist(),
        strong_total=np.mean([r.strong_total for r in reports], axis=0).tolist(),
        weak_distance=np.mean([r.weak_distance for r in reports], axis=0).tolist(),
    )


def run_experiment(
    cfg: GameConfig,
    strategy: str,
    realizations: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    keep_traces: bool = True,
    utility: Optional[UtilityFunction] = None,
) -> ExperimentResult:
    """Independent seeded runs; realization k always uses child k of the master seed."""
    if realizations < 1:
        raise DomainError("realizations must be at least 1")
    if strategy not in STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}")
    master = cfg.seed if seed is None else seed
    workers = WORKERS if workers is None else max(1, workers)
    children = np.random.SeedSequence(master).spawn(realizations)
    jobs = [(cfg, strategy, child, utility, keep_traces) for child in children]

    logger.info(
        "Running %d realizations of %s (N=%d, M=%d, slots=%d, workers=%d)",
        realizations, strategy, cfg.customers, cfg.dishes, cfg.slots, workers,
    )
    if workers > 1 and realizations > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_realization, jobs))
    else:
        outcomes = [_run_realization(job) for job in jobs]

    welfares = [outcome[0] for outcome in outcomes]
    traces = [outcome[1] for outcome in outcomes if outcome[1] is not None]
    mean_welfare = float(np.mean(welfares))
    stderr = float(stats.sem(welfares)) if realizations > 1 else 0.0
    cumulative = np.mean([outcome[3] for outcome in outcomes], axis=0)
    last = traces[0][-1] if traces else None
    final = last.decisions.by_customer(last.order) if last is not None else None
    logger.info("%s: mean welfare %.4f (stderr %.4f)", strategy, mean_welfare, stderr)

    return ExperimentResult(
        strategy=strategy,
        realizations=realizations,
        master_seed=master,
        signal_quality=cfg.signal_model.quality,
        traces=traces,
        welfare_per_realization=welfares,
        mean_welfare=mean_welfare,
        stderr=stderr,
        convergence=_average_reports([outcome[2] for outcome in outcomes]),
        cumulative_utility=cumulative.tolist(),
        final_decisions=final,
    )


def random_instance(
    rng: np.random.Generator,
    max_customers: int = 4,
    max_dishes: int = 3,
    max_budget: int = 2,
) -> GameConfig:
    """Small game with random gamma, costs, quality and a random (non-uniform) prior."""
    customers = int(rng.integers(1, max_customers + 1))
    dishes = int(rng.integers(1, max_dishes + 1))
    budget = int(rng.integers(1, max_budget + 1))
    labels = list(DEFAULT_LABELS)
    return GameConfig.model_validate(
        {
            "customers": customers,
            "dishes": dishes,
            "budget": budget,
            "true_states": [labels[int(k)] for k in rng.integers(0, len(labels), size=dishes)],
            "signal_quality": float(rng.uniform(0.2, 1.0)),
            "utility": {
                "gamma": rng.uniform(0.0, 1.0, size=customers).tolist(),
                "reward": 10.0,
                "cost": rng.uniform(0.5, 12.0, size=dishes).tolist(),
            },
            "prior": rng.dirichlet(np.ones(len(labels)), size=dishes).tolist(),
            "seed": int(rng.integers(0, 2**32)),
        }
    )


def sweep_signal_quality(
    cfg: GameConfig,
    w_values: Sequence[float],
    strategies: Sequence[str],
    realizations: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    utility: Optional[UtilityFunction] = None,
) -> List[WelfareRow]:
    """Mean welfare for every (w, strategy) cell, rows ordered by w then strategy."""
    if not w_values or not strategies:
        raise DomainError("sweep needs at least one w value and one strategy")
    rows: List[WelfareRow] = []
    for w in w_values:
        cfg_w = cfg.with_signal_quality(float(w))
        for strategy in strategies:
            result = run_experiment(
                cfg_w, strategy, realizations, seed, workers, keep_traces=False, utility=utility
            )
            rows.append(
                WelfareRow(
                    w=float(w),
                    strategy=strategy,
                    mean_welfare=result.mean_welfare,
                    stderr=result.stderr,
                    realizations=realizations,
                )
            )
    return rows
