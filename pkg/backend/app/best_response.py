"""Sequential best responses for the buffet game.

Customers are addressed by decision position (0 = first to decide). Every
solver reads one expected-utility table ``eu[position][dish][n_total]``, so the
recursion depends on counts only and is memoized on
``(position, observation counts)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from functools import lru_cache
from operator import add
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import NASH_TOLERANCE, ORACLE_MAX_TREE, POSITIVE_EPS, SOLVE_MAX_WORK
from .errors import CapacityError, DomainError
from .game import UtilityFunction, dish_utility_table, expected_utility_table, signal_distribution
from .models import (
    Belief,
    CandidateSet,
    DecisionMatrix,
    Deviation,
    GameConfig,
    NashReport,
    Observation,
    Prediction,
)

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]


@lru_cache(maxsize=64)
def candidate_vectors(dishes: int, budget: int) -> Tuple[Vector, ...]:
    vectors: List[Vector] = [(0,) * dishes]
    for size in range(1, min(budget, dishes) + 1):
        for chosen in itertools.combinations(range(dishes), size):
            vectors.append(tuple(1 if j in chosen else 0 for j in range(dishes)))
    return tuple(vectors)


def enumerate_candidates(dishes: int, budget: int) -> CandidateSet:
    if dishes < 1 or budget < 1:
        raise DomainError("candidate sets need at least one dish and a budget of one")
    return CandidateSet(combinations=list(candidate_vectors(dishes, budget)))


def _argmax(values: Sequence[float]) -> int:
    # first maximum wins; later candidates must beat it by more than the dead-band
    best = 0
    best_value = values[0]
    for h in range(1, len(values)):
        if values[h] > best_value + POSITIVE_EPS:
            best = h
            best_value = values[h]
    return best


class ElementarySolver:
    """Recursive best response on a single dish (no budget coupling)."""

    def __init__(self, eu: np.ndarray) -> None:
        self._eu: List[List[float]] = np.asarray(eu, dtype=float).tolist()
        self._last = len(self._eu) - 1
        self._cache: Dict[Tuple[int, int], Tuple[int, int]] = {}

    def respond(self, n_before: int, position: int) -> Tuple[int, int]:
        key = (position, n_before)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        eu = self._eu[position]
        if position == self._last:
            result = (1 if eu[n_before + 1] > POSITIVE_EPS else 0, 0)
        else:
            d_next, m_next = self.respond(n_before + 1, position + 1)
            m = m_next + d_next
            if eu[n_before + m + 1] > POSITIVE_EPS:
                result = (1, m)
            else:
                # rejected: successors see one requester fewer
                d_next, m_next = self.respond(n_before, position + 1)
                result = (0, m_next + d_next)
        self._cache[key] = result
        return result

    def play(self) -> List[int]:
        row: List[int] = []
        n_before = 0
        for position in range(self._last + 1):
            d, _ = self.respond(n_before, position)
            row.append(d)
            n_before += d
        return row


class BudgetSolver:
    """Recursive best response over the candidate set of a budgeted customer."""

    def __init__(self, eu: np.ndarray, budget: int, use_cache: bool = True) -> None:
        table = np.asarray(eu, dtype=float)
        self._eu: List[List[List[float]]] = table.tolist()
        self._customers, self._dishes = table.shape[0], table.shape[1]
        self._last = self._customers - 1
        self.candidates = candidate_vectors(self._dishes, budget)
        self._supports = [
            tuple(j for j in range(self._dishes) if phi[j]) for phi in self.candidates
        ]
        self._use_cache = use_cache
        # observation vectors are cached under a mixed-radix integer code
        base = self._customers + 1
        self._weights = [base**j for j in range(self._dishes)]
        self._codes = [sum(w * p for w, p in zip(self._weights, phi)) for phi in self.candidates]
        self._caches: List[Dict[int, Tuple[int, Vector]]] = [
            {} for _ in range(self._customers)
        ]

    def _encode(self, obs: Vector) -> int:
        return sum(w * c for w, c in zip(self._weights, obs))

    def _value(self, position: int, obs: Vector, support: Vector, future: Vector) -> float:
        eu = self._eu[position]
        return sum(eu[j][obs[j] + future[j] + 1] for j in support)

    def _solve(self, position: int, obs: Vector, code: int) -> Tuple[int, Vector]:
        """Returns (chosen candidate, requests made by this position and all later ones)."""
        zeros = (0,) * self._dishes
        if position == self._last:
            values = [self._value(position, obs, s, zeros) for s in self._supports]
            h = _argmax(values)
            result = (h, self.candidates[h])
            self._caches[position][code] = result
            return result

        eu = self._eu[position]
        child_cache = self._caches[position + 1]
        futures: List[Vector] = []
        values: List[float] = []
        for phi, phi_code, support in zip(self.candidates, self._codes, self._supports):
            child_code = code + phi_code
            child = child_cache.get(child_code)
            if child is None:
                child = self._solve(position + 1, tuple(map(add, obs, phi)), child_code)
            future = child[1]
            futures.append(future)
            value = 0
            for j in support:
                value += eu[j][obs[j] + future[j] + 1]
            values.append(value)
        h = _argmax(values)
        result = (h, tuple(map(add, self.candidates[h], futures[h])))
        self._caches[position][code] = result
        return result

    def _solve_literal(self, position: int, obs: Vector) -> Tuple[int, Vector]:
        # no cache; the chosen branch is re-run after the argmax
        zeros = (0,) * self._dishes
        if position == self._last:
            values = [self._value(position, obs, s, zeros) for s in self._supports]
            h = _argmax(values)
            return h, self.candidates[h]
        values = []
        for phi, support in zip(self.candidates, self._supports):
            _, future = self._solve_literal(position + 1, tuple(map(add, obs, phi)))
            values.append(self._value(position, obs, support, future))
        h = _argmax(values)
        _, future = self._solve_literal(position + 1, tuple(map(add, obs, self.candidates[h])))
        return h, tuple(map(add, self.candidates[h], future))

    def respond(self, obs: Sequence[int], position: int) -> Tuple[Vector, Vector]:
        """(decision vector, predicted requests by later customers) for one position."""
        obs = tuple(int(c) for c in obs)
        if self._use_cache:
            code = self._encode(obs)
            result = self._caches[position].get(code)
            if result is None:
                result = self._solve(position, obs, code)
        else:
            result = self._solve_literal(position, obs)
        h, total = result
        phi = self.candidates[h]
        return phi, tuple(t - p for t, p in zip(total, phi))

    def play(self) -> List[Vector]:
        columns: List[Vector] = []
        obs: Vector = (0,) * self._dishes
        for position in range(self._customers):
            phi, _ = self.respond(obs, position)
            columns.append(phi)
            obs = tuple(map(add, obs, phi))
        logger.debug(
            "Budget solver explored %d states",
            sum(len(cache) for cache in self._caches),
        )
        return columns


def br_eibg(
    belief_row: Sequence[float],
    n_before: int,
    position: int,
    cfg: GameConfig,
    dish: int = 0,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
) -> Tuple[int, int]:
    """Single-dish best response: (request bit, predicted later requesters)."""
    if not 0 <= position < cfg.customers:
        raise DomainError(f"customer position {position} out of range")
    if not 0 <= n_before <= position:
        raise DomainError(f"observation {n_before} impossible for position {position}")
    eu = dish_utility_table(cfg, belief_row, dish, order, utility)
    return ElementarySolver(eu).respond(n_before, position)


def br_ibg(
    belief: Belief,
    obs: Observation,
    cfg: GameConfig,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    use_cache: bool = True,
) -> Tuple[Vector, Prediction]:
    """Budgeted best response of the customer at ``obs.customer``."""
    if not 0 <= obs.customer < cfg.customers:
        raise DomainError(f"customer position {obs.customer} out of range")
    if len(obs.counts) != cfg.dishes:
        raise DomainError("observation must count every dish")
    table = expected_utility_table(cfg, belief, order, utility)
    solver = BudgetSolver(table, cfg.effective_budget, use_cache=use_cache)
    phi, future = solver.respond(obs.counts, obs.customer)
    return phi, Prediction(counts=list(future))


def solve_equilibrium(
    cfg: GameConfig,
    belief: Belief,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    decouple: bool = True,
) -> DecisionMatrix:
    """Plays every customer's best response in decision order.

    Without a binding budget each dish is solved on its own; ``decouple=False``
    forces the joint candidate search instead.
    """
    table = expected_utility_table(cfg, belief, order, utility)
    if cfg.unconstrained and decouple:
        rows = [ElementarySolver(table[:, j, :]).play() for j in range(cfg.dishes)]
        return DecisionMatrix(entries=rows)
    columns = BudgetSolver(table, cfg.effective_budget).play()
    return DecisionMatrix.from_columns(columns, cfg.dishes)


def solver_workload(cfg: GameConfig) -> int:
    """Upper bound on (position, observation, candidate) evaluations of one solve."""
    n = cfg.customers
    if cfg.unconstrained:
        return cfg.dishes * n * (n + 1) * 2
    candidates = len(candidate_vectors(cfg.dishes, cfg.effective_budget))
    return n * (n + 1) ** cfg.dishes * candidates


def check_workload(cfg: GameConfig, limit: int = SOLVE_MAX_WORK) -> int:
    work = solver_workload(cfg)
    if work > limit:
        raise CapacityError(
            f"equilibrium search needs up to {work} evaluations, above the limit of {limit}"
        )
    return work


def _check_shape(matrix: DecisionMatrix, cfg: GameConfig) -> None:
    if matrix.dishes != cfg.dishes or matrix.customers != cfg.customers:
        raise DomainError(
            f"matrix is {matrix.dishes}x{matrix.customers}, expected {cfg.dishes}x{cfg.customers}"
        )


def verify_nash(
    matrix: DecisionMatrix,
    belief: Belief,
    cfg: GameConfig,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    tolerance: float = NASH_TOLERANCE,
) -> NashReport:
    """Checks unilateral deviations over the whole candidate set."""
    _check_shape(matrix, cfg)
    table = expected_utility_table(cfg, belief, order, utility)
    entries = matrix.array()
    totals = entries.sum(axis=1)
    budget = cfg.effective_budget
    candidates = candidate_vectors(cfg.dishes, budget)
    for position in range(cfg.customers):
        column = entries[:, position]
        current = [int(v) for v in column]
        if sum(current) > budget:
            return NashReport(
                ok=False,
                violation=Deviation(
                    customer=position,
                    current=current,
                    alternative=[0] * cfg.dishes,
                    gain=0.0,
                    reason=f"requests {sum(current)} dishes over budget {budget}",
                ),
            )
        others = totals - column
        payoff = [table[position, j, others[j] + 1] for j in range(cfg.dishes)]
        current_value = sum(payoff[j] for j in range(cfg.dishes) if column[j])
        for phi in candidates:
            value = sum(payoff[j] for j in range(cfg.dishes) if phi[j])
            if value > current_value + tolerance:
                return NashReport(
                    ok=False,
                    violation=Deviation(
                        customer=position,
                        current=current,
                        alternative=list(phi),
                        gain=float(value - current_value),
                    ),
                )
    return NashReport(ok=True)


def spne_oracle(
    cfg: GameConfig,
    belief: Belief,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    max_tree: int = ORACLE_MAX_TREE,
) -> DecisionMatrix:
    """Backward induction over the full tree of decision histories."""
    candidates = candidate_vectors(cfg.dishes, cfg.effective_budget)
    width = len(candidates)
    if width**cfg.customers > max_tree:
        raise CapacityError(
            f"game tree has {width}^{cfg.customers} leaves, above the limit of {max_tree}"
        )
    eu = expected_utility_table(cfg, belief, order, utility).tolist()
    last = cfg.customers

    def payoff(position: int, path: Tuple[int, ...]) -> float:
        counts = [sum(candidates[h][j] for h in path) for j in range(cfg.dishes)]
        mine = candidates[path[position]]
        return sum(eu[position][j][counts[j]] for j in range(cfg.dishes) if mine[j])

    def outcome(history: Tuple[int, ...]) -> Tuple[int, ...]:
        position = len(history)
        if position == last:
            return history
        paths = [outcome(history + (h,)) for h in range(width)]
        values = [payoff(position, path) for path in paths]
        return paths[_argmax(values)]

    path = outcome(())
    return DecisionMatrix.from_columns([candidates[h] for h in path], cfg.dishes)


def compute_n_t(
    belief_row: Sequence[float],
    cfg: GameConfig,
    dish: int = 0,
    n_max: Optional[int] = None,
    utility: Optional[UtilityFunction] = None,
) -> int:
    """Largest co-requester count with strictly positive expected utility."""
    utility = utility or cfg.utility
    if not utility.is_homogeneous():
        raise DomainError("n_T is defined for homogeneous utilities only")
    limit = cfg.customers if n_max is None else n_max
    lam = signal_distribution(np.asarray(belief_row, dtype=float), cfg.signal_model.matrix(dish))
    q = np.asarray(cfg.state_set.signals, dtype=float)
    n_t = 0
    for n in range(1, limit + 1):
        value = float(lam @ np.asarray(utility.evaluate(q, n, 0, dish), dtype=float))
        if value <= POSITIVE_EPS:
            break
        n_t = n
    return n_t


def threshold_check(matrix: DecisionMatrix) -> bool:
    return all(
        all(a >= b for a, b in zip(row, row[1:])) for row in matrix.entries
    )


def prefix_check(row: Sequence[int]) -> bool:
    """d_i = 1 exactly for the first sum(d) deciders."""
    total = sum(row)
    return all(bool(d) == (i < total) for i, d in enumerate(row))


def equal_share_check(matrix: DecisionMatrix, n_t: int, cfg: GameConfig) -> bool:
    if not cfg.utility.is_homogeneous():
        raise DomainError("equal sharing needs identical utility coefficients")
    if len(set(cfg.true_states)) > 1 or len(set(cfg.utility.cost)) > 1:
        raise DomainError("equal sharing needs identical dishes")
    if any(mat != cfg.signal_model.likelihood[0] for mat in cfg.signal_model.likelihood):
        raise DomainError("equal sharing needs identical signal models")
    share = cfg.customers * cfg.effective_budget / cfg.dishes
    low, high = math.floor(share), math.ceil(share)
    sums = matrix.row_sums()
    if n_t <= low:
        return all(total == n_t for total in sums)
    return all(total in (low, high) for total in sums)
