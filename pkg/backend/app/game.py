from typing import Any, Optional, Protocol, Sequence

import numpy as np

from .errors import ContractViolation, DomainError
from .models import Belief, GameConfig, SignalModel, StateSet, UtilityModel


class UtilityFunction(Protocol):
    """u(q, n) for one customer and dish; must be decreasing in n."""

    def evaluate(self, q: Any, n: int, customer: int, dish: int) -> Any: ...

    def is_homogeneous(self) -> bool: ...


def _check_index(value: int, size: int, what: str) -> None:
    if not 0 <= value < size:
        raise DomainError(f"{what} index {value} out of range [0, {size})")


def signal_distribution(belief_row: np.ndarray, likelihood: np.ndarray) -> np.ndarray:
    """lambda(s) = sum_theta f(s|theta) p(theta)."""
    return np.asarray(belief_row, dtype=float) @ np.asarray(likelihood, dtype=float)


def expected_utility(
    belief: Belief,
    cfg: GameConfig,
    customer: int,
    dish: int,
    n_total: int,
    utility: Optional[UtilityFunction] = None,
) -> float:
    _check_index(customer, cfg.customers, "customer")
    _check_index(dish, cfg.dishes, "dish")
    if not 1 <= n_total <= cfg.customers:
        raise DomainError(f"n_total={n_total} must lie in [1, {cfg.customers}]")
    utility = utility or cfg.utility
    lam = signal_distribution(belief.row(dish), cfg.signal_model.matrix(dish))
    q = np.asarray(cfg.state_set.signals, dtype=float)
    return float(lam @ np.asarray(utility.evaluate(q, n_total, customer, dish), dtype=float))


def expected_utility_table(
    cfg: GameConfig,
    belief: Belief,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
) -> np.ndarray:
    """Expected utilities indexed [position, dish, n_total]; column n=0 is unused."""
    order = list(order) if order is not None else cfg.initial_order()
    n, m = cfg.customers, cfg.dishes
    table = np.zeros((n, m, n + 1), dtype=float)
    for j in range(m):
        table[:, j, :] = dish_utility_table(cfg, belief.row(j), j, order, utility)
    return table


def dish_utility_table(
    cfg: GameConfig,
    belief_row: Sequence[float],
    dish: int,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
) -> np.ndarray:
    """Single-dish slice of expected_utility_table, indexed [position, n_total]."""
    _check_index(dish, cfg.dishes, "dish")
    order = list(order) if order is not None else cfg.initial_order()
    utility = utility or cfg.utility
    n = cfg.customers
    q = np.asarray(cfg.state_set.signals, dtype=float)
    lam = signal_distribution(np.asarray(belief_row, dtype=float), cfg.signal_model.matrix(dish))
    table = np.zeros((len(order), n + 1), dtype=float)

    if isinstance(utility, UtilityModel):
        # linear in q, so only the predictive mean matters
        mean_q = float(lam @ q)
        gamma = np.asarray(utility.gamma, dtype=float)[order]
        counts = np.arange(1, n + 1, dtype=float)
        table[:, 1:] = (
            gamma[:, None] * mean_q * utility.reward / counts[None, :] - utility.cost[dish]
        )
        return table

    for pos, customer in enumerate(order):
        for total in range(1, n + 1):
            values = np.asarray(utility.evaluate(q, total, customer, dish), dtype=float)
            table[pos, total] = float(lam @ values)
    return table


def realize_signal(
    true_state: float,
    model: SignalModel,
    dish: int,
    rng: np.random.Generator,
    state_set: Optional[StateSet] = None,
) -> float:
    state_set = state_set or StateSet()
    row = model.matrix(dish)[state_set.state_index(true_state)]
    return state_set.signals[int(rng.choice(len(row), p=row))]


def realized_utility(
    q: float,
    n_total: int,
    customer: int,
    dish: int,
    model: UtilityFunction,
    requested: bool = True,
) -> float:
    if not requested:
        return 0.0
    if n_total < 1:
        raise ContractViolation("a requested dish must count at least its requester")
    return float(model.evaluate(q, n_total, customer, dish))
