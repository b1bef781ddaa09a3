"""Comparison strategies: myopic, learning-only and random requests."""

from typing import Optional, Sequence, Tuple

import numpy as np

from .best_response import candidate_vectors
from .config import POSITIVE_EPS
from .errors import DomainError
from .game import UtilityFunction, expected_utility_table
from .models import Belief, GameConfig, Observation


def select_top(values: Sequence[float], budget: int) -> Tuple[int, ...]:
    """Up to ``budget`` dishes with the highest strictly positive values; ties go to the lower index."""
    ranked = sorted(
        (j for j, v in enumerate(values) if v > POSITIVE_EPS),
        key=lambda j: (-values[j], j),
    )
    chosen = set(ranked[:budget])
    return tuple(1 if j in chosen else 0 for j in range(len(values)))


def _table(
    cfg: GameConfig,
    belief: Belief,
    order: Optional[Sequence[int]],
    utility: Optional[UtilityFunction],
    table: Optional[np.ndarray],
) -> np.ndarray:
    if table is not None:
        return table
    return expected_utility_table(cfg, belief, order, utility)


def myopic_decision(
    prior: Belief,
    obs: Observation,
    cfg: GameConfig,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    table: Optional[np.ndarray] = None,
) -> Tuple[int, ...]:
    """Best reply to the predecessors only, valued under the frozen prior."""
    if not 0 <= obs.customer < cfg.customers:
        raise DomainError(f"customer position {obs.customer} out of range")
    eu = _table(cfg, prior, order, utility, table)[obs.customer]
    values = [float(eu[j, obs.counts[j] + 1]) for j in range(cfg.dishes)]
    return select_top(values, cfg.effective_budget)


def learning_decision(
    belief: Belief,
    position: int,
    cfg: GameConfig,
    order: Optional[Sequence[int]] = None,
    utility: Optional[UtilityFunction] = None,
    table: Optional[np.ndarray] = None,
) -> Tuple[int, ...]:
    """Values every dish as if the customer were its only requester."""
    if not 0 <= position < cfg.customers:
        raise DomainError(f"customer position {position} out of range")
    eu = _table(cfg, belief, order, utility, table)[position]
    return select_top([float(v) for v in eu[:, 1]], cfg.effective_budget)


def random_decision(rng: np.random.Generator, cfg: GameConfig) -> Tuple[int, ...]:
    candidates = candidate_vectors(cfg.dishes, cfg.effective_budget)
    return candidates[int(rng.integers(len(candidates)))]
