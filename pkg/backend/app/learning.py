"""Non-Bayesian social learning of dish states.

Each requester forms a Bayesian posterior from its own signal, then the shared
belief becomes the equal-weight average of posteriors (requesters) and the old
belief (everyone else).
"""

from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateUpdateError, DomainError
from .game import signal_distribution
from .models import Belief, ConvergenceReport, DecisionMatrix, SignalModel, StateSet

# (decision position, dish) -> signal label
SignalMap = Mapping[Tuple[int, int], float]


def intermediate_update(
    prior_row: Sequence[float],
    signal: float,
    model: SignalModel,
    dish: int,
    state_set: Optional[StateSet] = None,
) -> np.ndarray:
    state_set = state_set or StateSet()
    prior = np.asarray(prior_row, dtype=float)
    likelihood = model.matrix(dish)[:, state_set.signal_index(signal)]
    joint = likelihood * prior
    total = float(joint.sum())
    if total <= 0.0:
        raise DegenerateUpdateError(
            f"signal {signal!r} has zero probability under the belief on dish {dish}"
        )
    return joint / total


def _check_requesters(decisions: DecisionMatrix, prior: Belief) -> None:
    if decisions.dishes != prior.dishes:
        raise DomainError("decision matrix and belief disagree on the number of dishes")


def combine(
    prior: Belief,
    decisions: DecisionMatrix,
    intermediates: Mapping[Tuple[int, int], np.ndarray],
) -> Belief:
    """p'(theta) = (1/N) sum_i [d_i mu_i(theta) + (1 - d_i) p(theta)], per dish."""
    _check_requesters(decisions, prior)
    customers = decisions.customers
    rows = []
    for j, requests in enumerate(decisions.entries):
        row = prior.row(j)
        requesters = [i for i, d in enumerate(requests) if d]
        if not requesters:
            rows.append(row)
            continue
        missing = [i for i in requesters if (i, j) not in intermediates]
        if missing:
            raise DomainError(f"dish {j}: no intermediate belief for positions {missing}")
        total = (customers - len(requesters)) * row
        for i in requesters:
            total = total + np.asarray(intermediates[(i, j)], dtype=float)
        rows.append(total / customers)
    return Belief.from_array(np.vstack(rows))


def combine_increment_form(
    prior: Belief,
    decisions: DecisionMatrix,
    signals: SignalMap,
    model: SignalModel,
    state_set: Optional[StateSet] = None,
) -> Belief:
    """p' = p + (1/N) sum_i d_i (f(s_i|theta) / lambda(s_i) - 1) p."""
    _check_requesters(decisions, prior)
    state_set = state_set or StateSet()
    customers = decisions.customers
    rows = []
    for j, requests in enumerate(decisions.entries):
        row = prior.row(j)
        matrix = model.matrix(j)
        lam = signal_distribution(row, matrix)
        increment = np.zeros_like(row)
        for i, d in enumerate(requests):
            if not d:
                continue
            s = state_set.signal_index(signals[(i, j)])
            if lam[s] <= 0.0:
                raise DegenerateUpdateError(f"signal on dish {j} has zero predictive probability")
            increment += (matrix[:, s] / lam[s] - 1.0) * row
        # rounding can leave -1e-17 where the posterior is exactly zero
        rows.append(np.maximum(row + increment / customers, 0.0))
    return Belief.from_array(np.vstack(rows))


def social_update(
    prior: Belief,
    decisions: DecisionMatrix,
    signals: SignalMap,
    model: SignalModel,
    state_set: Optional[StateSet] = None,
) -> Belief:
    intermediates = {}
    for j, requests in enumerate(decisions.entries):
        for i, d in enumerate(requests):
            if d:
                intermediates[(i, j)] = intermediate_update(
                    prior.row(j), signals[(i, j)], model, j, state_set
                )
    return combine(prior, decisions, intermediates)


def predictive_distribution(belief_row: Sequence[float], model: SignalModel, dish: int) -> np.ndarray:
    return signal_distribution(np.asarray(belief_row, dtype=float), model.matrix(dish))


def convergence_metrics(
    beliefs: Sequence[Belief],
    true_states: Sequence[float],
    model: SignalModel,
    state_set: Optional[StateSet] = None,
) -> ConvergenceReport:
    """Per-slot L2 distance to the point mass on the truth, and L-infinity gap
    between the predictive signal distribution and f(.|theta*)."""
    if not beliefs:
        raise DomainError("convergence metrics need at least one belief")
    state_set = state_set or StateSet()
    truth = [state_set.state_index(label) for label in true_states]
    target = np.zeros_like(beliefs[0].array())
    target[np.arange(len(truth)), truth] = 1.0
    tensor = model.tensor()
    true_rows = tensor[np.arange(len(truth)), truth, :]

    report = ConvergenceReport()
    for belief in beliefs:
        probs = belief.array()
        gap = probs - target
        strong = np.sqrt((gap**2).sum(axis=1))
        lam = np.einsum("jk,jks->js", probs, tensor)
        weak = np.abs(lam - true_rows).max(axis=1)
        report.strong_distance.append(strong.tolist())
        report.strong_total.append(float(np.sqrt((gap**2).sum())))
        report.weak_distance.append(weak.tolist())
    return report
