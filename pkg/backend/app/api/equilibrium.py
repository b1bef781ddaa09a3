from typing import Any, Dict, List, Optional

from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool
from pydantic import ValidationError

from ..best_response import (
    check_workload,
    compute_n_t,
    equal_share_check,
    solve_equilibrium,
    spne_oracle,
    threshold_check,
    verify_nash,
)
from ..errors import CapacityError, DomainError
from ..models import Belief, DecisionMatrix, GameConfig, NashReport, SolveRequest, VerifyRequest
from .configs import load_config


router = APIRouter()


def _beliefs(payload: SolveRequest, cfg: GameConfig) -> Belief:
    if payload.beliefs is None:
        return cfg.prior
    try:
        belief = Belief(probs=payload.beliefs)
    except ValidationError as exc:
        raise HTTPException(status_code=400, detail=f"Invalid beliefs: {exc}") from exc
    if belief.dishes != cfg.dishes or len(belief.probs[0]) != len(cfg.state_set.states):
        raise HTTPException(status_code=400, detail="Beliefs do not match the config dimensions")
    return belief


def _order(payload: SolveRequest, cfg: GameConfig) -> List[int]:
    order = payload.order if payload.order is not None else cfg.initial_order()
    if sorted(order) != list(range(cfg.customers)):
        raise HTTPException(status_code=400, detail="Order must be a permutation of 0..N-1")
    return list(order)


def _structure(
    matrix: DecisionMatrix, belief: Belief, cfg: GameConfig, order: List[int]
) -> Dict[str, Any]:
    by_customer = matrix.by_customer(order)
    homogeneous = cfg.utility.is_homogeneous()
    summary: Dict[str, Any] = {
        "matrix": by_customer.entries,
        "order": order,
        "rowSums": matrix.row_sums(),
        "columnSums": by_customer.column_sums(),
        "threshold": threshold_check(matrix) if homogeneous and cfg.unconstrained else None,
        "withinBudget": matrix.respects_budget(cfg.effective_budget),
    }
    n_t: Optional[int] = None
    equal_share: Optional[bool] = None
    identical_beliefs = all(row == belief.probs[0] for row in belief.probs)
    if homogeneous and identical_beliefs:
        try:
            n_t = compute_n_t(belief.row(0), cfg)
            if not cfg.unconstrained:
                equal_share = equal_share_check(matrix, n_t, cfg)
        except DomainError:
            pass
    summary["nT"] = n_t
    summary["equalShare"] = equal_share
    return summary


def _nash(report: NashReport, order: List[int]) -> Dict[str, Any]:
    payload = report.model_dump()
    if payload["violation"] is not None:
        payload["violation"]["customer"] = order[payload["violation"]["customer"]]
    return payload


def _check_workload(cfg: GameConfig) -> None:
    try:
        check_workload(cfg)
    except CapacityError as exc:
        raise HTTPException(status_code=413, detail=str(exc)) from exc


@router.post("/api/equilibrium/solve")
async def api_equilibrium_solve(payload: SolveRequest) -> Dict[str, Any]:
    cfg = load_config(payload.config)
    belief = _beliefs(payload, cfg)
    order = _order(payload, cfg)
    _check_workload(cfg)
    matrix = await run_in_threadpool(solve_equilibrium, cfg, belief, order)
    report = verify_nash(matrix, belief, cfg, order)
    result = _structure(matrix, belief, cfg, order)
    result["nash"] = _nash(report, order)
    return result


@router.post("/api/equilibrium/verify")
async def api_equilibrium_verify(payload: VerifyRequest) -> Dict[str, Any]:
    """``matrix`` columns are customer ids, whatever the decision order."""
    cfg = load_config(payload.config)
    belief = _beliefs(payload, cfg)
    order = _order(payload, cfg)
    try:
        matrix = DecisionMatrix(entries=payload.matrix).by_position(order)
        report = verify_nash(matrix, belief, cfg, order)
    except (ValidationError, DomainError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    result = _structure(matrix, belief, cfg, order)
    result["nash"] = _nash(report, order)
    return result


@router.post("/api/equilibrium/oracle")
async def api_equilibrium_oracle(payload: SolveRequest) -> Dict[str, Any]:
    cfg = load_config(payload.config)
    belief = _beliefs(payload, cfg)
    order = _order(payload, cfg)
    try:
        oracle = await run_in_threadpool(spne_oracle, cfg, belief, order)
    except CapacityError as exc:
        raise HTTPException(status_code=413, detail=str(exc)) from exc
    solved = await run_in_threadpool(solve_equilibrium, cfg, belief, order)
    return {
        "matrix": oracle.by_customer(order).entries,
        "solver": solved.by_customer(order).entries,
        "matchesSolver": oracle.entries == solved.entries,
    }
