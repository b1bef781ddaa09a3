from typing import Any, Dict, Optional, Sequence

from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from ..best_response import check_workload
from ..config import DEFAULT_REALIZATIONS, MAX_REALIZATIONS
from ..errors import CapacityError, DomainError
from ..harness import run_experiment, sweep_signal_quality
from ..models import GameConfig, SimulateRequest, SweepRequest
from ..store import RUN_STORE, build_record
from .configs import load_config


router = APIRouter()


def _realizations(requested: Optional[int]) -> int:
    count = requested if requested is not None else DEFAULT_REALIZATIONS
    if count < 1 or count > MAX_REALIZATIONS:
        raise HTTPException(
            status_code=400, detail=f"Realizations must lie in [1, {MAX_REALIZATIONS}]"
        )
    return count


def _check_workload(cfg: GameConfig, strategies: Sequence[str]) -> None:
    if "best-response" not in strategies:
        return
    try:
        check_workload(cfg)
    except CapacityError as exc:
        raise HTTPException(status_code=413, detail=str(exc)) from exc


@router.post("/api/simulate")
async def api_simulate(payload: SimulateRequest) -> Dict[str, Any]:
    cfg = load_config(payload.config)
    realizations = _realizations(payload.realizations)
    _check_workload(cfg, [payload.strategy])
    result = await run_in_threadpool(
        run_experiment,
        cfg,
        payload.strategy,
        realizations,
        payload.seed,
        None,
        payload.keepTraces,
    )
    record = RUN_STORE.add(build_record(result, cfg, payload.config))
    response: Dict[str, Any] = {"run": record.model_dump()}
    if payload.keepTraces:
        response["traces"] = [
            [trace.model_dump() for trace in traces] for traces in result.traces
        ]
    return response


@router.post("/api/sweep")
async def api_sweep(payload: SweepRequest) -> Dict[str, Any]:
    cfg = load_config(payload.config)
    realizations = _realizations(payload.realizations)
    if not payload.wGrid:
        raise HTTPException(status_code=400, detail="wGrid must not be empty")
    _check_workload(cfg, payload.strategies)
    try:
        rows = await run_in_threadpool(
            sweep_signal_quality, cfg, payload.wGrid, payload.strategies, realizations, payload.seed
        )
    except DomainError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return {"rows": [row.model_dump() for row in rows]}
