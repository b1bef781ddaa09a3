from typing import Any, Dict

from fastapi import APIRouter, HTTPException
from fastapi.responses import Response

from ..errors import DomainError
from ..models import ExportRunRequest, RunIdRequest
from ..serialization import csv_text
from ..store import RUN_STORE, record_result


router = APIRouter()


@router.post("/api/runs")
async def api_runs() -> Dict[str, Any]:
    runs = RUN_STORE.list()
    return {
        "runs": [
            run.model_dump(include={"id", "createdAt", "strategy", "realizations", "seed",
                                    "signalQuality", "customers", "dishes", "budget",
                                    "meanWelfare", "stderr"})
            for run in runs
        ],
        "total": len(runs),
    }


@router.post("/api/runs/remove")
async def api_runs_remove(payload: RunIdRequest) -> Dict[str, Any]:
    if not RUN_STORE.remove(payload.runId):
        raise HTTPException(status_code=404, detail="Run not found")
    return {"deleted": payload.runId}


@router.post("/api/runs/export")
async def api_runs_export(payload: ExportRunRequest) -> Response:
    record = RUN_STORE.get(payload.runId)
    if record is None:
        raise HTTPException(status_code=404, detail="Run not found")
    try:
        text = csv_text(record_result(record), payload.kind)
    except DomainError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return Response(
        content=text,
        media_type="text/csv",
        headers={"Content-Disposition": f'attachment; filename="{record.id}-{payload.kind}.csv"'},
    )
