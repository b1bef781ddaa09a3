from typing import Any, Dict

from fastapi import APIRouter, File, HTTPException, UploadFile

from ..config import MAX_CONFIG_SIZE_KB
from ..errors import ConfigError
from ..models import ConfigRequest, GameConfig
from ..serialization import emit_config, parse_config


router = APIRouter()


def load_config(text: str) -> GameConfig:
    if not (text or "").strip():
        raise HTTPException(status_code=400, detail="Config text is required")
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=exc.problems) from exc


def _describe(cfg: GameConfig) -> Dict[str, Any]:
    return {
        "config": cfg.model_dump(),
        "normalized": emit_config(cfg),
        "budget": cfg.effective_budget,
        "unconstrained": cfg.unconstrained,
    }


@router.post("/api/config/validate")
async def api_config_validate(payload: ConfigRequest) -> Dict[str, Any]:
    return _describe(load_config(payload.config))


@router.post("/api/config/upload")
async def api_config_upload(file: UploadFile = File(...)) -> Dict[str, Any]:
    if not file:
        raise HTTPException(status_code=400, detail="No file uploaded")
    data = await file.read()
    if len(data) > MAX_CONFIG_SIZE_KB * 1024:
        raise HTTPException(
            status_code=400, detail=f"Config too large (max {MAX_CONFIG_SIZE_KB}KB)"
        )
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise HTTPException(status_code=400, detail="Config must be UTF-8 text") from exc
    result = _describe(load_config(text))
    result["filename"] = file.filename or ""
    return result
