from typing import Any, Dict

from fastapi import APIRouter

from ..config import (
    DEFAULT_REALIZATIONS,
    DEFAULT_SEED,
    DEFAULT_SLOTS,
    MAX_CONFIG_SIZE_KB,
    MAX_REALIZATIONS,
    ORACLE_MAX_TREE,
    SOLVE_MAX_WORK,
    WORKERS,
)
from ..models import STRATEGIES


router = APIRouter()


@router.get("/api/settings")
async def api_settings() -> Dict[str, Any]:
    return {
        "simulation": {
            "seed": DEFAULT_SEED,
            "slots": DEFAULT_SLOTS,
            "realizations": DEFAULT_REALIZATIONS,
            "maxRealizations": MAX_REALIZATIONS,
            "workers": WORKERS,
            "strategies": list(STRATEGIES),
        },
        "oracle": {"maxTree": ORACLE_MAX_TREE},
        "solver": {"maxWork": SOLVE_MAX_WORK},
        "upload": {"maxConfigKb": MAX_CONFIG_SIZE_KB},
    }
