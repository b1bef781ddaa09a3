import os
from pathlib import Path

from dotenv import load_dotenv


ROOT_DIR = Path(__file__).resolve().parents[2]
load_dotenv(ROOT_DIR / ".env.local", override=False)


def env(key: str, default: str | None = None) -> str | None:
    value = os.getenv(key)
    return value if value is not None else default


def env_int(key: str, default: int) -> int:
    value = os.getenv(key)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def env_float(key: str, default: float) -> float:
    value = os.getenv(key)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        return default


DEFAULT_SEED = env_int("BUFFET_DEFAULT_SEED", 0)
DEFAULT_SLOTS = env_int("BUFFET_DEFAULT_SLOTS", 200)
DEFAULT_REALIZATIONS = env_int("BUFFET_DEFAULT_REALIZATIONS", 100)
MAX_REALIZATIONS = env_int("BUFFET_MAX_REALIZATIONS", 1000)
WORKERS = max(1, env_int("BUFFET_WORKERS", 1))

ORACLE_MAX_TREE = env_int("BUFFET_ORACLE_MAX_TREE", 10**7)
# Cap on solver evaluations for one equilibrium search requested over HTTP.
SOLVE_MAX_WORK = env_int("BUFFET_SOLVE_MAX_WORK", 10**8)

# Dead-band below which an expected utility counts as non-positive.
POSITIVE_EPS = env_float("BUFFET_POSITIVE_EPS", 1e-12)
NASH_TOLERANCE = env_float("BUFFET_NASH_TOLERANCE", 1e-9)

RUNS_DIR = env("BUFFET_RUNS_DIR", ".buffetlab") or ".buffetlab"
STATE_FILE = env("STATE_FILE", str(Path(RUNS_DIR) / "runs.json")) or str(
    Path(RUNS_DIR) / "runs.json"
)

LOG_LEVEL = (env("LOG_LEVEL", "INFO") or "INFO").upper()

CORS_ORIGINS = [
    origin.strip()
    for origin in (env("CORS_ORIGINS", "") or "").split(",")
    if origin.strip()
]

# Defaults of the simulated restaurant.
DEFAULT_LABELS = [1.0, 2.0, 3.0, 4.0, 5.0]
DEFAULT_REWARD = 10.0
DEFAULT_COST = 1.0
DEFAULT_ROTATION_PERIOD = 100

MAX_CONFIG_SIZE_KB = env_int("BUFFET_MAX_CONFIG_KB", 256)
