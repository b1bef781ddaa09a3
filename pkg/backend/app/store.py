import json
import logging
import tempfile
import time
from pathlib import Path
from threading import Lock
from typing import Dict, List, Optional
from uuid import uuid4

from .config import STATE_FILE
from .models import ConvergenceReport, DecisionMatrix, ExperimentResult, GameConfig, RunRecord

logger = logging.getLogger(__name__)


class PersistentState:
    def __init__(self, path: str) -> None:
        self._path = Path(path)
        self._lock = Lock()
        self._path.parent.mkdir(parents=True, exist_ok=True)

    def load(self) -> Dict[str, object]:
        with self._lock:
            if not self._path.exists():
                logger.info("State file does not exist yet: %s", self._path)
                return {}
            try:
                payload = json.loads(self._path.read_text(encoding="utf-8"))
            except Exception as exc:
                logger.warning("Failed to load state from %s: %s", self._path, exc)
                return {}
            logger.info("Loaded state from %s", self._path)
            return payload if isinstance(payload, dict) else {}

    def save(self, runs: Dict[str, RunRecord]) -> None:
        payload = {
            "runs": [run.model_dump() for run in runs.values()],
            "savedAt": int(time.time() * 1000),
        }
        raw = json.dumps(payload, ensure_ascii=True, indent=2)
        with self._lock:
            with tempfile.NamedTemporaryFile(
                mode="w",
                encoding="utf-8",
                dir=self._path.parent,
                prefix=f"{self._path.name}.",
                suffix=".tmp",
                delete=False,
            ) as handle:
                handle.write(raw)
                tmp_path = Path(handle.name)
            tmp_path.replace(self._path)
        logger.info("Persisted %d runs to %s", len(runs), self._path)


STATE = PersistentState(STATE_FILE)


def build_record(result: ExperimentResult, cfg: GameConfig, config_text: str) -> RunRecord:
    final = result.final_decisions
    return RunRecord(
        id=f"run-{uuid4().hex[:8]}",
        createdAt=int(time.time() * 1000),
        strategy=result.strategy,
        realizations=result.realizations,
        seed=result.master_seed,
        signalQuality=result.signal_quality,
        customers=cfg.customers,
        dishes=cfg.dishes,
        budget=cfg.effective_budget,
        meanWelfare=result.mean_welfare,
        stderr=result.stderr,
        config=config_text,
        welfarePerRealization=result.welfare_per_realization,
        strongDistance=result.convergence.strong_distance,
        weakDistance=result.convergence.weak_distance,
        cumulativeUtility=result.cumulative_utility,
        decisions=final.entries if final is not None else None,
    )


def record_result(record: RunRecord) -> ExperimentResult:
    """Rebuilds the summary part of an experiment from a stored run (no traces)."""
    return ExperimentResult(
        strategy=record.strategy,
        realizations=record.realizations,
        master_seed=record.seed,
        signal_quality=record.signalQuality,
        welfare_per_realization=record.welfarePerRealization,
        mean_welfare=record.meanWelfare,
        stderr=record.stderr,
        convergence=ConvergenceReport(
            strong_distance=record.strongDistance,
            weak_distance=record.weakDistance,
        ),
        cumulative_utility=record.cumulativeUtility,
        final_decisions=(
            DecisionMatrix(entries=record.decisions) if record.decisions else None
        ),
    )


class RunStore:
    def __init__(self, state: PersistentState) -> None:
        self._lock = Lock()
        self._state = state
        self._runs: Dict[str, RunRecord] = {}

    def restore(self, runs: List[RunRecord]) -> None:
        with self._lock:
            self._runs = {run.id: run for run in runs}

    def persist(self) -> None:
        with self._lock:
            snapshot = dict(self._runs)
        self._state.save(snapshot)

    def list(self) -> List[RunRecord]:
        with self._lock:
            return sorted(self._runs.values(), key=lambda run: run.createdAt)

    def get(self, run_id: str) -> Optional[RunRecord]:
        with self._lock:
            return self._runs.get(run_id)

    def add(self, record: RunRecord) -> RunRecord:
        with self._lock:
            self._runs[record.id] = record
        self.persist()
        return record

    def remove(self, run_id: str) -> bool:
        with self._lock:
            removed = self._runs.pop(run_id, None) is not None
        if removed:
            self.persist()
        return removed

    def clear(self) -> None:
        with self._lock:
            self._runs.clear()
        self.persist()


RUN_STORE = RunStore(STATE)


def _load_state() -> None:
    payload = STATE.load()
    runs_payload = payload.get("runs", [])

    runs: List[RunRecord] = []
    if isinstance(runs_payload, list):
        for item in runs_payload:
            try:
                runs.append(RunRecord(**item))
            except Exception as exc:
                logger.warning("Skipping invalid run entry from state: %s", exc)
    RUN_STORE.restore(runs)


_load_state()
