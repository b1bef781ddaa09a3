import csv
import io
import logging
from typing import Any, Iterable, List, Sequence, TextIO, Union

import yaml
from pydantic import ValidationError

from .errors import ConfigError, DomainError
from .models import DecisionMatrix, ExperimentResult, GameConfig, WelfareRow

logger = logging.getLogger(__name__)

CSV_HEADERS = {
    "welfare": ["w", "strategy", "mean_welfare", "stderr", "realizations"],
    "learning-curve": ["slot", "dish", "strong_distance", "weak_distance"],
    "per-customer": ["slot", "customer", "cumulative_utility"],
    "ne-matrix": ["dish", "customer", "decision"],
}

CsvSource = Union[ExperimentResult, Sequence[WelfareRow], DecisionMatrix]


def _problems(exc: ValidationError) -> List[str]:
    problems = []
    for error in exc.errors():
        path = ".".join(str(part) for part in error.get("loc", ()))
        message = str(error.get("msg", "invalid value")).removeprefix("Value error, ")
        problems.append(f"{path}: {message}" if path else message)
    return problems


def parse_config(text: str) -> GameConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping of keys to values"])
    try:
        return GameConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_problems(exc)) from exc


def emit_config(cfg: GameConfig) -> str:
    payload = cfg.model_dump(exclude_none=True)
    return yaml.safe_dump(payload, sort_keys=False)


def _number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.6g}"


def _welfare_rows(source: Union[ExperimentResult, Sequence[WelfareRow]]) -> Iterable[List[str]]:
    if isinstance(source, ExperimentResult):
        if not source.welfare_per_realization:
            return
        source = [
            WelfareRow(
                w=source.signal_quality if source.signal_quality is not None else float("nan"),
                strategy=source.strategy,
                mean_welfare=source.mean_welfare,
                stderr=source.stderr,
                realizations=source.realizations,
            )
        ]
    for row in source:
        yield [
            _number(row.w),
            row.strategy,
            _number(row.mean_welfare),
            _number(row.stderr),
            _number(row.realizations),
        ]


def _learning_rows(result: ExperimentResult) -> Iterable[List[str]]:
    report = result.convergence
    for t, (strong, weak) in enumerate(zip(report.strong_distance, report.weak_distance)):
        for j, (s, w) in enumerate(zip(strong, weak)):
            yield [_number(t + 1), _number(j + 1), _number(s), _number(w)]


def _customer_rows(result: ExperimentResult) -> Iterable[List[str]]:
    for t, totals in enumerate(result.cumulative_utility):
        for customer, value in enumerate(totals):
            yield [_number(t + 1), _number(customer + 1), _number(value)]


def _matrix_rows(matrix: DecisionMatrix | None) -> Iterable[List[str]]:
    if matrix is None:
        return
    for j, row in enumerate(matrix.entries):
        for i, d in enumerate(row):
            yield [_number(j + 1), _number(i + 1), _number(d)]


def _rows(source: CsvSource, kind: str) -> Iterable[List[str]]:
    if kind == "welfare" and not isinstance(source, DecisionMatrix):
        return _welfare_rows(source)
    if kind == "ne-matrix":
        if isinstance(source, DecisionMatrix):
            return _matrix_rows(source)
        if isinstance(source, ExperimentResult):
            return _matrix_rows(source.final_decisions)
    if kind in ("learning-curve", "per-customer") and isinstance(source, ExperimentResult):
        return _learning_rows(source) if kind == "learning-curve" else _customer_rows(source)
    raise DomainError(f"cannot emit {kind!r} rows from {type(source).__name__}")


def emit_csv(source: CsvSource, kind: str, sink: TextIO) -> None:
    """Writes one CSV table (header row, 1-based ids, 6 significant digits)."""
    if kind not in CSV_HEADERS:
        raise DomainError(f"unknown CSV kind {kind!r}; expected one of {sorted(CSV_HEADERS)}")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_HEADERS[kind])
    writer.writerows(_rows(source, kind))


def csv_text(source: CsvSource, kind: str) -> str:
    buffer = io.StringIO()
    emit_csv(source, kind, buffer)
    return buffer.getvalue()


def read_matrix_csv(text: str) -> DecisionMatrix:
    """Parses an ne-matrix table back into a DecisionMatrix."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_HEADERS["ne-matrix"]:
        raise ConfigError([f"matrix CSV header must be {','.join(CSV_HEADERS['ne-matrix'])}"])
    cells = {}
    try:
        for row in reader:
            cells[(int(row["dish"]) - 1, int(row["customer"]) - 1)] = int(row["decision"])
    except (TypeError, ValueError) as exc:
        raise ConfigError([f"matrix CSV has a malformed row: {exc}"]) from exc
    if not cells:
        raise ConfigError(["matrix CSV has no rows"])
    if any(j < 0 or i < 0 for j, i in cells):
        raise ConfigError(["matrix CSV ids start at 1"])
    dishes = max(j for j, _ in cells) + 1
    customers = max(i for _, i in cells) + 1
    try:
        return DecisionMatrix(
            entries=[[cells.get((j, i), 0) for i in range(customers)] for j in range(dishes)]
        )
    except ValidationError as exc:
        raise ConfigError(_problems(exc)) from exc
