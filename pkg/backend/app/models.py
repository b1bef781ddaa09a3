from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import (
    DEFAULT_COST,
    DEFAULT_LABELS,
    DEFAULT_REWARD,
    DEFAULT_ROTATION_PERIOD,
    DEFAULT_SEED,
    DEFAULT_SLOTS,
)
from .errors import ContractViolation, DomainError

PROB_TOLERANCE = 1e-12
LIKELIHOOD_TOLERANCE = 1e-9

Strategy = Literal["best-response", "myopic", "learning", "random"]
STRATEGIES: Tuple[str, ...] = ("best-response", "myopic", "learning", "random")


def _check_distribution(values: Sequence[float], tolerance: float, what: str) -> None:
    if not values:
        raise ValueError(f"{what} is empty")
    if any(v < 0 for v in values):
        raise ValueError(f"{what} has negative entries")
    total = float(sum(values))
    if abs(total - 1.0) > tolerance:
        raise ValueError(f"{what} sums to {total!r}, expected 1")


class StateSet(BaseModel):
    states: List[float] = Field(default_factory=lambda: list(DEFAULT_LABELS))
    signals: List[float] = Field(default_factory=lambda: list(DEFAULT_LABELS))

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("states", "signals")
    @classmethod
    def _unique_labels(cls, labels: List[float]) -> List[float]:
        if not labels:
            raise ValueError("label set must not be empty")
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique")
        return labels

    def state_index(self, label: float) -> int:
        try:
            return self.states.index(label)
        except ValueError as exc:
            raise DomainError(f"unknown state label {label!r}") from exc

    def signal_index(self, label: float) -> int:
        try:
            return self.signals.index(label)
        except ValueError as exc:
            raise DomainError(f"unknown signal label {label!r}") from exc


def quality_likelihood(w: float, n_states: int, n_signals: int) -> List[List[float]]:
    """Likelihood with w on the matching label and the rest spread evenly."""
    if n_states != n_signals:
        raise DomainError("signal_quality needs as many signals as states")
    if n_signals == 1:
        if abs(w - 1.0) > LIKELIHOOD_TOLERANCE:
            raise DomainError("signal_quality must be 1 with a single signal")
        return [[1.0]]
    if w < 1.0 / n_signals - LIKELIHOOD_TOLERANCE or w > 1.0:
        raise DomainError(
            f"signal_quality w={w} must lie in [1/|Q|, 1] = [{1.0 / n_signals:.6g}, 1]"
        )
    off = (1.0 - w) / (n_signals - 1)
    return [
        [w if s == k else off for s in range(n_signals)] for k in range(n_states)
    ]


class SignalModel(BaseModel):
    # likelihood[dish][state][signal] = f_j(s | theta)
    likelihood: List[List[List[float]]]
    quality: Optional[float] = None

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("likelihood")
    @classmethod
    def _rows_are_distributions(cls, value: List[List[List[float]]]) -> List[List[List[float]]]:
        if not value:
            raise ValueError("likelihood needs one matrix per dish")
        width = None
        for j, matrix in enumerate(value):
            for k, row in enumerate(matrix):
                _check_distribution(row, LIKELIHOOD_TOLERANCE, f"dish {j} state {k} row")
                width = len(row) if width is None else width
                if len(row) != width:
                    raise ValueError("likelihood rows must share one signal alphabet")
        return value

    @classmethod
    def from_quality(cls, w: float, state_set: StateSet, dishes: int) -> "SignalModel":
        matrix = quality_likelihood(w, len(state_set.states), len(state_set.signals))
        return cls(likelihood=[matrix for _ in range(dishes)], quality=w)

    @property
    def dishes(self) -> int:
        return len(self.likelihood)

    def matrix(self, dish: int) -> np.ndarray:
        if not 0 <= dish < self.dishes:
            raise DomainError(f"dish index {dish} out of range")
        return np.asarray(self.likelihood[dish], dtype=float)

    def tensor(self) -> np.ndarray:
        return np.asarray(self.likelihood, dtype=float)


class UtilityModel(BaseModel):
    gamma: List[float]
    reward: float = DEFAULT_REWARD
    cost: List[float]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("gamma")
    @classmethod
    def _non_negative_gamma(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("gamma needs one coefficient per customer")
        if any(g < 0 for g in value):
            raise ValueError("gamma coefficients must be non-negative")
        return value

    @field_validator("reward")
    @classmethod
    def _non_negative_reward(cls, value: float) -> float:
        if value < 0:
            raise ValueError("reward must be non-negative")
        return value

    def evaluate(self, q: Any, n: int, customer: int, dish: int) -> Any:
        if n < 1:
            raise ContractViolation("utility is undefined for fewer than one requester")
        if not 0 <= customer < len(self.gamma):
            raise DomainError(f"customer index {customer} out of range")
        if not 0 <= dish < len(self.cost):
            raise DomainError(f"dish index {dish} out of range")
        return self.gamma[customer] * np.asarray(q, dtype=float) * self.reward / n - self.cost[dish]

    def is_homogeneous(self) -> bool:
        return len(set(self.gamma)) <= 1


class Belief(BaseModel):
    # probs[dish][state] = p_j(theta)
    probs: List[List[float]]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("probs")
    @classmethod
    def _valid_distributions(cls, value: List[List[float]]) -> List[List[float]]:
        if not value:
            raise ValueError("belief needs one vector per dish")
        width = len(value[0])
        for j, row in enumerate(value):
            if len(row) != width:
                raise ValueError("belief vectors must share one state alphabet")
            _check_distribution(row, PROB_TOLERANCE, f"dish {j} belief")
        return value

    @classmethod
    def uniform(cls, dishes: int, n_states: int) -> "Belief":
        return cls(probs=[[1.0 / n_states] * n_states for _ in range(dishes)])

    @classmethod
    def point_mass(cls, state_indices: Sequence[int], n_states: int) -> "Belief":
        rows = []
        for k in state_indices:
            row = [0.0] * n_states
            row[k] = 1.0
            rows.append(row)
        return cls(probs=rows)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "Belief":
        return cls(probs=np.asarray(values, dtype=float).tolist())

    @property
    def dishes(self) -> int:
        return len(self.probs)

    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def row(self, dish: int) -> np.ndarray:
        if not 0 <= dish < self.dishes:
            raise DomainError(f"dish index {dish} out of range")
        return np.asarray(self.probs[dish], dtype=float)


class DecisionMatrix(BaseModel):
    # entries[dish][position]; column i is the request vector of the i-th decider
    entries: List[List[int]]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("entries")
    @classmethod
    def _binary_rectangle(cls, value: List[List[int]]) -> List[List[int]]:
        if not value:
            raise ValueError("decision matrix needs at least one dish row")
        width = len(value[0])
        for row in value:
            if len(row) != width:
                raise ValueError("decision matrix rows must have equal length")
            if any(entry not in (0, 1) for entry in row):
                raise ValueError("decision entries must be 0 or 1")
        return value

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]], dishes: int) -> "DecisionMatrix":
        return cls(entries=[[int(col[j]) for col in columns] for j in range(dishes)])

    @classmethod
    def empty(cls, dishes: int, customers: int) -> "DecisionMatrix":
        return cls(entries=[[0] * customers for _ in range(dishes)])

    @property
    def dishes(self) -> int:
        return len(self.entries)

    @property
    def customers(self) -> int:
        return len(self.entries[0])

    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=int)

    def column(self, position: int) -> Tuple[int, ...]:
        return tuple(row[position] for row in self.entries)

    def row_sums(self) -> List[int]:
        return [sum(row) for row in self.entries]

    def column_sums(self) -> List[int]:
        return [sum(row[i] for row in self.entries) for i in range(self.customers)]

    def respects_budget(self, budget: int) -> bool:
        return all(total <= budget for total in self.column_sums())

    def _check_order(self, order: Sequence[int]) -> None:
        if sorted(order) != list(range(self.customers)):
            raise DomainError(f"order must be a permutation of 0..{self.customers - 1}")

    def by_customer(self, order: Sequence[int]) -> "DecisionMatrix":
        """Same requests with column i holding customer i instead of the i-th decider."""
        self._check_order(order)
        entries = [[0] * self.customers for _ in self.entries]
        for j, row in enumerate(self.entries):
            for position, customer in enumerate(order):
                entries[j][customer] = row[position]
        return DecisionMatrix(entries=entries)

    def by_position(self, order: Sequence[int]) -> "DecisionMatrix":
        self._check_order(order)
        return DecisionMatrix(entries=[[row[customer] for customer in order] for row in self.entries])


def _broadcast(value: Any, size: Any) -> Any:
    if isinstance(value, (int, float)) and not isinstance(value, bool) and isinstance(size, int):
        return [float(value)] * size
    return value


class GameConfig(BaseModel):
    schema_version: int = 1
    customers: int = Field(alias="N", ge=1)
    dishes: int = Field(alias="M", ge=1)
    budget: Optional[int] = Field(default=None, alias="L", ge=1)
    state_set: StateSet = Field(default_factory=StateSet)
    true_states: List[float]
    signal_model: SignalModel
    utility: UtilityModel
    prior: Belief
    slots: int = Field(default=DEFAULT_SLOTS, ge=1)
    rotation_period: int = Field(default=DEFAULT_ROTATION_PERIOD, ge=1)
    order: Optional[List[int]] = None
    order_schedule: Optional[List[List[int]]] = None
    signal_sharing: Literal["shared", "independent"] = "shared"
    seed: int = Field(default=DEFAULT_SEED, ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    @model_validator(mode="before")
    @classmethod
    def _expand_shorthand(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        n = data.get("customers", data.get("N"))
        m = data.get("dishes", data.get("M"))

        if "state_set" not in data and ("states" in data or "signals" in data):
            labels: Dict[str, Any] = {}
            for key in ("states", "signals"):
                if key in data:
                    labels[key] = data.pop(key)
            data["state_set"] = labels
        state_set = data.get("state_set")
        if state_set is None:
            state_set = StateSet()
            data["state_set"] = state_set
        elif isinstance(state_set, dict):
            state_set = StateSet(**state_set)
            data["state_set"] = state_set
        elif not isinstance(state_set, StateSet):
            # left for field validation to report
            state_set = StateSet()

        if "signal_quality" in data:
            w = data.pop("signal_quality")
            if "signal_model" in data:
                raise ValueError("give either signal_quality or signal_model, not both")
            if isinstance(m, int):
                try:
                    matrix = quality_likelihood(
                        float(w), len(state_set.states), len(state_set.signals)
                    )
                except (TypeError, DomainError) as exc:
                    raise ValueError(f"signal_quality: {exc}") from exc
                data["signal_model"] = {"likelihood": [matrix] * m, "quality": float(w)}
        elif "likelihood" in data and "signal_model" not in data:
            data["signal_model"] = {"likelihood": data.pop("likelihood")}

        utility = data.get("utility")
        if utility is None:
            utility = {}
        if isinstance(utility, dict):
            utility = dict(utility)
            utility["gamma"] = _broadcast(utility.get("gamma", 1.0), n)
            utility["cost"] = _broadcast(utility.get("cost", DEFAULT_COST), m)
            utility.setdefault("reward", DEFAULT_REWARD)
            data["utility"] = utility

        prior = data.get("prior", "uniform")
        if prior == "uniform" and isinstance(m, int):
            data["prior"] = Belief.uniform(m, len(state_set.states))
        elif isinstance(prior, list):
            data["prior"] = {"probs": prior}
        return data

    @model_validator(mode="after")
    def _consistent_dimensions(self) -> "GameConfig":
        n, m = self.customers, self.dishes
        k, q = len(self.state_set.states), len(self.state_set.signals)
        if self.schema_version != 1:
            raise ValueError(f"schema_version {self.schema_version} is not supported")
        if len(self.true_states) != m:
            raise ValueError(f"true_states: expected {m} entries, got {len(self.true_states)}")
        for label in self.true_states:
            if label not in self.state_set.states:
                raise ValueError(f"true_states: {label!r} is not a state label")
        if len(self.utility.gamma) != n:
            raise ValueError(f"utility.gamma: expected {n} entries")
        if len(self.utility.cost) != m:
            raise ValueError(f"utility.cost: expected {m} entries")
        tensor = self.signal_model.likelihood
        if len(tensor) != m or any(len(mat) != k or len(mat[0]) != q for mat in tensor):
            raise ValueError(f"signal_model.likelihood: expected {m} matrices of {k}x{q}")
        if self.signal_model.quality is not None and self.signal_model.quality < 1.0 / q - LIKELIHOOD_TOLERANCE:
            raise ValueError(f"signal_model.quality: w must be at least 1/|Q| = {1.0 / q:.6g}")
        if self.prior.dishes != m or len(self.prior.probs[0]) != k:
            raise ValueError(f"prior: expected {m} vectors over {k} states")
        if self.order is not None and sorted(self.order) != list(range(n)):
            raise ValueError("order: expected a permutation of customer ids 0..N-1")
        for idx, perm in enumerate(self.order_schedule or []):
            if sorted(perm) != list(range(n)):
                raise ValueError(f"order_schedule.{idx}: expected a permutation of 0..N-1")
        return self

    @property
    def effective_budget(self) -> int:
        return min(self.budget, self.dishes) if self.budget is not None else self.dishes

    @property
    def unconstrained(self) -> bool:
        return self.effective_budget >= self.dishes

    def initial_order(self) -> List[int]:
        return list(self.order) if self.order is not None else list(range(self.customers))

    def true_state_indices(self) -> List[int]:
        return [self.state_set.state_index(label) for label in self.true_states]

    def with_signal_quality(self, w: float) -> "GameConfig":
        signal_model = SignalModel.from_quality(w, self.state_set, self.dishes)
        return self.model_copy(update={"signal_model": signal_model})

    def with_updates(self, **changes: Any) -> "GameConfig":
        payload = self.model_dump()
        payload.update(changes)
        return GameConfig.model_validate(payload)


class Observation(BaseModel):
    customer: int = Field(ge=0)
    counts: List[int]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _counts_within_predecessors(self) -> "Observation":
        if any(c < 0 or c > self.customer for c in self.counts):
            raise ValueError("observation counts must lie in [0, number of predecessors]")
        return self


class Prediction(BaseModel):
    counts: List[int]

    model_config = ConfigDict(frozen=True, extra="forbid")


class CandidateSet(BaseModel):
    combinations: List[Tuple[int, ...]]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def size(self) -> int:
        return len(self.combinations)


class SignalRecord(BaseModel):
    customer: int
    dish: int
    signal: float


class SlotTrace(BaseModel):
    slot: int
    strategy: str
    order: List[int]
    decisions: DecisionMatrix
    signals: List[SignalRecord] = Field(default_factory=list)
    utilities: List[float]
    belief: Belief
    welfare: float


class ConvergenceReport(BaseModel):
    strong_distance: List[List[float]] = Field(default_factory=list)
    strong_total: List[float] = Field(default_factory=list)
    weak_distance: List[List[float]] = Field(default_factory=list)

    def first_passage(self, threshold: float) -> Optional[int]:
        for slot, value in enumerate(self.strong_total):
            if value < threshold:
                return slot
        return None


class ExperimentResult(BaseModel):
    strategy: str
    realizations: int
    master_seed: int
    signal_quality: Optional[float] = None
    traces: List[List[SlotTrace]] = Field(default_factory=list)
    welfare_per_realization: List[float] = Field(default_factory=list)
    mean_welfare: float = 0.0
    stderr: float = 0.0
    convergence: ConvergenceReport = Field(default_factory=ConvergenceReport)
    cumulative_utility: List[List[float]] = Field(default_factory=list)
    # last slot of the first realization, columns indexed by customer id
    final_decisions: Optional[DecisionMatrix] = None


class WelfareRow(BaseModel):
    w: float
    strategy: str
    mean_welfare: float
    stderr: float
    realizations: int


class Deviation(BaseModel):
    customer: int
    current: List[int]
    alternative: List[int]
    gain: float
    reason: str = "profitable deviation"


class NashReport(BaseModel):
    ok: bool
    violation: Optional[Deviation] = None


class RunRecord(BaseModel):
    id: str
    createdAt: int
    strategy: str
    realizations: int
    seed: int
    signalQuality: Optional[float] = None
    customers: int
    dishes: int
    budget: int
    meanWelfare: float
    stderr: float
    config: str = ""
    welfarePerRealization: List[float] = Field(default_factory=list)
    strongDistance: List[List[float]] = Field(default_factory=list)
    weakDistance: List[List[float]] = Field(default_factory=list)
    cumulativeUtility: List[List[float]] = Field(default_factory=list)
    decisions: Optional[List[List[int]]] = None

    model_config = ConfigDict(extra="ignore")


class ConfigRequest(BaseModel):
    config: str

    model_config = ConfigDict(extra="ignore")


class SolveRequest(ConfigRequest):
    beliefs: Optional[List[List[float]]] = None
    order: Optional[List[int]] = None


class VerifyRequest(SolveRequest):
    matrix: List[List[int]]


class SimulateRequest(ConfigRequest):
    strategy: Strategy = "best-response"
    realizations: Optional[int] = None
    seed: Optional[int] = None
    keepTraces: bool = False


class SweepRequest(ConfigRequest):
    wGrid: List[float]
    strategies: List[Strategy] = Field(default_factory=lambda: list(STRATEGIES))
    realizations: Optional[int] = None
    seed: Optional[int] = None


class RunIdRequest(BaseModel):
    runId: str

    model_config = ConfigDict(extra="ignore")


class ExportRunRequest(RunIdRequest):
    kind: Literal["welfare", "learning-curve", "per-customer", "ne-matrix"] = "welfare"
