from typing import Iterable, List


class BuffetError(Exception):
    """Base class for errors raised by the game library."""


class DomainError(BuffetError, ValueError):
    pass


class ContractViolation(BuffetError, ValueError):
    pass


class DegenerateUpdateError(BuffetError, ArithmeticError):
    pass


class CapacityError(BuffetError, RuntimeError):
    pass


class ConfigError(BuffetError, ValueError):
    def __init__(self, problems: Iterable[str]) -> None:
        self.problems: List[str] = list(problems) or ["invalid configuration"]
        super().__init__("; ".join(self.problems))
