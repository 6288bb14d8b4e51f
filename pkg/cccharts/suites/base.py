import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

from ..errors import CCChartsError
from ..systems import CATALOG, Builtin

logger = logging.getLogger(__name__)


class CheckFailed(AssertionError):
    pass


def expect(condition: bool, message: str) -> None:
    """Fail the current check with a message."""
    if not condition:
        raise CheckFailed(message)


@dataclass
class CheckResult:
    name: str
    passed: bool
    message: str = ''
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'message': self.message, 'details': self.details}


@dataclass
class SuiteResult:
    name: str
    seed: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> int:
        return sum(1 for c in self.checks if not c.passed)

    def to_dict(self) -> dict:
        return {'name': self.name, 'seed': self.seed, 'passed': self.passed, 'failures': self.failures,
                'checks': [c.to_dict() for c in self.checks]}


class Suite:
    """Runs named checks; a check passes unless it raises."""

    def __init__(self, name: str, seed: int, catalog: Optional[Mapping[str, Builtin]] = None):
        self.seed = int(seed)
        self.catalog = catalog if catalog is not None else CATALOG
        self.result = SuiteResult(name, self.seed)

    def system(self, name: str):
        return self.catalog[name].build()

    def base_point(self, name: str):
        return self.catalog[name].base_point

    def check(self, name: str, func: Callable[[], Optional[dict]]) -> CheckResult:
        try:
            details = func() or {}
            result = CheckResult(name, True, details=details)
        except CheckFailed as e:
            result = CheckResult(name, False, str(e))
        except (CCChartsError, ValueError, ArithmeticError, KeyError) as e:
            result = CheckResult(name, False, f"{type(e).__name__}: {e}")
        level = logging.DEBUG if result.passed else logging.ERROR
        logger.log(level, f"{self.result.name}.{name}: {'ok' if result.passed else result.message}")
        self.result.checks.append(result)
        return result
