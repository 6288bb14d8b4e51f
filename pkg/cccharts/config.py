import os
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .errors import CCChartsError, ConfigError
from .expr import Expr, ZERO, parse
from .fields import Box, VectorField, VectorSystem, structure_residual

# Set up logging
logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TOL_STRUCTURE = 1e-6
STRUCTURE_SAMPLES = 64

TOP_LEVEL_KEYS = {'schema_version', 'name', 'builtin', 'dimension', 'base_point', 'density', 'domain',
                  'fields', 'structure', 'solver'}


def load_settings() -> Dict[str, Any]:
    """Load settings from environment variables and the project's .env file."""

    # .env is looked up relative to the project root, not the working directory
    project_root = Path(__file__).parent.parent
    env_path = project_root / '.env'

    if env_path.exists():
        load_dotenv(dotenv_path=env_path)
        logger.info(f"Loaded .env file from {env_path}")
    else:
        logger.warning(f".env file not found at {env_path}, using environment variables only")

    threads = os.getenv("CCCHARTS_THREADS", "1")
    try:
        threads = int(threads)
    except ValueError:
        raise ConfigError(f"CCCHARTS_THREADS must be an integer, got {threads!r}")
    if threads < 1:
        raise ConfigError(f"CCCHARTS_THREADS must be >= 1, got {threads}")

    return {
        "threads": threads,
        "log_level": os.getenv("CCCHARTS_LOG_LEVEL", "INFO").upper(),
        "output_directory": os.getenv("CCCHARTS_OUTPUT_DIR", "./cccharts_out"),
    }


def ensure_output_directory(directory_path: Union[str, Path]) -> Path:
    """Ensure the output directory exists."""
    path = Path(directory_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs of the [solver] table."""

    grid: int = 17
    rk4_steps: int = 200
    samples: int = 20000
    seed: int = 0
    tol: float = 1e-10
    zeta: float = 1.0
    eta_max: float = 1.0
    nodes: int = 256
    neighbors: int = 12
    threads: int = 1

    def __post_init__(self):
        if self.grid < 3 or self.grid % 2 == 0:
            raise ConfigError(f"solver.grid must be odd and >= 3, got {self.grid}")
        for name in ('rk4_steps', 'samples', 'nodes', 'neighbors', 'threads'):
            if getattr(self, name) < 1:
                raise ConfigError(f"solver.{name} must be >= 1, got {getattr(self, name)}")
        if self.tol <= 0:
            raise ConfigError(f"solver.tol must be positive, got {self.tol}")
        if not 0.0 < self.zeta <= 1.0:
            raise ConfigError(f"solver.zeta must lie in (0, 1], got {self.zeta}")
        if self.eta_max <= 0:
            raise ConfigError(f"solver.eta_max must be positive, got {self.eta_max}")

    def override(self, **values) -> 'SolverSettings':
        """Apply CLI flags; None leaves a knob as configured."""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def chart_config(self):
        from .chart import ChartConfig
        return ChartConfig(zeta=self.zeta, eta_max=self.eta_max, grid=self.grid, tol=self.tol,
                           steps_per_unit=self.rk4_steps, seed=self.seed)

    def cc_params(self):
        from .ccmetric import CCParams
        return CCParams(nodes=self.nodes, neighbors=self.neighbors, threads=self.threads)


@dataclass(frozen=True)
class Config:
    """A loaded experiment: the system, its base point, optional density and degrees."""

    name: str
    system: VectorSystem
    base_point: Tuple[float, ...]
    degrees: Optional[Tuple[float, ...]]
    density: Optional[Expr] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    builtin: Optional[str] = None
    path: Optional[Path] = None

    @property
    def n(self) -> int:
        return self.system.n

    def graded(self):
        """The graded system; scaling experiments need degrees in the config."""
        from .scaling import GradedSystem
        if self.degrees is None:
            raise ConfigError(f"config {self.name!r} gives no field degrees")
        return GradedSystem(self.system, self.degrees)

    def with_solver(self, **values) -> 'Config':
        return replace(self, solver=self.solver.override(**values))


def _number_list(value: Any, what: str, length: Optional[int] = None) -> Tuple[float, ...]:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                              for v in value):
        raise ConfigError(f"{what} must be a list of numbers")
    if length is not None and len(value) != length:
        raise ConfigError(f"{what} has {len(value)} entries, expected {length}")
    return tuple(float(v) for v in value)


def _expression(text: Any, n: int, what: str) -> Expr:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ConfigError(f"{what} must be an expression string")
    try:
        return parse(text, n)
    except CCChartsError as e:
        raise ConfigError(f"{what}: {e}") from e


def _solver(table: Any, threads: Optional[int]) -> SolverSettings:
    table = dict(table or {})
    if threads is not None:
        table.setdefault('threads', threads)
    allowed = set(SolverSettings.__dataclass_fields__)
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown solver keys: {unknown}")
    try:
        return SolverSettings(**table)
    except TypeError as e:
        raise ConfigError(f"bad solver table: {e}") from e


def _fields(entries: Any, n: int) -> Tuple[Tuple[VectorField, ...], Optional[Tuple[float, ...]]]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("at least one [[fields]] entry is required")
    fields, degrees = [], []
    for i, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict):
            raise ConfigError(f"[[fields]] entry {i} must be a table")
        name = str(entry.get('name', f"X{i}"))
        comps = entry.get('components')
        if not isinstance(comps, list) or len(comps) != n:
            raise ConfigError(f"field {name!r} needs {n} components")
        fields.append(VectorField(n, tuple(_expression(c, n, f"field {name!r}") for c in comps), name=name))
        degree = entry.get('degree')
        if degree is not None and (not isinstance(degree, (int, float)) or isinstance(degree, bool) or degree < 1):
            raise ConfigError(f"field {name!r} has degree {degree!r}; degrees must be >= 1")
        degrees.append(degree)
    if all(d is None for d in degrees):
        return tuple(fields), None
    return tuple(fields), tuple(1.0 if d is None else float(d) for d in degrees)


def _structure(table: Any, q: int, n: int):
    if not isinstance(table, dict):
        raise ConfigError("[structure] must be a table")
    out = [[[ZERO for _ in range(q)] for _ in range(q)] for _ in range(q)]
    for key, text in table.items():
        try:
            j, k, l = (int(part) for part in str(key).split(','))
        except ValueError:
            raise ConfigError(f"structure key {key!r} must read \"j,k,l\"")
        if not all(1 <= v <= q for v in (j, k, l)):
            raise ConfigError(f"structure key {key!r} refers to a field outside 1..{q}")
        out[j - 1][k - 1][l - 1] = _expression(text, n, f"structure {key}")
    return tuple(tuple(tuple(row) for row in plane) for plane in out)


def _check_structure(system: VectorSystem, seed: int) -> None:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(system.domain.lo, system.domain.hi, size=(STRUCTURE_SAMPLES, system.n))
    try:
        residual = structure_residual(system, pts)
    except CCChartsError as e:
        raise ConfigError(f"structure coefficients cannot be checked: {e}") from e
    if not residual <= TOL_STRUCTURE:
        raise ConfigError(f"structure coefficients disagree with the brackets (residual {residual:.3g})")
    logger.debug(f"structure table matches brackets to {residual:.3g}")


def config_from_dict(data: Dict[str, Any], path: Optional[Path] = None, threads: Optional[int] = None) -> Config:
    """Build a Config from a parsed TOML document."""
    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    version = data.get('schema_version', SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    solver = _solver(data.get('solver'), threads)

    default_point = None
    if 'builtin' in data:
        from .systems import get_builtin
        clash = sorted({'dimension', 'domain', 'fields', 'structure'} & set(data))
        if clash:
            raise ConfigError(f"builtin systems cannot be combined with {clash}")
        try:
            builtin = get_builtin(str(data['builtin']))
        except KeyError as e:
            raise ConfigError(str(e.args[0])) from e
        grade = builtin.build()
        system, degrees, default_point = grade.system, grade.degrees, builtin.base_point
    else:
        n = data.get('dimension')
        if not isinstance(n, int) or n < 1:
            raise ConfigError("dimension must be a positive integer")
        domain = data.get('domain')
        if not isinstance(domain, dict) or 'lower' not in domain or 'upper' not in domain:
            raise ConfigError("[domain] needs lower and upper")
        try:
            box = Box(_number_list(domain['lower'], 'domain.lower', n), _number_list(domain['upper'], 'domain.upper', n))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        fields, degrees = _fields(data.get('fields'), n)
        structure = _structure(data['structure'], len(fields), n) if 'structure' in data else None
        system = VectorSystem(fields, box, structure, name=str(data.get('name', 'system')))
        if structure is not None:
            _check_structure(system, solver.seed)

    n = system.n
    if 'base_point' in data:
        base_point = _number_list(data['base_point'], 'base_point', n)
    elif default_point is not None:
        base_point = tuple(default_point)
    else:
        base_point = tuple(float(v) for v in system.domain.center)
    if not system.domain.contains(np.asarray(base_point)):
        raise ConfigError(f"base_point {list(base_point)} lies outside the domain")
    density = _expression(data['density'], n, 'density') if 'density' in data else None
    name = str(data.get('name', data.get('builtin', 'system')))
    logger.debug(f"config {name!r}: n={n}, q={system.q}, base point {list(base_point)}")
    return Config(name, system, base_point, degrees, density, solver, data.get('builtin'), path)


def load_config(path: Union[str, Path], threads: Optional[int] = None) -> Config:
    """Read and validate an experiment TOML file."""
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    config = config_from_dict(data, path, threads)
    logger.info(f"Loaded config {config.name!r} from {path}")
    return config
