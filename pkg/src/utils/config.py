"""Configuration management using environment variables and key=value run files"""
import os
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv, dotenv_values

from src.utils.errors import InputError

# Load .env file if it exists
env_path = Path(__file__).parent.parent.parent / '.env'
if env_path.exists():
    load_dotenv(env_path)


class Config:
    """Application configuration from environment variables"""

    # Parallelism (sweep points, greedy candidates)
    THREADS = int(os.getenv('FASTQM_THREADS', '1'))

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR = os.getenv('LOG_DIR', 'logs')
    LOG_TO_FILE = os.getenv('FASTQM_LOG_TO_FILE', 'true').lower() == 'true'

    # File formats
    FORMAT_VERSION = 1
    CSV_MAX_ENTRIES = int(os.getenv('CSV_MAX_ENTRIES', str(10 ** 6)))

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration"""
        if cls.THREADS < 1:
            raise InputError(f"FASTQM_THREADS must be >= 1, got {cls.THREADS}")

        if cls.LOG_TO_FILE:
            Path(cls.LOG_DIR).mkdir(parents=True, exist_ok=True)

        return True

    @classmethod
    def display(cls) -> dict:
        """Return configuration as dictionary"""
        return {
            'THREADS': cls.THREADS,
            'LOG_LEVEL': cls.LOG_LEVEL,
            'LOG_DIR': cls.LOG_DIR,
            'LOG_TO_FILE': cls.LOG_TO_FILE,
            'FORMAT_VERSION': cls.FORMAT_VERSION,
            'CSV_MAX_ENTRIES': cls.CSV_MAX_ENTRIES
        }


METHODS = ['pod', 'qm', 'greedy', 'riemannian']
CENTERING_MODES = ['zero', 'mean', 'initial', 'custom']
SVD_METHODS = ['auto', 'direct', 'gram']
SYNTH_KINDS = ['parabola', 'poly']

# Quadratic modes of the quadratic methods when --q is not given
DEFAULT_Q = 1


def _parse_int_list(raw: str) -> List[int]:
    return [int(v) for v in str(raw).replace(' ', '').split(',') if v]


def _parse_float_list(raw: str) -> List[float]:
    return [float(v) for v in str(raw).replace(' ', '').split(',') if v]


def _parse_str_list(raw: str) -> List[str]:
    return [v for v in str(raw).replace(' ', '').split(',') if v]


def _parse_bool(raw: str) -> bool:
    return str(raw).strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass
class RunConfig:
    """
    Parameters of one command invocation.

    Values are merged from dataclass defaults, an optional flat key=value file
    and command-line flags, in increasing priority.
    """

    # Paths
    input: Optional[str] = None
    output: Optional[str] = None
    basis: Optional[str] = None
    model: Optional[str] = None
    modes: Optional[str] = None
    test: Optional[str] = None
    reference: Optional[str] = None

    # Snapshot preprocessing
    centering: str = 'mean'
    svd_method: str = 'auto'

    # Fit parameters
    method: str = 'riemannian'
    r: int = 1
    q: Optional[int] = None
    m: Optional[int] = None
    gamma: float = 0.0

    # Solver
    grad_tol: float = 2e-4
    max_iters: int = 500
    cg_restart_period: int = 50
    seed: int = 0

    # Sweeps
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    r_values: List[int] = field(default_factory=list)
    q_values: List[int] = field(default_factory=list)
    m_values: List[int] = field(default_factory=list)
    gamma_values: List[float] = field(default_factory=list)
    threads: int = Config.THREADS

    # Synthetic data
    kind: str = 'parabola'
    samples: int = 25
    n: int = 40
    r_true: int = 2
    quadratic_scale: float = 0.25
    split: bool = False

    # Rotation landscape
    theta_start: float = 0.0
    theta_stop: float = 6.28
    theta_step: float = 0.01

    _PARSERS = {
        'r': int, 'q': int, 'm': int, 'max_iters': int, 'cg_restart_period': int,
        'seed': int, 'threads': int, 'samples': int, 'n': int, 'r_true': int,
        'gamma': float, 'grad_tol': float, 'quadratic_scale': float,
        'theta_start': float, 'theta_stop': float, 'theta_step': float,
        'methods': _parse_str_list, 'r_values': _parse_int_list,
        'q_values': _parse_int_list, 'm_values': _parse_int_list,
        'gamma_values': _parse_float_list, 'split': _parse_bool,
    }

    @classmethod
    def from_sources(
        cls,
        config_file: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None
    ) -> 'RunConfig':
        """
        Build a RunConfig from a key=value file and command-line overrides

        Args:
            config_file: Optional path to a flat key=value file
            overrides: Flag values; entries that are None are ignored

        Returns:
            Merged RunConfig (flags win over the file, the file over defaults)
        """
        known = {f.name for f in fields(cls)}
        values: Dict[str, Any] = {}

        if config_file:
            path = Path(config_file)
            if not path.exists():
                raise InputError(f"Config file not found: {config_file}")
            for key, raw in dotenv_values(path).items():
                name = key.strip().lower().replace('-', '_')
                if name not in known:
                    raise InputError(f"Unknown key '{key}' in {config_file}")
                if raw is None or raw == '':
                    continue
                values[name] = cls._coerce(name, raw)

        for name, value in (overrides or {}).items():
            if value is None or name not in known:
                continue
            values[name] = cls._coerce(name, value) if isinstance(value, str) else value

        return cls(**values)

    @classmethod
    def _coerce(cls, name: str, raw: str) -> Any:
        parser = cls._PARSERS.get(name)
        if parser is None:
            return raw
        try:
            return parser(raw)
        except ValueError as e:
            raise InputError(f"Invalid value for '{name}': {raw!r} ({e})")

    def validate(self, command: str) -> bool:
        """
        Check every numeric constraint of the downstream modules for a command

        Args:
            command: One of svd, fit, eval, sweep, synth, rotation-sweep

        Returns:
            True when valid

        Raises:
            InputError: On the first violated constraint
        """
        if self.gamma < 0:
            raise InputError(f"gamma must be >= 0, got {self.gamma}")
        if self.grad_tol <= 0:
            raise InputError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iters < 1:
            raise InputError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.cg_restart_period < 1:
            raise InputError(f"cg_restart_period must be >= 1, got {self.cg_restart_period}")
        if self.threads < 1:
            raise InputError(f"threads must be >= 1, got {self.threads}")

        if command == 'svd':
            self._require('input', 'output')
            if self.centering not in CENTERING_MODES:
                raise InputError(f"centering must be one of {CENTERING_MODES}")
            if self.centering == 'custom' and not self.reference:
                raise InputError("centering=custom requires --reference")
            if self.svd_method not in SVD_METHODS:
                raise InputError(f"svd_method must be one of {SVD_METHODS}")
            if self.m is not None and self.m < 1:
                raise InputError(f"m must be >= 1, got {self.m}")

        elif command == 'fit':
            self._require('basis', 'output')
            if self.method not in METHODS:
                raise InputError(f"method must be one of {METHODS}")
            if self.r < 1:
                raise InputError(f"r must be >= 1, got {self.r}")
            if self.q is not None and self.q < 0:
                raise InputError(f"q must be >= 0, got {self.q}")
            if self.method in ('qm', 'greedy', 'riemannian') and self.quadratic_modes() < 1:
                raise InputError(f"method={self.method} requires q >= 1")

        elif command == 'eval':
            self._require('model', 'test', 'output')

        elif command == 'sweep':
            self._require('basis', 'output')
            unknown = [m for m in self.methods if m not in METHODS]
            if unknown or not self.methods:
                raise InputError(f"methods must be a non-empty subset of {METHODS}")
            for name in ('r_values', 'q_values', 'm_values'):
                if any(v < 0 for v in getattr(self, name)):
                    raise InputError(f"{name} must be non-negative")
            if any(g < 0 for g in self.gamma_values):
                raise InputError("gamma_values must be >= 0")

        elif command == 'synth':
            self._require('output')
            if self.kind not in SYNTH_KINDS:
                raise InputError(f"kind must be one of {SYNTH_KINDS}")
            if self.samples < 2:
                raise InputError(f"samples must be >= 2, got {self.samples}")

        elif command == 'rotation-sweep':
            self._require('output')
            if self.theta_step <= 0 or self.theta_stop <= self.theta_start:
                raise InputError("rotation sweep needs theta_stop > theta_start and theta_step > 0")

        return True

    def quadratic_modes(self, method: Optional[str] = None) -> int:
        """q for a method: 0 for pod, otherwise the given q or DEFAULT_Q"""
        if (method or self.method) == 'pod':
            return 0
        return DEFAULT_Q if self.q is None else self.q

    def _require(self, *names: str) -> None:
        missing = [n for n in names if not getattr(self, n)]
        if missing:
            flags = ', '.join(f"--{n.replace('_', '-')}" for n in missing)
            raise InputError(f"Missing required option(s): {flags}")

    def as_metadata(self, *names: str) -> Dict[str, str]:
        """Return the selected fields as strings for file metadata headers"""
        data = asdict(self)
        selected = names or tuple(data)
        return {
            n: ','.join(str(v) for v in data[n]) if isinstance(data[n], list) else str(data[n])
            for n in selected if data.get(n) is not None
        }
