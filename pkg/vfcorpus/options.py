"""Pipeline configuration: defaults, config file, environment and command-line overrides.
"""
import logging
import math
import os
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional, Tuple

from deriva.core import read_config, stob

from .budget import get_tokenizer
from .corpus.snapshots import open_snapshot_provider
from .corpus.splits import SplitStrategy, validate_fractions
from .enrich.representations import Representation
from .enrich.slicing import EnrichmentLevel
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

__debug_key__ = 'debug'
__snapshot_store_env__ = 'VFC_SNAPSHOT_STORE'
__tokenizer_env__ = 'VFC_TOKENIZER'
__jobs_env__ = 'VFC_JOBS'
__debug_env__ = 'VFC_DEBUG'

_ENVIRONMENT = (
    (__snapshot_store_env__, 'snapshot_store'),
    (__tokenizer_env__, 'tokenizer'),
    (__jobs_env__, 'jobs'),
    (__debug_env__, __debug_key__),
)

_TRUNCATION_STRATEGIES = ('naive', 'context-aware')


@dataclass
class PipelineConfig:
    """Settings shared by the subcommands.

    Values merge in increasing precedence: the defaults below, a JSON config
    file, environment variables, and command-line flags.
    """
    snapshot_store: Optional[str] = None
    tokenizer: str = 'builtin'
    level: str = 'df1'
    context_width: int = 3
    full_chain: bool = False
    with_message: bool = False
    representation: str = 'diff'
    limit: int = 512
    truncation: str = 'context-aware'
    limits: Tuple[int, ...] = ()
    strategy: str = 'random'
    fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    tolerance: float = 0.02
    vuln_ratio: Optional[float] = None
    r: float = 0.005
    threshold: float = 0.5
    window_fracs: Tuple[float, float, float] = (0.2, 0.2, 0.2)
    stride: float = 0.05
    jobs: int = 1
    debug: bool = False
    group_map: Optional[str] = None

    @classmethod
    def load(cls, config_file: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
             overrides: Optional[Mapping[str, object]] = None) -> 'PipelineConfig':
        """Builds a validated configuration.

        :param config_file: optional path of a JSON config file
        :param environ: environment mapping, `os.environ` when omitted
        :param overrides: command-line values; `None` values are ignored
        :raises ConfigurationError: on an unreadable file, an unknown key or an invalid value
        """
        config = cls()
        if config_file:
            config.update(_read_config_file(config_file), config_file)
        environ = os.environ if environ is None else environ
        config.update({key: environ[var] for var, key in _ENVIRONMENT if environ.get(var)}, 'environment')
        if overrides:
            config.update({key: value for key, value in overrides.items() if value is not None}, 'command line')
        config.validate()
        return config

    def update(self, values: Mapping[str, object], origin: str) -> None:
        names = {f.name for f in fields(self)}
        for key, value in values.items():
            if key not in names:
                raise ConfigurationError('Unknown configuration key "%s" (from %s)' % (key, origin))
            try:
                setattr(self, key, _coerce(key, value))
            except (TypeError, ValueError) as e:
                raise ConfigurationError('Invalid value %r for "%s" (from %s): %s' % (value, key, origin, e))
            logger.debug('config %s = %r (%s)' % (key, getattr(self, key), origin))

    def validate(self) -> None:
        """Checks every value; raises `ConfigurationError` on the first violation."""
        EnrichmentLevel.parse(self.level)
        Representation.parse(self.representation)
        get_tokenizer(self.tokenizer)
        try:
            SplitStrategy(self.strategy)
        except ValueError:
            raise ConfigurationError('Unknown split strategy "%s", expected one of: %s' % (
                self.strategy, ', '.join(s.value for s in SplitStrategy)))
        validate_fractions(self.fractions)
        if self.truncation not in _TRUNCATION_STRATEGIES:
            raise ConfigurationError('Unknown truncation strategy "%s", expected one of: %s' % (
                self.truncation, ', '.join(_TRUNCATION_STRATEGIES)))
        if self.context_width < 0:
            raise ConfigurationError('Context width must not be negative, got %d' % self.context_width)
        if self.limit < 1 or any(limit < 1 for limit in self.limits):
            raise ConfigurationError('Token limits must be at least 1')
        if not 0.0 <= self.tolerance < 1.0:
            raise ConfigurationError('Tolerance must lie in [0, 1), got %s' % self.tolerance)
        if self.vuln_ratio is not None and not 0.0 < self.vuln_ratio < 1.0:
            raise ConfigurationError('Vulnerability ratio must lie in (0, 1), got %s' % self.vuln_ratio)
        if not 0.0 <= self.r <= 1.0:
            raise ConfigurationError('PD-S false-positive budget r must lie in [0, 1], got %s' % self.r)
        if not math.isfinite(self.threshold):
            raise ConfigurationError('Threshold must be finite')
        if len(self.window_fracs) != 3 or any(f <= 0 for f in self.window_fracs) \
                or sum(self.window_fracs) > 1.0 + 1e-9:
            raise ConfigurationError('Window fractions must be three positive numbers summing to at most 1, '
                                     'got %s' % (list(self.window_fracs),))
        if not 0.0 < self.stride <= 1.0:
            raise ConfigurationError('Stride must lie in (0, 1], got %s' % self.stride)
        if self.jobs < 1:
            raise ConfigurationError('Jobs must be at least 1, got %d' % self.jobs)
        open_snapshot_provider(self.snapshot_store)
        if self.group_map and not os.path.isfile(self.group_map):
            raise ConfigurationError('Group map "%s" not found' % self.group_map)

    def as_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data


def _read_config_file(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigurationError('Config file "%s" not found' % path)
    try:
        config = read_config(config_file=path)
    except ValueError as e:
        raise ConfigurationError('Config file "%s" is not valid JSON: %s' % (path, e))
    if not isinstance(config, dict):
        raise ConfigurationError('Config file "%s" must hold a JSON object' % path)
    return config


def _split_list(value) -> list:
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return list(value)


def _coerce(key: str, value):
    """Converts a raw value (JSON, environment string or flag) to the field's type."""
    if key in ('full_chain', 'with_message', __debug_key__):
        return value if isinstance(value, bool) else stob(value)
    if key in ('context_width', 'limit', 'seed', 'jobs'):
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError('expected an integer')
        return int(value)
    if key in ('tolerance', 'vuln_ratio', 'r', 'threshold', 'stride'):
        return float(value)
    if key in ('fractions', 'window_fracs'):
        return tuple(float(item) for item in _split_list(value))
    if key == 'limits':
        return tuple(int(item) for item in _split_list(value))
    if key in ('level', 'strategy', 'representation', 'truncation'):
        return str(value).strip().lower()
    return str(value)
