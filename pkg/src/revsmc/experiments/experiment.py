#!/usr/bin/env python3
"""Experiment settings, result rows and seed derivation."""

import dataclasses
import hashlib
import math

from typing import Any

from revsmc import config as rsconfig
from revsmc.models.atm import atm as rsatm
from revsmc.models.hyperbolic import hyperbolic as rshyp
from revsmc.models.sis import sis as rssis
from revsmc.smc import particles as rsparticles
from revsmc.splitting import ams

EXPERIMENTS: tuple[str, ...] = ('atm', 'atm-large', 'atm-exact',
                                'atm-splitting', 'hyperbolic',
                                'hyperbolic-sweep', 'hyperbolic-oracle',
                                'hyperbolic-splitting', 'sis', 'sis-surface')

SEED_MASK: int = 2**64 - 1

COLUMNS: tuple[str, ...] = ('experiment', 'replicate', 'condition',
                            'estimate', 'std_error', 'ess_min',
                            'resample_count', 'wall_seconds', 'seed',
                            'degenerate', 'detail')


def derive_seed(seed: int, *parts: Any) -> int:
    """Mix `parts` into a 64 bit seed.

    The result is `seed` XOR a 64 bit blake2b digest of the parts, so
    it is stable across processes and platforms.
    """

    key: str = '|'.join(str(part) for part in parts)
    digest: bytes = hashlib.blake2b(key.encode('utf-8'),
                                    digest_size=8).digest()
    return (seed ^ int.from_bytes(digest, 'little')) & SEED_MASK


def replicate_seed(seed: int, replicate: int, experiment: str) -> int:
    """The seed of replicate r: seed XOR hash(r, experiment id)."""
    return derive_seed(seed, replicate, experiment)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Everything a replicate needs, validated and picklable.

    Attributes:
        experiment: The experiment id, one of `EXPERIMENTS`.
        n: Number of particles N.
        replicates: Number of replicates.
        seed: The master seed, a 64 bit integer.
        jobs: Number of worker processes.
        out: Output path, `-` for stdout.
        growth_bias: Infection rate factor when generating epidemics.
        oracle_paths: Forward paths of the containment oracle.
        engine: Tuning of the reverse-time engine.
        splitting: Tuning of the splitting baseline.
        atm: ATM parameters.
        strip: Hyperbolic geometry.
        terminal_intervals: Terminal intervals of the sweep.
        sis: Epidemic parameters.
        network_file: Edge list of the contact network, empty for the
            grid.
        observed_file: Observed configuration, empty to simulate one
            per replicate.
        echo: The full consolidated configuration.
    """

    experiment: str
    n: int
    replicates: int
    seed: int
    jobs: int = 1
    out: str = '-'
    growth_bias: float = 1.0
    oracle_paths: int = 1_000_000
    engine: rsparticles.EngineConfig = dataclasses.field(
        default_factory=rsparticles.EngineConfig)
    splitting: ams.SplittingConfig = dataclasses.field(
        default_factory=ams.SplittingConfig)
    atm: rsatm.AtmParams = dataclasses.field(default_factory=rsatm.AtmParams)
    strip: rshyp.StripParams = dataclasses.field(
        default_factory=rshyp.StripParams)
    terminal_intervals: tuple[tuple[float, float], ...] = ()
    sis: rssis.SisParams = dataclasses.field(default_factory=rssis.SisParams)
    network_file: str = ''
    observed_file: str = ''
    echo: dict[str, Any] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_config(cls, config: rsconfig.Config) -> 'ExperimentConfig':
        """Read `core.experiment.*` and the sections it needs.

        Raises:
            ConfigError: A value is missing, malformed or out of range;
                the message names the field.
        """

        experiment: str = config.get_str('core',
                                         'experiment',
                                         'id',
                                         default='')
        if experiment not in EXPERIMENTS:
            raise rsconfig.ConfigError(
                f'core.experiment.id must be one of {", ".join(EXPERIMENTS)}'
                f', got "{experiment}".')

        def get_int(key: str, default: int) -> int:
            return config.get_int('core', 'experiment', key, default=default)

        n: int = get_int('n', 1000)
        replicates: int = get_int('replicates', 1)
        seed: int = get_int('seed', 0)
        jobs: int = get_int('jobs', 1)
        oracle_paths: int = get_int('oracle_paths', 1_000_000)
        growth_bias: float = config.get_float('core',
                                              'experiment',
                                              'growth_bias',
                                              default=1.0)
        if n < 1:
            raise rsconfig.ConfigError('core.experiment.n must be >= 1.')
        if replicates < 1:
            raise rsconfig.ConfigError(
                'core.experiment.replicates must be >= 1.')
        if not 0 <= seed <= SEED_MASK:
            raise rsconfig.ConfigError(
                'core.experiment.seed must be a 64 bit unsigned integer.')
        if jobs < 1:
            raise rsconfig.ConfigError('core.experiment.jobs must be >= 1.')
        if oracle_paths < 1:
            raise rsconfig.ConfigError(
                'core.experiment.oracle_paths must be >= 1.')
        if not growth_bias > 0:
            raise rsconfig.ConfigError(
                'core.experiment.growth_bias must be > 0.')

        model: str = experiment.split('-')[0]
        settings: dict[str, Any] = {}
        if model == 'atm':
            settings['atm'] = rsatm.AtmParams.from_config(config)
        elif model == 'hyperbolic':
            settings['strip'] = rshyp.StripParams.from_config(config)
            settings['terminal_intervals'] = _terminal_intervals(config)
        else:
            settings['sis'] = rssis.SisParams.from_config(config)
            settings['network_file'] = config.get_str('models',
                                                      'sis',
                                                      'network_file',
                                                      default='')
            settings['observed_file'] = config.get_str('models',
                                                       'sis',
                                                       'observed_file',
                                                       default='')

        return cls(experiment=experiment,
                   n=n,
                   replicates=replicates,
                   seed=seed,
                   jobs=jobs,
                   out=config.get_str('core', 'experiment', 'out',
                                      default='-'),
                   growth_bias=growth_bias,
                   oracle_paths=oracle_paths,
                   engine=rsparticles.EngineConfig.from_config(config),
                   splitting=ams.SplittingConfig.from_config(config, n=n)
                   if experiment.endswith('splitting') else
                   ams.SplittingConfig(),
                   echo=config.as_dict(),
                   **settings)


def _terminal_intervals(
        config: rsconfig.Config) -> tuple[tuple[float, float], ...]:
    intervals: list[list[float]] = config.get_list_list_float(
        'models', 'hyperbolic', 'terminal_intervals', default=[])
    for interval in intervals:
        if len(interval) != 2 or not interval[0] < interval[1]:
            raise rsconfig.ConfigError(
                'models.hyperbolic.terminal_intervals must hold pairs '
                '[lower, upper] with lower < upper.')
    return tuple((interval[0], interval[1]) for interval in intervals)


@dataclasses.dataclass
class ResultRow:
    """One estimate of one condition of one replicate.

    Attributes:
        experiment: The experiment id.
        replicate: The replicate index.
        condition: The terminal condition, e.g. `k=5` or a vertex.
        estimate: The estimate.
        std_error: Its standard error.
        ess_min: Smallest ESS at a level barrier (survivor count for
            splitting rows), `nan` if not applicable.
        resample_count: Resampling events (splitting iterations).
        wall_seconds: Wall-clock time.
        seed: The replicate seed.
        degenerate: The run failed and the estimate is meaningless.
        detail: Free text, e.g. the true source or the error message.
    """

    experiment: str
    replicate: int
    condition: str
    estimate: float
    std_error: float
    ess_min: float = math.nan
    resample_count: int = 0
    wall_seconds: float = 0.0
    seed: int = 0
    degenerate: bool = False
    detail: str = ''

    @classmethod
    def from_summary(cls, experiment: str, replicate: int, condition: str,
                     summary: rsparticles.EstimateSummary, seed: int,
                     detail: str = '') -> 'ResultRow':
        """Build a row from an engine or splitting summary."""
        return cls(experiment=experiment,
                   replicate=replicate,
                   condition=condition,
                   estimate=summary.estimate,
                   std_error=summary.std_error,
                   ess_min=summary.ess_min,
                   resample_count=summary.resample_events,
                   wall_seconds=summary.elapsed,
                   seed=seed,
                   detail=detail)

    @classmethod
    def failed(cls, experiment: str, replicate: int, condition: str,
               seed: int, error: Exception) -> 'ResultRow':
        """A degenerate row carrying the error message."""
        return cls(experiment=experiment,
                   replicate=replicate,
                   condition=condition,
                   estimate=0.0,
                   std_error=math.nan,
                   seed=seed,
                   degenerate=True,
                   detail=f'{type(error).__name__}: {error}')

    def values(self) -> list[Any]:
        """The fields in `COLUMNS` order."""
        return [getattr(self, column) for column in COLUMNS]
