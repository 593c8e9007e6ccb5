#!/usr/bin/env python3
"""Containers the reverse-time engine works on.

Weights are kept as natural logarithms throughout; `weight` properties
exponentiate on demand.
"""

import dataclasses
import math
import sys

from typing import Any, Iterator, Optional

import numpy as np

from revsmc import config as rsconfig

# level of a particle that has not been assigned one yet
UNSET_LEVEL: int = sys.maxsize


class Trajectory():
    """States in reverse construction order.

    Index 0 holds the terminal state drawn from the terminal law, the
    last index the most recently proposed predecessor.

    Attributes:
        states: The states.
    """
    __slots__ = ['states']

    def __init__(self, states: Optional[list[Any]] = None) -> None:
        self.states: list[Any] = list(states) if states else []

    def append(self, state: Any) -> None:
        """Add the next predecessor."""
        self.states.append(state)

    def copy(self) -> 'Trajectory':
        """Return a trajectory with a copy of the state list."""
        return Trajectory(self.states)

    @property
    def last(self) -> Any:
        """The most recently appended state."""
        return self.states[-1]

    @property
    def first(self) -> Any:
        """The terminal state."""
        return self.states[0]

    def forward(self) -> list[Any]:
        """Return the states in forward time order."""
        return self.states[::-1]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, index: int) -> Any:
        return self.states[index]

    def __iter__(self) -> Iterator[Any]:
        return iter(self.states)


@dataclasses.dataclass
class Particle:
    """A trajectory in progress and its importance weight.

    Attributes:
        trajectory: The reverse trajectory.
        log_weight: Logarithm of the importance weight, `-inf` for a
            zeroed particle.
        level_index: The deepest level crossed so far.
        ancestor: Index of the particle this one was copied from at the
            last resampling event (its own index otherwise).
        done: The trajectory has reached the initial set (or the
            particle was zeroed).
        anchor_log_weight: The log weight installed at the last
            resampling event, or minus the log terminal density.
        anchor_index: Trajectory index at which `anchor_log_weight` was
            installed.
        zeroed: Reason the particle was zeroed, empty if it was not.
    """

    trajectory: Trajectory
    log_weight: float
    level_index: int = UNSET_LEVEL
    ancestor: int = 0
    done: bool = False
    anchor_log_weight: float = 0.0
    anchor_index: int = 0
    zeroed: str = ''

    @property
    def weight(self) -> float:
        """The importance weight."""
        return math.exp(self.log_weight)

    @property
    def alive(self) -> bool:
        """Still to be propagated."""
        return not self.done

    def zero(self, reason: str) -> None:
        """Set the weight to zero and stop propagating."""
        self.log_weight = -math.inf
        self.done = True
        self.zeroed = reason

    def offspring(self, log_weight: float, ancestor: int) -> 'Particle':
        """Return a copy carrying `log_weight`, anchored at its end."""
        return Particle(trajectory=self.trajectory.copy(),
                        log_weight=log_weight,
                        level_index=self.level_index,
                        ancestor=ancestor,
                        done=self.done,
                        anchor_log_weight=log_weight,
                        anchor_index=len(self.trajectory) - 1,
                        zeroed=self.zeroed)


@dataclasses.dataclass
class Ensemble:
    """N particles plus the resampling bookkeeping.

    Attributes:
        particles: The particles.
        rng_streams: One generator per particle index.
        resample_rng: Generator reserved for resampling.
        log_mean_weight: Logarithm of the mean weight installed at the
            last resampling event, `nan` before the first one.
        ancestors: Ancestor indices drawn at the last resampling event.
        ess_trace: (level, ESS) pairs, one per level barrier.
        resample_events: Number of resampling events.
        elapsed: Seconds spent in `run_reverse_smc`.
    """

    particles: list[Particle]
    rng_streams: list[np.random.Generator]
    resample_rng: np.random.Generator
    log_mean_weight: float = math.nan
    ancestors: Optional[np.ndarray] = None
    ess_trace: list[tuple[int, float]] = dataclasses.field(
        default_factory=list)
    resample_events: int = 0
    elapsed: float = 0.0

    @property
    def size(self) -> int:
        """The number of particles N."""
        return len(self.particles)

    @property
    def mean_weight(self) -> float:
        """The mean weight installed at the last resampling event."""
        return math.exp(self.log_mean_weight)

    def log_weights(self) -> np.ndarray:
        """Return the log weights as an array."""
        return np.fromiter(
            (particle.log_weight for particle in self.particles),
            dtype=float,
            count=self.size)

    def weights(self) -> np.ndarray:
        """Return the weights (may underflow, prefer `log_weights`)."""
        return np.exp(self.log_weights())

    def live(self) -> list[int]:
        """Indices of the particles still being propagated."""
        return [
            index for index, particle in enumerate(self.particles)
            if particle.alive
        ]

    def zeroed_count(self) -> int:
        """The number of particles zeroed during the run."""
        return sum(1 for particle in self.particles if particle.zeroed)


@dataclasses.dataclass
class EstimateSummary:
    """Point estimate and diagnostics of one run.

    Attributes:
        estimate: The point estimate.
        std_error: Standard error from the weighted sample.
        ess_trace: (level, ESS) pairs.
        resample_events: Number of resampling events.
        elapsed: Wall-clock seconds.
        log_estimate: Natural logarithm of the estimate, `-inf` for 0.
        zeroed: Number of zeroed particles.
    """

    estimate: float
    std_error: float
    ess_trace: list[tuple[int, float]] = dataclasses.field(
        default_factory=list)
    resample_events: int = 0
    elapsed: float = 0.0
    log_estimate: float = -math.inf
    zeroed: int = 0

    @property
    def ess_min(self) -> float:
        """Smallest ESS seen at a level barrier, `nan` without any."""
        if not self.ess_trace:
            return math.nan
        return min(ess for _, ess in self.ess_trace)


@dataclasses.dataclass(frozen=True)
class EngineConfig:
    """Tuning of the reverse-time engine.

    Attributes:
        ess_threshold: Resample when ESS < ess_threshold * N.
        resampling: `multinomial` or `systematic`.
        step_cap: Reverse steps after which a particle is zeroed.
        validate: Check the first-hitting convention on every step.
    """

    ess_threshold: float = 0.5
    resampling: str = 'multinomial'
    step_cap: int = 1_000_000
    validate: bool = False

    @classmethod
    def from_config(cls, config: rsconfig.Config) -> 'EngineConfig':
        """Read `core.engine.*` and validate it.

        Raises:
            ConfigError: A value is out of range.
        """

        engine: EngineConfig = cls(
            ess_threshold=config.get_float('core',
                                           'engine',
                                           'ess_threshold',
                                           default=0.5),
            resampling=config.get_str('core',
                                      'engine',
                                      'resampling',
                                      default='multinomial'),
            step_cap=config.get_int('core',
                                    'engine',
                                    'step_cap',
                                    default=1_000_000),
            validate=config.get_bool('core',
                                     'engine',
                                     'validate',
                                     default=False))
        if not 0 < engine.ess_threshold <= 1:
            raise rsconfig.ConfigError(
                'core.engine.ess_threshold must lie in (0, 1].')
        if engine.resampling not in ('multinomial', 'systematic'):
            raise rsconfig.ConfigError(
                'core.engine.resampling must be multinomial or systematic.')
        if engine.step_cap < 1:
            raise rsconfig.ConfigError('core.engine.step_cap must be >= 1.')
        return engine
