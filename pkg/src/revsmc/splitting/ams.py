#!/usr/bin/env python3
"""Adaptive multilevel splitting.

N forward paths are simulated. Every iteration the paths whose reaction
coordinate does not exceed the `kill_count`-th smallest value are
discarded and replaced by clones of uniformly chosen survivors, moved
by a path kernel that keeps them above the discarded level. The
probability of reaching the target level is estimated by the product
of the survival fractions times the fraction of paths at the target.
"""

import dataclasses
import math
import time

from typing import Any, Optional

import numpy as np

from revsmc import config as rsconfig
from revsmc import errors
from revsmc import eventsink
from revsmc.models.atm import atm as rsatm
from revsmc.models.hyperbolic import hyperbolic as rshyp
from revsmc.rslogging import rslogging
from revsmc.smc import particles as rsparticles
from revsmc.splitting import kernels

logger: rslogging.RsLogger = rslogging.get_logger(__name__)


@dataclasses.dataclass(frozen=True)
class SplittingConfig:
    """Tuning of the splitting baseline.

    Attributes:
        n: Number of paths N.
        kill_count: Paths discarded per iteration (at least; ties at
            the kill level are discarded as well).
        max_iterations: Iterations after which the run is abandoned.
        mcmc_steps: Kernel applications per clone.
        mh_correction: Use the Metropolis-Hastings corrected kernels.
        initial_conditions: Initial positions averaged over for the
            diffusion.
    """

    n: int = 1000
    kill_count: int = 1
    max_iterations: int = 1_000_000
    mcmc_steps: int = 1
    mh_correction: bool = True
    initial_conditions: int = 20

    def __post_init__(self) -> None:
        if self.n < 2:
            raise rsconfig.ConfigError('core.splitting.n must be >= 2.')
        if not 1 <= self.kill_count < self.n:
            raise rsconfig.ConfigError(
                'core.splitting.kill_count must lie in 1..n-1.')
        if self.max_iterations < 1:
            raise rsconfig.ConfigError(
                'core.splitting.max_iterations must be >= 1.')
        if self.mcmc_steps < 1:
            raise rsconfig.ConfigError(
                'core.splitting.mcmc_steps must be >= 1.')
        if self.initial_conditions < 1:
            raise rsconfig.ConfigError(
                'core.splitting.initial_conditions must be >= 1.')

    @classmethod
    def from_config(cls,
                    config: rsconfig.Config,
                    n: Optional[int] = None) -> 'SplittingConfig':
        """Read `core.splitting.*`.

        Args:
            config: The configuration.
            n: Overrides `core.splitting.n`.
        """

        def get(key: str, default: int) -> int:
            return config.get_int('core', 'splitting', key, default=default)

        return cls(n=n if n is not None else get('n', 1000),
                   kill_count=get('kill_count', 1),
                   max_iterations=get('max_iterations', 1_000_000),
                   mcmc_steps=get('mcmc_steps', 1),
                   mh_correction=config.get_bool('core',
                                                 'splitting',
                                                 'mh_correction',
                                                 default=True),
                   initial_conditions=get('initial_conditions', 20))


class SplittingProblem():
    """A forward path law with a reaction coordinate and a kernel.

    Attributes:
        target: Level of the rare event {Ψ >= target}.
    """

    target: int = 0

    def simulate(self, rng: np.random.Generator) -> Any:
        """Draw a path from the unconditional dynamics."""
        raise NotImplementedError()

    def psi(self, path: Any) -> int:
        """The reaction coordinate."""
        raise NotImplementedError()

    def kernel(self, path: Any, level: int, rng: np.random.Generator) -> Any:
        """Move a path while keeping Ψ above `level`."""
        raise NotImplementedError()


class AtmProblem(SplittingProblem):
    """Queue overflow before the queue empties, Ψ the maximal length."""

    def __init__(self, params: rsatm.AtmParams,
                 mh_correction: bool = True) -> None:
        self.params: rsatm.AtmParams = params
        self.mh_correction: bool = mh_correction
        self.target = params.b

    def simulate(self, rng: np.random.Generator) -> list[rsatm.AtmState]:
        return kernels.simulate_atm_path(self.params, rng)

    def psi(self, path: list[rsatm.AtmState]) -> int:
        return kernels.psi_atm(path)

    def kernel(self, path: list[rsatm.AtmState], level: int,
               rng: np.random.Generator) -> list[rsatm.AtmState]:
        return kernels.mcmc_kernel_atm(path,
                                       level,
                                       rng,
                                       self.params,
                                       mh_correction=self.mh_correction,
                                       strict=True)


class DiffusionProblem(SplittingProblem):
    """Containment of Euler paths from a fixed start, Ψ the steps inside."""

    def __init__(self,
                 params: rshyp.StripParams,
                 start: float,
                 mh_correction: bool = True) -> None:
        self.params: rshyp.StripParams = params
        self.start: float = start
        self.mh_correction: bool = mh_correction
        self.target = params.steps

    def simulate(self, rng: np.random.Generator) -> np.ndarray:
        return kernels.simulate_diffusion_path(self.params, self.start, rng)

    def psi(self, path: np.ndarray) -> int:
        return kernels.psi_diffusion(path, self.params)

    def kernel(self, path: np.ndarray, level: int,
               rng: np.random.Generator) -> np.ndarray:
        return kernels.mcmc_kernel_diffusion(path,
                                             level,
                                             rng,
                                             self.params,
                                             mh_correction=self.mh_correction,
                                             strict=True)


@dataclasses.dataclass
class SplittingResult:
    """Outcome of one splitting run.

    Attributes:
        summary: Estimate of P(Ψ >= target) and diagnostics; the ESS
            trace holds (level, survivors) pairs.
        paths: The final paths.
        scores: Their reaction coordinates.
        log_survival: Logarithm of the product of survival fractions.
        iterations: Number of iterations.
    """

    summary: rsparticles.EstimateSummary
    paths: list[Any]
    scores: np.ndarray
    log_survival: float
    iterations: int


def ams_std_error(estimate: float, n: int) -> float:
    """Asymptotic standard error p sqrt(-log p / N) of the estimator."""
    if not 0 < estimate < 1:
        return 0.0
    return estimate * math.sqrt(-math.log(estimate) / n)


def run_ams(problem: SplittingProblem,
            config: SplittingConfig,
            rng: np.random.Generator,
            sink: Optional[eventsink.EventSink] = None) -> SplittingResult:
    """Estimate P(Ψ >= problem.target) by adaptive multilevel splitting.

    Args:
        problem: Path law, reaction coordinate and kernel.
        config: The tuning.
        rng: The generator.
        sink: Receives `ams_level` (iteration, level, killed).

    Returns:
        The estimate with the final paths.

    Raises:
        StagnationError: The target was not reached within
            `config.max_iterations`.
    """

    if sink is None:
        sink = eventsink.EventSink()
    start: float = time.perf_counter()

    paths: list[Any] = [problem.simulate(rng) for _ in range(config.n)]
    scores: np.ndarray = np.array([problem.psi(path) for path in paths],
                                  dtype=int)
    log_survival: float = 0.0
    iterations: int = 0
    trace: list[tuple[int, float]] = []

    while True:
        level: int = int(
            np.partition(scores, config.kill_count - 1)[config.kill_count -
                                                        1])
        if level >= problem.target:
            break
        iterations += 1
        if iterations > config.max_iterations:
            logger.error('splitting stuck at level %s of %s', level,
                         problem.target)
            raise errors.StagnationError(
                f'Level {problem.target} not reached within '
                f'{config.max_iterations} iterations (stuck at {level}).')

        killed: np.ndarray = np.flatnonzero(scores <= level)
        survivors: np.ndarray = np.flatnonzero(scores > level)
        sink.emit('ams_level', iterations, level, killed.size)
        if survivors.size == 0:
            log_survival = -math.inf
            logger.debug('all paths discarded at level %s', level)
            break
        log_survival += math.log1p(-killed.size / config.n)
        trace.append((level, float(survivors.size)))

        for index in killed:
            path: Any = paths[int(survivors[rng.integers(survivors.size)])]
            for _ in range(config.mcmc_steps):
                path = problem.kernel(path, level, rng)
            paths[index] = path
            scores[index] = problem.psi(path)

    fraction: float = float(np.mean(scores >= problem.target))
    estimate: float = math.exp(log_survival) * fraction
    elapsed: float = time.perf_counter() - start
    logger.debug('splitting: %s iterations, estimate %s, %.2fs', iterations,
                 estimate, elapsed)
    summary: rsparticles.EstimateSummary = rsparticles.EstimateSummary(
        estimate=estimate,
        std_error=ams_std_error(estimate, config.n),
        ess_trace=trace,
        resample_events=iterations,
        elapsed=elapsed,
        log_estimate=(log_survival + math.log(fraction)
                      if estimate > 0 else -math.inf))
    return SplittingResult(summary=summary,
                           paths=paths,
                           scores=scores,
                           log_survival=log_survival,
                           iterations=iterations)


def ams_atm(params: rsatm.AtmParams,
            config: SplittingConfig,
            rng: np.random.Generator,
            sink: Optional[eventsink.EventSink] = None
           ) -> list[rsparticles.EstimateSummary]:
    """Overflow probabilities with j = k at overflow, for every k.

    One splitting run targets the overflow; the probability for k is
    the survival product times the fraction of paths overflowing with
    j = k.

    Returns:
        One summary per k in 0..K.
    """

    result: SplittingResult = run_ams(
        AtmProblem(params, config.mh_correction), config, rng, sink)
    counts: np.ndarray = np.zeros(params.K + 1)
    for path, score in zip(result.paths, result.scores):
        if score >= params.b:
            counts[path[-1].j] += 1

    summaries: list[rsparticles.EstimateSummary] = []
    for count in counts:
        estimate: float = math.exp(result.log_survival) * count / config.n
        summaries.append(
            dataclasses.replace(
                result.summary,
                estimate=estimate,
                std_error=ams_std_error(estimate, config.n),
                log_estimate=(result.log_survival +
                              math.log(count / config.n)
                              if estimate > 0 else -math.inf)))
    return summaries


def ams_diffusion(params: rshyp.StripParams,
                  config: SplittingConfig,
                  rng: np.random.Generator,
                  sink: Optional[eventsink.EventSink] = None
                 ) -> rsparticles.EstimateSummary:
    """Containment probability averaged over the entrance law.

    Initial positions x0 are drawn uniformly on (l0, u0); each gets its
    own splitting run estimating p(x0). The estimate is
    (u0 - l0) mean(π(x0) p(x0)), a naive Monte Carlo average over the
    entrance law.
    """

    start: float = time.perf_counter()
    positions: np.ndarray = rng.uniform(params.l0,
                                        params.u0,
                                        size=config.initial_conditions)
    values: np.ndarray = np.empty(positions.size)
    iterations: int = 0
    trace: list[tuple[int, float]] = []
    for index, position in enumerate(positions):
        result: SplittingResult = run_ams(
            DiffusionProblem(params, float(position), config.mh_correction),
            config, rng, sink)
        values[index] = (float(rshyp.stationary_density(position)) *
                         result.summary.estimate)
        iterations += result.iterations
        trace.extend(result.summary.ess_trace)

    width: float = params.u0 - params.l0
    estimate: float = width * float(values.mean())
    std_error: float = (width * float(values.std(ddof=1)) /
                        math.sqrt(values.size) if values.size > 1 else 0.0)
    return rsparticles.EstimateSummary(
        estimate=estimate,
        std_error=std_error,
        ess_trace=trace,
        resample_events=iterations,
        elapsed=time.perf_counter() - start,
        log_estimate=math.log(estimate) if estimate > 0 else -math.inf)
