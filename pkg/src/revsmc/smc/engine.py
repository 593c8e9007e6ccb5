#!/usr/bin/env python3
"""Reverse-time multilevel sequential Monte Carlo.

Particles start in the target set, drawn from the terminal law, and
walk backwards with the model's reverse proposal until they reach the
initial set. Levels count down; whenever every live particle has
crossed the next level the effective sample size is checked and the
ensemble is resampled if it fell below the threshold. A resampled
ensemble carries the mean weight on every particle, so weighted
averages stay unbiased for the unconditional functional.
"""

import math
import time

from typing import Any, Callable, Optional

import numpy as np
from scipy import special

from revsmc import errors
from revsmc import eventsink
from revsmc.rslogging import rslogging
from revsmc.smc import model as rsmodel
from revsmc.smc import particles as rsparticles

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

TrajectoryFunction = Callable[[rsparticles.Trajectory], float]


def ess(weights: Any) -> float:
    """Return the effective sample size (Σw)² / Σw².

    Args:
        weights: Nonnegative weights.

    Raises:
        DegeneracyError: All weights are zero.
    """

    values: np.ndarray = np.asarray(weights, dtype=float)
    top: float = float(values.max()) if values.size else 0.0
    if top <= 0:
        raise errors.DegeneracyError('All particle weights are zero.')
    scaled: np.ndarray = values / top
    return float(scaled.sum()**2 / np.square(scaled).sum())


def ess_log(log_weights: np.ndarray) -> float:
    """Return the effective sample size of weights given as logarithms.

    Raises:
        DegeneracyError: All weights are zero.
    """

    if log_weights.size == 0 or not np.isfinite(log_weights).any():
        raise errors.DegeneracyError('All particle weights are zero.')
    return float(
        np.exp(2 * special.logsumexp(log_weights) -
               special.logsumexp(2 * log_weights)))


def resample_indices(weights: Any,
                     rng: np.random.Generator,
                     scheme: str = 'multinomial') -> np.ndarray:
    """Draw N ancestor indices with probability proportional to weight.

    Args:
        weights: Nonnegative weights, not necessarily normalised.
        rng: The generator reserved for resampling.
        scheme: `multinomial` or `systematic`.

    Returns:
        An integer array of length N.

    Raises:
        DegeneracyError: All weights are zero.
        ValueError: Unknown scheme.
    """

    values: np.ndarray = np.asarray(weights, dtype=float)
    total: float = float(values.sum())
    if not total > 0:
        raise errors.DegeneracyError('Cannot resample all-zero weights.')
    count: int = values.size
    cumulative: np.ndarray = np.cumsum(values / total)
    cumulative[-1] = 1.0
    if scheme == 'multinomial':
        uniforms: np.ndarray = rng.random(count)
    elif scheme == 'systematic':
        uniforms = (rng.random() + np.arange(count)) / count
    else:
        raise ValueError(f'Unknown resampling scheme "{scheme}".')
    # side='right' never selects an entry of weight 0
    return np.minimum(np.searchsorted(cumulative, uniforms, side='right'),
                      count - 1)


def resample(ensemble: rsparticles.Ensemble,
             scheme: str = 'multinomial') -> rsparticles.Ensemble:
    """Replace the ensemble by offspring of weighted ancestors.

    Every offspring copies trajectory, level and status of its ancestor
    and carries the mean weight of the ensemble before resampling.

    Args:
        ensemble: The ensemble, modified in place.
        scheme: `multinomial` or `systematic`.

    Returns:
        The same ensemble.

    Raises:
        DegeneracyError: All weights are zero.
    """

    log_weights: np.ndarray = ensemble.log_weights()
    if not np.isfinite(log_weights).any():
        raise errors.DegeneracyError('Cannot resample all-zero weights.')
    top: float = float(log_weights.max())
    indices: np.ndarray = resample_indices(np.exp(log_weights - top),
                                           ensemble.resample_rng, scheme)
    log_mean: float = float(special.logsumexp(log_weights) -
                            math.log(ensemble.size))

    ensemble.particles = [
        ensemble.particles[ancestor].offspring(log_mean, int(ancestor))
        for ancestor in indices
    ]
    ensemble.ancestors = indices
    ensemble.log_mean_weight = log_mean
    ensemble.resample_events += 1
    return ensemble


def resample_multinomial(ensemble: rsparticles.Ensemble,
                         rng: Optional[np.random.Generator] = None
                        ) -> rsparticles.Ensemble:
    """Multinomial resampling, see `resample()`.

    Args:
        ensemble: The ensemble, modified in place.
        rng: Replaces the ensemble's resampling generator if given.
    """

    if rng is not None:
        ensemble.resample_rng = rng
    return resample(ensemble, 'multinomial')


def make_streams(
        seed: int,
        count: int) -> tuple[list[np.random.Generator], np.random.Generator]:
    """Return one counter-based generator per particle plus one spare.

    The streams only depend on `seed` and the particle index, so the
    result of a run does not depend on the order particles are
    propagated in.

    Args:
        seed: The master seed.
        count: The number of particles.

    Returns:
        The per-particle generators and the generator for resampling.
    """

    children: list[np.random.SeedSequence] = np.random.SeedSequence(
        seed).spawn(count + 1)
    streams: list[np.random.Generator] = [
        np.random.Generator(np.random.Philox(child))
        for child in children[:count]
    ]
    return streams, np.random.Generator(np.random.Philox(children[count]))


def check_first_hitting(model: rsmodel.Model,
                        trajectory: rsparticles.Trajectory,
                        complete: bool = True) -> bool:
    """Check the first-hitting / last-exit convention.

    Only index 0 may lie in the target set and only the final state in
    the initial set.

    Args:
        model: The model deciding set membership.
        trajectory: The reverse trajectory.
        complete: Require the final state to lie in the initial set.

    Returns:
        `True` if the convention holds.
    """

    states: list[Any] = trajectory.states
    for index, state in enumerate(states):
        if index > 0 and model.is_target(state):
            return False
        if index < len(states) - 1 and model.is_initial(state):
            return False
    return not complete or model.is_initial(states[-1])


def propagate(model: rsmodel.Model, particle: rsparticles.Particle,
              rng: np.random.Generator, level: int,
              config: rsparticles.EngineConfig, sink: eventsink.EventSink,
              index: int) -> None:
    """Propagate a particle until it crosses `level` or reaches I.

    Args:
        model: The model.
        particle: The particle, modified in place.
        rng: The particle's generator.
        level: Stop as soon as the particle's level is <= this.
        config: Step cap and validation.
        sink: Receives `particle_zeroed`.
        index: The particle's index, for diagnostics.

    Raises:
        InvariantError: With `config.validate` a proposal entered T.
    """

    trajectory: rsparticles.Trajectory = particle.trajectory
    while not particle.done and particle.level_index > level:
        if len(trajectory) > config.step_cap:
            particle.zero('step_cap')
            logger.warning('particle %s exceeded the step cap of %s', index,
                           config.step_cap)
            sink.emit('particle_zeroed', index, 'step_cap')
            return
        try:
            state, increment = model.reverse_propose(trajectory.last, rng)
        except errors.EmptySupportError:
            particle.zero('empty_support')
            logger.debug('particle %s has no admissible predecessor', index)
            sink.emit('particle_zeroed', index, 'empty_support')
            return
        if not increment > 0:
            particle.zero('zero_increment')
            sink.emit('particle_zeroed', index, 'zero_increment')
            return
        if config.validate and model.is_target(state):
            raise errors.InvariantError(
                f'Particle {index} proposed a predecessor in the target set.')
        trajectory.append(state)
        particle.log_weight += math.log(increment)
        particle.level_index = model.level_of(particle)
        if model.is_initial(state):
            particle.done = True


def run_reverse_smc(
    model: rsmodel.Model,
    n: int,
    seed: int,
    config: Optional[rsparticles.EngineConfig] = None,
    sink: Optional[eventsink.EventSink] = None
) -> tuple[rsparticles.Ensemble, rsparticles.EstimateSummary]:
    """Run the reverse-time multilevel SMC sampler.

    Args:
        model: The model to sample reverse trajectories of.
        n: The number of particles N.
        seed: The master seed.
        config: Engine tuning, defaults to `EngineConfig()`.
        sink: Receives `level`, `resample`, `particle_zeroed` and
            `degenerate` events.

    Returns:
        The properly weighted ensemble (entrance law included) and the
        summary of the unconditional estimate of f ≡ 1.

    Raises:
        ValueError: `n` < 1.
        DegeneracyError: Every particle weight is zero.
        InvariantError: With `config.validate`, a trajectory violates
            the first-hitting convention.
    """

    if n < 1:
        raise ValueError('At least one particle is needed.')
    if config is None:
        config = rsparticles.EngineConfig()
    if sink is None:
        sink = eventsink.EventSink()

    start: float = time.perf_counter()
    streams, resample_rng = make_streams(seed, n)

    particle_list: list[rsparticles.Particle] = []
    for index in range(n):
        state: Any = model.terminal_sample(streams[index])
        log_weight: float = -math.log(model.terminal_density(state))
        particle: rsparticles.Particle = rsparticles.Particle(
            trajectory=rsparticles.Trajectory([state]),
            log_weight=log_weight,
            ancestor=index,
            anchor_log_weight=log_weight,
            anchor_index=0)
        particle.level_index = model.level_of(particle)
        particle.done = model.is_initial(state)
        particle_list.append(particle)

    ensemble: rsparticles.Ensemble = rsparticles.Ensemble(
        particles=particle_list,
        rng_streams=streams,
        resample_rng=resample_rng)

    live: list[int] = ensemble.live()
    while live:
        barrier: int = max(ensemble.particles[index].level_index
                           for index in live)
        try:
            ess_value: float = ess_log(ensemble.log_weights())
        except errors.DegeneracyError:
            logger.error('all particles zeroed at level %s', barrier)
            sink.emit('degenerate', f'all weights zero at level {barrier}')
            raise
        ensemble.ess_trace.append((barrier, ess_value))
        sink.emit('level', barrier, ess_value)

        if ess_value < config.ess_threshold * n:
            resample(ensemble, config.resampling)
            logger.debug('resampled at level %s (ess %.1f)', barrier,
                         ess_value)
            sink.emit('resample', barrier, ess_value)

        for index in ensemble.live():
            propagate(model, ensemble.particles[index],
                      ensemble.rng_streams[index], barrier - 1, config, sink,
                      index)
        live = ensemble.live()

    for particle in ensemble.particles:
        if particle.zeroed:
            continue
        if config.validate and not check_first_hitting(
                model, particle.trajectory):
            raise errors.InvariantError(
                'A trajectory violates the first-hitting convention.')
        entrance: float = model.initial_density(particle.trajectory.last)
        particle.log_weight += (math.log(entrance)
                                if entrance > 0 else -math.inf)

    if not np.isfinite(ensemble.log_weights()).any():
        logger.error('all particles ended with weight zero')
        sink.emit('degenerate', 'all weights zero after the entrance law')
        raise errors.DegeneracyError(
            'Every particle ended with weight zero.')

    ensemble.elapsed = time.perf_counter() - start
    summary: rsparticles.EstimateSummary = estimate_unconditional(
        ensemble, lambda trajectory: 1.0)
    logger.info('%s: %s particles, %s resampling events, %s zeroed, %.2fs',
                model.name, n, ensemble.resample_events, summary.zeroed,
                ensemble.elapsed)
    return ensemble, summary


def log_path_weight(model: rsmodel.Model,
                    particle: rsparticles.Particle,
                    entrance: bool = True) -> float:
    """Recompute a particle's log weight from its stored trajectory.

    Starts at the weight installed at the last resampling event (or
    minus the log terminal density) and multiplies in forward density
    over proposal density for every later step.

    Args:
        model: The model.
        particle: A particle of a finished run.
        entrance: Include the entrance law of the final state.

    Returns:
        The recomputed log weight.
    """

    states: list[Any] = particle.trajectory.states
    log_weight: float = particle.anchor_log_weight
    for index in range(particle.anchor_index + 1, len(states)):
        log_weight += model.log_increment(states[index - 1], states[index])
    if entrance:
        density: float = model.initial_density(states[-1])
        log_weight += math.log(density) if density > 0 else -math.inf
    return log_weight


def _summary(ensemble: rsparticles.Ensemble, estimate: float,
             std_error: float,
             log_estimate: float) -> rsparticles.EstimateSummary:
    return rsparticles.EstimateSummary(
        estimate=estimate,
        std_error=std_error,
        ess_trace=list(ensemble.ess_trace),
        resample_events=ensemble.resample_events,
        elapsed=ensemble.elapsed,
        log_estimate=log_estimate,
        zeroed=ensemble.zeroed_count())


def _values(ensemble: rsparticles.Ensemble,
            f: TrajectoryFunction) -> np.ndarray:
    return np.fromiter((f(particle.trajectory)
                        for particle in ensemble.particles),
                       dtype=float,
                       count=ensemble.size)


def estimate_unconditional(
        ensemble: rsparticles.Ensemble,
        f: TrajectoryFunction) -> rsparticles.EstimateSummary:
    """Estimate E_μ[f(X) ; τ_T < τ_I] as N⁻¹ Σ f(path_j) w_j.

    The estimator is unbiased. The standard error is the sample
    standard deviation of f·w over √N.

    Args:
        ensemble: The ensemble of a finished run.
        f: Function of a (reverse) trajectory.
    """

    log_weights: np.ndarray = ensemble.log_weights()
    values: np.ndarray = _values(ensemble, f)
    count: int = ensemble.size
    if not np.isfinite(log_weights).any():
        return _summary(ensemble, 0.0, 0.0, -math.inf)

    top: float = float(log_weights.max())
    scaled: np.ndarray = np.exp(log_weights - top) * values
    mean: float = float(scaled.mean())
    spread: float = float(scaled.std(ddof=1)) if count > 1 else 0.0
    scale: float = math.exp(top)
    log_estimate: float = top + math.log(mean) if mean > 0 else -math.inf
    return _summary(ensemble, scale * mean, scale * spread / math.sqrt(count),
                    log_estimate)


def normalized_weights(ensemble: rsparticles.Ensemble) -> np.ndarray:
    """Return the weights scaled to sum to one.

    Raises:
        DegeneracyError: The total weight is zero.
    """

    log_weights: np.ndarray = ensemble.log_weights()
    if not np.isfinite(log_weights).any():
        raise errors.DegeneracyError('The total particle weight is zero.')
    return np.exp(log_weights - special.logsumexp(log_weights))


def estimate_conditional(
        ensemble: rsparticles.Ensemble,
        f: TrajectoryFunction) -> rsparticles.EstimateSummary:
    """Estimate E_μ[f(X) | τ_T < τ_I] by the self-normalised ratio.

    Σ f(path_j) w_j / Σ w_j is consistent but not unbiased. The
    standard error follows from the delta method.

    Args:
        ensemble: The ensemble of a finished run.
        f: Function of a (reverse) trajectory.

    Raises:
        DegeneracyError: The total weight is zero.
    """

    weights: np.ndarray = normalized_weights(ensemble)
    values: np.ndarray = _values(ensemble, f)
    ratio: float = float(weights @ values)
    std_error: float = float(
        math.sqrt(np.sum(np.square(weights * (values - ratio)))))
    log_estimate: float = math.log(ratio) if ratio > 0 else -math.inf
    return _summary(ensemble, ratio, std_error, log_estimate)
