#!/usr/bin/env python3
"""One runner per experiment id.

A runner computes every condition of one replicate and returns its
rows. Failures of a model (degenerate weights, stagnating splitting,
an epidemic that never gets detected, ...) end up as flagged rows;
configuration errors are raised.
"""

import dataclasses
import time

from typing import Callable, Optional

import numpy as np

from revsmc import config as rsconfig
from revsmc import errors
from revsmc import eventsink
from revsmc.experiments import experiment as rsexperiment
from revsmc.models.atm import atm as rsatm
from revsmc.models.hyperbolic import hyperbolic as rshyp
from revsmc.models.sis import network as rsnetwork
from revsmc.models.sis import sis as rssis
from revsmc.rslogging import rslogging
from revsmc.smc import engine
from revsmc.smc import particles as rsparticles
from revsmc.splitting import ams

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

ExperimentConfig = rsexperiment.ExperimentConfig
ResultRow = rsexperiment.ResultRow
Runner = Callable[[ExperimentConfig, int, int, eventsink.EventSink],
                  list[ResultRow]]

# failures that flag a row instead of aborting the run
MODEL_FAILURES: tuple[type[Exception], ...] = (errors.DegeneracyError,
                                               errors.StagnationError,
                                               errors.SimulationError,
                                               errors.RejectionError,
                                               errors.QuadratureError,
                                               errors.ConvergenceError,
                                               errors.SingularSystemError)


def _generator(seed: int, *parts: object) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(rsexperiment.derive_seed(seed, *parts)))


def run_atm(config: ExperimentConfig, replicate: int, seed: int,
            sink: eventsink.EventSink) -> list[ResultRow]:
    """Reverse-time SMC for every terminal on-count k in 0..K."""

    rows: list[ResultRow] = []
    for k in range(config.atm.K + 1):
        condition: str = f'k={k}'
        model: rsatm.Atm = rsatm.Atm(config.atm, k)
        if not model.candidates(rsatm.AtmState(config.atm.b, k)):
            # (b, k) cannot be entered, e.g. k = 0
            rows.append(
                ResultRow(config.experiment,
                          replicate,
                          condition,
                          0.0,
                          0.0,
                          seed=seed,
                          detail='unreachable terminal state'))
            continue
        try:
            _, summary = engine.run_reverse_smc(
                model, config.n, rsexperiment.derive_seed(seed, k),
                config.engine, sink)
        except MODEL_FAILURES as e:
            rows.append(
                ResultRow.failed(config.experiment, replicate, condition, seed,
                                 e))
            continue
        rows.append(
            ResultRow.from_summary(config.experiment, replicate, condition,
                                   summary, seed))
    return rows


def run_atm_exact(config: ExperimentConfig, replicate: int, seed: int,
                  sink: eventsink.EventSink) -> list[ResultRow]:
    """The linear-system oracle for every k."""

    start: float = time.perf_counter()
    try:
        probabilities: np.ndarray = rsatm.exact_hitting_probabilities(
            config.atm)
    except (ValueError, errors.SingularSystemError) as e:
        return [
            ResultRow.failed(config.experiment, replicate, 'all', seed, e)
        ]
    elapsed: float = time.perf_counter() - start
    return [
        ResultRow(config.experiment,
                  replicate,
                  f'k={k}',
                  float(probability),
                  0.0,
                  wall_seconds=elapsed,
                  seed=seed) for k, probability in enumerate(probabilities)
    ]


def run_atm_splitting(config: ExperimentConfig, replicate: int, seed: int,
                      sink: eventsink.EventSink) -> list[ResultRow]:
    """Adaptive multilevel splitting for every k from one run."""

    try:
        summaries: list[rsparticles.EstimateSummary] = ams.ams_atm(
            config.atm, config.splitting, _generator(seed, 'splitting'), sink)
    except MODEL_FAILURES as e:
        return [
            ResultRow.failed(config.experiment, replicate, f'k={k}', seed, e)
            for k in range(config.atm.K + 1)
        ]
    return [
        ResultRow.from_summary(config.experiment, replicate, f'k={k}',
                               summary, seed)
        for k, summary in enumerate(summaries)
    ]


def _interval_condition(lower: float, upper: float) -> str:
    return f'({lower:g}, {upper:g})'


def _hyperbolic_row(config: ExperimentConfig, replicate: int, seed: int,
                    params: rshyp.StripParams,
                    sink: eventsink.EventSink) -> ResultRow:
    condition: str = _interval_condition(params.lt, params.ut)
    try:
        _, summary = engine.run_reverse_smc(
            rshyp.Hyperbolic(params), config.n,
            rsexperiment.derive_seed(seed, condition), config.engine, sink)
    except MODEL_FAILURES as e:
        return ResultRow.failed(config.experiment, replicate, condition, seed,
                                e)
    return ResultRow.from_summary(config.experiment, replicate, condition,
                                  summary, seed)


def run_hyperbolic(config: ExperimentConfig, replicate: int, seed: int,
                   sink: eventsink.EventSink) -> list[ResultRow]:
    """Reverse-time SMC for the configured strip."""
    return [_hyperbolic_row(config, replicate, seed, config.strip, sink)]


def run_hyperbolic_sweep(config: ExperimentConfig, replicate: int, seed: int,
                         sink: eventsink.EventSink) -> list[ResultRow]:
    """Reverse-time SMC for every terminal interval.

    Raises:
        ConfigError: A terminal interval is invalid.
    """

    intervals: tuple[tuple[float, float], ...] = (
        config.terminal_intervals or ((config.strip.lt, config.strip.ut), ))
    return [
        _hyperbolic_row(
            config, replicate, seed,
            dataclasses.replace(config.strip, lt=lower, ut=upper), sink)
        for lower, upper in intervals
    ]


def run_hyperbolic_oracle(config: ExperimentConfig, replicate: int, seed: int,
                          sink: eventsink.EventSink) -> list[ResultRow]:
    """Reverse-time SMC next to naive forward Monte Carlo.

    Rows `smc` and `oracle` estimate the same containment probability.
    """

    interval: str = _interval_condition(config.strip.lt, config.strip.ut)
    smc: ResultRow = dataclasses.replace(
        _hyperbolic_row(config, replicate, seed, config.strip, sink),
        condition='smc')
    if not smc.degenerate:
        smc.detail = f'strip={interval}'

    start: float = time.perf_counter()
    try:
        estimate, std_error = rshyp.containment_oracle(
            config.strip, config.oracle_paths, _generator(seed, 'oracle'))
    except MODEL_FAILURES as e:
        return [
            smc,
            ResultRow.failed(config.experiment, replicate, 'oracle', seed, e)
        ]
    return [
        smc,
        ResultRow(config.experiment,
                  replicate,
                  'oracle',
                  estimate,
                  std_error,
                  wall_seconds=time.perf_counter() - start,
                  seed=seed,
                  detail=f'strip={interval};paths={config.oracle_paths}')
    ]


def run_hyperbolic_splitting(config: ExperimentConfig, replicate: int,
                             seed: int,
                             sink: eventsink.EventSink) -> list[ResultRow]:
    """Adaptive multilevel splitting averaged over initial positions."""

    condition: str = _interval_condition(config.strip.lt, config.strip.ut)
    try:
        summary: rsparticles.EstimateSummary = ams.ams_diffusion(
            config.strip, config.splitting, _generator(seed, 'splitting'),
            sink)
    except MODEL_FAILURES as e:
        return [
            ResultRow.failed(config.experiment, replicate, condition, seed, e)
        ]
    return [
        ResultRow.from_summary(
            config.experiment, replicate, condition, summary, seed,
            f'initial_conditions={config.splitting.initial_conditions}')
    ]


@dataclasses.dataclass
class SourceInference:
    """Likelihood surface of one observed epidemic.

    Attributes:
        net: The network.
        observed: The observed configuration.
        source: The true source if the epidemic was simulated.
        surface: Posterior probability of every vertex being the source.
        std_error: Standard error of every entry.
        summary: The engine's summary.
    """

    net: rsnetwork.Network
    observed: rssis.SisState
    source: Optional[int]
    surface: np.ndarray
    std_error: np.ndarray
    summary: rsparticles.EstimateSummary

    def describe(self) -> str:
        """Observed size, true source, argmax and their distance."""

        labels: list[str] = self.net.labels
        argmax: list[int] = rssis.surface_argmax(self.surface)
        parts: list[str] = [f'size={len(self.observed)}']
        if self.source is not None:
            parts.append(f'source={labels[self.source]}')
        parts.append('argmax=' + '/'.join(labels[v] for v in argmax))
        if self.source is not None and self.net.is_grid:
            parts.append('distance=' + str(
                min(self.net.distance(self.source, v) for v in argmax)))
        parts.append(f'probability={self.summary.estimate:.6g}')
        return ';'.join(parts)


def infer_source(config: ExperimentConfig, seed: int,
                 sink: eventsink.EventSink) -> SourceInference:
    """Observe (or load) an epidemic and run the reverse-time sampler.

    Raises:
        ConfigError: The network or observation file is invalid.
        SimulationError: No epidemic got detected.
        DegeneracyError: All particle weights are zero.
    """

    net: rsnetwork.Network = rssis.network_from_config_values(
        config.network_file, config.sis)
    source: Optional[int] = None
    if config.observed_file:
        observed: rssis.SisState = rssis.observed_from_file(
            config.observed_file, net)
    else:
        observed, source = rssis.simulate_forward_epidemic(
            config.sis, net, _generator(seed, 'epidemic'), config.growth_bias)
    try:
        model: rssis.Sis = rssis.Sis(config.sis, net, observed)
    except ValueError as e:
        raise rsconfig.ConfigError(f'models.sis.observed_file: {e}') from e
    ensemble, summary = engine.run_reverse_smc(
        model, config.n, rsexperiment.derive_seed(seed, 'smc'), config.engine,
        sink)
    surface, std_error = rssis.likelihood_surface(ensemble, net.size)
    return SourceInference(net, observed, source, surface, std_error, summary)


def run_sis(config: ExperimentConfig, replicate: int, seed: int,
            sink: eventsink.EventSink) -> list[ResultRow]:
    """The maximum of the likelihood surface and where it lies."""

    try:
        inference: SourceInference = infer_source(config, seed, sink)
    except MODEL_FAILURES as e:
        return [ResultRow.failed(config.experiment, replicate, 'ml', seed, e)]
    top: int = rssis.surface_argmax(inference.surface)[0]
    return [
        dataclasses.replace(
            ResultRow.from_summary(config.experiment, replicate, 'ml',
                                   inference.summary, seed,
                                   inference.describe()),
            estimate=float(inference.surface[top]),
            std_error=float(inference.std_error[top]))
    ]


def run_sis_surface(config: ExperimentConfig, replicate: int, seed: int,
                    sink: eventsink.EventSink) -> list[ResultRow]:
    """The whole likelihood surface, one row per vertex."""

    try:
        inference: SourceInference = infer_source(config, seed, sink)
    except MODEL_FAILURES as e:
        return [
            ResultRow.failed(config.experiment, replicate, 'all', seed, e)
        ]
    detail: str = inference.describe()
    return [
        dataclasses.replace(
            ResultRow.from_summary(config.experiment, replicate,
                                   inference.net.labels[vertex],
                                   inference.summary, seed, detail),
            estimate=float(inference.surface[vertex]),
            std_error=float(inference.std_error[vertex]))
        for vertex in range(inference.net.size)
    ]


RUNNERS: dict[str, Runner] = {
    'atm': run_atm,
    'atm-large': run_atm,
    'atm-exact': run_atm_exact,
    'atm-splitting': run_atm_splitting,
    'hyperbolic': run_hyperbolic,
    'hyperbolic-sweep': run_hyperbolic_sweep,
    'hyperbolic-oracle': run_hyperbolic_oracle,
    'hyperbolic-splitting': run_hyperbolic_splitting,
    'sis': run_sis,
    'sis-surface': run_sis_surface,
}


def run_replicate(config: ExperimentConfig,
                  replicate: int,
                  sink: Optional[eventsink.EventSink] = None
                 ) -> list[ResultRow]:
    """Run one replicate of the configured experiment.

    Args:
        config: The experiment.
        replicate: The replicate index r; its seed is
            seed XOR hash(r, experiment id).
        sink: Receives the diagnostics of the engine / baseline.

    Returns:
        The rows of every condition.
    """

    if sink is None:
        sink = eventsink.EventSink()
    seed: int = rsexperiment.replicate_seed(config.seed, replicate,
                                            config.experiment)
    logger.debug('replicate %s of %s with seed %s', replicate,
                 config.experiment, seed)
    rows: list[ResultRow] = RUNNERS[config.experiment](config, replicate,
                                                       seed, sink)
    for row in rows:
        if row.degenerate:
            logger.warning('replicate %s, %s: %s', replicate, row.condition,
                           row.detail)
    return rows
