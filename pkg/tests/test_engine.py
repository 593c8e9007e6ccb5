#!/usr/bin/env python3
"""Tests for revsmc.smc.engine."""

import math
import unittest

import numpy as np
from scipy import stats

from revsmc import errors
from revsmc import eventsink
from revsmc.smc import engine
from revsmc.smc import model as rsmodel
from revsmc.smc import particles as rsparticles


class RandomWalk(rsmodel.Model):
    """Walk on 0..top stepping up with probability `up`.

    The chain enters at 0 (I), is pushed to 1 and is stopped at `top`
    (T). The probability of reaching `top` before returning to 0 is the
    gambler's ruin probability from 1.
    """

    name: str = 'walk'

    def __init__(self, top: int, up: float, down_proposal: float) -> None:
        self.top: int = top
        self.up: float = up
        self.down_proposal: float = down_proposal

    def exact(self) -> float:
        ratio: float = (1 - self.up) / self.up
        return (1 - ratio) / (1 - ratio**self.top)

    def forward_density(self, x: int, y: int) -> float:
        if x == 0:
            return 1.0 if y == 1 else 0.0
        if y == x + 1:
            return self.up
        if y == x - 1:
            return 1 - self.up
        return 0.0

    def proposal_density(self, y: int, x: int) -> float:
        if y == self.top:
            return 1.0 if x == y - 1 else 0.0
        if y + 1 >= self.top:
            return 1.0 if x == y - 1 else 0.0
        if x == y - 1:
            return self.down_proposal
        if x == y + 1:
            return 1 - self.down_proposal
        return 0.0

    def reverse_propose(self, y: int,
                        rng: np.random.Generator) -> tuple[int, float]:
        x: int = y - 1
        if y < self.top and y + 1 < self.top:
            if rng.random() >= self.down_proposal:
                x = y + 1
        return x, self.forward_density(x, y) / self.proposal_density(y, x)

    def is_initial(self, state: int) -> bool:
        return state == 0

    def is_target(self, state: int) -> bool:
        return state == self.top

    def initial_density(self, state: int) -> float:
        return 1.0 if state == 0 else 0.0

    def terminal_sample(self, rng: np.random.Generator) -> int:
        return self.top

    def terminal_density(self, state: int) -> float:
        return 1.0 if state == self.top else 0.0

    def level_of(self, particle: rsparticles.Particle) -> int:
        return min(particle.level_index, particle.trajectory.last)


class DeadEnd(RandomWalk):
    """Every reverse proposal fails."""

    def reverse_propose(self, y: int,
                        rng: np.random.Generator) -> tuple[int, float]:
        raise errors.EmptySupportError('No predecessor.')


class TestEss(unittest.TestCase):
    """Effective sample size."""

    def test_bounds(self):
        self.assertAlmostEqual(engine.ess([1.0, 1.0, 1.0, 1.0]), 4.0)
        self.assertAlmostEqual(engine.ess([0.0, 2.0, 0.0, 0.0]), 1.0)
        weights: np.ndarray = np.random.default_rng(3).random(50)
        value: float = engine.ess(weights)
        self.assertGreaterEqual(value, 1.0)
        self.assertLessEqual(value, 50.0)
        self.assertAlmostEqual(engine.ess_log(np.log(weights)), value)

    def test_all_zero(self):
        self.assertRaises(errors.DegeneracyError, engine.ess, [0.0, 0.0])
        self.assertRaises(errors.DegeneracyError, engine.ess_log,
                          np.full(3, -math.inf))


class TestResampling(unittest.TestCase):
    """Ancestor draws and the weights after resampling."""

    def _ensemble(self, log_weights: list[float]) -> rsparticles.Ensemble:
        streams, resample_rng = engine.make_streams(1, len(log_weights))
        return rsparticles.Ensemble(
            particles=[
                rsparticles.Particle(rsparticles.Trajectory([index]),
                                     log_weight,
                                     ancestor=index)
                for index, log_weight in enumerate(log_weights)
            ],
            rng_streams=streams,
            resample_rng=resample_rng)

    def test_unbiased_resampling(self):
        weights: np.ndarray = np.array([0.1, 0.2, 0.3, 0.4])
        g: np.ndarray = np.array([1.0, -2.0, 3.0, 0.5])
        before: float = float(np.mean(g * weights))
        mean_weight: float = float(weights.mean())
        draws: int = 100_000
        for scheme in ('multinomial', 'systematic'):
            with self.subTest(scheme=scheme):
                rng: np.random.Generator = np.random.default_rng(21)
                after: np.ndarray = np.fromiter(
                    (mean_weight * g[engine.resample_indices(
                        weights, rng, scheme)].mean()
                     for _ in range(draws)),
                    dtype=float,
                    count=draws)
                std_error: float = float(after.std(ddof=1) / math.sqrt(draws))
                self.assertGreater(std_error, 0)
                self.assertLess(abs(after.mean() - before), 3 * std_error)

    def test_forced_ancestor(self):
        ensemble: rsparticles.Ensemble = self._ensemble([-math.inf, 0.0])
        engine.resample_multinomial(ensemble, np.random.default_rng(4))
        np.testing.assert_array_equal(ensemble.ancestors, [1, 1])
        np.testing.assert_allclose(ensemble.weights(), [0.5, 0.5])
        for particle in ensemble.particles:
            self.assertEqual(particle.trajectory.states, [1])

    def test_single_particle_unchanged(self):
        ensemble: rsparticles.Ensemble = self._ensemble([math.log(0.25)])
        engine.resample_multinomial(ensemble)
        self.assertEqual(len(ensemble.particles), 1)
        self.assertEqual(ensemble.particles[0].trajectory.states, [0])
        self.assertEqual(ensemble.particles[0].ancestor, 0)
        self.assertAlmostEqual(ensemble.particles[0].weight, 0.25, places=12)

    def test_multinomial_frequencies(self):
        weights: np.ndarray = np.array([0.1, 0.2, 0.3, 0.4])
        rng: np.random.Generator = np.random.default_rng(11)
        draws: np.ndarray = np.concatenate([
            engine.resample_indices(weights, rng) for _ in range(25_000)
        ])
        counts: np.ndarray = np.bincount(draws, minlength=4)
        result = stats.chisquare(counts, weights * draws.size)
        self.assertGreater(result.pvalue, 1e-3)

    def test_systematic_counts(self):
        weights: np.ndarray = np.array([0.05, 0.15, 0.5, 0.3])
        indices: np.ndarray = engine.resample_indices(
            np.tile(weights, 25), np.random.default_rng(2), 'systematic')
        counts: np.ndarray = np.bincount(indices % 4, minlength=4)
        for count, weight in zip(counts, weights):
            self.assertLessEqual(abs(count - 100 * weight), 25)

    def test_zero_weight_never_drawn(self):
        indices: np.ndarray = engine.resample_indices(
            [0.0, 1.0, 0.0, 1.0], np.random.default_rng(5))
        self.assertTrue(np.all((indices == 1) | (indices == 3)))

    def test_unknown_scheme(self):
        self.assertRaises(ValueError, engine.resample_indices, [1.0],
                          np.random.default_rng(0), 'stratified')

    def test_equal_weights_after(self):
        streams, resample_rng = engine.make_streams(1, 5)
        ensemble: rsparticles.Ensemble = rsparticles.Ensemble(
            particles=[
                rsparticles.Particle(rsparticles.Trajectory([index]),
                                     math.log(index + 1.0),
                                     ancestor=index) for index in range(5)
            ],
            rng_streams=streams,
            resample_rng=resample_rng)
        engine.resample_multinomial(ensemble)
        self.assertEqual(ensemble.resample_events, 1)
        np.testing.assert_allclose(ensemble.weights(), np.full(5, 3.0))
        for particle, ancestor in zip(ensemble.particles, ensemble.ancestors):
            self.assertEqual(particle.trajectory.last, ancestor)
            self.assertEqual(particle.anchor_index, 0)

    def test_all_zero(self):
        streams, resample_rng = engine.make_streams(1, 2)
        ensemble: rsparticles.Ensemble = rsparticles.Ensemble(
            particles=[
                rsparticles.Particle(rsparticles.Trajectory([0]), -math.inf)
                for _ in range(2)
            ],
            rng_streams=streams,
            resample_rng=resample_rng)
        self.assertRaises(errors.DegeneracyError, engine.resample, ensemble)


class TestStreams(unittest.TestCase):
    """Per-particle generators."""

    def test_reproducible(self):
        first, _ = engine.make_streams(42, 3)
        second, _ = engine.make_streams(42, 3)
        for a, b in zip(first, second):
            self.assertEqual(a.random(), b.random())
        other, _ = engine.make_streams(43, 3)
        self.assertNotEqual(engine.make_streams(42, 3)[0][0].random(),
                            other[0].random())


class TestReverseSmc(unittest.TestCase):
    """Runs on a random walk with a known answer."""

    def setUp(self):
        self.model: RandomWalk = RandomWalk(top=6, up=0.3, down_proposal=0.7)

    def test_unbiased(self):
        _, summary = engine.run_reverse_smc(self.model, 2000, seed=7)
        self.assertGreater(summary.std_error, 0)
        self.assertLess(abs(summary.estimate - self.model.exact()),
                        3 * summary.std_error)

    def test_mean_over_seeds(self):
        estimates: list[float] = [
            engine.run_reverse_smc(self.model, 200, seed=seed)[1].estimate
            for seed in range(20)
        ]
        self.assertLess(
            abs(np.mean(estimates) - self.model.exact()) / self.model.exact(),
            0.1)

    def test_telescoping(self):
        ensemble, _ = engine.run_reverse_smc(self.model, 300, seed=3)
        for particle in ensemble.particles:
            if particle.zeroed:
                continue
            self.assertTrue(engine.check_first_hitting(self.model,
                                                       particle.trajectory))
            recomputed: float = engine.log_path_weight(self.model, particle)
            self.assertLessEqual(
                abs(recomputed - particle.log_weight),
                1e-10 * max(1.0, abs(particle.log_weight)))

    def test_resampling_events(self):
        sink: eventsink.RecordingSink = eventsink.RecordingSink()
        config: rsparticles.EngineConfig = rsparticles.EngineConfig(
            ess_threshold=1.0)
        ensemble, summary = engine.run_reverse_smc(self.model,
                                                   200,
                                                   seed=1,
                                                   config=config,
                                                   sink=sink)
        self.assertEqual(summary.resample_events,
                         len(sink.named('resample')))
        self.assertGreater(summary.resample_events, 0)
        levels: list[int] = [level for level, _ in summary.ess_trace]
        self.assertEqual(levels, sorted(levels, reverse=True))
        for _, value in summary.ess_trace:
            self.assertGreaterEqual(value, 1.0 - 1e-9)
            self.assertLessEqual(value, 200 + 1e-9)
        self.assertTrue(all(particle.done for particle in ensemble.particles))

    def test_reproducible(self):
        first = engine.run_reverse_smc(self.model, 100, seed=9)[1]
        second = engine.run_reverse_smc(self.model, 100, seed=9)[1]
        self.assertEqual(first.estimate, second.estimate)

    def test_degenerate(self):
        sink: eventsink.RecordingSink = eventsink.RecordingSink()
        self.assertRaises(errors.DegeneracyError, engine.run_reverse_smc,
                          DeadEnd(6, 0.3, 0.7), 10, 1, None, sink)
        self.assertEqual(len(sink.named('particle_zeroed')), 10)
        self.assertEqual(len(sink.named('degenerate')), 1)

    def test_step_cap(self):
        config: rsparticles.EngineConfig = rsparticles.EngineConfig(
            step_cap=2)
        self.assertRaises(errors.DegeneracyError, engine.run_reverse_smc,
                          self.model, 10, 1, config)

    def test_no_particles(self):
        self.assertRaises(ValueError, engine.run_reverse_smc, self.model, 0,
                          1)

    def test_conditional(self):
        ensemble, _ = engine.run_reverse_smc(self.model, 500, seed=4)
        weights: np.ndarray = engine.normalized_weights(ensemble)
        self.assertAlmostEqual(float(weights.sum()), 1.0, places=12)
        summary = engine.estimate_conditional(ensemble, lambda path: 1.0)
        self.assertAlmostEqual(summary.estimate, 1.0, places=12)


if __name__ == '__main__':
    unittest.main()
