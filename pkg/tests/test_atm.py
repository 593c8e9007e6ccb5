#!/usr/bin/env python3
"""Tests for revsmc.models.atm."""

import math
import unittest

import numpy as np

from revsmc import config as rsconfig
from revsmc import errors
from revsmc.models.atm import atm as rsatm
from revsmc.smc import engine
from revsmc.smc import particles as rsparticles


class TestAtmDynamics(unittest.TestCase):
    """Rates, jump probabilities and conditional sampling distributions."""

    def setUp(self):
        self.p: rsatm.AtmParams = rsatm.AtmParams(K=3, b=4)

    def test_rates(self):
        # arrival 0.5, service 10, on 2 * 1, off 1 * 3
        x: rsatm.AtmState = rsatm.AtmState(2, 1)
        self.assertAlmostEqual(rsatm.total_rate(x, self.p), 15.5)
        self.assertAlmostEqual(
            rsatm.forward_jump_prob(x, rsatm.AtmState(3, 1), self.p),
            0.5 / 15.5)
        self.assertAlmostEqual(
            rsatm.forward_jump_prob(x, rsatm.AtmState(1, 1), self.p),
            10 / 15.5)
        self.assertEqual(
            rsatm.forward_jump_prob(x, rsatm.AtmState(3, 2), self.p), 0.0)
        # empty queue with no active source can only switch one on
        self.assertEqual(rsatm.successors(rsatm.AtmState(0, 0), self.p),
                         [(rsatm.AtmState(0, 1), 1.0)])

    def test_target_absorbing(self):
        full: rsatm.AtmState = rsatm.AtmState(4, 2)
        self.assertEqual(rsatm.forward_jump_prob(full, full, self.p), 1.0)

    def test_jump_probabilities_sum(self):
        for x in self.p.states():
            total: float = sum(
                probability for _, probability in rsatm.successors(x, self.p))
            self.assertAlmostEqual(total, 1.0, places=12)

    def test_csd_normalised(self):
        for j in range(self.p.K + 1):
            self.assertAlmostEqual(
                sum(rsatm.csd_i(i, j, self.p) for i in range(self.p.b + 1)),
                1.0,
                places=12)
        for i in range(self.p.b + 1):
            self.assertAlmostEqual(
                sum(rsatm.csd_j(j, i, self.p) for j in range(self.p.K + 1)),
                1.0,
                places=12)

    def test_csd_i_geometric(self):
        # π̂_i(i + 1 | j) / π̂_i(i | j) = λ j / μ
        ratio: float = rsatm.csd_i(2, 3, self.p) / rsatm.csd_i(1, 3, self.p)
        self.assertAlmostEqual(ratio, 0.5 * 3 / 10, places=12)

    def test_entrance_law(self):
        self.assertAlmostEqual(
            sum(rsatm.mu_atm(j, self.p) for j in range(self.p.K + 1)), 1.0)
        self.assertAlmostEqual(rsatm.mu_atm(0, self.p), 0.75**3)

    def test_invalid(self):
        self.assertRaises(rsconfig.ConfigError, rsatm.AtmParams, K=0)
        self.assertRaises(rsconfig.ConfigError, rsatm.AtmParams, mu=0.0)
        self.assertRaises(ValueError, rsatm.Atm, self.p, 4)


class TestAtmProposal(unittest.TestCase):
    """The reverse proposal."""

    def setUp(self):
        self.p: rsatm.AtmParams = rsatm.AtmParams(K=3, b=4)
        self.model: rsatm.Atm = rsatm.Atm(self.p, 2)

    def test_normalised(self):
        for y in self.p.states():
            if y.i == 0:
                continue
            found = self.model.candidates(y)
            if not found:
                continue
            total: float = sum(
                self.model.proposal_density(y, x) for x, _, _ in found)
            self.assertLessEqual(abs(total - 1.0), 1e-12)

    def test_candidates_forward(self):
        for y in self.p.states():
            for x, _, forward in self.model.candidates(y):
                self.assertFalse(self.model.is_target(x))
                self.assertAlmostEqual(forward,
                                       rsatm.forward_jump_prob(x, y, self.p),
                                       places=12)

    def test_increment(self):
        rng: np.random.Generator = np.random.default_rng(8)
        y: rsatm.AtmState = rsatm.AtmState(2, 2)
        for _ in range(20):
            x, increment = self.model.reverse_propose(y, rng)
            self.assertAlmostEqual(
                math.log(increment), self.model.log_increment(y, x),
                places=10)

    def test_propose_independent_of_terminal(self):
        y: rsatm.AtmState = rsatm.AtmState(2, 2)
        first: np.random.Generator = np.random.default_rng(13)
        second: np.random.Generator = np.random.default_rng(13)
        for _ in range(20):
            x, increment = rsatm.reverse_propose_atm(y, self.p, first)
            self.assertEqual((x, increment),
                             self.model.reverse_propose(y, second))
        self.assertRaises(errors.EmptySupportError, rsatm.reverse_propose_atm,
                          rsatm.AtmState(4, 0), self.p,
                          np.random.default_rng(0))

    def test_no_predecessor(self):
        model: rsatm.Atm = rsatm.Atm(self.p, 0)
        self.assertEqual(model.candidates(rsatm.AtmState(4, 0)), [])
        self.assertRaises(errors.EmptySupportError, model.reverse_propose,
                          rsatm.AtmState(4, 0), np.random.default_rng(0))

    def test_level_is_running_minimum(self):
        particle: rsparticles.Particle = rsparticles.Particle(
            rsparticles.Trajectory([rsatm.AtmState(4, 1)]), 0.0)
        self.assertEqual(rsatm.atm_level_of(particle), 4)
        for state, level in ((rsatm.AtmState(3, 1), 3),
                             (rsatm.AtmState(2, 2), 2),
                             (rsatm.AtmState(3, 2), 2)):
            particle.trajectory.append(state)
            particle.level_index = rsatm.atm_level_of(particle)
            self.assertEqual(particle.level_index, level)


class TestAtmOracle(unittest.TestCase):
    """Reverse-time SMC against the linear-system oracle."""

    def setUp(self):
        self.p: rsatm.AtmParams = rsatm.AtmParams(K=3, b=4)

    def test_oracle(self):
        exact: np.ndarray = rsatm.exact_hitting_probabilities(self.p)
        self.assertEqual(exact.shape, (4, ))
        self.assertEqual(exact[0], 0.0)
        self.assertTrue(np.all(exact[1:] > 0))
        self.assertAlmostEqual(rsatm.exact_hitting_oracle(self.p, 2),
                               exact[2])

    def test_oracle_b1(self):
        # the first arrival already overflows
        p: rsatm.AtmParams = rsatm.AtmParams(K=2, b=1)
        exact: np.ndarray = rsatm.exact_hitting_probabilities(p)
        for j in range(3):
            x: rsatm.AtmState = rsatm.AtmState(0, j)
            self.assertAlmostEqual(
                exact[j],
                rsatm.mu_atm(j, p) *
                rsatm.forward_jump_prob(x, rsatm.AtmState(1, j), p))

    def test_oracle_too_large(self):
        self.assertRaises(ValueError, rsatm.exact_hitting_probabilities,
                          rsatm.AtmParams(K=200, b=100))

    def test_smc_agrees(self):
        exact: np.ndarray = rsatm.exact_hitting_probabilities(self.p)
        for k in range(1, self.p.K + 1):
            model: rsatm.Atm = rsatm.Atm(self.p, k)
            ensemble, summary = engine.run_reverse_smc(model, 4000, seed=k)
            self.assertLess(abs(summary.estimate - exact[k]),
                            3 * summary.std_error + 1e-15)
            for particle in ensemble.particles[:50]:
                self.assertTrue(
                    engine.check_first_hitting(model, particle.trajectory))
                self.assertLessEqual(
                    abs(engine.log_path_weight(model, particle) -
                        particle.log_weight),
                    1e-10 * max(1.0, abs(particle.log_weight)))

    def test_levels_monotone(self):
        model: rsatm.Atm = rsatm.Atm(self.p, 2)
        ensemble, _ = engine.run_reverse_smc(
            model, 200, seed=5, config=rsparticles.EngineConfig(validate=True))
        for particle in ensemble.particles:
            self.assertEqual(particle.level_index, 0)
            self.assertTrue(model.is_initial(particle.trajectory.last))


if __name__ == '__main__':
    unittest.main()
