#!/usr/bin/env python3
"""Tests for revsmc.models.sis."""

import itertools
import pathlib
import tempfile
import unittest

import numpy as np

from revsmc import config as rsconfig
from revsmc import errors
from revsmc.models.sis import network as rsnetwork
from revsmc.models.sis import sis as rssis
from revsmc.smc import engine


class TestNetwork(unittest.TestCase):
    """Grids, edge lists and observation files."""

    def test_grid(self):
        net: rsnetwork.Network = rsnetwork.Network.grid(3, 4)
        self.assertEqual(net.size, 12)
        self.assertEqual(net.degree[0], 2)
        self.assertEqual(net.degree[5], 4)
        self.assertEqual(net.vertex_at(1, 2), 6)
        self.assertEqual(net.directions[6, rsnetwork.UP], 10)
        self.assertEqual(net.directions[6, rsnetwork.LEFT], 5)
        self.assertEqual(net.distance(0, 11), 5)
        self.assertTrue(net.is_connected([0, 1, 5]))
        self.assertFalse(net.is_connected([0, 2]))
        self.assertRaises(ValueError, net.vertex_at, 3, 0)

    def test_edge_list(self):
        with tempfile.TemporaryDirectory() as directory:
            path: pathlib.Path = pathlib.Path(directory) / 'edges.txt'
            path.write_text('# triangle plus a tail\na b\nb c\nc a\n'
                            'c d\nbroken line here\n',
                            encoding='utf-8')
            net: rsnetwork.Network = rsnetwork.Network.from_edge_list(path)
            self.assertEqual(net.size, 4)
            self.assertEqual(net.labels, ['a', 'b', 'c', 'd'])
            self.assertEqual(net.neighbours[2], (0, 1, 3))
            self.assertFalse(net.is_grid)

            observed: pathlib.Path = pathlib.Path(directory) / 'observed.txt'
            rsnetwork.save_observed(observed, net, [3, 1])
            self.assertEqual(rsnetwork.load_observed(observed, net), [1, 3])

            observed.write_text('e\n', encoding='utf-8')
            self.assertRaises(ValueError, rsnetwork.load_observed, observed,
                              net)

    def test_empty_edge_list(self):
        with tempfile.TemporaryDirectory() as directory:
            path: pathlib.Path = pathlib.Path(directory) / 'edges.txt'
            path.write_text('# nothing\n', encoding='utf-8')
            self.assertRaises(ValueError, rsnetwork.Network.from_edge_list,
                              path)
            self.assertRaises(rsconfig.ConfigError,
                              rssis.network_from_config_values, str(path),
                              rssis.SisParams())


class TestWeights(unittest.TestCase):
    """Centre-of-mass weights and conditional sampling distributions."""

    def setUp(self):
        self.net: rsnetwork.Network = rsnetwork.Network.grid(5, 5)
        self.p: rssis.SisParams = rssis.SisParams(M=3, grid=(5, 5))

    def test_com_weight_towards_centre(self):
        # (2, 1) left of the cluster {(2, 2), (2, 3)}
        x: rssis.SisState = rssis.SisState.of([12, 13])
        self.assertEqual(rssis.com_weight(11, x, self.net), 0.5)

    def test_com_weight_away_from_centre(self):
        # (2, 1) left of the centre, infected neighbour on its left
        x: rssis.SisState = rssis.SisState.of([10, 13, 14])
        self.assertEqual(rssis.com_weight(11, x, self.net), 2.0)

    def test_com_weight_vertical(self):
        # (1, 2) below the centre of {(2, 2), (3, 2)}, infected above
        x: rssis.SisState = rssis.SisState.of([12, 17])
        self.assertEqual(rssis.com_weight(7, x, self.net), 0.5)
        # (1, 2) below the centre of {(0, 2), (3, 2), (4, 2)}, infected below
        x = rssis.SisState.of([2, 17, 22])
        self.assertEqual(rssis.com_weight(7, x, self.net), 2.0)
        # (3, 2) above the centre of {(0, 2), (1, 2), (2, 2)}, infected below
        x = rssis.SisState.of([2, 7, 12])
        self.assertEqual(rssis.com_weight(17, x, self.net), 0.5)

    def test_com_weight_at_centre(self):
        x: rssis.SisState = rssis.SisState.of([7, 17])
        self.assertEqual(rssis.com_weight(12, x, self.net), 1.0)

    def test_com_weight_without_directions(self):
        net: rsnetwork.Network = rsnetwork.Network([[1], [0, 2], [1]])
        self.assertEqual(rssis.com_weight(2, rssis.SisState.of([0, 1]), net),
                         1.0)

    def test_csd(self):
        x: rssis.SisState = rssis.SisState.of([7, 17])
        infected, susceptible = rssis.csd_sis(12, x, self.p, self.net)
        self.assertAlmostEqual(infected, 1 / 7, places=4)
        self.assertAlmostEqual(infected + susceptible, 1.0, places=12)


class TestDynamics(unittest.TestCase):
    """Forward rates and the reverse proposal."""

    def setUp(self):
        self.net: rsnetwork.Network = rsnetwork.Network.grid(5, 5)
        self.p: rssis.SisParams = rssis.SisParams(M=4, grid=(5, 5))
        self.observed: rssis.SisState = rssis.SisState.of([7, 11, 12, 13])
        self.model: rssis.Sis = rssis.Sis(self.p, self.net, self.observed)

    def test_entry(self):
        for vertex in (0, 12, 24):
            self.assertAlmostEqual(
                rssis.forward_jump_prob_sis(rssis.EMPTY,
                                            rssis.SisState((vertex, )),
                                            self.p, self.net), 1 / 25)

    def test_rates(self):
        x: rssis.SisState = rssis.SisState.of([12])
        rates = rssis.forward_rates_sis(x, self.p, self.net)
        self.assertEqual(rates[rssis.EMPTY], 12.0)
        self.assertEqual(rates[rssis.SisState.of([7, 12])], 1.0)
        self.assertEqual(len(rates), 5)

    def test_jump_probabilities_sum(self):
        for state in ([12], [7, 12], [0, 1, 2], [7, 11, 12, 13]):
            x: rssis.SisState = rssis.SisState.of(state)
            total: float = sum(
                rssis.forward_jump_prob_sis(x, y, self.p, self.net)
                for y in rssis.forward_rates_sis(x, self.p, self.net))
            self.assertAlmostEqual(total, 1.0, places=12)

    def test_candidates(self):
        for state in ([12], [7, 12], [7, 12, 13], [7, 11, 12, 13], [0, 24]):
            y: rssis.SisState = rssis.SisState.of(state)
            found = self.model.candidates(y)
            for x, ratio, forward in found:
                self.assertLess(len(x), self.p.M)
                self.assertAlmostEqual(
                    forward,
                    rssis.forward_jump_prob_sis(x, y, self.p, self.net),
                    places=12)
                if len(x) > len(y):
                    (vertex, ) = set(x.infected) - set(y.infected)
                    infected, susceptible = rssis.csd_sis(
                        vertex, y, self.p, self.net)
                    self.assertAlmostEqual(ratio, infected / susceptible,
                                           places=12)
            if found:
                total: float = sum(
                    self.model.proposal_density(y, x) for x, _, _ in found)
                self.assertLessEqual(abs(total - 1.0), 1e-12)

    def test_proposal_normalised_small_grid(self):
        net: rsnetwork.Network = rsnetwork.Network.grid(3, 3)
        p: rssis.SisParams = rssis.SisParams(M=4, grid=(3, 3))
        model: rssis.Sis = rssis.Sis(p, net, rssis.SisState.of([1, 3, 4, 5]))
        checked: int = 0
        for size in range(1, p.M + 1):
            for state in itertools.combinations(range(net.size), size):
                y: rssis.SisState = rssis.SisState(state)
                for vertex in range(net.size):
                    infected, susceptible = rssis.csd_sis(vertex, y, p, net)
                    self.assertLessEqual(abs(infected + susceptible - 1.0),
                                         1e-12)
                found = model.candidates(y)
                if not found:
                    continue
                total: float = sum(
                    model.proposal_density(y, x) for x, _, _ in found)
                self.assertLessEqual(abs(total - 1.0), 1e-12)
                checked += 1
        self.assertGreater(checked, 100)

    def test_isolated_vertices_not_removed(self):
        # 0 and 24 have no infected neighbours and cannot have been the
        # last infection
        removals = [
            x for x, _, _ in self.model.candidates(rssis.SisState.of([0, 24]))
            if len(x) == 1
        ]
        self.assertEqual(removals, [])

    def test_no_predecessor(self):
        model: rssis.Sis = rssis.Sis(
            rssis.SisParams(M=2, grid=(5, 5)), self.net,
            rssis.SisState.of([0, 24]))
        self.assertRaises(errors.EmptySupportError, model.reverse_propose,
                          rssis.SisState.of([0, 24]), np.random.default_rng(0))

    def test_invalid_observation(self):
        self.assertRaises(ValueError, rssis.Sis, self.p, self.net,
                          rssis.SisState.of([1, 2]))
        self.assertRaises(ValueError, rssis.Sis, self.p, self.net,
                          rssis.SisState.of([1, 2, 3, 30]))


class TestSourceInference(unittest.TestCase):
    """Forward epidemics and the likelihood surface."""

    def setUp(self):
        self.net: rsnetwork.Network = rsnetwork.Network.grid(5, 5)
        self.p: rssis.SisParams = rssis.SisParams(M=3, grid=(5, 5))

    def test_forward_epidemic(self):
        rng: np.random.Generator = np.random.default_rng(4)
        for _ in range(5):
            observed, source = rssis.simulate_forward_epidemic(
                self.p, self.net, rng, growth_bias=3.0)
            self.assertEqual(len(observed), self.p.M)
            self.assertTrue(0 <= source < self.net.size)

    def test_forward_epidemic_too_large(self):
        self.assertRaises(errors.SimulationError,
                          rssis.simulate_forward_epidemic,
                          rssis.SisParams(M=30), self.net,
                          np.random.default_rng(0))

    def test_surface(self):
        observed: rssis.SisState = rssis.SisState.of([7, 12, 13])
        model: rssis.Sis = rssis.Sis(self.p, self.net, observed)
        ensemble, summary = engine.run_reverse_smc(model, 400, seed=10)
        self.assertGreater(summary.estimate, 0)
        surface, std_error = rssis.likelihood_surface(ensemble,
                                                      self.net.size)
        self.assertAlmostEqual(float(surface.sum()), 1.0, places=12)
        self.assertTrue(np.all(std_error >= 0))
        self.assertGreater(float(surface[list(observed.infected)].sum()), 0.5)
        self.assertIn(rssis.surface_argmax(surface)[0], range(self.net.size))
        sources: np.ndarray = rssis.source_samples(ensemble)
        self.assertTrue(np.all(sources >= 0))
        for particle in ensemble.particles[:50]:
            if particle.zeroed:
                continue
            self.assertLessEqual(
                abs(engine.log_path_weight(model, particle) -
                    particle.log_weight),
                1e-10 * max(1.0, abs(particle.log_weight)))

    def test_surface_matches_path_enumeration(self):
        net: rsnetwork.Network = rsnetwork.Network.grid(2, 1)
        p: rssis.SisParams = rssis.SisParams(M=2, grid=(2, 1))
        observed: rssis.SisState = rssis.SisState.of([0, 1])

        # forward paths from ∅ that reach `observed` before ∅ or any
        # other detected configuration
        exact: np.ndarray = np.zeros(net.size)
        pending: list[tuple[rssis.SisState, int, float, int]] = [
            (rssis.EMPTY, -1, 1.0, 0)
        ]
        while pending:
            state, source, mass, steps = pending.pop()
            for successor, probability in (
                    (y, rssis.forward_jump_prob_sis(state, y, p, net))
                    for y in rssis.forward_rates_sis(state, p, net)):
                first: int = (successor.infected[0]
                              if source < 0 else source)
                if successor == observed:
                    exact[first] += mass * probability
                elif (successor.infected and len(successor) < p.M and
                      steps < 20):
                    pending.append(
                        (successor, first, mass * probability, steps + 1))
        exact /= exact.sum()

        model: rssis.Sis = rssis.Sis(p, net, observed)
        ensemble, _ = engine.run_reverse_smc(model, 2000, seed=12)
        surface, std_error = rssis.likelihood_surface(ensemble, net.size)
        for vertex in range(net.size):
            self.assertLessEqual(abs(surface[vertex] - exact[vertex]),
                                 3 * std_error[vertex] + 1e-12)

    def test_surface_argmax_ties(self):
        self.assertEqual(rssis.surface_argmax(np.array([0.2, 0.4, 0.4])),
                         [1, 2])


if __name__ == '__main__':
    unittest.main()
