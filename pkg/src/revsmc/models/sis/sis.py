#!/usr/bin/env python3
"""Source inference for an SIS epidemic on a network.

Infected vertices are cured at rate β, susceptible vertices get
infected at rate α per infected neighbour and an empty network is
entered by one infection at a uniformly chosen vertex (rate γ, the
only move out of ∅). Detection happens when M vertices are infected
for the first time.

Reverse trajectories start at the observed configuration and flip one
vertex per step until the network is empty. Their penultimate state is
a singleton {v}: a sample of the epidemic's source.
"""

import dataclasses

from typing import NamedTuple, Optional

import numpy as np

from revsmc import config as rsconfig
from revsmc import errors
from revsmc.models.sis import network as rsnetwork
from revsmc.rslogging import rslogging
from revsmc.smc import engine
from revsmc.smc import model as rsmodel
from revsmc.smc import particles as rsparticles

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

COM_TOLERANCE: float = 1e-9
MAX_RESTARTS: int = 1_000_000


class SisState(NamedTuple):
    """The sorted tuple of infected vertices."""
    infected: tuple[int, ...]

    @classmethod
    def of(cls, vertices: Optional[list[int]] = None) -> 'SisState':
        """Build a state from any collection of vertices."""
        return cls(tuple(sorted(set(vertices or ()))))

    def __len__(self) -> int:
        return len(self.infected)


EMPTY: SisState = SisState(())


@dataclasses.dataclass(frozen=True)
class SisParams:
    """Rates of the epidemic.

    Attributes:
        alpha: Infection rate per infected neighbour.
        beta: Cure rate.
        gamma: Rate at which an infection enters the empty network.
        epsilon: Regulariser of reverse infections without infected
            neighbours.
        M: Detection size.
        grid: (rows, cols) of the grid network.
    """

    alpha: float = 1.0
    beta: float = 12.0
    gamma: float = 1.0
    epsilon: float = 1e-4
    M: int = 10
    grid: tuple[int, int] = (10, 10)

    def __post_init__(self) -> None:
        for name, value in (('alpha', self.alpha), ('beta', self.beta),
                            ('gamma', self.gamma), ('epsilon',
                                                    self.epsilon)):
            if not value > 0:
                raise rsconfig.ConfigError(f'models.sis.{name} must be > 0.')
        if self.M < 1:
            raise rsconfig.ConfigError('models.sis.M must be >= 1.')

    @classmethod
    def from_config(cls, config: rsconfig.Config) -> 'SisParams':
        """Read `models.sis.*`.

        Without a configured `epsilon` it is set to 0.01 / |V|.
        """

        rows: int = config.get_int('models', 'sis', 'rows', default=10)
        cols: int = config.get_int('models', 'sis', 'cols', default=10)
        if rows < 1 or cols < 1:
            raise rsconfig.ConfigError(
                'models.sis.rows and models.sis.cols must be >= 1.')
        epsilon: float = 0.01 / (rows * cols)
        if config.has('models', 'sis', 'epsilon'):
            epsilon = config.get_float('models', 'sis', 'epsilon',
                                       default=epsilon)
        return cls(alpha=config.get_float('models', 'sis', 'alpha',
                                          default=1.0),
                   beta=config.get_float('models', 'sis', 'beta',
                                         default=12.0),
                   gamma=config.get_float('models', 'sis', 'gamma',
                                          default=1.0),
                   epsilon=epsilon,
                   M=config.get_int('models', 'sis', 'M', default=10),
                   grid=(rows, cols))


def network_from_config(config: rsconfig.Config,
                        p: SisParams) -> rsnetwork.Network:
    """The edge list at `models.sis.network_file` or the grid of `p`."""
    return network_from_config_values(
        config.get_str('models', 'sis', 'network_file', default=''), p)


def network_from_config_values(path: str,
                               p: SisParams) -> rsnetwork.Network:
    """The edge list at `path` or, if empty, the grid of `p`.

    Raises:
        ConfigError: The edge list cannot be read or has fewer than M
            vertices.
    """

    if not path:
        return rsnetwork.Network.grid(*p.grid)
    try:
        net: rsnetwork.Network = rsnetwork.Network.from_edge_list(path)
    except (OSError, ValueError) as e:
        raise rsconfig.ConfigError(f'models.sis.network_file: {e}') from e
    if net.size < p.M:
        raise rsconfig.ConfigError(
            f'models.sis.network_file: {net.size} vertices, M is {p.M}.')
    return net


def observed_from_file(path: str, net: rsnetwork.Network) -> SisState:
    """Read the observed configuration at `path`.

    Raises:
        ConfigError: The file cannot be read or names unknown vertices.
    """

    try:
        return SisState.of(rsnetwork.load_observed(path, net))
    except (OSError, ValueError) as e:
        raise rsconfig.ConfigError(f'models.sis.observed_file: {e}') from e


def _indicator(state: SisState, net: rsnetwork.Network) -> np.ndarray:
    """Boolean infection labels with a trailing `False` for padding."""

    labels: np.ndarray = np.zeros(net.size + 1, dtype=bool)
    labels[list(state.infected)] = True
    return labels


def infected_neighbour_counts(labels: np.ndarray,
                              net: rsnetwork.Network) -> np.ndarray:
    """|N_v^J| for every vertex, `labels` as from `_indicator()`."""
    return labels[net.padded].sum(axis=1)


def forward_rates_sis(x: SisState, p: SisParams,
                      net: rsnetwork.Network) -> dict[SisState, float]:
    """Return the successors of x with their rates."""

    if not x.infected:
        entry: float = p.gamma / net.size
        return {SisState((vertex, )): entry for vertex in range(net.size)}

    labels: np.ndarray = _indicator(x, net)
    counts: np.ndarray = infected_neighbour_counts(labels, net)
    infected: set[int] = set(x.infected)
    rates: dict[SisState, float] = {}
    for vertex in x.infected:
        rates[SisState(tuple(sorted(infected - {vertex})))] = p.beta
    for vertex in np.flatnonzero(~labels[:-1] & (counts > 0)):
        rates[SisState(tuple(sorted(infected | {int(vertex)})))] = (
            p.alpha * counts[vertex])
    return rates


def forward_jump_prob_sis(x: SisState, y: SisState, p: SisParams,
                          net: rsnetwork.Network) -> float:
    """Jump chain probability of x -> y."""

    rates: dict[SisState, float] = forward_rates_sis(x, p, net)
    return rates.get(y, 0.0) / sum(rates.values())


def _com_weights(labels: np.ndarray, state: SisState,
                 net: rsnetwork.Network) -> np.ndarray:
    """w(v) for every vertex, 1 on networks without directions."""

    if net.directions is None or net.coordinates is None or not state.infected:
        return np.ones(net.size)
    centre: np.ndarray = net.coordinates[list(state.infected)].mean(axis=0)
    offset: np.ndarray = centre[None, :] - net.coordinates
    # d = 1 below / left of the centre, -1 above / right, 0 on it
    side: np.ndarray = np.where(
        offset > COM_TOLERANCE, 1, np.where(offset < -COM_TOLERANCE, -1, 0))
    # off-grid neighbours (-1) read the padding entry, i.e. susceptible
    neighbour: np.ndarray = labels[np.where(net.directions < 0, net.size,
                                            net.directions)].astype(int)
    exponent: np.ndarray = -(
        (neighbour[:, rsnetwork.UP] - neighbour[:, rsnetwork.DOWN]) *
        side[:, 0] +
        (neighbour[:, rsnetwork.RIGHT] - neighbour[:, rsnetwork.LEFT]) *
        side[:, 1])
    return np.power(2.0, exponent)


def com_weight(v: int, x: SisState, net: rsnetwork.Network) -> float:
    """The centre-of-mass weight w(v) of x."""
    return float(_com_weights(_indicator(x, net), x, net)[v])


def csd_sis(v: int, x: SisState, p: SisParams,
            net: rsnetwork.Network) -> tuple[float, float]:
    """Approximate conditional law of v's label given all other labels.

    Returns:
        Probabilities of v being infected and susceptible.
    """

    labels: np.ndarray = _indicator(x, net)
    count: int = int(infected_neighbour_counts(labels, net)[v])
    infected: float = (p.alpha * count + p.epsilon) * float(
        _com_weights(labels, x, net)[v])
    return infected / (infected + p.beta), p.beta / (infected + p.beta)


def candidates_sis(y: SisState, p: SisParams,
                   net: rsnetwork.Network
                  ) -> list[tuple[SisState, float, float]]:
    """Admissible predecessors of y.

    Predecessors differ from y in one vertex, reach y with positive
    forward probability and have fewer than M infected vertices (the
    epidemic is detected on first reaching M). All CSDs are evaluated
    with the labels of y.

    Returns:
        Tuples of predecessor x, CSD ratio of the flipped vertex' label
        in x over its label in y and forward probability of x -> y.
    """

    size: int = len(y)
    labels: np.ndarray = _indicator(y, net)
    susceptible: np.ndarray = ~labels[:-1]
    counts: np.ndarray = infected_neighbour_counts(labels, net)
    weights: np.ndarray = _com_weights(labels, y, net)
    edges: int = int(counts[susceptible].sum())
    # odds of J : S for every vertex given the others
    odds: np.ndarray = (p.alpha * counts + p.epsilon) * weights / p.beta

    found: list[tuple[SisState, float, float]] = []
    infected: set[int] = set(y.infected)

    if size + 1 < p.M:
        # x = y + {v} and the forward chain cured v
        for vertex in np.flatnonzero(susceptible):
            rate: float = p.beta * (size + 1) + p.alpha * (
                edges + net.degree[vertex] - 2 * counts[vertex])
            found.append((SisState(tuple(sorted(infected | {int(vertex)}))),
                          float(odds[vertex]), p.beta / rate))

    for vertex in y.infected:
        if size == 1:
            forward: float = 1.0 / net.size
        elif counts[vertex] == 0:
            continue
        else:
            rate = p.beta * (size - 1) + p.alpha * (
                edges - net.degree[vertex] + 2 * counts[vertex])
            forward = p.alpha * counts[vertex] / rate
        found.append((SisState(tuple(sorted(infected - {vertex}))),
                      1.0 / float(odds[vertex]), float(forward)))
    return found


def _sample(found: list[tuple[SisState, float, float]], y: SisState,
            rng: np.random.Generator) -> tuple[SisState, float]:
    """Draw a candidate ∝ ratio x forward probability.

    Returns:
        The predecessor and the weight increment C(y) / ratio.
    """

    if not found:
        raise errors.EmptySupportError(f'No predecessor of {y}.')
    masses: np.ndarray = np.array(
        [ratio * forward for _, ratio, forward in found])
    cumulative: np.ndarray = np.cumsum(masses)
    chosen: int = min(
        int(np.searchsorted(cumulative,
                            rng.random() * cumulative[-1],
                            side='right')),
        len(found) - 1)
    x, ratio, _ = found[chosen]
    return x, float(cumulative[-1]) / ratio


def reverse_propose_sis(y: SisState, p: SisParams, net: rsnetwork.Network,
                        rng: np.random.Generator) -> tuple[SisState, float]:
    """Sample a predecessor of y and return it with its weight increment."""
    return _sample(candidates_sis(y, p, net), y, rng)


class Sis(rsmodel.Model):
    """The epidemic conditioned on being detected as `observed`.

    Attributes:
        params: The rates.
        net: The network.
        observed: The detected configuration, the terminal point mass.
    """

    name: str = 'sis'

    def __init__(self, params: SisParams, net: rsnetwork.Network,
                 observed: SisState) -> None:
        """Check the observation.

        Raises:
            ValueError: The observed configuration is empty, not of
                size M or names vertices outside the network.
        """

        if not observed.infected:
            raise ValueError('The observed configuration is empty.')
        if len(observed) != params.M:
            raise ValueError(f'The observed configuration has {len(observed)} '
                             f'infected vertices, expected {params.M}.')
        if observed.infected[0] < 0 or observed.infected[-1] >= net.size:
            raise ValueError('The observed configuration names unknown '
                             'vertices.')
        self.params: SisParams = params
        self.net: rsnetwork.Network = net
        self.observed: SisState = observed

    def forward_density(self, x: SisState, y: SisState) -> float:
        if abs(len(x) - len(y)) != 1:
            return 0.0
        return forward_jump_prob_sis(x, y, self.params, self.net)

    def candidates(self, y: SisState) -> list[tuple[SisState, float, float]]:
        """Admissible predecessors of y, see `candidates_sis()`."""
        return candidates_sis(y, self.params, self.net)

    def reverse_propose(
            self, y: SisState,
            rng: np.random.Generator) -> tuple[SisState, float]:
        return _sample(candidates_sis(y, self.params, self.net), y, rng)

    def proposal_density(self, y: SisState, x: SisState) -> float:
        found: list[tuple[SisState, float, float]] = self.candidates(y)
        normaliser: float = sum(ratio * forward for _, ratio, forward in found)
        for candidate, ratio, forward in found:
            if candidate == x:
                return ratio * forward / normaliser
        return 0.0

    def is_initial(self, state: SisState) -> bool:
        return not state.infected

    def is_target(self, state: SisState) -> bool:
        return state == self.observed

    def initial_density(self, state: SisState) -> float:
        return 1.0 if not state.infected else 0.0

    def terminal_sample(self, rng: np.random.Generator) -> SisState:
        return self.observed

    def terminal_density(self, state: SisState) -> float:
        return 1.0 if state == self.observed else 0.0

    def level_of(self, particle: rsparticles.Particle) -> int:
        return min(particle.level_index, len(particle.trajectory.last))


def source_samples(ensemble: rsparticles.Ensemble) -> np.ndarray:
    """The source vertex of every particle, -1 for zeroed particles."""

    sources: np.ndarray = np.full(ensemble.size, -1, dtype=int)
    for index, particle in enumerate(ensemble.particles):
        states: list[SisState] = particle.trajectory.states
        if (particle.zeroed or len(states) < 2 or states[-1].infected or
                len(states[-2]) != 1):
            continue
        sources[index] = states[-2].infected[0]
    return sources


def likelihood_surface(ensemble: rsparticles.Ensemble,
                       size: int) -> tuple[np.ndarray, np.ndarray]:
    """Posterior probability of every vertex being the source.

    The self-normalised weighted fraction of particles whose state
    before the empty network was {v}, for every v.

    Args:
        ensemble: The ensemble of a finished run.
        size: Number of vertices |V|.

    Returns:
        The surface (summing to one) and the delta-method standard
        error of every entry.

    Raises:
        DegeneracyError: The total weight is zero.
    """

    weights: np.ndarray = engine.normalized_weights(ensemble)
    sources: np.ndarray = source_samples(ensemble)
    valid: np.ndarray = sources >= 0
    surface: np.ndarray = np.bincount(sources[valid],
                                      weights=weights[valid],
                                      minlength=size)
    squares: np.ndarray = np.square(weights)
    # Σ_j W_j² (1{source_j = v} - s_v)²
    variance: np.ndarray = (
        np.bincount(sources[valid], weights=squares[valid], minlength=size) *
        (1 - 2 * surface) + np.square(surface) * squares.sum())
    return surface, np.sqrt(np.maximum(variance, 0.0))


def surface_argmax(surface: np.ndarray) -> list[int]:
    """All vertices attaining the maximum of the surface."""
    top: float = float(surface.max())
    return [int(vertex) for vertex in np.flatnonzero(surface >= top - 1e-12)]


def simulate_forward_epidemic(
        p: SisParams,
        net: rsnetwork.Network,
        rng: np.random.Generator,
        growth_bias: float = 1.0,
        max_restarts: int = MAX_RESTARTS) -> tuple[SisState, int]:
    """Run the jump chain from ∅ until M vertices are infected.

    Epidemics that die out before detection are discarded and
    restarted.

    Args:
        p: The rates.
        net: The network.
        rng: The generator.
        growth_bias: Factor on the infection rates; 1 simulates the
            model itself, larger values make detection likely in
            strongly subcritical regimes.
        max_restarts: Give up after this many extinctions.

    Returns:
        The detected configuration and the entry vertex.

    Raises:
        SimulationError: No detection within `max_restarts`.
    """

    if not growth_bias > 0:
        raise ValueError('growth_bias must be > 0.')
    if p.M > net.size:
        raise errors.SimulationError(
            f'Cannot infect {p.M} of {net.size} vertices.')

    for restart in range(max_restarts):
        source: int = int(rng.integers(net.size))
        labels: np.ndarray = np.zeros(net.size + 1, dtype=bool)
        labels[source] = True
        size: int = 1
        while 0 < size < p.M:
            counts: np.ndarray = infected_neighbour_counts(labels, net)
            rates: np.ndarray = np.where(labels[:-1], p.beta,
                                         growth_bias * p.alpha * counts)
            cumulative: np.ndarray = np.cumsum(rates)
            vertex: int = min(
                int(np.searchsorted(cumulative,
                                    rng.random() * cumulative[-1],
                                    side='right')), net.size - 1)
            labels[vertex] = not labels[vertex]
            size += 1 if labels[vertex] else -1
        if size == p.M:
            logger.debug('epidemic detected after %s restarts', restart)
            return SisState(tuple(int(v) for v in np.flatnonzero(
                labels[:-1]))), source
    raise errors.SimulationError(
        f'No epidemic reached {p.M} infections in {max_restarts} attempts.')
