#!/usr/bin/env python3
"""Queue overflow of an ATM multiplexer with on/off sources.

The state (i, j) holds the queue length i and the number j of active
sources. The continuous-time rates

* arrival       (i, j) -> (i + 1, j)   λ j
* service       (i, j) -> (i - 1, j)   μ (if i > 0)
* source on     (i, j) -> (i, j + 1)   α0 (K - j)
* source off    (i, j) -> (i, j - 1)   α1 j

define the embedded jump chain used here. The initial set I is the
empty queue {(0, j)} with a binomial entrance law, the target set T the
full queue {(b, j)}, whose rows are absorbing.
"""

import dataclasses
import math

from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy import special
from scipy import stats
from scipy.sparse import linalg as sparse_linalg

from revsmc import config as rsconfig
from revsmc import errors
from revsmc.rslogging import rslogging
from revsmc.smc import model as rsmodel
from revsmc.smc import particles as rsparticles

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

ORACLE_MAX_STATES: int = 10_000


class AtmState(NamedTuple):
    """Queue length `i` and active source count `j`."""
    i: int
    j: int


@dataclasses.dataclass(frozen=True)
class AtmParams:
    """Parameters of the multiplexer.

    Attributes:
        K: Number of sources.
        b: Queue length at which the queue overflows.
        lam: Packet rate per active source.
        mu: Service rate.
        alpha0: Rate at which an inactive source turns on.
        alpha1: Rate at which an active source turns off.
    """

    K: int = 20
    b: int = 10
    lam: float = 0.5
    mu: float = 10.0
    alpha0: float = 1.0
    alpha1: float = 3.0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise rsconfig.ConfigError('models.atm.K must be >= 1.')
        if self.b < 1:
            raise rsconfig.ConfigError('models.atm.b must be >= 1.')
        for name, value in (('lambda', self.lam), ('mu', self.mu),
                            ('alpha0', self.alpha0), ('alpha1',
                                                      self.alpha1)):
            if not value > 0:
                raise rsconfig.ConfigError(f'models.atm.{name} must be > 0.')

    @classmethod
    def from_config(cls, config: rsconfig.Config) -> 'AtmParams':
        """Read `models.atm.*`."""
        return cls(K=config.get_int('models', 'atm', 'K', default=20),
                   b=config.get_int('models', 'atm', 'b', default=10),
                   lam=config.get_float('models', 'atm', 'lambda',
                                        default=0.5),
                   mu=config.get_float('models', 'atm', 'mu', default=10.0),
                   alpha0=config.get_float('models',
                                           'atm',
                                           'alpha0',
                                           default=1.0),
                   alpha1=config.get_float('models',
                                           'atm',
                                           'alpha1',
                                           default=3.0))

    @property
    def on_probability(self) -> float:
        """Stationary probability of a source being active."""
        return self.alpha0 / (self.alpha0 + self.alpha1)

    def states(self) -> list[AtmState]:
        """All states, queue length major."""
        return [
            AtmState(i, j) for i in range(self.b + 1)
            for j in range(self.K + 1)
        ]


def _moves(x: AtmState, p: AtmParams) -> list[tuple[AtmState, float]]:
    """Successors of a non-target state with their rates."""

    i, j = x
    moves: list[tuple[AtmState, float]] = []
    if j > 0:
        moves.append((AtmState(i + 1, j), p.lam * j))
    if i > 0:
        moves.append((AtmState(i - 1, j), p.mu))
    if j < p.K:
        moves.append((AtmState(i, j + 1), p.alpha0 * (p.K - j)))
    if j > 0:
        moves.append((AtmState(i, j - 1), p.alpha1 * j))
    return moves


def total_rate(x: AtmState, p: AtmParams) -> float:
    """Return the total jump rate out of a non-target state.

    Raises:
        ValueError: No move is possible.
    """

    total: float = sum(rate for _, rate in _moves(x, p))
    if not total > 0:
        raise ValueError(f'State {x} has no outgoing transition.')
    return total


def successors(x: AtmState,
               p: AtmParams) -> list[tuple[AtmState, float]]:
    """Return the successors of x with their jump probabilities."""

    if x.i >= p.b:
        return [(x, 1.0)]
    moves: list[tuple[AtmState, float]] = _moves(x, p)
    total: float = sum(rate for _, rate in moves)
    if not total > 0:
        raise ValueError(f'State {x} has no outgoing transition.')
    return [(y, rate / total) for y, rate in moves]


def forward_jump_prob(x: AtmState, y: AtmState, p: AtmParams) -> float:
    """Return the jump chain probability of x -> y.

    Target states are absorbing, i.e., jump to themselves.
    """

    if x.i >= p.b:
        return 1.0 if x == y else 0.0
    for successor, probability in successors(x, p):
        if successor == y:
            return probability
    return 0.0


def _log_csd_i_table(p: AtmParams) -> np.ndarray:
    """log π̂_i(i | j) as a (b + 1, K + 1) array."""

    queue: np.ndarray = np.arange(p.b + 1)[:, None]
    log_ratio: np.ndarray = np.log(p.lam * np.maximum(np.arange(p.K + 1), 1) /
                                   p.mu)[None, :]
    terms: np.ndarray = queue * log_ratio
    return terms - special.logsumexp(terms, axis=0, keepdims=True)


def _log_csd_j_table(p: AtmParams) -> np.ndarray:
    """log π̂_j(j | i) as a (b + 1, K + 1) array."""

    terms: np.ndarray = (stats.binom.logpmf(np.arange(p.K + 1), p.K,
                                            p.on_probability)[None, :] +
                         _log_csd_i_table(p))
    return terms - special.logsumexp(terms, axis=1, keepdims=True)


def csd_i(i: int, j: int, p: AtmParams) -> float:
    """π̂_i(i | j) ∝ (λ max{j, 1} / μ)^i, normalised over i in 0..b."""
    return float(np.exp(_log_csd_i_table(p)[i, j]))


def csd_j(j: int, i: int, p: AtmParams) -> float:
    """π̂_j(j | i) ∝ Binomial(K, α0 / (α0 + α1))(j) π̂_i(i | j)."""
    return float(np.exp(_log_csd_j_table(p)[i, j]))


def mu_atm(j: int, p: AtmParams) -> float:
    """Entrance law on (0, j): the stationary number of active sources."""
    return float(stats.binom.pmf(j, p.K, p.on_probability))


class Atm(rsmodel.Model):
    """The multiplexer conditioned on overflowing with j = k.

    The terminal law is a point mass at (b, k). Reverse proposals move
    one coordinate at a time and weight it by the ratio of its
    conditional sampling distributions.

    Attributes:
        params: The parameters.
        k: Active sources at overflow.
    """

    name: str = 'atm'

    def __init__(self, params: AtmParams, k: int) -> None:
        """Precompute the CSD tables.

        Raises:
            ValueError: `k` outside 0..K.
        """

        if not 0 <= k <= params.K:
            raise ValueError(f'Terminal on-count {k} outside 0..{params.K}.')
        self.params: AtmParams = params
        self.k: int = k
        self._log_csd_i: list[list[float]] = _log_csd_i_table(params).tolist()
        self._log_csd_j: list[list[float]] = _log_csd_j_table(params).tolist()
        self._entrance: list[float] = stats.binom.pmf(
            np.arange(params.K + 1), params.K,
            params.on_probability).tolist()

    def forward_density(self, x: AtmState, y: AtmState) -> float:
        return forward_jump_prob(x, y, self.params)

    def candidates(
            self,
            y: AtmState) -> list[tuple[AtmState, float, float]]:
        """Admissible predecessors of y.

        Returns:
            Tuples of predecessor x, CSD ratio π̂(x-coordinate) /
            π̂(y-coordinate) and forward probability of x -> y.
        """

        p: AtmParams = self.params
        i, j = y
        found: list[tuple[AtmState, float, float]] = []
        if i > 0 and j > 0:
            # an arrival led to y
            x: AtmState = AtmState(i - 1, j)
            found.append((x, math.exp(self._log_csd_i[i - 1][j] -
                                   self._log_csd_i[i][j]),
                          p.lam * j / total_rate(x, p)))
        if i + 1 < p.b:
            x = AtmState(i + 1, j)
            found.append((x, math.exp(self._log_csd_i[i + 1][j] -
                                   self._log_csd_i[i][j]),
                          p.mu / total_rate(x, p)))
        if i < p.b:
            sources: list[float] = self._log_csd_j[i]
            if j > 0:
                x = AtmState(i, j - 1)
                found.append((x, math.exp(sources[j - 1] - sources[j]),
                              p.alpha0 * (p.K - j + 1) / total_rate(x, p)))
            if j < p.K:
                x = AtmState(i, j + 1)
                found.append((x, math.exp(sources[j + 1] - sources[j]),
                              p.alpha1 * (j + 1) / total_rate(x, p)))
        return found

    def reverse_propose(
            self, y: AtmState,
            rng: np.random.Generator) -> tuple[AtmState, float]:
        found: list[tuple[AtmState, float, float]] = self.candidates(y)
        if not found:
            raise errors.EmptySupportError(f'No predecessor of {y}.')
        masses: list[float] = [ratio * forward for _, ratio, forward in found]
        normaliser: float = sum(masses)
        threshold: float = rng.random() * normaliser
        chosen: int = len(found) - 1
        for index, mass in enumerate(masses):
            threshold -= mass
            if threshold < 0:
                chosen = index
                break
        x, ratio, _ = found[chosen]
        return x, normaliser / ratio

    def proposal_density(self, y: AtmState, x: AtmState) -> float:
        found: list[tuple[AtmState, float, float]] = self.candidates(y)
        normaliser: float = sum(ratio * forward for _, ratio, forward in found)
        for candidate, ratio, forward in found:
            if candidate == x:
                return ratio * forward / normaliser
        return 0.0

    def is_initial(self, state: AtmState) -> bool:
        return state.i == 0

    def is_target(self, state: AtmState) -> bool:
        return state.i == self.params.b

    def initial_density(self, state: AtmState) -> float:
        if state.i != 0:
            return 0.0
        return self._entrance[state.j]

    def terminal_sample(self, rng: np.random.Generator) -> AtmState:
        return AtmState(self.params.b, self.k)

    def terminal_density(self, state: AtmState) -> float:
        return 1.0 if state == (self.params.b, self.k) else 0.0

    def level_of(self, particle: rsparticles.Particle) -> int:
        return atm_level_of(particle)


def reverse_propose_atm(y: AtmState, p: AtmParams,
                        rng: np.random.Generator) -> tuple[AtmState, float]:
    """Sample a predecessor of y, see `Atm.reverse_propose()`."""
    return Atm(p, 0).reverse_propose(y, rng)


def atm_level_of(particle: rsparticles.Particle) -> int:
    """Running minimum of the queue length along the reverse trajectory."""
    return min(particle.level_index, particle.trajectory.last.i)


def exact_hitting_probabilities(p: AtmParams) -> np.ndarray:
    """P_μ(overflow with j = k before the queue empties) for every k.

    Solves the first-step equations of h_k(x) = P_x(hit (b, k) before
    i = 0) on the interior 1 <= i <= b - 1 and starts each path with
    the forced step (0, j) -> (1, j) of the last exit from I.

    Returns:
        An array of length K + 1.

    Raises:
        ValueError: The instance is too large for a direct solve.
        SingularSystemError: The system could not be factorised.
    """

    if (p.b + 1) * (p.K + 1) > ORACLE_MAX_STATES:
        raise ValueError('Instance too large for the exact oracle.')

    width: int = p.K + 1
    exits: np.ndarray = np.array([
        mu_atm(j, p) * forward_jump_prob(AtmState(0, j), AtmState(1, j), p)
        for j in range(width)
    ])
    if p.b == 1:
        return exits

    interior: int = (p.b - 1) * width

    def index(state: AtmState) -> int:
        return (state.i - 1) * width + state.j

    rows: list[int] = []
    cols: list[int] = []
    values: list[float] = []
    rhs: np.ndarray = np.zeros((interior, width))
    for i in range(1, p.b):
        for j in range(width):
            x: AtmState = AtmState(i, j)
            rows.append(index(x))
            cols.append(index(x))
            values.append(1.0)
            for y, probability in successors(x, p):
                if y.i == p.b:
                    rhs[index(x), y.j] += probability
                elif y.i > 0:
                    rows.append(index(x))
                    cols.append(index(y))
                    values.append(-probability)

    system: sparse.csc_matrix = sparse.csc_matrix(
        (values, (rows, cols)), shape=(interior, interior))
    try:
        hitting: np.ndarray = sparse_linalg.splu(system).solve(rhs)
    except RuntimeError as e:
        raise errors.SingularSystemError(
            'The hitting probability system is singular.') from e
    logger.debug('solved %s hitting equations', interior)
    return exits @ hitting[:width]


def exact_hitting_oracle(p: AtmParams, k: int) -> float:
    """P_μ(overflow with j = k before the queue empties)."""
    return float(exact_hitting_probabilities(p)[k])

