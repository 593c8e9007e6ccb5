#!/usr/bin/env python3
"""Containment of the discretised hyperbolic diffusion in a strip.

The diffusion dX = -X / sqrt(1 + X^2) dt + dW is discretised with the
Euler scheme of step Δ:

    X_{n+1} ~ N(m(X_n), Δ),   m(x) = x (1 - Δ / sqrt(1 + x^2)).

The chain starts from the hyperbolic density π restricted to (l0, u0)
and has to stay strictly inside the strip whose bounds move linearly
to (lt, ut) at time t. States carry the grid index s of their time
s Δ. The target set consists of the states at the horizon inside
(lt, ut), the initial set of the states at time 0.
"""

import dataclasses
import math

from typing import Any, NamedTuple

import numpy as np
from scipy import integrate
from scipy import special
from scipy import stats

from revsmc import config as rsconfig
from revsmc import errors
from revsmc.rslogging import rslogging
from revsmc.smc import model as rsmodel
from revsmc.smc import particles as rsparticles

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

BESSEL_K1_AT_1: float = float(special.k1(1.0))
BESSEL_K1_AT_1_REFERENCE: float = 0.601907230197235
NEWTON_TOLERANCE: float = 1e-12
NEWTON_MAX_ITERATIONS: int = 200
# the normaliser's integrand is below exp(-72) outside this many
# standard deviations around the drift pre-image
QUADRATURE_WINDOW: float = 12.0
REJECTION_BATCH: int = 16
ORACLE_CHUNK: int = 100_000


class DiffState(NamedTuple):
    """Grid index `s` (time s Δ) and position `x`."""
    s: int
    x: float


@dataclasses.dataclass(frozen=True)
class StripParams:
    """Geometry and discretisation.

    Attributes:
        l0: Lower bound at time 0.
        u0: Upper bound at time 0.
        lt: Lower bound at the horizon.
        ut: Upper bound at the horizon.
        t: The horizon.
        delta: The Euler step Δ.
        quad_tolerance: Tolerance of the proposal normaliser.
        max_attempts: Budget of the rejection sampler.
    """

    l0: float = -1.0
    u0: float = 1.0
    lt: float = 5.0
    ut: float = 5.1
    t: float = 2.0
    delta: float = 0.01
    quad_tolerance: float = 1e-9
    max_attempts: int = 100_000

    def __post_init__(self) -> None:
        if not self.l0 < self.u0:
            raise rsconfig.ConfigError('models.hyperbolic.l0 must be < u0.')
        if not self.lt < self.ut:
            raise rsconfig.ConfigError('models.hyperbolic.lt must be < ut.')
        if not 0 < self.delta < 1:
            raise rsconfig.ConfigError(
                'models.hyperbolic.delta must lie in (0, 1).')
        if not self.t > 0:
            raise rsconfig.ConfigError('models.hyperbolic.t must be > 0.')
        if abs(round(self.t / self.delta) * self.delta - self.t) > 1e-9 * max(
                1.0, self.t):
            raise rsconfig.ConfigError(
                'models.hyperbolic.delta must divide t exactly.')
        if not self.quad_tolerance > 0:
            raise rsconfig.ConfigError(
                'models.hyperbolic.quad_tolerance must be > 0.')
        if self.max_attempts < 1:
            raise rsconfig.ConfigError(
                'models.hyperbolic.max_attempts must be >= 1.')

    @classmethod
    def from_config(cls, config: rsconfig.Config) -> 'StripParams':
        """Read `models.hyperbolic.*`."""

        def get(key: str, default: float) -> float:
            return config.get_float('models', 'hyperbolic', key,
                                    default=default)

        return cls(l0=get('l0', -1.0),
                   u0=get('u0', 1.0),
                   lt=get('lt', 5.0),
                   ut=get('ut', 5.1),
                   t=get('t', 2.0),
                   delta=get('delta', 0.01),
                   quad_tolerance=get('quad_tolerance', 1e-9),
                   max_attempts=config.get_int('models',
                                               'hyperbolic',
                                               'max_attempts',
                                               default=100_000))

    @property
    def steps(self) -> int:
        """Number of Euler steps t / Δ."""
        return int(round(self.t / self.delta))

    def bounds_at_step(self, s: int) -> tuple[float, float]:
        """Strip bounds at grid index s."""
        return strip_bounds(s * self.delta, self)


def stationary_density(x: Any) -> Any:
    """The hyperbolic density e^{-sqrt(1 + x^2)} / (2 K1(1))."""
    return np.exp(-np.sqrt(1.0 + np.square(x))) / (2.0 * BESSEL_K1_AT_1)


def drift(x: Any, delta: float) -> Any:
    """Mean m(x) = x (1 - Δ / sqrt(1 + x^2)) of one Euler step."""
    return x * (1.0 - delta / np.sqrt(1.0 + np.square(x)))


def drift_derivative(x: Any, delta: float) -> Any:
    """m'(x) = 1 - Δ (1 + x^2)^{-3/2}, inside [1 - Δ, 1]."""
    return 1.0 - delta * (1.0 + np.square(x))**-1.5


def euler_forward_density(x: Any, y: Any, delta: float) -> Any:
    """Density of the Euler step x -> y, N(m(x), Δ) at y."""
    return stats.norm.pdf(y, loc=drift(x, delta), scale=math.sqrt(delta))


def invert_drift_map(m_target: Any, delta: float) -> Any:
    """Solve m(x) = m_target by safeguarded Newton iteration.

    m is odd and strictly increasing for Δ < 1 with (1 - Δ) x <= m(x)
    <= x for x >= 0, so the root of |m_target| lies in [|m_target|,
    |m_target| / (1 - Δ)]. Newton steps leaving that bracket are
    replaced by bisection.

    Args:
        m_target: Scalar or array.
        delta: The Euler step, in (0, 1).

    Returns:
        x of the same shape, to a tolerance of 1e-12 max(1, |x|).

    Raises:
        ConvergenceError: The tolerance was not reached.
    """

    target: np.ndarray = np.asarray(m_target, dtype=float)
    goal: np.ndarray = np.abs(target)
    lower: np.ndarray = goal.copy()
    upper: np.ndarray = goal / (1.0 - delta)
    x: np.ndarray = goal.copy()
    tolerance: np.ndarray = NEWTON_TOLERANCE * np.maximum(1.0, upper)

    for _ in range(NEWTON_MAX_ITERATIONS):
        residual: np.ndarray = drift(x, delta) - goal
        upper = np.where(residual > 0, x, upper)
        lower = np.where(residual <= 0, x, lower)
        step: np.ndarray = residual / drift_derivative(x, delta)
        candidate: np.ndarray = x - step
        outside: np.ndarray = (candidate < lower) | (candidate > upper)
        candidate = np.where(outside, 0.5 * (lower + upper), candidate)
        converged: np.ndarray = (np.abs(candidate - x) <= tolerance) | (
            upper - lower <= tolerance)
        x = candidate
        if np.all(converged):
            break
    else:
        raise errors.ConvergenceError('Inverting the drift map failed.')

    result: np.ndarray = np.copysign(x, target)
    if result.ndim == 0:
        return float(result)
    return result


def strip_bounds(s: float, p: StripParams) -> tuple[float, float]:
    """Bounds of the strip at time s, linear between (l0, u0) and (lt, ut)."""
    return ((p.lt - p.l0) / p.t * s + p.l0, (p.ut - p.u0) / p.t * s + p.u0)


def proposal_normaliser(y: DiffState, p: StripParams) -> float:
    """C(y) = ∫ π(u) φ_Δ(y.x - m(u)) du over the strip at y.s - 1.

    Raises:
        QuadratureError: The integral did not converge.
    """

    lower, upper = p.bounds_at_step(y.s - 1)
    centre: float = invert_drift_map(y.x, p.delta)
    half_width: float = QUADRATURE_WINDOW * math.sqrt(p.delta) / (1 - p.delta)
    lower = max(lower, centre - half_width)
    upper = min(upper, centre + half_width)
    if not lower < upper:
        return 0.0

    scale: float = math.sqrt(p.delta)

    def integrand(u: float) -> float:
        return (math.exp(-math.sqrt(1.0 + u * u)) / (2.0 * BESSEL_K1_AT_1) *
                math.exp(-0.5 * ((y.x - u *
                                  (1.0 - p.delta / math.sqrt(1.0 + u * u))) /
                                 scale)**2) / (scale * math.sqrt(2 * math.pi)))

    result: tuple = integrate.quad(integrand,
                                   lower,
                                   upper,
                                   epsabs=p.quad_tolerance,
                                   epsrel=p.quad_tolerance,
                                   points=[centre]
                                   if lower < centre < upper else None,
                                   full_output=1)
    if len(result) > 3:
        raise errors.QuadratureError(
            f'Normalising the proposal at {y} failed: {result[3]}')
    return float(result[0])


def sample_predecessor(y: DiffState, p: StripParams,
                       rng: np.random.Generator) -> float:
    """Sample x ∝ π(x) φ_Δ(y.x - m(x)) on the strip at y.s - 1.

    Proposes v ~ N(y.x, Δ) and x = m⁻¹(v), which has density
    φ_Δ(v - y.x) m'(x), and accepts with probability
    (1 - Δ) π(x) / (π(c) m'(x)) if x lies inside the strip, c being
    the point of the strip closest to 0.

    Raises:
        RejectionError: No acceptance within `p.max_attempts`.
    """

    lower, upper = p.bounds_at_step(y.s - 1)
    closest: float = min(max(0.0, lower), upper)
    peak: float = math.sqrt(1.0 + closest * closest)
    scale: float = math.sqrt(p.delta)
    attempts: int = 0
    while attempts < p.max_attempts:
        batch: int = min(REJECTION_BATCH, p.max_attempts - attempts)
        attempts += batch
        x: np.ndarray = invert_drift_map(rng.normal(y.x, scale, size=batch),
                                         p.delta)
        acceptance: np.ndarray = ((1 - p.delta) *
                                  np.exp(peak - np.sqrt(1 + np.square(x))) /
                                  drift_derivative(x, p.delta))
        accepted: np.ndarray = np.flatnonzero(
            (rng.random(batch) < acceptance) & (x > lower) & (x < upper))
        if accepted.size:
            return float(x[accepted[0]])
    raise errors.RejectionError(
        f'No predecessor of {y} accepted in {p.max_attempts} attempts.')


def reverse_propose_diffusion(
        y: DiffState, p: StripParams,
        rng: np.random.Generator) -> tuple[DiffState, float]:
    """Step one Euler step back in time inside the strip.

    Returns:
        The predecessor and the incremental weight, the proposal's
        normaliser divided by π at the predecessor.

    Raises:
        EmptySupportError: `y` lies at time 0 or no point of the strip
            can reach it.
        RejectionError: See `sample_predecessor`.
    """

    if y.s <= 0:
        raise errors.EmptySupportError('Time 0 has no predecessor.')
    normaliser: float = proposal_normaliser(y, p)
    if not normaliser > 0:
        raise errors.EmptySupportError(
            f'No predecessor of {y} inside the strip.')
    x: float = sample_predecessor(y, p, rng)
    return DiffState(y.s - 1, x), normaliser / float(stationary_density(x))


class Hyperbolic(rsmodel.Model):
    """Reverse-time sampler of strip-contained Euler paths.

    The terminal law is uniform on (lt, ut) at the horizon, the
    entrance law the hyperbolic density on (l0, u0).

    Attributes:
        params: Geometry and discretisation.
    """

    name: str = 'hyperbolic'

    def __init__(self, params: StripParams) -> None:
        self.params: StripParams = params

    def inside(self, state: DiffState) -> bool:
        """Strictly inside the strip at the state's time."""
        lower, upper = self.params.bounds_at_step(state.s)
        return lower < state.x < upper

    def forward_density(self, x: DiffState, y: DiffState) -> float:
        if y.s != x.s + 1:
            return 0.0
        return float(euler_forward_density(x.x, y.x, self.params.delta))

    def reverse_propose(
            self, y: DiffState,
            rng: np.random.Generator) -> tuple[DiffState, float]:
        return reverse_propose_diffusion(y, self.params, rng)

    def proposal_density(self, y: DiffState, x: DiffState) -> float:
        if x.s != y.s - 1 or not self.inside(x):
            return 0.0
        return float(
            stationary_density(x.x) *
            euler_forward_density(x.x, y.x, self.params.delta) /
            proposal_normaliser(y, self.params))

    def is_initial(self, state: DiffState) -> bool:
        return state.s == 0

    def is_target(self, state: DiffState) -> bool:
        return (state.s == self.params.steps and
                self.params.lt < state.x < self.params.ut)

    def initial_density(self, state: DiffState) -> float:
        if state.s != 0 or not self.params.l0 < state.x < self.params.u0:
            return 0.0
        return float(stationary_density(state.x))

    def terminal_sample(self, rng: np.random.Generator) -> DiffState:
        return DiffState(self.params.steps,
                         float(rng.uniform(self.params.lt, self.params.ut)))

    def terminal_density(self, state: DiffState) -> float:
        if not self.is_target(state):
            return 0.0
        return 1.0 / (self.params.ut - self.params.lt)

    def level_of(self, particle: rsparticles.Particle) -> int:
        return particle.trajectory.last.s


def initial_mass(p: StripParams) -> float:
    """π-mass of (l0, u0)."""
    return float(
        integrate.quad(stationary_density,
                       p.l0,
                       p.u0,
                       epsabs=p.quad_tolerance,
                       epsrel=p.quad_tolerance)[0])


def sample_truncated_stationary(p: StripParams, count: int,
                                rng: np.random.Generator) -> np.ndarray:
    """Draw from π restricted to (l0, u0) with a uniform envelope."""

    peak: float = float(
        stationary_density(min(max(0.0, p.l0), p.u0)))
    samples: np.ndarray = np.empty(count)
    filled: int = 0
    while filled < count:
        needed: int = count - filled
        proposal: np.ndarray = rng.uniform(p.l0, p.u0, size=2 * needed)
        accept: np.ndarray = proposal[
            rng.random(2 * needed) * peak < stationary_density(proposal)]
        taken: np.ndarray = accept[:needed]
        samples[filled:filled + taken.size] = taken
        filled += taken.size
    return samples


def contained(p: StripParams, start: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    """Simulate Euler paths from `start`, flag those staying inside."""

    x: np.ndarray = start.copy()
    lower, upper = p.bounds_at_step(0)
    alive: np.ndarray = (x > lower) & (x < upper)
    scale: float = math.sqrt(p.delta)
    for s in range(1, p.steps + 1):
        x = drift(x, p.delta) + scale * rng.standard_normal(x.size)
        lower, upper = p.bounds_at_step(s)
        alive &= (x > lower) & (x < upper)
    return alive


def containment_oracle(p: StripParams, count: int,
                       rng: np.random.Generator) -> tuple[float, float]:
    """Estimate the containment probability by forward simulation.

    Paths start from π restricted to (l0, u0); the restriction's mass
    is multiplied back in so the estimate targets the same quantity as
    the reverse-time sampler.

    Args:
        p: Geometry and discretisation.
        count: Number of forward paths M.
        rng: The generator.

    Returns:
        Estimate and standard error.

    Raises:
        SimulationError: No path stayed inside the strip.
    """

    hits: int = 0
    done: int = 0
    while done < count:
        chunk: int = min(ORACLE_CHUNK, count - done)
        hits += int(
            contained(p, sample_truncated_stationary(p, chunk, rng),
                      rng).sum())
        done += chunk
    if hits == 0:
        raise errors.SimulationError(
            f'None of {count} forward paths stayed inside the strip.')
    mass: float = initial_mass(p)
    fraction: float = hits / count
    logger.debug('containment oracle: %s of %s paths inside', hits, count)
    return mass * fraction, mass * math.sqrt(fraction * (1 - fraction) / count)
