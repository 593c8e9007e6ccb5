#!/usr/bin/env python3
"""Reaction coordinates and path kernels of the splitting baseline.

Forward paths are stored in forward time order. ATM paths are lists of
`AtmState` from the entrance state until the queue overflows or empties
again. Diffusion paths are arrays of positions x_0, x_1, ... (x_s at
time s Δ) ending at the horizon or at the first position outside the
strip.

Every kernel takes the current level and only returns proposals whose
reaction coordinate exceeds it (`strict`) or reaches it. Kernels with
`mh_correction` accept with the Metropolis-Hastings ratio of the path
law and preserve the path law conditioned on the level; without it
they apply the step change plainly.
"""

import math

import numpy as np

from revsmc import errors
from revsmc.models.atm import atm as rsatm
from revsmc.models.hyperbolic import hyperbolic as rshyp
from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

MAX_PATH_STEPS: int = 1_000_000

ARRIVAL: int = 0
SERVICE: int = 1
SOURCE_ON: int = 2
SOURCE_OFF: int = 3

_OFFSETS: dict[int, tuple[int, int]] = {
    ARRIVAL: (1, 0),
    SERVICE: (-1, 0),
    SOURCE_ON: (0, 1),
    SOURCE_OFF: (0, -1)
}


def _passes(score: int, level: int, strict: bool) -> bool:
    return score > level if strict else score >= level


# ATM


def psi_atm(path: list[rsatm.AtmState]) -> int:
    """The largest queue length along the path."""
    return max(state.i for state in path)


def atm_path_ended(path: list[rsatm.AtmState], p: rsatm.AtmParams) -> bool:
    """The path overflowed or emptied the queue after its first state."""
    last: rsatm.AtmState = path[-1]
    return last.i >= p.b or (len(path) > 1 and last.i == 0)


def atm_moves(x: rsatm.AtmState, p: rsatm.AtmParams) -> list[int]:
    """Move types with positive rate out of x."""

    moves: list[int] = []
    if x.j > 0:
        moves.append(ARRIVAL)
    if x.i > 0:
        moves.append(SERVICE)
    if x.j < p.K:
        moves.append(SOURCE_ON)
    if x.j > 0:
        moves.append(SOURCE_OFF)
    return moves


def apply_move(x: rsatm.AtmState, move: int) -> rsatm.AtmState:
    """The state a move type leads to, possibly outside the state space."""
    di, dj = _OFFSETS[move]
    return rsatm.AtmState(x.i + di, x.j + dj)


def move_between(x: rsatm.AtmState, y: rsatm.AtmState) -> int:
    """The move type of the step x -> y.

    Raises:
        ValueError: y is no neighbour of x.
    """

    for move, offset in _OFFSETS.items():
        if (y.i - x.i, y.j - x.j) == offset:
            return move
    raise ValueError(f'{x} -> {y} is no single move.')


def continue_atm_path(path: list[rsatm.AtmState], p: rsatm.AtmParams,
                      rng: np.random.Generator) -> list[rsatm.AtmState]:
    """Extend a path with the jump chain until it ends.

    Raises:
        SimulationError: The path did not end within `MAX_PATH_STEPS`.
    """

    while not atm_path_ended(path, p):
        if len(path) > MAX_PATH_STEPS:
            raise errors.SimulationError(
                f'An ATM path did not end within {MAX_PATH_STEPS} steps.')
        found: list[tuple[rsatm.AtmState, float]] = rsatm.successors(
            path[-1], p)
        threshold: float = rng.random()
        chosen: rsatm.AtmState = found[-1][0]
        for successor, probability in found:
            threshold -= probability
            if threshold < 0:
                chosen = successor
                break
        path.append(chosen)
    return path


def simulate_atm_path(p: rsatm.AtmParams,
                      rng: np.random.Generator) -> list[rsatm.AtmState]:
    """Draw the entrance state from μ and run the jump chain."""
    start: rsatm.AtmState = rsatm.AtmState(
        0, int(rng.binomial(p.K, p.on_probability)))
    return continue_atm_path([start], p, rng)


def mcmc_kernel_atm(path: list[rsatm.AtmState],
                    level: int,
                    rng: np.random.Generator,
                    p: rsatm.AtmParams,
                    mh_correction: bool = True,
                    strict: bool = False) -> list[rsatm.AtmState]:
    """One step of the ATM path kernel.

    A time point t >= 1 is chosen uniformly and the step out of x_{t-1}
    replaced by a uniformly chosen possible move.

    With `mh_correction` the new move differs from the old one, the
    rest of the path is drawn from the jump chain and the proposal is
    accepted with probability
    min(1, n P(x_{t-1}, x'_t) / (n' P(x_{t-1}, x_t))) for path lengths
    n, n'. Otherwise the remaining move types are reattached, the path
    truncated when it ends and refilled from the jump chain if it
    stops short; reattached moves leaving 0..K are rejected.

    Args:
        path: A path with Ψ >= level (> level if `strict`).
        level: The current level.
        rng: The generator.
        p: The parameters.
        mh_correction: Apply the Metropolis-Hastings correction.
        strict: Require Ψ > level instead of Ψ >= level.

    Returns:
        The new path or `path` itself on rejection.
    """

    steps: int = len(path) - 1
    if steps < 1:
        return path
    t: int = int(rng.integers(1, steps + 1))
    previous: rsatm.AtmState = path[t - 1]
    moves: list[int] = atm_moves(previous, p)

    if mh_correction:
        moves = [
            move for move in moves if apply_move(previous, move) != path[t]
        ]
        if not moves:
            return path
        chosen: int = moves[int(rng.integers(len(moves)))]
        state: rsatm.AtmState = apply_move(previous, chosen)
        proposal: list[rsatm.AtmState] = continue_atm_path(
            path[:t] + [state], p, rng)
        if not _passes(psi_atm(proposal), level, strict):
            return path
        ratio: float = (steps * rsatm.forward_jump_prob(previous, state, p) /
                        ((len(proposal) - 1) *
                         rsatm.forward_jump_prob(previous, path[t], p)))
        return proposal if rng.random() < ratio else path

    proposal = path[:t] + [
        apply_move(previous, moves[int(rng.integers(len(moves)))])
    ]
    for index in range(t + 1, len(path)):
        if atm_path_ended(proposal, p):
            break
        move: int = move_between(path[index - 1], path[index])
        if move not in atm_moves(proposal[-1], p):
            return path
        proposal.append(apply_move(proposal[-1], move))
    proposal = continue_atm_path(proposal, p, rng)
    if not _passes(psi_atm(proposal), level, strict):
        return path
    return proposal


# diffusion


def psi_diffusion(path: np.ndarray, p: rshyp.StripParams) -> int:
    """Steps the path stays strictly inside the strip.

    The grid index before the first position outside the strip, the
    number of steps t / Δ for a contained path.
    """

    positions: np.ndarray = np.asarray(path, dtype=float)
    lower, upper = rshyp.strip_bounds(
        np.arange(positions.size) * p.delta, p)
    outside: np.ndarray = np.flatnonzero(~((positions > lower) &
                                           (positions < upper)))
    if outside.size:
        return int(outside[0]) - 1
    return positions.size - 1


def _inside(s: int, x: float, p: rshyp.StripParams) -> bool:
    lower, upper = p.bounds_at_step(s)
    return lower < x < upper


def continue_diffusion_path(path: list[float], p: rshyp.StripParams,
                            rng: np.random.Generator) -> np.ndarray:
    """Run Euler steps until the horizon or the first exit."""

    scale: float = math.sqrt(p.delta)
    while (len(path) - 1 < p.steps and
           _inside(len(path) - 1, path[-1], p)):
        path.append(
            float(rshyp.drift(path[-1], p.delta)) +
            scale * float(rng.standard_normal()))
    return np.array(path)


def simulate_diffusion_path(p: rshyp.StripParams, start: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Run the Euler chain from `start`."""
    return continue_diffusion_path([float(start)], p, rng)


def mcmc_kernel_diffusion(path: np.ndarray,
                          level: int,
                          rng: np.random.Generator,
                          p: rshyp.StripParams,
                          mh_correction: bool = True,
                          strict: bool = False) -> np.ndarray:
    """One step of the diffusion path kernel.

    A non-initial time point s is chosen uniformly. Up to the level the
    position x_s is proposed uniformly on the strip, beyond it from the
    Euler kernel out of x_{s-1}.

    With `mh_correction` the rest of the path is drawn from the Euler
    chain and the proposal accepted with probability
    min(1, n/n' · φ(x'_s | x_{s-1}) / φ(x_s | x_{s-1})), the density
    ratio dropping for Euler proposals. Otherwise the Gaussian
    innovations of the old path are reattached, the path truncated at
    its first exit and refilled from the Euler chain if it stops short
    of the horizon.

    Args:
        path: A path with Ψ >= level (> level if `strict`).
        level: The current level in steps.
        rng: The generator.
        p: Geometry and discretisation.
        mh_correction: Apply the Metropolis-Hastings correction.
        strict: Require Ψ > level instead of Ψ >= level.

    Returns:
        The new path or `path` itself on rejection.
    """

    steps: int = path.size - 1
    if steps < 1:
        return path
    s: int = int(rng.integers(1, steps + 1))
    origin: float = float(rshyp.drift(path[s - 1], p.delta))
    uniform: bool = s <= level
    if uniform:
        position: float = float(rng.uniform(*p.bounds_at_step(s)))
    else:
        position = origin + math.sqrt(p.delta) * float(rng.standard_normal())

    if mh_correction:
        proposal: np.ndarray = continue_diffusion_path(
            path[:s].tolist() + [position], p, rng)
        if not _passes(psi_diffusion(proposal, p), level, strict):
            return path
        log_ratio: float = math.log(steps / (proposal.size - 1))
        if uniform:
            scale: float = math.sqrt(p.delta)
            log_ratio -= 0.5 * (((position - origin) / scale)**2 -
                                ((path[s] - origin) / scale)**2)
        if rng.random() < math.exp(min(0.0, log_ratio)):
            return proposal
        return path

    innovations: np.ndarray = path[s + 1:] - rshyp.drift(path[s:-1], p.delta)
    values: list[float] = path[:s].tolist() + [position]
    for innovation in innovations:
        if not _inside(len(values) - 1, values[-1], p):
            break
        values.append(
            float(rshyp.drift(values[-1], p.delta)) + float(innovation))
    proposal = continue_diffusion_path(values, p, rng)
    if not _passes(psi_diffusion(proposal, p), level, strict):
        return path
    return proposal
