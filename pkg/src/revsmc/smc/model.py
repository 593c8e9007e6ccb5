#!/usr/bin/env python3
"""The contract a model implements to be run by the reverse-time engine."""

import math

from typing import Any

import numpy as np

from revsmc.smc import particles


class Model():
    """Base class for models.

    A model describes a forward Markov chain with an initial set I,
    entrance law μ on I, a target set T and a terminal law ν on T, plus
    a reverse proposal that walks from T back to I.

    Subclasses must be usable from several particles at once, i.e.,
    proposals may not modify the model.
    """

    name: str = 'model'

    def forward_density(self, x: Any, y: Any) -> float:
        """Return the probability (density) of the forward step x -> y."""
        raise NotImplementedError

    def reverse_propose(self, y: Any,
                        rng: np.random.Generator) -> tuple[Any, float]:
        """Sample a predecessor of `y` outside the target set.

        Args:
            y: The current (later) state.
            rng: The particle's generator.

        Returns:
            The predecessor x and the weight increment, the forward
            density of x -> y over the proposal density of x.

        Raises:
            EmptySupportError: No predecessor is admissible.
        """
        raise NotImplementedError

    def proposal_density(self, y: Any, x: Any) -> float:
        """Return the density with which `reverse_propose(y)` yields x."""
        raise NotImplementedError

    def is_initial(self, state: Any) -> bool:
        """Membership in I."""
        raise NotImplementedError

    def is_target(self, state: Any) -> bool:
        """Membership in T."""
        raise NotImplementedError

    def initial_density(self, state: Any) -> float:
        """The entrance law μ."""
        raise NotImplementedError

    def terminal_sample(self, rng: np.random.Generator) -> Any:
        """Draw from the terminal law ν."""
        raise NotImplementedError

    def terminal_density(self, state: Any) -> float:
        """The terminal law ν."""
        raise NotImplementedError

    def level_of(self, particle: particles.Particle) -> int:
        """Return the deepest level the particle has crossed.

        Levels count down to the level of I and may only decrease along
        a trajectory. `particle.level_index` holds the previous value
        (`particles.UNSET_LEVEL` before the first call).
        """
        raise NotImplementedError

    def log_increment(self, y: Any, x: Any) -> float:
        """Recompute the log weight increment of the step y -> x.

        Used to check stored weights against the trajectory.
        """

        forward: float = self.forward_density(x, y)
        proposal: float = self.proposal_density(y, x)
        if forward <= 0 or proposal <= 0:
            return -math.inf
        return math.log(forward) - math.log(proposal)
