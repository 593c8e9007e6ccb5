#!/usr/bin/env python3
"""Green's functions of finite absorbing chains.

G(μ, x) is the expected number of visits to x before the chain started
from μ hits the target set T. On T^c it solves G = μ + G P, with P
restricted to T^c; on T it is 0 by convention.
"""

from typing import Any, Iterable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from revsmc import errors

# a visit count beyond this means the chain does not get absorbed
_MAX_VISITS: float = 1e12


def green_function_oracle(transition: Any, mu: Any,
                          target: Iterable[int]) -> np.ndarray:
    """Solve for the Green's function of a finite chain.

    Args:
        transition: Row-stochastic matrix P (dense or scipy.sparse).
        mu: Initial distribution.
        target: Indices of the states in T.

    Returns:
        G(μ, x) for every state x, 0 on T.

    Raises:
        SingularSystemError: The chain is not absorbed in T almost
            surely (the system is singular or numerically so).
        ValueError: Shapes do not match.
    """

    matrix: sparse.csr_matrix = sparse.csr_matrix(transition, dtype=float)
    initial: np.ndarray = np.asarray(mu, dtype=float)
    size: int = matrix.shape[0]
    if matrix.shape != (size, size) or initial.shape != (size, ):
        raise ValueError('Transition matrix and initial law do not match.')

    in_target: np.ndarray = np.zeros(size, dtype=bool)
    in_target[list(target)] = True
    free: np.ndarray = np.flatnonzero(~in_target)
    green: np.ndarray = np.zeros(size)
    if free.size == 0:
        return green

    restricted: sparse.csc_matrix = matrix[free][:, free].tocsc()
    system: sparse.csc_matrix = (sparse.identity(free.size, format='csc') -
                                 restricted).T.tocsc()
    try:
        solution: np.ndarray = sparse_linalg.splu(system).solve(
            initial[free])
    except RuntimeError as e:
        raise errors.SingularSystemError(
            'The chain is not absorbed in the target set.') from e

    if (not np.all(np.isfinite(solution)) or
            np.abs(solution).max(initial=0.0) > _MAX_VISITS):
        raise errors.SingularSystemError(
            'The chain is not absorbed in the target set.')
    green[free] = solution
    return green


def resampling_product_chain(
        base: Any, conditional: Any, base_initial: Any,
        kill: float) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Build a chain on pairs (z, y) with a time-independent CSD.

    Every step the chain is killed (moved to a cemetery, the only target
    state) with probability `kill`; otherwise z moves with `base` and y
    is drawn afresh from `conditional[z]`. The conditional law of y
    given z is then the same at every time, so Green's function ratios
    at fixed z equal ratios of `conditional[z]`.

    Args:
        base: Row-stochastic (nz, nz) matrix moving z.
        conditional: (nz, ny) matrix, row z the law of y given z.
        base_initial: Initial law of z.
        kill: Killing probability in (0, 1].

    Returns:
        Transition matrix, initial law and target indices; the pair
        (z, y) has index z * ny + y, the cemetery index nz * ny.
    """

    moves: np.ndarray = np.asarray(base, dtype=float)
    law: np.ndarray = np.asarray(conditional, dtype=float)
    start: np.ndarray = np.asarray(base_initial, dtype=float)
    nz, ny = law.shape
    cemetery: int = nz * ny

    transition: np.ndarray = np.zeros((cemetery + 1, cemetery + 1))
    # row (z, y) -> column (z', y') = (1 - kill) base[z, z'] law[z', y']
    pairs: np.ndarray = (1 - kill) * (moves[:, :, None] *
                                      law[None, :, :]).reshape(nz, cemetery)
    transition[:cemetery, :cemetery] = np.repeat(pairs, ny, axis=0)
    transition[:cemetery, cemetery] = kill
    transition[cemetery, cemetery] = 1.0

    initial: np.ndarray = np.zeros(cemetery + 1)
    initial[:cemetery] = (start[:, None] * law).reshape(cemetery)
    return transition, initial, [cemetery]
