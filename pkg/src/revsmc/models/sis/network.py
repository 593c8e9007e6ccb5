#!/usr/bin/env python3
"""Contact networks and observed infection files.

Networks are either rectangular grids with 4-nearest-neighbour edges
or read from an edge list, a plain utf-8 text file like this:

    # comment
    u v
    v w

Vertex labels in edge lists are arbitrary tokens; they are numbered in
order of appearance. Observed configurations are stored one infected
vertex per line, as `row col` on grids and as the label otherwise.
"""

import pathlib

from typing import Optional

import numpy as np

from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

# column order of `Network.directions`
UP: int = 0
DOWN: int = 1
RIGHT: int = 2
LEFT: int = 3


class Network():
    """An undirected network on the vertices 0..n-1.

    Attributes:
        size: Number of vertices |V|.
        neighbours: Neighbour lists.
        padded: (size, max degree) neighbour array, padded with `size`.
        degree: Vertex degrees.
        coordinates: (size, 2) array of (row, col) on grids, else
            `None`.
        directions: (size, 4) array of the neighbours above, below,
            right and left (-1 off the grid) on grids, else `None`.
        labels: Vertex labels.
        shape: (rows, cols) on grids.
    """

    def __init__(self,
                 neighbours: list[list[int]],
                 labels: Optional[list[str]] = None,
                 coordinates: Optional[np.ndarray] = None,
                 directions: Optional[np.ndarray] = None) -> None:
        self.size: int = len(neighbours)
        self.neighbours: list[tuple[int, ...]] = [
            tuple(sorted(set(adjacent))) for adjacent in neighbours
        ]
        self.degree: np.ndarray = np.array(
            [len(adjacent) for adjacent in self.neighbours], dtype=int)
        width: int = int(self.degree.max()) if self.size else 0
        self.padded: np.ndarray = np.full((self.size, max(width, 1)),
                                          self.size,
                                          dtype=int)
        for vertex, adjacent in enumerate(self.neighbours):
            self.padded[vertex, :len(adjacent)] = adjacent
        self.labels: list[str] = (labels if labels is not None else
                                  [str(vertex) for vertex in range(self.size)])
        self.coordinates: Optional[np.ndarray] = coordinates
        self.directions: Optional[np.ndarray] = directions
        self.shape: tuple[int, int] = (0, 0)

    @classmethod
    def grid(cls, rows: int, cols: int) -> 'Network':
        """Return the rows x cols grid, vertex r * cols + c at (r, c)."""

        if rows < 1 or cols < 1:
            raise ValueError('A grid needs at least one row and column.')
        neighbours: list[list[int]] = []
        directions: np.ndarray = np.full((rows * cols, 4), -1, dtype=int)
        for row in range(rows):
            for col in range(cols):
                vertex: int = row * cols + col
                if row + 1 < rows:
                    directions[vertex, UP] = vertex + cols
                if row > 0:
                    directions[vertex, DOWN] = vertex - cols
                if col + 1 < cols:
                    directions[vertex, RIGHT] = vertex + 1
                if col > 0:
                    directions[vertex, LEFT] = vertex - 1
                neighbours.append([
                    int(adjacent)
                    for adjacent in directions[vertex]
                    if adjacent >= 0
                ])
        coordinates: np.ndarray = np.array(
            [(row, col) for row in range(rows) for col in range(cols)],
            dtype=float)
        labels: list[str] = [
            f'{row} {col}' for row in range(rows) for col in range(cols)
        ]
        network: Network = cls(neighbours, labels, coordinates, directions)
        network.shape = (rows, cols)
        return network

    @classmethod
    def from_edge_list(cls, path: pathlib.Path) -> 'Network':
        """Load a network from an edge list.

        Malformed lines and self loops are logged and skipped.

        Raises:
            FileNotFoundError: The file does not exist.
            ValueError: The file holds no edge.
        """

        path = pathlib.Path(path).expanduser()
        index: dict[str, int] = {}
        edges: list[tuple[int, int]] = []

        with path.open('r', encoding='utf-8') as raw_edges:
            lines: list[str] = raw_edges.readlines()

        for line in lines:

            if line == '' or line[0] == '#':
                # a comment
                continue

            line = line.strip()
            if line == '':
                continue

            try:
                edges.append(cls._process_line(line, index))
            except ValueError:
                logger.error('malformed line: "%s"', line)
                continue

        if not edges:
            raise ValueError(f'No edge found in {path}.')

        neighbours: list[list[int]] = [[] for _ in index]
        for u, v in edges:
            neighbours[u].append(v)
            neighbours[v].append(u)
        logger.debug('loaded network with %s vertices from "%s"', len(index),
                     str(path))
        return cls(neighbours, list(index))

    @staticmethod
    def _process_line(raw_line: str,
                      index: dict[str, int]) -> tuple[int, int]:
        """Parse a line `u v`, numbering unseen labels.

        Raises:
            ValueError: Not exactly two distinct tokens.
        """

        tokens: list[str] = raw_line.split()
        if len(tokens) != 2 or tokens[0] == tokens[1]:
            raise ValueError('an edge needs two distinct vertices')
        for token in tokens:
            if token not in index:
                index[token] = len(index)
        return index[tokens[0]], index[tokens[1]]

    @property
    def is_grid(self) -> bool:
        """Directional neighbours are known."""
        return self.directions is not None

    def vertex_at(self, row: int, col: int) -> int:
        """Return the grid vertex at (row, col).

        Raises:
            ValueError: Not a grid or outside it.
        """

        if not self.is_grid:
            raise ValueError('Not a grid network.')
        rows, cols = self.shape
        if not (0 <= row < rows and 0 <= col < cols):
            raise ValueError(f'({row}, {col}) lies outside the grid.')
        return row * cols + col

    def distance(self, u: int, v: int) -> int:
        """Manhattan distance between two grid vertices.

        Raises:
            ValueError: Not a grid.
        """

        if self.coordinates is None:
            raise ValueError('Distances need a grid network.')
        return int(np.abs(self.coordinates[u] - self.coordinates[v]).sum())

    def is_connected(self, vertices: list[int]) -> bool:
        """Do the vertices induce a connected subgraph?"""

        remaining: set[int] = set(vertices)
        if not remaining:
            return True
        stack: list[int] = [remaining.pop()]
        while stack:
            vertex: int = stack.pop()
            for adjacent in self.neighbours[vertex]:
                if adjacent in remaining:
                    remaining.remove(adjacent)
                    stack.append(adjacent)
        return not remaining


def load_observed(path: pathlib.Path, network: Network) -> list[int]:
    """Read an observed infected set, one vertex per line.

    Raises:
        FileNotFoundError: The file does not exist.
        ValueError: A line names no vertex of the network.
    """

    path = pathlib.Path(path).expanduser()
    lookup: dict[str, int] = {
        label: vertex for vertex, label in enumerate(network.labels)
    }
    infected: list[int] = []

    with path.open('r', encoding='utf-8') as raw_observed:
        lines: list[str] = raw_observed.readlines()

    for line in lines:
        if line == '' or line[0] == '#':
            continue
        label: str = ' '.join(line.split())
        if label == '':
            continue
        if label not in lookup:
            raise ValueError(f'"{label}" is no vertex of the network.')
        infected.append(lookup[label])

    logger.debug('loaded %s infected vertices from "%s"', len(infected),
                 str(path))
    return sorted(set(infected))


def save_observed(path: pathlib.Path, network: Network,
                  infected: list[int]) -> None:
    """Write an infected set in the format `load_observed()` reads."""

    path = pathlib.Path(path).expanduser()
    with path.open('w', encoding='utf-8') as raw_observed:
        raw_observed.write('# observed infected vertices\n')
        for vertex in sorted(infected):
            raw_observed.write(network.labels[vertex] + '\n')
