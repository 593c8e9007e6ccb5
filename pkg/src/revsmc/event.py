#!/usr/bin/env python3
"""Progress messages sent from engines and workers to the main process."""

from typing import Any


class Event():
    """A named progress message, e.g. `resample` or `particle_zeroed`.

    Events must be picklable, they travel through `multiprocessing`
    queues from the workers to the main process.

    Attributes:
        name: What happened, the handler is looked up by it.
        values: Positional payload, e.g. the level and the ESS.
        params: Keyword payload.
    """
    __slots__ = ['name', 'values', 'params']

    def __init__(self, name: str, *values: Any, **params: Any) -> None:
        self.name: str = name
        self.values: list[Any] = list(values)
        self.params: dict[str, Any] = dict(params)

    def __repr__(self) -> str:
        return f'Event({self.name!r}, {self.values!r}, {self.params!r})'
