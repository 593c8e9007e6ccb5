#!/usr/bin/env python3
"""Sinks the engine, the splitting baseline and the runner emit to.

Diagnostics (level crossings, resampling, zeroed particles, result
rows) are not returned but emitted as named events. Whoever is
interested registers a callback for the event name.
"""

import multiprocessing
import queue

from typing import Any, Callable

from revsmc import event as rsevent
from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

Callback = Callable[..., None]


class EventSink():
    """Dispatches events to callbacks registered for them.

    Attributes:
        _events: A dictionary of events and their subscribers.
    """

    def __init__(self) -> None:
        self._events: dict[str, list[Callback]] = {}

    def get_subscribers(self, event: str) -> list[Callback]:
        """Returns a list of subscribers for a given event.

        Creates and returns an empty list if the event has not yet been
        created.

        Args:
            event: The name of the event to get subscribers for.

        Returns:
            A list of callbacks that want to be notified.
        """

        if not event in self._events:
            self._events[event] = []

        return self._events[event]

    def register(self,
                 event: str,
                 callback: Callback,
                 exclusive: bool = False) -> None:
        """Registers a callback to be notified at an event.

        Args:
            event: The name of the event.
            callback: The callable to notify.
            exclusive: Remove all other subscribers.
        """

        subscribers: list[Callback] = self.get_subscribers(event)

        if exclusive:
            self._events[event] = [callback]
        elif not callback in subscribers:
            subscribers.append(callback)

    def unregister(self, event: str, callback: Callback) -> None:
        """Removes a callback from the group of subscribers.

        Args:
            event: The name of the event.
            callback: The callable to unregister.
        """

        subscribers: list[Callback] = self.get_subscribers(event)

        if callback in subscribers:
            subscribers.remove(callback)
        else:
            logger.error('no such subscriber for event %s', event)

    def emit(self, event: str, *values: Any, **params: Any) -> None:
        """Emit an event to all its subscribers.

        Args:
            event: The name of the event.
            *values: A list of values.
            **params: A dictionary of parameters.
        """

        subscribers: list[Callback] = self.get_subscribers(event)

        if len(subscribers) == 0:
            logger.debug('%s %s %s', event, values, params)
            return

        for subscriber in subscribers:
            subscriber(*values, **params)


class QueueSink(EventSink):
    """Forwards every event through a queue to another process.

    Used by worker processes; the main process unpacks the events and
    dispatches them to its own sink.

    Attributes:
        _queue: The queue to the main process.
        _forward: Names of the events to forward, all if empty.
    """

    def __init__(self,
                 to_main: multiprocessing.Queue,
                 forward: tuple[str, ...] = ()) -> None:
        """Initialise the sink.

        Args:
            to_main: The queue to the main process.
            forward: Names of the events to forward, all if empty.
        """

        super().__init__()
        self._queue: multiprocessing.Queue = to_main
        self._forward: tuple[str, ...] = forward

    def emit(self, event: str, *values: Any, **params: Any) -> None:
        """Put the event on the queue and notify local subscribers."""

        if not self._forward or event in self._forward:
            try:
                self._queue.put_nowait(rsevent.Event(event, *values, **params))
            except queue.Full:
                logger.critical('queue to main process full')
        super().emit(event, *values, **params)


class RecordingSink(EventSink):
    """Keeps every emitted event, e.g., to inspect a run afterwards.

    Attributes:
        records: The events in emission order.
    """

    def __init__(self) -> None:
        super().__init__()
        self.records: list[rsevent.Event] = []

    def emit(self, event: str, *values: Any, **params: Any) -> None:
        """Record the event and notify local subscribers."""

        self.records.append(rsevent.Event(event, *values, **params))
        super().emit(event, *values, **params)

    def named(self, event: str) -> list[rsevent.Event]:
        """Return all recorded events with the given name."""
        return [record for record in self.records if record.name == event]
