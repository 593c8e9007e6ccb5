#!/usr/bin/env python3
"""Worker process running replicates."""

import multiprocessing
import queue
import signal

from typing import Any, Optional

from revsmc import config as rsconfig
from revsmc import event as rsevent
from revsmc import eventsink
from revsmc.experiments import experiment as rsexperiment
from revsmc.experiments import runners
from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)


class Worker(multiprocessing.Process):
    """Runs the replicates it gets from the task queue.

    Every finished replicate is reported to the main process as a `row`
    event per row followed by `replicate_done`; a replicate that raised
    is reported as `replicate_failed`.

    Attributes:
        _name: The name of the worker as known to the main process.
        _config: The validated experiment settings.
        _tasks: Queue providing replicate indices, `None` to stop.
        _to_main: Queue to send events to the main process.
        _log_queue: Queue of the main process' logging process.
        _terminate_signal: Terminates the process if `True`.
        _forward: Engine diagnostics forwarded to the main process.
    """

    def __init__(self,
                 name: str,
                 config: rsexperiment.ExperimentConfig,
                 tasks: multiprocessing.Queue,
                 to_main: multiprocessing.Queue,
                 log_queue: Optional[multiprocessing.Queue] = None,
                 forward: tuple[str, ...] = ('degenerate', )) -> None:
        """Initialises the worker.

        Args:
            name: The name of this worker as known to the main process.
            config: The experiment settings (picklable).
            tasks: Queue of replicate indices.
            to_main: Queue to get messages to the main process.
            log_queue: Queue of the logging process, if any.
            forward: Names of the diagnostic events to forward.
        """

        multiprocessing.Process.__init__(self, name=name, daemon=True)
        self._name: str = name
        self._config: rsexperiment.ExperimentConfig = config
        self._tasks: multiprocessing.Queue = tasks
        self._to_main: multiprocessing.Queue = to_main
        self._log_queue: Optional[multiprocessing.Queue] = log_queue
        self._terminate_signal: bool = False
        self._forward: tuple[str, ...] = forward

    def get_name(self) -> str:
        """Returns the name set by `__init__()`."""
        return self._name

    def on_terminate(self, *values: Any, **params: Any) -> None:
        # pylint: disable=unused-argument
        """Ends execution of the process after a `terminate` event."""
        self._terminate_signal = True

    def send_to_main(self, name: str, *values: Any, **params: Any) -> None:
        """Send an event to the main process.

        Args:
            name: The name of the event.
            *values: A list of values.
            **params: A dictionary of parameters.
        """
        try:
            self._to_main.put_nowait(rsevent.Event(name, *values, **params))
        except queue.Full:
            logger.critical('queue to main process full')

    def run_task(self, replicate: int, sink: eventsink.EventSink) -> None:
        """Run one replicate and report its rows."""

        try:
            rows: list[rsexperiment.ResultRow] = runners.run_replicate(
                self._config, replicate, sink)
        except rsconfig.ConfigError as e:
            logger.error('replicate %s: %s', replicate, e)
            self.send_to_main('replicate_failed', replicate, str(e),
                              config_error=True)
            return
        except Exception as e:  # pylint: disable=broad-except
            logger.exception('replicate %s failed', replicate)
            self.send_to_main('replicate_failed', replicate,
                              f'{type(e).__name__}: {e}')
            return
        for row in rows:
            self.send_to_main('row', row)
        self.send_to_main('replicate_done', replicate, len(rows))

    def run(self) -> None:
        """Gets called when the process is started.

        Takes replicate indices from the task queue until it gets
        `None` or is told to terminate.
        """

        signal.signal(signal.SIGINT, lambda signal_num, frame: ...)
        signal.signal(signal.SIGTERM, self._on_signal)

        if self._log_queue is not None:
            rslogging.attach_queue(self._log_queue)
        logger.debug('%s running', self.get_name())

        sink: eventsink.QueueSink = eventsink.QueueSink(
            self._to_main, self._forward)
        while not self._terminate_signal:
            try:
                task: Optional[int] = self._tasks.get(True, 0.1)
            except queue.Empty:
                continue
            except ValueError:
                logger.error('%s holds a closed queue', self.get_name())
                break
            if task is None:
                break
            self.run_task(task, sink)
        logger.debug('%s exited main loop', self.get_name())

    def _on_signal(self, signal_num: int, frame: object) -> None:
        # pylint: disable=unused-argument
        self.on_terminate()
