#!/usr/bin/env python3
"""revsmc: reverse-time multilevel SMC experiments."""

import argparse
import csv
import logging
import multiprocessing
import os
import pathlib
import queue
import signal
import sys

from typing import Any, Optional

from revsmc import config as rsconfig
from revsmc import event as rsevent
from revsmc import eventsink
from revsmc import worker as rsworker
from revsmc.experiments import experiment as rsexperiment
from revsmc.experiments import output
from revsmc.experiments import runners
from revsmc.experiments import summarize as rssummarize
from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

EXIT_OK: int = 0
EXIT_CONFIG: int = 2
EXIT_DEGENERATE: int = 3


class Revsmc:
    """Main unit running an experiment.

    Replicates run in this process (`jobs` = 1) or in worker processes
    fed through a task queue. Rows are buffered per replicate and
    written in replicate order, so the output does not depend on the
    number of workers.

    Handles logging:
    With workers, logging is done by its own process.

    Attributes:
        _config: The experiment.
        _writer: The result file.
        _pending: Rows of finished replicates not yet written.
        _received: Rows received for replicates still running.
        _next: The next replicate to write.
        _finished: Number of replicates done or failed.
        _rows_total: Number of rows written.
        _rows_degenerate: Number of degenerate rows written.
        _config_error: A replicate hit a configuration error.
        _terminate_signal: Leave the main loop.
        _sink: Dispatches events to the `on_EVENT` methods.
    """

    def __init__(self, config: rsexperiment.ExperimentConfig) -> None:
        self._config: rsexperiment.ExperimentConfig = config
        self._pending: dict[int, list[rsexperiment.ResultRow]] = {}
        self._received: dict[int, list[rsexperiment.ResultRow]] = {}
        self._next: int = 0
        self._finished: int = 0
        self._rows_total: int = 0
        self._rows_degenerate: int = 0
        self._config_error: bool = False
        self._terminate_signal: bool = False
        self._writer: Optional[output.ResultWriter] = None
        self._sink: eventsink.EventSink = eventsink.EventSink()
        for name in ('row', 'replicate_done', 'replicate_failed',
                     'degenerate', 'terminate'):
            self._sink.register(name, getattr(self, 'on_' + name))

    def run(self) -> int:
        """Run the experiment.

        Returns:
            The exit code.
        """

        signal.signal(signal.SIGINT, self.on_interrupt)
        signal.signal(signal.SIGTERM, self.on_interrupt)

        logger.debug('this is revsmc running with pid %s', os.getpid())
        metadata: dict[str, Any] = {
            'experiment': self._config.experiment,
            'seed': self._config.seed,
            'n': self._config.n,
            'replicates': self._config.replicates,
            'config': self._config.echo
        }

        with output.ResultWriter(self._config.out, metadata) as writer:
            self._writer = writer
            if self._config.jobs == 1 or self._config.replicates == 1:
                self.run_here()
            else:
                self.run_workers()
            self._writer = None

        if self._config_error:
            return EXIT_CONFIG
        if self._rows_total > 0 and self._rows_degenerate == self._rows_total:
            logger.error('every row of the run is degenerate')
            return EXIT_DEGENERATE
        return EXIT_OK

    def run_here(self) -> None:
        """Run all replicates in this process."""

        for replicate in range(self._config.replicates):
            if self._terminate_signal:
                break
            try:
                rows: list[rsexperiment.ResultRow] = runners.run_replicate(
                    self._config, replicate, self._sink)
            except rsconfig.ConfigError as e:
                self.on_replicate_failed(replicate, str(e), config_error=True)
                break
            except Exception as e:  # pylint: disable=broad-except
                logger.exception('replicate %s failed', replicate)
                self.on_replicate_failed(replicate, f'{type(e).__name__}: {e}')
                continue
            for row in rows:
                self.on_row(row)
            self.on_replicate_done(replicate, len(rows))

    def run_workers(self) -> None:
        """Distribute the replicates over worker processes."""

        self.start_logging()
        tasks: multiprocessing.Queue = multiprocessing.Queue()
        from_workers: multiprocessing.Queue = multiprocessing.Queue()
        jobs: int = min(self._config.jobs, self._config.replicates)
        for replicate in range(self._config.replicates):
            tasks.put(replicate)
        for _ in range(jobs):
            tasks.put(None)

        workers: list[rsworker.Worker] = [
            rsworker.Worker(f'worker-{index}', self._config, tasks,
                            from_workers, self._logger_queue)
            for index in range(jobs)
        ]
        for process in workers:
            logger.debug('starting process %s', process.get_name())
            process.start()

        while (not self._terminate_signal and
               self._finished < self._config.replicates):
            try:
                event: rsevent.Event = from_workers.get(True, 0.1)
                self.process_event(event)
            except queue.Empty:
                if not any(process.is_alive() for process in workers):
                    logger.error('all workers stopped early')
                    break
            except ValueError:
                logger.error('queue from workers closed')
                break

        logger.debug('exited main loop')
        for process in workers:
            if self._terminate_signal:
                process.terminate()
            process.join()
        logger.debug('all worker processes stopped')

        self.stop_logging()

    def process_event(self, event: rsevent.Event) -> None:
        """Dispatch an event from a worker to its `on_EVENT` method."""
        self._sink.emit(event.name, *event.values, **event.params)

    def on_row(self, row: rsexperiment.ResultRow) -> None:
        """Keep a row until its replicate is done."""
        self._received.setdefault(row.replicate, []).append(row)

    def on_replicate_done(self, replicate: int, count: int) -> None:
        """Queue the replicate's rows and write what is in order."""

        rows: list[rsexperiment.ResultRow] = self._received.pop(replicate, [])
        if len(rows) != count:
            logger.error('replicate %s: expected %s rows, got %s', replicate,
                         count, len(rows))
        self._pending[replicate] = rows
        self._finished += 1
        logger.info('replicate %s done (%s of %s)', replicate,
                    self._finished, self._config.replicates)
        self.flush()

    def on_replicate_failed(self,
                            replicate: int,
                            message: str,
                            config_error: bool = False) -> None:
        """Record a replicate that raised; it produces no rows."""

        logger.error('replicate %s failed: %s', replicate, message)
        self._received.pop(replicate, None)
        self._pending[replicate] = []
        self._finished += 1
        if config_error:
            self._config_error = True
            self.on_terminate()
        self.flush()

    def on_degenerate(self, reason: str) -> None:
        """Log degeneracy reported by the engine."""
        logger.debug('degenerate run: %s', reason)

    def on_terminate(self, *values: Any, **params: Any) -> None:
        # pylint: disable=unused-argument
        """Leave the main loop."""
        self._terminate_signal = True

    def on_interrupt(self, signal_num: int, frame: object) -> None:
        # pylint: disable=unused-argument
        """Stop the running experiment on interrupt.

        Args:
            signal_num: The signal number that was sent to the process.
            frame: The current stack frame.
        """

        self._sink.emit('terminate')

    def flush(self) -> None:
        """Write the rows of all replicates that are next in order."""

        while self._next in self._pending:
            for row in self._pending.pop(self._next):
                if self._writer is not None:
                    self._writer.write(row)
                self._rows_total += 1
                self._rows_degenerate += int(row.degenerate)
            self._next += 1

    def start_logging(self) -> None:
        """Creates a process and a queue to collect log reports.

        This creates a process at the recieving end of the
        `logging.handlers.QueueHandler` that is configured by
        `rslogging`.
        """

        self._logger_queue: multiprocessing.Queue = rslogging.get_queue()
        self._logger: multiprocessing.Process = multiprocessing.Process(
            target=run_logger, args=(self._logger_queue, ))
        self._logger.start()

    def stop_logging(self) -> None:
        """Stop the logging process and log to the console again."""
        self._logger_queue.put(None)
        self._logger.join()
        rslogging.detach_queue()


def run_logger(record_queue: multiprocessing.Queue) -> None:
    """Logs all records sent through the queue.

    Args:
        record_queue: The queue that is used by the QueueHandler.
    """

    signal.signal(signal.SIGINT, lambda signal_num, frame: ...)
    signal.signal(signal.SIGTERM, lambda signal_num, frame: ...)
    thread_logger: rslogging.RsLogger = rslogging.get_logger(
        rslogging.RECORD_LOGGER)
    while True:
        record: Optional[logging.LogRecord] = record_queue.get(True)
        if record is None:
            break
        thread_logger.handle(record)


def command_run(args: argparse.Namespace) -> int:
    """Load, override and validate the configuration, then run."""

    config: rsconfig.Config = rsconfig.Config()
    try:
        config.load_experiment(args.config)
        if args.options:
            for option in args.options.split('@@'):
                try:
                    rest, value = option.split('=', 1)
                except ValueError:
                    logger.error('did not understand option "%s"', option)
                    continue
                config.set_yaml(*rest.split('.'), value=value)
        if args.seed is not None:
            config.set_int('core', 'experiment', 'seed', value=args.seed,
                           target='input')
        if args.jobs is not None:
            config.set_int('core', 'experiment', 'jobs', value=args.jobs,
                           target='input')
        if args.out is not None:
            config.set_str('core', 'experiment', 'out', value=args.out,
                           target='input')
        experiment: rsexperiment.ExperimentConfig = (
            rsexperiment.ExperimentConfig.from_config(config))
    except (rsconfig.ConfigError, ValueError) as e:
        logger.error('invalid configuration: %s', e)
        print(f'revsmc: {e}', file=sys.stderr)
        return EXIT_CONFIG

    return Revsmc(experiment).run()


def command_summarize(args: argparse.Namespace) -> int:
    """Print per-condition summaries of result files as CSV."""

    rows: list[rsexperiment.ResultRow] = []
    for name in args.files:
        try:
            rows.extend(output.read_results(pathlib.Path(name))[1])
        except (OSError, ValueError) as e:
            logger.error('cannot read %s: %s', name, e)
            print(f'revsmc: {e}', file=sys.stderr)
            return EXIT_CONFIG

    writer: Any = csv.writer(sys.stdout, lineterminator='\n')
    writer.writerow(rssummarize.HEADER)
    for summary in rssummarize.summarize(rows):
        writer.writerow(summary.values())
    return EXIT_OK


def command_presets(args: argparse.Namespace) -> int:
    # pylint: disable=unused-argument
    """List the shipped presets with their description."""

    for name in rsconfig.list_presets():
        print(f'{name:22} {rsconfig.preset_description(name)}')
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """The command line interface."""

    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        prog='revsmc',
        description='reverse-time multilevel SMC for rare events')
    parser.add_argument('-v',
                        '--verbosity',
                        help='increase verbosity',
                        action='count',
                        default=0)
    commands: Any = parser.add_subparsers(dest='command', required=True)

    run: argparse.ArgumentParser = commands.add_parser(
        'run', help='run an experiment')
    run.add_argument('config', help='preset name or path to a YAML file')
    run.add_argument('--seed', type=int, default=None, help='master seed')
    run.add_argument('--jobs',
                     type=int,
                     default=None,
                     help='number of worker processes')
    run.add_argument('--out',
                     type=str,
                     default=None,
                     help='output file, "-" for stdout')
    run.add_argument(
        '-o',
        '--options',
        help='arbitrary configuration options as could be found in the ' +
        'yaml file \nformatted like path.to.option1=val1@@' +
        'path2.to.option2=val2@@... \n' +
        'e.g., models.atm.K=3@@core.experiment.replicates=5 \n' +
        '"@@" serves as a separator',
        action='store',
        default='',
        type=str)
    run.set_defaults(handler=command_run)

    summary: argparse.ArgumentParser = commands.add_parser(
        'summarize', help='aggregate result files per condition')
    summary.add_argument('files', nargs='+', help='result files')
    summary.set_defaults(handler=command_summarize)

    presets: argparse.ArgumentParser = commands.add_parser(
        'presets', help='shipped experiment presets')
    presets.add_argument('action', choices=['list'])
    presets.set_defaults(handler=command_presets)
    return parser


def main(argv: Optional[list[str]] = None) -> None:
    """Reads cli arguments and runs the requested command."""

    args: argparse.Namespace = build_parser().parse_args(argv)

    levels: list[str] = rslogging.LEVELS
    # there are only levels 0 to 3
    verbosity_level: int = min(
        levels.index(rslogging.level_from_env()) + args.verbosity, 3)
    rslogging.set_level(levels[verbosity_level])

    sys.exit(args.handler(args))


if __name__ == '__main__':
    main()
