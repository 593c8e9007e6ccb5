#!/usr/bin/env python3
"""Logging for all processes in the project."""

import logging as log
from logging import config as logging_config
from logging import handlers
import multiprocessing
import os

from typing import Optional

LEVELS: list[str] = ['ERROR', 'WARNING', 'INFO', 'DEBUG']

CONSOLE_FORMAT: str = '%(levelname)s %(processName)s %(name)s: %(message)s'

# records of worker processes arrive in the main process through
# `RECORD_LOGGER`, which must not hand them to the queue again
RECORD_LOGGER: str = 'revsmc.records'

logging_config.dictConfig({
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'console': {
            'format': CONSOLE_FORMAT
        }
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'console',
        }
    },
    'root': {
        'level': 'WARNING',
        'handlers': ['stderr']
    },
    'loggers': {
        RECORD_LOGGER: {
            'level': 'DEBUG',
            'handlers': ['stderr'],
            'propagate': False
        }
    },
})

logger_queue: Optional[multiprocessing.Queue] = None
# handlers replaced by `attach_queue()`
_detached: list[log.Handler] = []


class RsLogger(log.Logger):
    """A `logging.Logger` that modules can name in type hints.

    Lets modules annotate their `logger` without importing `logging`.
    """

    def __init__(self, logger: log.Logger) -> None:
        # pylint: disable=super-init-not-called
        """Take over the state and class of `logger`.

        Args:
            logger: The logger returned by `logging.getLogger()`.
        """

        self.__class__ = type(logger.__class__.__name__,
                              (self.__class__, logger.__class__),
                              {})
        self.__dict__ = logger.__dict__


def get_logger(name: str = '') -> RsLogger:
    """Return the logger called `name`, the root logger for `''`."""

    return RsLogger(log.getLogger(name or None))


def level_from_env(default: str = 'WARNING') -> str:
    """Read the verbosity from `REVSMC_LOG`.

    Args:
        default: Level to use if the variable is unset or invalid.

    Returns:
        One of `LEVELS`.
    """

    level: str = os.environ.get('REVSMC_LOG', default).upper()
    if level not in LEVELS:
        return default
    return level


def set_level(level: str) -> None:
    """Set the level of the root logger.

    Args:
        level: One of `LEVELS`.
    """

    log.getLogger().setLevel(level)


def get_queue() -> multiprocessing.Queue:
    """Return the queue carrying records to the logging process.

    Creates the queue on first use and routes all records of the root
    logger through it. Records are then printed by whoever consumes
    the queue (see `revsmc.revsmc.run_logger`).

    Returns:
        The queue the root logger's `QueueHandler` writes into.
    """

    global logger_queue

    if logger_queue is None:
        logger_queue = multiprocessing.Queue(-1)
        attach_queue(logger_queue)
    return logger_queue


def attach_queue(queue: multiprocessing.Queue) -> None:
    """Replace the root handlers by a handler writing into `queue`.

    Worker processes call this so their records end up in the logging
    process of the main process.

    Args:
        queue: The queue to log into.
    """

    root: log.Logger = log.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        if not isinstance(handler, handlers.QueueHandler):
            _detached.append(handler)
    root.addHandler(handlers.QueueHandler(queue))


def detach_queue() -> None:
    """Undo `attach_queue()` once nobody consumes the queue any more."""

    global logger_queue

    root: log.Logger = log.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, handlers.QueueHandler):
            root.removeHandler(handler)
    while _detached:
        root.addHandler(_detached.pop(0))
    logger_queue = None


set_level(level_from_env())
