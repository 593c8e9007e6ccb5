#!/usr/bin/env python3
"""Result files.

A result file is comma separated with a header row, preceded by one
line `# {...}` holding the run's metadata (experiment, seed, the full
configuration) as JSON.
"""

import csv
import io
import json
import math
import pathlib
import sys

from typing import Any, Iterable, TextIO

from revsmc.experiments import experiment as rsexperiment
from revsmc.rslogging import rslogging

logger: rslogging.RsLogger = rslogging.get_logger(__name__)

METADATA_PREFIX: str = '# '


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


class ResultWriter():
    """Writes rows to a file or stdout as they come.

    Use as context manager:

        with ResultWriter(path, metadata) as writer:
            writer.write(row)

    Attributes:
        path: The output path, `-` for stdout.
        rows_written: Number of rows written so far.
    """

    def __init__(self, path: str, metadata: dict[str, Any]) -> None:
        self.path: str = path
        self.rows_written: int = 0
        self._metadata: dict[str, Any] = metadata
        self._handle: TextIO = sys.stdout
        self._writer: Any = None

    def __enter__(self) -> 'ResultWriter':
        if self.path != '-':
            target: pathlib.Path = pathlib.Path(self.path).expanduser()
            target.parent.mkdir(parents=True, exist_ok=True)
            self._handle = target.open('w', encoding='utf-8', newline='')
        self._handle.write(METADATA_PREFIX +
                           json.dumps(self._metadata, sort_keys=True,
                                      default=str) + '\n')
        self._writer = csv.writer(self._handle, lineterminator='\n')
        self._writer.writerow(rsexperiment.COLUMNS)
        return self

    def write(self, row: rsexperiment.ResultRow) -> None:
        """Append a row."""
        self._writer.writerow([_format(value) for value in row.values()])
        self.rows_written += 1

    def __exit__(self, *exc: Any) -> None:
        self._handle.flush()
        if self._handle is not sys.stdout:
            self._handle.close()
        logger.info('wrote %s rows to %s', self.rows_written, self.path)


def write_results(path: str, metadata: dict[str, Any],
                  rows: Iterable[rsexperiment.ResultRow]) -> None:
    """Write a complete result file."""
    with ResultWriter(path, metadata) as writer:
        for row in rows:
            writer.write(row)


def format_results(metadata: dict[str, Any],
                   rows: Iterable[rsexperiment.ResultRow]) -> str:
    """Return the content of a result file as a string."""

    buffer: io.StringIO = io.StringIO()
    buffer.write(METADATA_PREFIX +
                 json.dumps(metadata, sort_keys=True, default=str) + '\n')
    writer: Any = csv.writer(buffer, lineterminator='\n')
    writer.writerow(rsexperiment.COLUMNS)
    for row in rows:
        writer.writerow([_format(value) for value in row.values()])
    return buffer.getvalue()


def _parse_bool(value: str) -> bool:
    return value.strip().lower() == 'true'


def read_results(
    path: pathlib.Path
) -> tuple[dict[str, Any], list[rsexperiment.ResultRow]]:
    """Read a result file.

    Returns:
        The metadata (empty if the line is missing) and the rows.

    Raises:
        FileNotFoundError: The file does not exist.
        ValueError: The file is no result file.
    """

    path = pathlib.Path(path).expanduser()
    metadata: dict[str, Any] = {}
    with path.open('r', encoding='utf-8', newline='') as raw_results:
        lines: list[str] = raw_results.readlines()

    if lines and lines[0].startswith(METADATA_PREFIX.strip()):
        try:
            metadata = json.loads(lines[0][1:])
        except json.JSONDecodeError:
            logger.error('malformed metadata in "%s"', str(path))
        lines = lines[1:]

    reader: csv.DictReader = csv.DictReader(lines)
    if reader.fieldnames is None or tuple(
            reader.fieldnames) != rsexperiment.COLUMNS:
        raise ValueError(f'{path} is no result file.')

    rows: list[rsexperiment.ResultRow] = []
    for record in reader:
        try:
            rows.append(
                rsexperiment.ResultRow(
                    experiment=record['experiment'],
                    replicate=int(record['replicate']),
                    condition=record['condition'],
                    estimate=float(record['estimate']),
                    std_error=float(record['std_error']),
                    ess_min=float(record['ess_min']),
                    resample_count=int(record['resample_count']),
                    wall_seconds=float(record['wall_seconds']),
                    seed=int(record['seed']),
                    degenerate=_parse_bool(record['degenerate']),
                    detail=record['detail']))
        except (TypeError, ValueError):
            logger.error('malformed row in "%s": %s', str(path), record)
    return metadata, rows
