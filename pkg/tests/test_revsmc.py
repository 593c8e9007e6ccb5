#!/usr/bin/env python3
"""Tests for the command line interface in revsmc.revsmc."""

import contextlib
import io
import pathlib
import tempfile
import unittest

from revsmc import revsmc
from revsmc.experiments import output


def run(*argv: str) -> int:
    args = revsmc.build_parser().parse_args(list(argv))
    return args.handler(args)


class TestRun(unittest.TestCase):
    """`revsmc run`."""

    def setUp(self):
        self.directory: tempfile.TemporaryDirectory = (
            tempfile.TemporaryDirectory())
        self.out: pathlib.Path = pathlib.Path(self.directory.name) / 'out.csv'

    def tearDown(self):
        self.directory.cleanup()

    def test_rows_in_order(self):
        code: int = run('run', 'atm-exact', '--seed', '5', '--out',
                        str(self.out), '-o', 'core.experiment.replicates=3')
        self.assertEqual(code, revsmc.EXIT_OK)
        metadata, rows = output.read_results(self.out)
        self.assertEqual(metadata['seed'], 5)
        self.assertEqual(metadata['experiment'], 'atm-exact')
        self.assertEqual([row.replicate for row in rows],
                         [0] * 4 + [1] * 4 + [2] * 4)
        self.assertEqual([row.condition for row in rows[:4]],
                         ['k=0', 'k=1', 'k=2', 'k=3'])

    def test_workers_keep_order(self):
        options: str = ('core.experiment.replicates=4@@core.experiment.n=50'
                        '@@models.atm.K=2@@models.atm.b=3')
        self.assertEqual(
            run('run', 'atm', '--out', str(self.out), '--jobs', '1', '-o',
                options), revsmc.EXIT_OK)
        _, single = output.read_results(self.out)
        self.assertEqual(
            run('run', 'atm', '--out', str(self.out), '--jobs', '2', '-o',
                options), revsmc.EXIT_OK)
        _, parallel = output.read_results(self.out)
        self.assertEqual(len(single), 12)
        self.assertEqual([(row.replicate, row.condition, row.estimate)
                          for row in single],
                         [(row.replicate, row.condition, row.estimate)
                          for row in parallel])

    def test_invalid_configuration(self):
        with contextlib.redirect_stderr(io.StringIO()) as stderr:
            self.assertEqual(
                run('run', 'atm', '--out', str(self.out), '-o',
                    'core.experiment.replicates=0'), revsmc.EXIT_CONFIG)
            self.assertEqual(run('run', 'no-such-preset'), revsmc.EXIT_CONFIG)
            self.assertEqual(
                run('run', 'atm', '-o', 'models.atm.K=[1'),
                revsmc.EXIT_CONFIG)
        self.assertIn('replicates', stderr.getvalue())
        self.assertFalse(self.out.exists())

    def test_all_rows_degenerate(self):
        code: int = run('run', 'atm-exact', '--out', str(self.out), '-o',
                        'models.atm.K=200@@models.atm.b=100')
        self.assertEqual(code, revsmc.EXIT_DEGENERATE)
        _, rows = output.read_results(self.out)
        self.assertEqual(len(rows), 1)
        self.assertTrue(rows[0].degenerate)


class TestCommands(unittest.TestCase):
    """`revsmc summarize` and `revsmc presets`."""

    def test_presets(self):
        with contextlib.redirect_stdout(io.StringIO()) as stdout:
            with self.assertRaises(SystemExit) as context:
                revsmc.main(['presets', 'list'])
        self.assertEqual(context.exception.code, revsmc.EXIT_OK)
        names: list[str] = [
            line.split()[0] for line in stdout.getvalue().splitlines()
        ]
        self.assertIn('atm', names)
        self.assertIn('sis-surface', names)

    def test_summarize(self):
        with tempfile.TemporaryDirectory() as directory:
            out: pathlib.Path = pathlib.Path(directory) / 'out.csv'
            run('run', 'atm-exact', '--out', str(out), '-o',
                'core.experiment.replicates=2')
            with contextlib.redirect_stdout(io.StringIO()) as stdout:
                self.assertEqual(run('summarize', str(out)), revsmc.EXIT_OK)
            lines: list[str] = stdout.getvalue().splitlines()
        self.assertEqual(lines[0], ','.join(revsmc.rssummarize.HEADER))
        self.assertEqual(len(lines), 5)
        self.assertTrue(lines[1].startswith('atm-exact,k=0,2,0,'))

    def test_summarize_missing_file(self):
        with contextlib.redirect_stderr(io.StringIO()):
            self.assertEqual(run('summarize', '/nonexistent/out.csv'),
                             revsmc.EXIT_CONFIG)


if __name__ == '__main__':
    unittest.main()
