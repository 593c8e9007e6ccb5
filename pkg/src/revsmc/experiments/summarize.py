#!/usr/bin/env python3
"""Per-condition aggregation of result files."""

import dataclasses
import math

from typing import Iterable

import numpy as np

from revsmc.experiments import experiment as rsexperiment

QUANTILES: tuple[float, ...] = (0.05, 0.25, 0.5, 0.75, 0.95)

HEADER: tuple[str, ...] = ('experiment', 'condition', 'count', 'degenerate',
                           'mean', 'sd', 'q05', 'q25', 'median', 'q75', 'q95')


@dataclasses.dataclass
class ConditionSummary:
    """Spread of the estimates of one condition across replicates.

    Degenerate rows are counted but not aggregated.
    """

    experiment: str
    condition: str
    count: int
    degenerate: int
    mean: float
    sd: float
    quantiles: tuple[float, ...]

    def values(self) -> list[object]:
        """The fields in `HEADER` order."""
        return [
            self.experiment, self.condition, self.count, self.degenerate,
            self.mean, self.sd, *self.quantiles
        ]


def summarize(
        rows: Iterable[rsexperiment.ResultRow]) -> list[ConditionSummary]:
    """Mean, standard deviation and quantiles per (experiment, condition).

    The standard deviation uses N - 1 in the denominator and is 0 for a
    single row. Conditions keep the order they first appear in.
    """

    groups: dict[tuple[str, str], list[rsexperiment.ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.experiment, row.condition), []).append(row)

    summaries: list[ConditionSummary] = []
    for (experiment, condition), members in groups.items():
        estimates: np.ndarray = np.array(
            [row.estimate for row in members if not row.degenerate])
        degenerate: int = len(members) - estimates.size
        if estimates.size == 0:
            summaries.append(
                ConditionSummary(experiment, condition, len(members),
                                 degenerate, math.nan, math.nan,
                                 tuple(math.nan for _ in QUANTILES)))
            continue
        summaries.append(
            ConditionSummary(
                experiment, condition, len(members), degenerate,
                float(estimates.mean()),
                float(estimates.std(ddof=1)) if estimates.size > 1 else 0.0,
                tuple(float(q) for q in np.quantile(estimates, QUANTILES))))
    return summaries
