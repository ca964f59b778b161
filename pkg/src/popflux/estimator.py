"""Bayesian fusion of a static prior with pseudo-counts, per temporal partition.

Within each interval the device-observation likelihood is categorical over
the cells; the conjugate Dirichlet prior has concentration lam * b(s) * |t|
(interval length in hours). The posterior mean probability times the total
population N gives the population estimate. A per-interval renormalized
power-law baseline is included to demonstrate why sublinear mappings break
down under re-partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ModelError, SchemeMismatchError
from .grid import CellId, IntervalId, SpatialScheme, TemporalScheme, parent_of
from .prior import StaticPopulation
from .transform import PseudoCountField


@dataclass(frozen=True)
class EstimatorConfig:
    """lam balances the prior against observed counts (device-hours per
    person-hour). lam == 0 bypasses the prior entirely and is only legal
    with the explicit likelihood_only flag."""

    lam: float = 0.05
    likelihood_only: bool = False

    def __post_init__(self):
        if self.likelihood_only:
            if self.lam != 0.0:
                raise InputError("likelihood_only requires lam == 0")
        elif self.lam <= 0.0:
            raise InputError("lam must be > 0 (or set likelihood_only with lam == 0)")


@dataclass(frozen=True)
class PowerLawConfig:
    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.scale <= 0 or self.exponent <= 0:
            raise InputError("power-law scale and exponent must be > 0")


@dataclass
class PopulationField:
    """Estimated persons and posterior observation probability per partition.

    For every interval, probabilities sum to 1 and populations sum to N.
    """

    population: dict[tuple[CellId, IntervalId], float]
    posterior_prob: dict[tuple[CellId, IntervalId], float]
    sscheme: SpatialScheme
    tscheme: TemporalScheme
    total_population: float

    def value(self, cell: CellId, interval: IntervalId) -> float:
        return self.population.get((cell, interval), 0.0)

    def interval_ids(self) -> list[IntervalId]:
        return sorted({k[1] for k in self.population}, key=lambda i: i.index)

    def interval_vector(self, interval: IntervalId, cells) -> np.ndarray:
        return np.asarray(
            [self.population.get((c, interval), 0.0) for c in cells], dtype=float
        )


def _count_matrix(counts: PseudoCountField, cells: list[CellId]) -> tuple[list[IntervalId], np.ndarray]:
    intervals = counts.interval_ids()
    pos = {c: i for i, c in enumerate(cells)}
    ipos = {t: i for i, t in enumerate(intervals)}
    mat = np.zeros((len(intervals), len(cells)))
    for (cell, itv), v in counts.entries.items():
        mat[ipos[itv], pos[cell]] = v
    return intervals, mat


def posterior_population(
    counts: PseudoCountField, prior: StaticPopulation, cfg: EstimatorConfig
) -> PopulationField:
    """Posterior-mean population for every cell of the scheme and every
    interval present in the counts. Intervals with no observed mass fall
    back to the prior exactly."""
    if counts.sscheme != prior.scheme:
        raise SchemeMismatchError(
            f"counts on {counts.sscheme}, prior on {prior.scheme}"
        )
    n_total = prior.total
    if n_total <= 0:
        raise ModelError("prior has zero total population")

    cells = list(counts.sscheme.cells())
    b = prior.vector(cells)
    hours = counts.tscheme.interval_len_h
    intervals, cmat = _count_matrix(counts, cells)

    population: dict[tuple[CellId, IntervalId], float] = {}
    prob: dict[tuple[CellId, IntervalId], float] = {}
    for t_i, itv in enumerate(intervals):
        c = cmat[t_i]
        c_sum = float(c.sum())
        if c_sum == 0.0:
            if cfg.lam == 0.0:
                raise ModelError(
                    f"interval {itv.index}: no counts and no prior weight (lam == 0)"
                )
            # no observations: the posterior mean is the prior itself
            p = b / n_total
            d = b.copy()
        else:
            alpha_hat = cfg.lam * b * hours + c
            denom = float(alpha_hat.sum())  # numpy pairwise summation
            p = alpha_hat / denom
            d = n_total * p
        for c_i, cell in enumerate(cells):
            population[(cell, itv)] = float(d[c_i])
            prob[(cell, itv)] = float(p[c_i])
    return PopulationField(population, prob, counts.sscheme, counts.tscheme, n_total)


def power_law_raw(counts: PseudoCountField, cfg: PowerLawConfig) -> dict[tuple[CellId, IntervalId], float]:
    """Unnormalized power-law response scale * c^exponent (zeros omitted)."""
    return {k: cfg.scale * (v ** cfg.exponent) for k, v in counts.entries.items() if v > 0}


def power_law_estimate(
    counts: PseudoCountField, cfg: PowerLawConfig, n_total: float
) -> PopulationField:
    """Power-law baseline renormalized per interval to total population."""
    if n_total <= 0:
        raise ModelError("total population must be > 0")
    cells = list(counts.sscheme.cells())
    intervals, cmat = _count_matrix(counts, cells)
    population: dict[tuple[CellId, IntervalId], float] = {}
    prob: dict[tuple[CellId, IntervalId], float] = {}
    for t_i, itv in enumerate(intervals):
        raw = cfg.scale * np.power(cmat[t_i], cfg.exponent)
        denom = float(raw.sum())
        if denom == 0.0:
            raise ModelError(f"interval {itv.index}: all-zero counts, power law undefined")
        p = raw / denom
        d = n_total * p
        for c_i, cell in enumerate(cells):
            population[(cell, itv)] = float(d[c_i])
            prob[(cell, itv)] = float(p[c_i])
    return PopulationField(population, prob, counts.sscheme, counts.tscheme, n_total)


def spatial_coarsen_estimate(field: PopulationField, levels: int = 1) -> PopulationField:
    """Population additivity: each parent cell gets the sum of its children."""
    if levels < 1:
        raise InputError("levels must be >= 1")
    if field.sscheme.level - levels < 0:
        raise InputError("cannot coarsen below level 0")
    out = field
    for _ in range(levels):
        population: dict[tuple[CellId, IntervalId], float] = {}
        prob: dict[tuple[CellId, IntervalId], float] = {}
        for (cell, itv), v in out.population.items():
            k = (parent_of(cell), itv)
            population[k] = population.get(k, 0.0) + v
            prob[k] = prob.get(k, 0.0) + out.posterior_prob[(cell, itv)]
        out = PopulationField(
            population,
            prob,
            out.sscheme.at_level(out.sscheme.level - 1),
            out.tscheme,
            out.total_population,
        )
    return out
