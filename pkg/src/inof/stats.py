"""Observables computed from realization records and per-node counts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "ColorPolarizationTable",
    "ErrorEstimates",
    "Histogram",
    "Histogram2D",
    "NodeAggregate",
    "PolarizationTable",
    "SwitchPoint",
    "color_polarization_table",
    "error_estimates",
    "histogram1d",
    "histogram2d",
    "fraction_table",
    "pass_fractions",
    "polarization_table",
    "realization_fractions",
    "red_fractions",
    "spearman",
    "subdivision_error",
    "switch_curve",
    "theoretical_error",
]


@dataclass
class NodeAggregate:
    """Outcome counts per node: ``counts[i, 0]`` white, ``counts[i, c]`` color c."""

    counts: np.ndarray
    n_realizations: int

    @property
    def colors(self) -> int:
        return self.counts.shape[1] - 1

    @property
    def white(self) -> np.ndarray:
        return self.counts[:, 0]

    def colored(self) -> np.ndarray:
        return self.counts[:, 1:].sum(axis=1)

    def is_conserved(self) -> bool:
        return bool(np.all(self.counts.sum(axis=1) == self.n_realizations))

    def classified(self, white_threshold: float = 0.5) -> np.ndarray:
        return self.colored() >= white_threshold * self.n_realizations

    def __eq__(self, other):
        return (isinstance(other, NodeAggregate) and self.n_realizations == other.n_realizations
                and np.array_equal(self.counts, other.counts))


# ---------------------------------------------------------------------------
# per-realization fractions


def realization_fractions(counts) -> float | np.ndarray | None:
    """Color fractions among non-white nodes for one realization.

    ``counts`` is a tally indexed by color (``[white, red, blue(, green)]``)
    or anything with a ``color_counts()`` method. Two colors give ``f_r``
    as a float, three give the vector of per-color fractions. Returns None
    when every node is white.
    """
    if hasattr(counts, "color_counts"):
        counts = counts.color_counts()
    counts = np.asarray(counts)
    colored = counts[1:]
    total = colored.sum()
    if total == 0:
        return None
    if len(colored) == 2:
        return float(colored[0] / total)
    return colored / total


def fraction_table(color_counts: np.ndarray) -> np.ndarray:
    """(N_r, colors) fractions from an ensemble's final tallies; rows that
    are entirely white are NaN."""
    colored = np.asarray(color_counts)[:, 1:].astype(np.float64)
    total = colored.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, colored / total, np.nan)


def red_fractions(color_counts: np.ndarray) -> np.ndarray:
    """f_r per realization (NaN where undefined)."""
    return fraction_table(color_counts)[:, 0]


def pass_fractions(trace: np.ndarray) -> np.ndarray:
    """(N_r, tau) red fraction after every pass, from an ensemble trace."""
    colored = trace[:, :, 1:].astype(np.float64)
    total = colored.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, colored[:, :, 0] / total, np.nan)


# ---------------------------------------------------------------------------
# polarization tables


@dataclass
class PolarizationTable:
    classified: np.ndarray  # bool per node
    mu: np.ndarray  # NaN for unclassified nodes
    mu0: float
    delta: np.ndarray

    @property
    def classified_count(self) -> int:
        return int(self.classified.sum())


@dataclass
class ColorPolarizationTable:
    classified: np.ndarray
    eta: np.ndarray  # (N, 3), NaN rows for unclassified nodes
    eta0: np.ndarray  # (3,)
    delta: np.ndarray  # (N, 3)


def polarization_table(aggregate: NodeAggregate, white_threshold: float = 0.5) -> PolarizationTable:
    if aggregate.colors != 2:
        raise ValueError("polarization_table needs a 2-color aggregate")
    n_r = aggregate.counts[:, 1].astype(np.float64)
    n_b = aggregate.counts[:, 2].astype(np.float64)
    classified = aggregate.classified(white_threshold) & (n_r + n_b > 0)
    if not classified.any():
        raise ValueError("no node reaches the white threshold; nothing to average")
    mu = np.full(len(n_r), np.nan)
    mu[classified] = (n_r[classified] - n_b[classified]) / (n_r[classified] + n_b[classified])
    mu0 = float(mu[classified].mean())
    return PolarizationTable(classified, mu, mu0, mu - mu0)


def color_polarization_table(aggregate: NodeAggregate,
                             white_threshold: float = 0.5) -> ColorPolarizationTable:
    if aggregate.colors != 3:
        raise ValueError("color_polarization_table needs a 3-color aggregate")
    c = aggregate.counts[:, 1:].astype(np.float64)
    total = c.sum(axis=1)
    classified = aggregate.classified(white_threshold) & (total > 0)
    if not classified.any():
        raise ValueError("no node reaches the white threshold; nothing to average")
    eta = np.full(c.shape, np.nan)
    eta[classified] = _unit_rows(c[classified] / total[classified, None])
    eta0 = _unit_rows(eta[classified].mean(axis=0)[None, :])[0]
    return ColorPolarizationTable(classified, eta, eta0, eta - eta0)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    # last color as 1 - (first + second): the color-order float sum is then
    # exactly 1, at a cost below one ulp of 1 in the last entry
    x = x.copy()
    x[:, 2] = 1.0 - (x[:, 0] + x[:, 1])
    return x


# ---------------------------------------------------------------------------
# histograms


@dataclass
class Histogram:
    lo: float
    hi: float
    bins: int
    density: np.ndarray
    count: int = 0

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def integral(self) -> float:
        return float(self.density.sum() * self.width)


@dataclass
class Histogram2D:
    bounds: tuple[tuple[float, float], tuple[float, float]]
    bins: tuple[int, int]
    density: np.ndarray  # (bins_x, bins_y)
    count: int = 0

    @property
    def cell_area(self) -> float:
        (x0, x1), (y0, y1) = self.bounds
        return (x1 - x0) / self.bins[0] * (y1 - y0) / self.bins[1]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for (a, b), n in zip(self.bounds, self.bins):
            e = np.linspace(a, b, n + 1)
            out.append(0.5 * (e[:-1] + e[1:]))
        return out[0], out[1]

    def integral(self) -> float:
        return float(self.density.sum() * self.cell_area)


def _check_range(values: np.ndarray, lo: float, hi: float, what: str) -> None:
    if not lo < hi:
        raise ValueError(f"{what}: need lo < hi, got [{lo}, {hi}]")
    if np.any(values < lo) or np.any(values > hi):
        raise ValueError(f"{what}: values outside [{lo}, {hi}]")


def histogram1d(values, lo: float, hi: float, bins: int) -> Histogram:
    """Normalized histogram with ``sum(density) * width == 1``.

    Bins are half-open ``[e_k, e_{k+1})`` except the last, which also
    holds ``hi``.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if values.size == 0:
        raise ValueError("histogram of an empty sample")
    _check_range(values, lo, hi, "histogram1d")
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    return Histogram(lo, hi, bins, counts / (values.size * width), int(values.size))


def histogram2d(points, bounds, bins) -> Histogram2D:
    """2D analogue of :func:`histogram1d`, normalized by cell area."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("histogram of an empty sample")
    if np.isscalar(bins):
        bins = (int(bins), int(bins))
    (x0, x1), (y0, y1) = bounds
    _check_range(pts[:, 0], x0, x1, "histogram2d x")
    _check_range(pts[:, 1], y0, y1, "histogram2d y")
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=bins, range=[(x0, x1), (y0, y1)])
    area = (x1 - x0) / bins[0] * (y1 - y0) / bins[1]
    return Histogram2D(((x0, x1), (y0, y1)), tuple(bins), counts / (len(pts) * area), len(pts))


# ---------------------------------------------------------------------------
# statistical errors


def theoretical_error(mu, n_realizations: int):
    """Binomial error of an average of +-1 spins: sqrt((1 - mu^2)/(N_r - 1))."""
    mu = np.asarray(mu, dtype=np.float64)
    if n_realizations < 2:
        raise ValueError("need at least 2 realizations")
    out = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None) / (n_realizations - 1))
    return float(out) if out.ndim == 0 else out


def theoretical_eta_error(eta, n_realizations: int):
    """Same for 0/1 color indicators: sqrt(eta (1 - eta)/(N_r - 1))."""
    eta = np.asarray(eta, dtype=np.float64)
    out = np.sqrt(np.clip(eta * (1.0 - eta), 0.0, None) / (n_realizations - 1))
    return float(out) if out.ndim == 0 else out


def subdivision_error(samples, axis: int = 0):
    """sqrt((<x^2> - <x>^2)/(n_s - 1)) over per-sample partial averages.

    NaN entries (a sample where the quantity is undefined) are skipped and
    ``n_s`` counts only the defined samples.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = np.sum(~np.isnan(x), axis=axis)
    with warnings.catch_warnings(), np.errstate(invalid="ignore", divide="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        # two-pass variance: same quantity, no cancellation for constant samples
        var = np.nanvar(x, axis=axis)
        out = np.sqrt(var / (n - 1))
    out = np.where(n > 1, out, np.nan)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ErrorEstimates:
    mu_theory: np.ndarray  # per node, NaN where unclassified
    mu0_theory: float
    delta_mu_subdiv: np.ndarray | None = None
    mu_subdiv: np.ndarray | None = None
    mu0_subdiv: float | None = None
    n_samples: int = 0


def batch_polarizations(batch_counts: np.ndarray, classified: np.ndarray):
    """Per-sample partial mu_i, mu_0 and delta mu_i over the classified set."""
    n_r = batch_counts[:, :, 1].astype(np.float64)
    n_b = batch_counts[:, :, 2].astype(np.float64)
    tot = n_r + n_b
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(tot > 0, (n_r - n_b) / tot, np.nan)
    mu[:, ~classified] = np.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mu0 = np.nanmean(mu[:, classified], axis=1)
    return mu, mu0, mu - mu0[:, None]


def error_estimates(aggregate: NodeAggregate, table: PolarizationTable | None = None,
                    batch_counts: np.ndarray | None = None, n_samples: int | None = None,
                    white_threshold: float = 0.5) -> ErrorEstimates:
    """Theoretical and (given per-batch counts) subdivision errors.

    ``batch_counts`` has shape ``(n_s, N, 3)``: per-node counts restricted
    to each of ``n_s`` equal, disjoint batches of realizations. Alternatively
    pass ``n_samples`` with ``batch_counts`` holding per-realization rows
    to be grouped here.
    """
    if table is None:
        table = polarization_table(aggregate, white_threshold)
    n_r = aggregate.n_realizations
    mu_theory = theoretical_error(np.nan_to_num(table.mu), n_r)
    mu_theory = np.where(table.classified, mu_theory, np.nan)
    mu0_theory = theoretical_error(table.mu0, n_r)
    est = ErrorEstimates(mu_theory, mu0_theory)
    if batch_counts is None:
        return est
    batch_counts = np.asarray(batch_counts)
    if n_samples is not None and batch_counts.shape[0] != n_samples:
        if batch_counts.shape[0] % n_samples:
            raise ValueError(
                f"{batch_counts.shape[0]} realizations cannot be split into {n_samples} equal "
                f"samples; use a multiple of {n_samples}")
        batch_counts = batch_counts.reshape(n_samples, -1, *batch_counts.shape[1:]).sum(axis=1)
    if batch_counts.shape[0] < 2:
        raise ValueError("need at least 2 samples for a subdivision error")
    mu, mu0, delta = batch_polarizations(batch_counts, table.classified)
    est.mu_subdiv = subdivision_error(mu)
    est.delta_mu_subdiv = subdivision_error(delta)
    est.mu0_subdiv = subdivision_error(mu0)
    est.n_samples = batch_counts.shape[0]
    return est


# ---------------------------------------------------------------------------
# rank correlation


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rho: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-D sequences of equal length")
    if len(x) < 2:
        raise ValueError("spearman needs at least 2 points")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    rx -= rx.mean()
    ry -= ry.mean()
    sx = np.sqrt(np.dot(rx, rx))
    sy = np.sqrt(np.dot(ry, ry))
    if sx == 0 or sy == 0:
        raise ValueError("spearman undefined for a constant input")
    return float(np.clip(np.dot(rx, ry) / (sx * sy), -1.0, 1.0))


# ---------------------------------------------------------------------------
# melting diagnostics


@dataclass
class SwitchPoint:
    temperature: float
    final: float  # mean over realizations of final-pass switches / N
    stderr: float
    trajectory: np.ndarray  # mean normalized switches per pass


def switch_curve(graph, seeds, base_config, temperatures: Sequence[float],
                 threads: int | None = None) -> list[SwitchPoint]:
    """Normalized final-pass switch counts as a function of temperature."""
    from .dynamics import run_ensemble

    if base_config.colors != 2:
        raise ValueError("switch_curve needs a 2-color configuration")
    out = []
    n = graph.node_count
    for t in temperatures:
        res = run_ensemble(graph, seeds, base_config.replace(temperature=float(t)), threads=threads)
        norm = res.switches / n
        final = norm[:, -1]
        se = float(final.std(ddof=1) / np.sqrt(len(final))) if len(final) > 1 else 0.0
        out.append(SwitchPoint(float(t), float(final.mean()), se, norm.mean(axis=0)))
    return out
