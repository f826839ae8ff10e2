"""Timing side channel in publicly revealed detection timestamps.

Eve sees (slot, timestamp, basis) for every detection and tries to infer
which detector clicked. Leakage is scored with a two-class Gaussian model
(per-class centroid, pooled width): under equal priors the maximum-likelihood
rule is correct with probability Phi(d / 2 sigma) for centroid separation d,
and the information per key bit is reported as ``1 - h(accuracy)`` with
``h`` the binary entropy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .detector import ClickKind
from .optics import Basis


@dataclass
class TimestampLog:
    """Detection events. ``detector`` is ground truth, used only for scoring."""

    slot: np.ndarray
    timestamp: np.ndarray
    basis: np.ndarray
    detector: np.ndarray
    resolution: float = 0.0

    def __len__(self):
        return len(self.slot)

    @classmethod
    def from_bob(cls, bob, revealed: bool = True, resolution: float = 0.0) -> "TimestampLog":
        single = (bob.outcome == ClickKind.D0) | (bob.outcome == ClickKind.D1)
        ts = bob.revealed_timestamp if revealed else bob.timestamp
        return cls(bob.slot[single], ts[single].astype(float), bob.basis[single].astype(np.int8),
                   (bob.outcome[single] == ClickKind.D1).astype(np.int8), resolution)

    def take(self, idx) -> "TimestampLog":
        return TimestampLog(self.slot[idx], self.timestamp[idx], self.basis[idx],
                            self.detector[idx], self.resolution)


@dataclass
class TimingHistogram:
    basis: int
    detector: int
    edges: np.ndarray
    counts: np.ndarray
    n: int
    centroid: float
    std: float

    @property
    def defined(self) -> bool:
        return self.n > 0


@dataclass
class GuessResult:
    accuracy: float
    info_per_bit: float
    separation: float
    sigma: float
    perfect_separation: bool = False


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def info_from_accuracy(acc: float) -> float:
    return 1.0 - binary_entropy(acc)


def build_histograms(log: TimestampLog, bin_width: float = 0.05) -> dict[tuple[int, int], TimingHistogram]:
    """Four histograms keyed by (basis, detector), on shared bin edges.

    Centroids and widths use the raw timestamps, so ``bin_width`` only
    affects the binned counts.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    ts = log.timestamp
    if len(ts):
        lo = math.floor(ts.min() / bin_width) * bin_width
        hi = math.ceil(ts.max() / bin_width) * bin_width
        nb = max(1, int(round((hi - lo) / bin_width)))
        edges = lo + bin_width * np.arange(nb + 1)
        if edges[-1] < ts.max():
            edges = np.append(edges, edges[-1] + bin_width)
    else:
        edges = np.array([0.0, bin_width])
    out = {}
    for b in (Basis.Z, Basis.X):
        for d in (0, 1):
            sel = ts[(log.basis == b) & (log.detector == d)]
            counts, _ = np.histogram(sel, bins=edges)
            n = len(sel)
            out[(int(b), d)] = TimingHistogram(
                int(b), d, edges, counts, n,
                float(sel.mean()) if n else math.nan,
                float(sel.std(ddof=1)) if n > 1 else (0.0 if n == 1 else math.nan))
    return out


def pooled_sigma(h0: TimingHistogram, h1: TimingHistogram) -> float:
    dof = h0.n + h1.n - 2
    if dof <= 0:
        return 0.0
    var = ((h0.n - 1) * h0.std ** 2 + (h1.n - 1) * h1.std ** 2) / dof
    return math.sqrt(max(var, 0.0))


def gaussian_accuracy(separation: float, sigma: float) -> float:
    """ML accuracy for two equal-width Gaussians, equal priors."""
    if sigma == 0.0:
        return 1.0 if separation != 0.0 else 0.5
    return float(norm.cdf(abs(separation) / (2.0 * sigma)))


def eve_guess_accuracy(hists, basis: Basis) -> GuessResult:
    h0, h1 = hists[(int(basis), 0)], hists[(int(basis), 1)]
    if not (h0.defined and h1.defined):
        raise ValueError(f"both detector classes must be non-empty for basis {Basis(basis).name}")
    d = h1.centroid - h0.centroid
    sigma = pooled_sigma(h0, h1)
    acc = gaussian_accuracy(d, sigma)
    return GuessResult(acc, info_from_accuracy(acc), d, sigma,
                       perfect_separation=(sigma == 0.0 and d != 0.0))


def truncate_timestamps(log: TimestampLog, resolution: float) -> TimestampLog:
    """Round revealed timestamps to the nearest multiple of ``resolution``."""
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    return TimestampLog(log.slot.copy(), np.round(log.timestamp / resolution) * resolution,
                        log.basis.copy(), log.detector.copy(), resolution)


def truncated_accuracy(mu0: float, mu1: float, sigma: float, resolution: float) -> float:
    """ML accuracy when Gaussian timestamps are rounded to ``resolution``.

    Sums max(P0(cell), P1(cell)) / 2 over rounding cells; ``resolution`` 0
    returns the unrounded value.
    """
    if resolution <= 0:
        return gaussian_accuracy(mu1 - mu0, sigma)
    if sigma == 0.0:
        return 1.0 if round(mu0 / resolution) != round(mu1 / resolution) else 0.5
    lo = min(mu0, mu1) - 10.0 * sigma
    hi = max(mu0, mu1) + 10.0 * sigma
    centers = resolution * np.arange(math.floor(lo / resolution) - 1, math.ceil(hi / resolution) + 2)
    a, b = centers - 0.5 * resolution, centers + 0.5 * resolution
    p0 = norm.cdf((b - mu0) / sigma) - norm.cdf((a - mu0) / sigma)
    p1 = norm.cdf((b - mu1) / sigma) - norm.cdf((a - mu1) / sigma)
    return float(0.5 * np.maximum(p0, p1).sum())


def truncation_sweep(guess: GuessResult, mu0: float, resolutions) -> list[tuple[float, float, float]]:
    """(resolution, accuracy, info) for each resolution under the fitted model."""
    rows = []
    for r in resolutions:
        acc = truncated_accuracy(mu0, mu0 + guess.separation, guess.sigma, float(r))
        rows.append((float(r), acc, info_from_accuracy(acc)))
    return rows


def histogram_ml_accuracy(log: TimestampLog, basis: Basis, cell: float) -> float:
    """Raw-histogram ML cross-check: in-sample accuracy of majority-per-cell."""
    sel = log.basis == int(basis)
    ts, det = log.timestamp[sel], log.detector[sel]
    if len(ts) == 0:
        return math.nan
    idx = np.round(ts / cell).astype(np.int64)
    idx -= idx.min()
    n0 = np.bincount(idx[det == 0], minlength=idx.max() + 1)
    n1 = np.bincount(idx[det == 1], minlength=idx.max() + 1)
    return float(np.maximum(n0, n1).sum() / len(ts))


def classify(timestamps: np.ndarray, mu0: float, mu1: float) -> np.ndarray:
    """Equal-width ML rule: nearest centroid."""
    return (np.abs(timestamps - mu1) < np.abs(timestamps - mu0)).astype(np.int8)


def empirical_accuracy(train: TimestampLog, test: TimestampLog, basis: Basis, bin_width: float = 0.05):
    """Fit on ``train``, classify held-out ``test`` events of ``basis``.

    Returns ``(accuracy, n_test, predicted_accuracy)``.
    """
    h = build_histograms(train, bin_width)
    g = eve_guess_accuracy(h, basis)
    mu0 = h[(int(basis), 0)].centroid
    mu1 = h[(int(basis), 1)].centroid
    sel = test.basis == int(basis)
    pred = classify(test.timestamp[sel], mu0, mu1)
    n = int(sel.sum())
    return float(np.mean(pred == test.detector[sel])) if n else math.nan, n, g.accuracy


def analyze(log: TimestampLog, bin_width: float = 0.05, truncate: float | None = None) -> dict:
    """JSON-ready leakage report per basis."""
    hists = build_histograms(log, bin_width)
    report = {
        "events": len(log),
        "bin_width": bin_width,
        "info_measure": "1 - h(p), p = Gaussian ML accuracy Phi(d / 2 sigma), equal priors",
        "bases": {},
    }
    for b in (Basis.Z, Basis.X):
        entry = {
            "counts": [hists[(int(b), 0)].n, hists[(int(b), 1)].n],
            "centroids": [hists[(int(b), 0)].centroid, hists[(int(b), 1)].centroid],
        }
        try:
            g = eve_guess_accuracy(hists, b)
        except ValueError as exc:
            entry["error"] = str(exc)
        else:
            entry.update(separation=g.separation, sigma=g.sigma, accuracy=g.accuracy,
                         info_per_bit=g.info_per_bit, perfect_separation=g.perfect_separation,
                         histogram_ml_accuracy=histogram_ml_accuracy(log, b, bin_width))
            if truncate:
                acc = truncated_accuracy(hists[(int(b), 0)].centroid, hists[(int(b), 1)].centroid,
                                         g.sigma, truncate)
                tlog = truncate_timestamps(log, truncate)
                entry["truncated"] = {
                    "resolution": truncate,
                    "accuracy": acc,
                    "info_per_bit": info_from_accuracy(acc),
                    "histogram_ml_accuracy": histogram_ml_accuracy(tlog, b, truncate),
                }
        report["bases"][b.name] = entry
    return report
