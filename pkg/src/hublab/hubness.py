"""k-occurrence diagnostics for similarity matrices.

The k-occurrence N_k(y) of a gallery item counts how many query rows rank
it inside their top k. A long right tail of N_k means a few items (hubs)
dominate neighbor lists while many items (anti-hubs) never appear. The
report bundles six distributional statistics of N_k plus the count-of-
counts histogram.

All neighbor selection is exact; ties break toward the lower gallery
index so results are reproducible across platforms.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSet, SimilarityMatrix
from .errors import (
    AllZero,
    DegenerateDistribution,
    KTooLarge,
    MissingLabels,
    ZeroMean,
    ZeroTotal,
)

_SIGMA_FLOOR = 1e-12

THREADS_ENV = "HUBLAB_THREADS"


def worker_count() -> int:
    """Worker cap for row-parallel loops, honoring HUBLAB_THREADS."""
    cap = os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            warnings.warn(f"ignoring non-integer {THREADS_ENV}={env!r}")
    return cap


@dataclass
class KOccurrence:
    """Per-gallery-item neighbor counts N_k over n_queries query rows."""

    counts: np.ndarray
    k: int
    n_queries: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.sum() != self.n_queries * self.k:
            raise ValueError("counts must sum to n_queries * k")
        if self.counts.min() < 0 or self.counts.max() > self.n_queries:
            raise ValueError("each count must lie in [0, n_queries]")


@dataclass
class RelevanceLabels:
    """Boolean query-by-gallery relevance mask."""

    matrix: np.ndarray
    source: str = "ground-truth"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=bool)
        if self.matrix.ndim != 2:
            raise ValueError(f"expected a 2-D mask, got shape {self.matrix.shape}")
        if self.source not in ("ground-truth", "pseudo-positive"):
            raise ValueError(f"unknown label source {self.source!r}")

    @classmethod
    def diagonal(cls, n: int, source: str = "ground-truth") -> "RelevanceLabels":
        return cls(np.eye(n, dtype=bool), source)

    @classmethod
    def from_pairs(cls, pairs, shape, source: str = "ground-truth") -> "RelevanceLabels":
        matrix = np.zeros(shape, dtype=bool)
        for i, j in pairs:
            matrix[int(i), int(j)] = True
        return cls(matrix, source)

    def to_pairs(self) -> list:
        rows, cols = np.nonzero(self.matrix)
        return [[int(i), int(j)] for i, j in zip(rows, cols)]


@dataclass
class HubnessReport:
    """The six N_k statistics plus their parameters and histogram."""

    skewness: float
    truncated_skewness: float
    atkinson: float
    robin_hood: float
    antihub_occurrence: float
    hub_occurrence: float
    k: int
    hub_size_factor: float
    atkinson_epsilon: float
    histogram: list
    n_queries: int
    n_gallery: int

    def to_dict(self) -> dict:
        return {
            "skew": self.skewness,
            "trunc": self.truncated_skewness,
            "atkinson": self.atkinson,
            "robin": self.robin_hood,
            "anti": self.antihub_occurrence,
            "hub": self.hub_occurrence,
            "k": self.k,
            "hub_size_factor": self.hub_size_factor,
            "atkinson_epsilon": self.atkinson_epsilon,
            "histogram": self.histogram,
            "n_queries": self.n_queries,
            "n_gallery": self.n_gallery,
        }


def top_k_indices(scores: np.ndarray, k: int, workers: int = 1) -> np.ndarray:
    """Row-wise top-k column indices by descending score, ties to lower index.

    Rows are independent, so with ``workers > 1`` they are processed in
    chunks on a thread pool; each chunk writes a disjoint slice of the
    output, keeping the result identical to the serial path.
    """
    n = scores.shape[0]
    out = np.empty((n, k), dtype=np.intp)

    def fill(lo: int, hi: int) -> None:
        out[lo:hi] = np.argsort(-scores[lo:hi], axis=1, kind="stable")[:, :k]

    workers = max(1, min(workers, n))
    if workers == 1:
        fill(0, n)
        return out
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fill, lo, hi)
                   for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for fut in futures:
            fut.result()
    return out


def k_occurrence(s: SimilarityMatrix, k: int, workers: int = 1) -> KOccurrence:
    """Count how often each gallery column lands in a query row's top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > s.m:
        raise KTooLarge(f"k={k} exceeds gallery size {s.m}")
    top = top_k_indices(s.scores, k, workers)
    counts = np.bincount(top.ravel(), minlength=s.m)
    return KOccurrence(counts, k, s.n)


def good_bad_occurrence(s: SimilarityMatrix, k: int,
                        labels: RelevanceLabels) -> tuple[np.ndarray, np.ndarray]:
    """Split each item's k-occurrence into relevant and irrelevant counts."""
    if labels.matrix.shape != s.scores.shape:
        raise MissingLabels(
            f"labels cover {labels.matrix.shape}, scores are {s.scores.shape}")
    if k > s.m:
        raise KTooLarge(f"k={k} exceeds gallery size {s.m}")
    top = top_k_indices(s.scores, k)
    rows = np.repeat(np.arange(s.n), k)
    cols = top.ravel()
    relevant = labels.matrix[rows, cols]
    good = np.zeros(s.m, dtype=np.int64)
    bad = np.zeros(s.m, dtype=np.int64)
    np.add.at(good, cols[relevant], 1)
    np.add.at(bad, cols[~relevant], 1)
    return good, bad


def _population_skew(values: np.ndarray) -> float:
    mu = values.mean()
    centered = values - mu
    sigma = np.sqrt((centered ** 2).mean())
    if sigma < _SIGMA_FLOOR:
        warnings.warn("zero spread, skewness forced to 0", DegenerateDistribution)
        return 0.0
    return float((centered ** 3).mean() / sigma ** 3)


def skewness(occ: KOccurrence) -> float:
    """Population skewness E[(N_k - mu)^3] / sigma^3 of the count vector."""
    return _population_skew(occ.counts.astype(np.float64))


def truncated_skewness(occ: KOccurrence) -> float:
    """Skewness over the positive counts only (zero-truncated)."""
    positive = occ.counts[occ.counts > 0].astype(np.float64)
    if positive.size == 0:
        raise AllZero("all k-occurrence counts are zero")
    return _population_skew(positive)


def atkinson(occ: KOccurrence, epsilon: float = 0.5) -> float:
    """Atkinson inequality index of the counts with sensitivity epsilon.

    A = 1 - mean(N^(1-eps))^(1/(1-eps)) / mean(N), zero counts contributing
    zero to the inner mean.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    counts = occ.counts.astype(np.float64)
    mu = counts.mean()
    if mu <= 0:
        raise ZeroMean("mean k-occurrence is zero")
    inner = np.where(counts > 0, counts, 0.0) ** (1.0 - epsilon)
    return float(1.0 - inner.mean() ** (1.0 / (1.0 - epsilon)) / mu)


def robin_hood(occ: KOccurrence) -> float:
    """Hoover index: the fraction of neighbor mass that would have to move
    to make the counts uniform, sum|N - mu| / (2 sum N)."""
    counts = occ.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise ZeroTotal("total k-occurrence is zero")
    return float(np.abs(counts - counts.mean()).sum() / (2.0 * total))


def antihub_occurrence(occ: KOccurrence) -> float:
    """Fraction of gallery items never appearing in any top-k list."""
    return float((occ.counts == 0).mean())


def hub_occurrence(occ: KOccurrence, hub_size_factor: float = 2.0) -> float:
    """Fraction of all neighbor slots taken by hubs (N_k > k * factor)."""
    counts = occ.counts
    hubs = counts > occ.k * hub_size_factor
    return float(counts[hubs].sum() / (occ.n_queries * occ.k))


def pseudo_positive_probe(texts: EmbeddingSet, threshold: float) -> RelevanceLabels:
    """Label pairs of texts as mutually relevant when their cosine clears
    the threshold; self-pairs are always relevant and the result is
    symmetric. Expects unit-normalized rows."""
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {threshold}")
    norms = np.sqrt((texts.data ** 2).sum(axis=1))
    if not np.allclose(norms, 1.0, atol=1e-6):
        raise ValueError("probe expects unit-normalized text embeddings")
    sims = texts.data @ texts.data.T
    sims = 0.5 * (sims + sims.T)
    matrix = sims >= threshold
    np.fill_diagonal(matrix, True)
    return RelevanceLabels(matrix, source="pseudo-positive")


def count_histogram(occ: KOccurrence) -> list:
    """Sparse count-of-counts pairs [[n_k, how_many_items], ...]."""
    values, freqs = np.unique(occ.counts, return_counts=True)
    return [[int(v), int(c)] for v, c in zip(values, freqs)]


def hubness_report(s: SimilarityMatrix, k: int,
                   hub_size_factor: float = 2.0,
                   atkinson_epsilon: float = 0.5,
                   workers: int = 1) -> HubnessReport:
    """All six N_k statistics plus the histogram from one shared count pass."""
    occ = k_occurrence(s, k, workers)
    return HubnessReport(
        skewness=skewness(occ),
        truncated_skewness=truncated_skewness(occ),
        atkinson=atkinson(occ, atkinson_epsilon),
        robin_hood=robin_hood(occ),
        antihub_occurrence=antihub_occurrence(occ),
        hub_occurrence=hub_occurrence(occ, hub_size_factor),
        k=k,
        hub_size_factor=hub_size_factor,
        atkinson_epsilon=atkinson_epsilon,
        histogram=count_histogram(occ),
        n_queries=occ.n_queries,
        n_gallery=int(occ.counts.size),
    )
