"""Contrastive loss family with analytic gradients.

Every loss returns a :class:`LossBundle` holding the scalar value and the
gradient with respect to the raw similarity scores it was computed from.
Targets (centrality weights, neighbor targets, transport targets) are
always treated as constants; gradients flow through the similarity
scores only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import KIND_CROSS, CentralityVector
from .core import SimilarityMatrix, row_log_softmax, row_softmax
from .errors import (
    InconsistentTargets,
    LengthMismatch,
    MissingPart,
    NonSquareBatch,
    ShapeMismatch,
)

GRAD_MODE_EXACT = "exact"
GRAD_MODE_PAPER = "paper"

LOSS_PARTS = ("wti", "nbi", "opt", "kl")
DIRECTIONS = ("q2g", "g2q")


@dataclass
class LossBundle:
    """Scalar loss plus its gradient over the similarity scores.

    ``per_sample`` is an optional per-row decomposition whose mean equals
    ``value``. ``grad_high`` is only populated by the KL loss, which
    differentiates with respect to two score matrices.
    """

    value: float
    grad: np.ndarray
    per_sample: np.ndarray | None = None
    grad_high: np.ndarray | None = None

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)
        if not np.isfinite(self.value):
            raise ValueError("loss value is not finite")
        if not np.all(np.isfinite(self.grad)):
            raise ValueError("loss gradient contains non-finite entries")


@dataclass
class NeighborSet:
    """Closest gallery indices for one query, excluding its ground truth.

    ``plus_indices`` prepends the ground truth, which is how the target
    vector and the restricted softmax are laid out.
    """

    anchor: int
    members: np.ndarray
    ground_truth: int

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=np.intp)
        if self.members.ndim != 1 or self.members.size < 1:
            raise ValueError("a neighbor set needs at least one member")
        if self.ground_truth in self.members:
            raise ValueError("members must not contain the ground-truth index")
        if len(np.unique(self.members)) != self.members.size:
            raise ValueError("members must be distinct")

    @property
    def plus_indices(self) -> np.ndarray:
        return np.concatenate([[self.ground_truth], self.members]).astype(np.intp)


def loss_wti(s: SimilarityMatrix, w: np.ndarray) -> LossBundle:
    """Centrality-weighted contrastive loss over a square batch.

    value = -(1/B) sum_i w_i log softmax(S_i / tau)_ii
    grad  =  (w_i / (B tau)) (P(j|i) - delta_ij)
    """
    if s.n != s.m:
        raise NonSquareBatch(f"expected a square batch, got {s.n}x{s.m}")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (s.n,):
        raise LengthMismatch(f"weight vector has shape {w.shape}, expected ({s.n},)")
    b = s.n
    logp = row_log_softmax(s.scores, s.temperature)
    per_sample = -w * np.diag(logp)
    value = per_sample.mean()
    grad = row_softmax(s.scores, s.temperature)
    grad[np.arange(b), np.arange(b)] -= 1.0
    grad *= w[:, None] / (b * s.temperature)
    return LossBundle(float(value), grad, per_sample)


def decentral_similarity(s: SimilarityMatrix, cg: CentralityVector) -> SimilarityMatrix:
    """Subtract each gallery item's cross-modal centrality from its column."""
    if cg.kind != KIND_CROSS:
        raise ValueError("de-centrality similarity needs cross-modal centrality")
    if cg.values.shape != (s.m,):
        raise LengthMismatch(
            f"centrality has shape {cg.values.shape}, expected ({s.m},)")
    return SimilarityMatrix(s.scores - cg.values[None, :], s.temperature)


def select_neighbors(s: SimilarityMatrix, i: int, k: int,
                     ground_truth: int | None = None) -> NeighborSet:
    """Top-k gallery indices for query row i by raw score, ground truth excluded.

    Ties break toward the lower gallery index; k is clamped to m - 1.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if s.m < 2:
        raise ValueError("need at least two gallery items to pick neighbors")
    gt = i if ground_truth is None else int(ground_truth)
    order = np.argsort(-s.scores[i], kind="stable")
    order = order[order != gt]
    return NeighborSet(anchor=i, members=order[: min(k, s.m - 1)], ground_truth=gt)


def neighbor_targets(s_tilde: SimilarityMatrix, ns: NeighborSet) -> np.ndarray:
    """Target vector H over the ground truth plus the neighbor members.

    The ground-truth slot is pinned to 1.0; member slots are the softmax of
    the de-centrality scores restricted to the members, so those sum to 1.
    """
    member_scores = s_tilde.scores[ns.anchor, ns.members]
    h = np.empty(ns.members.size + 1, dtype=np.float64)
    h[0] = 1.0
    h[1:] = row_softmax(member_scores[None, :], s_tilde.temperature)[0]
    return h


def loss_nbi(s: SimilarityMatrix, h: np.ndarray, ns: NeighborSet,
             mode: str = GRAD_MODE_EXACT) -> LossBundle:
    """Neighbor adjusting loss for one anchor, with two gradient modes.

    value = -sum_t H_t log P_t over the ground truth plus members, where P
    is the softmax of the raw scores restricted to those columns.

    mode 'exact' returns the true derivative of this value given fixed
    targets, (P_t * sum(H) - H_t) / tau; since the pinned ground truth makes
    sum(H) = 2, this is what finite differences reproduce. mode 'paper'
    emits the plain difference P_t - H_t, the simplified form that assumes
    the targets are themselves a normalized distribution.
    """
    if mode not in (GRAD_MODE_EXACT, GRAD_MODE_PAPER):
        raise ValueError(f"unknown grad mode {mode!r}")
    h = np.asarray(h, dtype=np.float64)
    plus = ns.plus_indices
    if h.shape != (plus.size,):
        raise InconsistentTargets(
            f"target vector has shape {h.shape}, expected ({plus.size},)")
    logits = s.scores[ns.anchor, plus]
    logp = row_log_softmax(logits[None, :], s.temperature)[0]
    p = np.exp(logp)
    value = float(-(h * logp).sum())
    if mode == GRAD_MODE_EXACT:
        local = (p * h.sum() - h) / s.temperature
    else:
        local = p - h
    grad = np.zeros_like(s.scores)
    grad[ns.anchor, plus] = local
    return LossBundle(value, grad)


def loss_kl(low: SimilarityMatrix, high: SimilarityMatrix,
            symmetric: bool = False) -> LossBundle:
    """Mean row-wise KL(softmax(high) || softmax(low)) with both gradients.

    The high-level distribution is the reference; ``grad`` is with respect
    to the low-level scores and ``grad_high`` to the high-level scores.
    With ``symmetric`` the average of both KL directions is returned
    instead (off by default).
    """
    if low.scores.shape != high.scores.shape:
        raise ShapeMismatch(
            f"low {low.scores.shape} and high {high.scores.shape} differ")
    n = low.n
    logq = row_log_softmax(low.scores, low.temperature)
    logp = row_log_softmax(high.scores, high.temperature)
    p = np.exp(logp)
    per_sample = (p * (logp - logq)).sum(axis=1)
    value = per_sample.mean()
    grad_low = (np.exp(logq) - p) / (n * low.temperature)
    # d/d high of sum p (log p - log q): p_j ((log p - log q)_j - KL_row)
    grad_high = p * ((logp - logq) - per_sample[:, None]) / (n * high.temperature)
    if not symmetric:
        return LossBundle(float(value), grad_low, per_sample, grad_high=grad_high)
    reverse = loss_kl(high, low)
    return LossBundle(
        0.5 * (value + reverse.value),
        0.5 * (grad_low + reverse.grad_high),
        0.5 * (per_sample + reverse.per_sample),
        grad_high=0.5 * (grad_high + reverse.grad),
    )


def total_loss(parts: dict[str, dict[str, LossBundle]]) -> LossBundle:
    """Half-sum of all loss parts over both retrieval directions.

    ``parts`` maps direction ('q2g', 'g2q') to a mapping with the keys
    'wti', 'nbi', 'opt' and 'kl'. Gallery-to-query gradients are transposed
    into the query-to-gallery frame before combining.
    """
    for direction in DIRECTIONS:
        if direction not in parts:
            raise MissingPart(f"missing direction {direction!r}")
        for name in LOSS_PARTS:
            if name not in parts[direction]:
                raise MissingPart(f"missing part {name!r} for direction {direction!r}")
    value = 0.0
    grad = None
    for direction in DIRECTIONS:
        for name in LOSS_PARTS:
            bundle = parts[direction][name]
            value += bundle.value
            g = bundle.grad if direction == "q2g" else bundle.grad.T
            grad = g.copy() if grad is None else grad + g
    return LossBundle(0.5 * value, 0.5 * grad)
