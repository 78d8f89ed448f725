"""FIFO memory bank of recent embeddings and the centrality scores built on it.

The bank keeps one queue per modality. Centrality of a sample is its mean
cosine similarity to the stored vectors: against the same-modality queue
(intra) or the opposite-modality queue (cross). Stored vectors are
detached snapshots; they never carry gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MODALITIES, MODALITY_GALLERY, MODALITY_QUERY, EmbeddingSet
from .errors import BatchTooLarge, DimensionMismatch, EmptyBank, NonPositiveKappa

KIND_INTRA = "intra"
KIND_CROSS = "cross"

_UNIT_ATOL = 1e-6


@dataclass
class CentralityVector:
    """Mean cosine similarities of a batch against one bank queue."""

    values: np.ndarray
    kind: str = KIND_INTRA

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in (KIND_INTRA, KIND_CROSS):
            raise ValueError(f"kind must be 'intra' or 'cross', got {self.kind!r}")


class MemoryBank:
    """Fixed-capacity FIFO store of unit vectors, one queue per modality.

    Oldest entries sit first; pushing past capacity evicts exactly as many
    of the oldest entries as needed. Writers need exclusive access, readers
    may run concurrently between writes.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._slots = {m: np.empty((0, dim), dtype=np.float64) for m in MODALITIES}

    def fill(self, modality: str) -> int:
        return self._slots[modality].shape[0]

    def vectors(self, modality: str) -> np.ndarray:
        """Stored vectors for one modality, oldest first (read-only view)."""
        view = self._slots[modality].view()
        view.flags.writeable = False
        return view

    def _opposite(self, modality: str) -> str:
        return MODALITY_GALLERY if modality == MODALITY_QUERY else MODALITY_QUERY


def push_batch(bank: MemoryBank, batch: EmbeddingSet) -> MemoryBank:
    """Append a batch to its modality queue, evicting the oldest overflow."""
    if batch.dim != bank.dim:
        raise DimensionMismatch(f"batch dim {batch.dim} != bank dim {bank.dim}")
    if batch.n > bank.capacity:
        raise BatchTooLarge(f"batch of {batch.n} exceeds capacity {bank.capacity}")
    norms = np.sqrt((batch.data ** 2).sum(axis=1))
    if not np.allclose(norms, 1.0, atol=_UNIT_ATOL):
        raise ValueError("bank only stores unit-norm vectors; normalize first")
    merged = np.concatenate([bank._slots[batch.modality], batch.data.copy()], axis=0)
    bank._slots[batch.modality] = merged[-bank.capacity:]
    return bank


def _centrality(stored: np.ndarray, samples: EmbeddingSet, kind: str) -> CentralityVector:
    if stored.shape[0] == 0:
        raise EmptyBank("centrality requested against an empty queue")
    if samples.dim != stored.shape[1]:
        raise DimensionMismatch(f"sample dim {samples.dim} != bank dim {stored.shape[1]}")
    norms = np.sqrt((samples.data ** 2).sum(axis=1))
    unit = samples.data / norms[:, None]
    values = (unit @ stored.T).mean(axis=1)
    return CentralityVector(np.clip(values, -1.0, 1.0), kind)


def intra_centrality(bank: MemoryBank, samples: EmbeddingSet) -> CentralityVector:
    """Mean cosine of each sample to the same-modality queue."""
    return _centrality(bank._slots[samples.modality], samples, KIND_INTRA)


def cross_centrality(bank: MemoryBank, samples: EmbeddingSet) -> CentralityVector:
    """Mean cosine of each sample to the opposite-modality queue."""
    return _centrality(bank._slots[bank._opposite(samples.modality)], samples, KIND_CROSS)


def centrality_weights(c: CentralityVector, kappa: float,
                       normalize: bool = True) -> np.ndarray:
    """Per-sample weights exp(C_i / kappa) from intra-modal centrality.

    With ``normalize`` set (the default) the weights are rescaled to batch
    mean 1 so the effective learning rate stays comparable across kappa.
    """
    if not kappa > 0:
        raise NonPositiveKappa(f"kappa must be positive, got {kappa}")
    if c.kind != KIND_INTRA:
        raise ValueError("centrality weights are defined on intra-modal centrality")
    w = np.exp(c.values / kappa)
    if normalize:
        w = w / w.mean()
    return w
