"""Domain types shared by every module: embeddings, trials, labels, scores.

All types are immutable after construction and safe to share between
threads. Scores are kept as 64-bit floats everywhere; embedding storage
is 32-bit (matching the on-disk binary format) and is promoted to 64-bit
inside numerical routines.
"""

import math
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    DuplicateTrial,
    UnlabeledTrial,
)


class TrialLabel(Enum):
    TARGET = "target"
    NONTARGET = "nontarget"
    SPOOF = "spoof"
    UNLABELED = "unlabeled"

    @classmethod
    def from_token(cls, token):
        """Parse one of the exact lowercase tokens target/nontarget/spoof."""
        for member in (cls.TARGET, cls.NONTARGET, cls.SPOOF):
            if token == member.value:
                return member
        raise ValueError(f"unknown label {token!r}")


class Embedding:
    """A unit-normalizable vector identified by an utterance ID.

    IDs are opaque strings compared exactly; no path semantics.
    """

    __slots__ = ("id", "values")

    def __init__(self, id, values):
        if not isinstance(id, str) or id == "":
            raise ValueError("embedding ID must be a non-empty string")
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 1 or values.shape[0] < 1:
            raise DimensionMismatch(
                f"embedding {id!r}: expected a 1-D vector with D >= 1"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"embedding {id!r} has non-finite components")
        if not np.any(values != 0.0):
            raise ValueError(f"embedding {id!r} is the zero vector")
        values.setflags(write=False)
        self.id = id
        self.values = values

    @property
    def dim(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"Embedding({self.id!r}, dim={self.dim})"


class EmbeddingSet:
    """ID-indexed collection of embeddings sharing one dimension.

    Iteration preserves insertion order, which downstream code relies on
    for deterministic tie-breaking.
    """

    def __init__(self, embeddings=()):
        self._by_id = {}
        self._order = []
        self.dim = None
        for emb in embeddings:
            self.add(emb)

    def add(self, emb):
        if self.dim is None:
            self.dim = emb.dim
        elif emb.dim != self.dim:
            raise DimensionMismatch(
                f"embedding {emb.id!r} has dimension {emb.dim}, set has {self.dim}"
            )
        if emb.id in self._by_id:
            raise DuplicateId(f"duplicate embedding ID {emb.id!r}")
        self._by_id[emb.id] = emb
        self._order.append(emb)

    def __len__(self):
        return len(self._order)

    def __contains__(self, id):
        return id in self._by_id

    def __getitem__(self, id):
        return self._by_id[id]

    def __iter__(self):
        return iter(self._order)

    def ids(self):
        return [e.id for e in self._order]

    def matrix(self):
        """All vectors stacked in insertion order, promoted to float64."""
        return np.stack([e.values for e in self._order]).astype(np.float64)


class Trial:
    """One verification attempt: (enrollment ID, test ID, label)."""

    __slots__ = ("enroll_id", "test_id", "label")

    def __init__(self, enroll_id, test_id, label=TrialLabel.UNLABELED):
        if not enroll_id or not test_id:
            raise ValueError("trial IDs must be non-empty")
        self.enroll_id = enroll_id
        self.test_id = test_id
        self.label = label

    @property
    def key(self):
        return (self.enroll_id, self.test_id)

    def __eq__(self, other):
        return (
            isinstance(other, Trial)
            and self.key == other.key
            and self.label == other.label
        )

    def __hash__(self):
        return hash((self.key, self.label))

    def __repr__(self):
        return f"Trial({self.enroll_id!r}, {self.test_id!r}, {self.label.value})"


class ScoreSet:
    """Ordered (trial, score) records with unique (enroll, test) pairs."""

    def __init__(self, records=()):
        self._records = []
        self._index = {}
        for trial, score in records:
            self.append(trial, score)

    def append(self, trial, score):
        score = float(score)
        if not math.isfinite(score):
            raise ValueError(f"non-finite score for trial {trial.key}")
        if trial.key in self._index:
            raise DuplicateTrial(f"duplicate trial {trial.key}")
        self._index[trial.key] = len(self._records)
        self._records.append((trial, score))

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __contains__(self, key):
        return key in self._index

    def score_of(self, key):
        return self._records[self._index[key]][1]

    def trial_of(self, key):
        return self._records[self._index[key]][0]

    def keys(self):
        return [t.key for t, _ in self._records]

    def scores(self):
        return np.array([s for _, s in self._records], dtype=np.float64)


def partition_scores(scores):
    """Split a fully labeled ScoreSet into (target, nontarget, spoof) lists.

    Lists keep the original record order. Raises UnlabeledTrial on the
    first record without a label.
    """
    target, nontarget, spoof = [], [], []
    buckets = {
        TrialLabel.TARGET: target,
        TrialLabel.NONTARGET: nontarget,
        TrialLabel.SPOOF: spoof,
    }
    for trial, score in scores:
        if trial.label is TrialLabel.UNLABELED:
            raise UnlabeledTrial(f"trial {trial.key} has no label")
        buckets[trial.label].append(score)
    return target, nontarget, spoof
