"""Cosine scoring, top-K AS-Norm, spoof-detector cascade, and ensembling.

The trial score pipeline is: cosine similarity between enrollment and
test embeddings, optionally normalized with adaptive symmetric score
normalization (AS-Norm) against an imposter cohort:

    s_norm = 0.5 * ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t)

where the mean/std on each side come from the top-K cohort similarities
of that side's embedding. A spoof-detector cascade then replaces the
score of any trial whose detector score falls below a threshold with a
fixed reject score.

All functions are pure; scores are float64 throughout.
"""

from dataclasses import dataclass

import numpy as np

from .core import ScoreSet, Trial
from .errors import (
    BadWeights,
    DimensionMismatch,
    EmptyCohort,
    EmptyList,
    MissingEmbedding,
    TrialMismatch,
    ZeroNorm,
)

DEFAULT_TOP_K = 300
DEFAULT_REJECT_SCORE = -5.0


@dataclass(frozen=True)
class CohortStats:
    """Mean/std of the selected cohort scores for one trial side."""

    mu: float
    sigma: float
    k_used: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.k_used < 1:
            raise ValueError("k_used must be >= 1")


@dataclass(frozen=True)
class AsNormConfig:
    top_k: int = DEFAULT_TOP_K
    min_sigma: float = 1e-8

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.min_sigma <= 0:
            raise ValueError("min_sigma must be > 0")


@dataclass(frozen=True)
class CascadeConfig:
    sd_threshold: float
    reject_score: float = DEFAULT_REJECT_SCORE

    def __post_init__(self):
        if not np.isfinite(self.reject_score):
            raise ValueError("reject_score must be finite")


def cosine(a, b):
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine undefined for zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _cosines_against_set(probe_values, embset):
    probe = np.asarray(probe_values, dtype=np.float64)
    mat = embset.matrix()
    if mat.shape[1] != probe.shape[0]:
        raise DimensionMismatch(
            f"probe dimension {probe.shape[0]} vs cohort dimension {mat.shape[1]}"
        )
    pn = np.linalg.norm(probe)
    if pn == 0.0:
        raise ZeroNorm("zero-norm probe")
    norms = np.linalg.norm(mat, axis=1)
    sims = mat @ probe / (norms * pn)
    return np.clip(sims, -1.0, 1.0)


def top_k_cohort_scores(probe, cohort, top_k):
    """The min(top_k, |cohort|) largest cosine scores, descending.

    Ties are broken by cohort insertion order so results are identical
    across platforms.
    """
    if len(cohort) == 0:
        raise EmptyCohort("cohort set is empty")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    sims = _cosines_against_set(probe.values, cohort)
    # stable sort on descending score keeps insertion order among ties
    order = np.argsort(-sims, kind="stable")
    k = min(top_k, sims.shape[0])
    return [float(sims[i]) for i in order[:k]]


def cohort_stats(scores, min_sigma=1e-8):
    """Mean and population (1/N) standard deviation of cohort scores.

    sigma is floored at min_sigma so downstream division is defined for
    degenerate cohorts.
    """
    if len(scores) == 0:
        raise EmptyList("cohort score list is empty")
    arr = np.asarray(scores, dtype=np.float64)
    mu = float(arr.mean())
    sigma = float(arr.std())  # population std, ddof=0
    if sigma < min_sigma:
        sigma = min_sigma
    return CohortStats(mu=mu, sigma=sigma, k_used=arr.shape[0])


def as_norm(raw, enroll_stats, test_stats):
    """Symmetric adaptive score normalization of one raw score."""
    return 0.5 * (
        (raw - enroll_stats.mu) / enroll_stats.sigma
        + (raw - test_stats.mu) / test_stats.sigma
    )


def score_trials(trials, embeddings, cohort=None, cfg=AsNormConfig()):
    """Score trials by cosine, with AS-Norm when a cohort is given.

    Enroll-side and test-side top-K statistics are computed
    independently against the same cohort set. Stats are cached per
    utterance ID since many trials share a side.
    """
    out = ScoreSet()
    stats_cache = {}

    def side_stats(utt_id):
        if utt_id not in stats_cache:
            top = top_k_cohort_scores(embeddings[utt_id], cohort, cfg.top_k)
            stats_cache[utt_id] = cohort_stats(top, cfg.min_sigma)
        return stats_cache[utt_id]

    for trial in trials:
        for utt_id in (trial.enroll_id, trial.test_id):
            if utt_id not in embeddings:
                raise MissingEmbedding(f"no embedding for ID {utt_id!r}")
        raw = cosine(
            embeddings[trial.enroll_id].values, embeddings[trial.test_id].values
        )
        if cohort is None:
            out.append(trial, raw)
        else:
            out.append(
                trial,
                as_norm(raw, side_stats(trial.enroll_id), side_stats(trial.test_id)),
            )
    return out


def _require_same_trials(a, b):
    ka, kb = set(a.keys()), set(b.keys())
    if ka != kb:
        only_a = sorted(ka - kb)
        only_b = sorted(kb - ka)
        raise TrialMismatch(
            f"trial sets differ; only in first: {only_a[:5]}, only in second: {only_b[:5]}"
        )


def cascade(sd_scores, asv_scores, cfg):
    """Tandem decision: reject (fixed score) when the detector fires.

    A trial whose spoof-detector score is strictly below cfg.sd_threshold
    gets cfg.reject_score; otherwise it keeps its ASV score. Equality
    counts as bona fide. Output order follows asv_scores.
    """
    _require_same_trials(sd_scores, asv_scores)
    out = ScoreSet()
    for trial, asv in asv_scores:
        sd = sd_scores.score_of(trial.key)
        out.append(trial, cfg.reject_score if sd < cfg.sd_threshold else asv)
    return out


def ensemble(sets, weights=None):
    """Per-trial weighted arithmetic mean of several score sets.

    All sets must cover the same (enroll, test) pairs; the output keeps
    the trial order (and labels) of the first set. Default weights are
    equal.
    """
    if len(sets) == 0:
        raise ValueError("ensemble needs at least one score set")
    if weights is None:
        weights = [1.0] * len(sets)
    if len(weights) != len(sets):
        raise BadWeights(f"{len(weights)} weights for {len(sets)} score sets")
    total = float(sum(weights))
    if total <= 0:
        raise BadWeights("weights must sum to a positive value")
    for other in sets[1:]:
        _require_same_trials(sets[0], other)
    out = ScoreSet()
    for trial, _ in sets[0]:
        value = sum(w * s.score_of(trial.key) for w, s in zip(weights, sets))
        out.append(trial, value / total)
    return out
