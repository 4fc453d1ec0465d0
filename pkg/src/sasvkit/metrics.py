"""Detection metrics over labeled score sets: EER variants and a-DCF.

Decision rule is fixed globally: accept iff score >= threshold. All
sweeps evaluate every distinct observed score plus -inf and +inf as
candidate thresholds, which covers every achievable operating point, so
results are exact rather than interpolated.

Rates at threshold tau:
    P_miss(tau)  = fraction of positive (target) scores < tau
    P_fa(tau)    = fraction of negative scores >= tau

EER picks the candidate minimizing |P_miss - P_fa| (ties: lower tau) and
reports (P_miss + P_fa) / 2 there. The a-DCF is

    a-DCF(tau) = c_miss * pi_tar * P_miss(tau)
               + c_fa_non * pi_non * P_fa_non(tau)
               + c_fa_spf * pi_spf * P_fa_spf(tau)

minimized over the same candidate sweep; the normalized value divides by
the cost of the better of the two dummy systems (accept-all /
reject-all).
"""

from dataclasses import dataclass

import numpy as np

from .core import partition_scores
from .errors import EmptyClass


@dataclass(frozen=True)
class ErrorRatePoint:
    threshold: float
    p_miss: float
    p_fa_nontarget: float
    p_fa_spoof: float


@dataclass(frozen=True)
class ADcfConfig:
    """Costs and priors of the a-DCF.

    The defaults follow the a-DCF cost model used by SASV challenge
    protocols (c_miss=1, c_fa=10 for both false-accept types, priors
    0.9405 / 0.0095 / 0.05); they are printed alongside every result so
    reported numbers are auditable.
    """

    c_miss: float = 1.0
    c_fa_nontarget: float = 10.0
    c_fa_spoof: float = 10.0
    pi_target: float = 0.9405
    pi_nontarget: float = 0.0095
    pi_spoof: float = 0.05

    def __post_init__(self):
        for name in ("c_miss", "c_fa_nontarget", "c_fa_spoof"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        priors = (self.pi_target, self.pi_nontarget, self.pi_spoof)
        if any(p <= 0 for p in priors):
            raise ValueError("priors must be positive")
        if abs(sum(priors) - 1.0) > 1e-9:
            raise ValueError("priors must sum to 1")

    def dummy_cost(self):
        """Cost of the better of accept-all and reject-all."""
        reject_all = self.c_miss * self.pi_target
        accept_all = (
            self.c_fa_nontarget * self.pi_nontarget
            + self.c_fa_spoof * self.pi_spoof
        )
        return min(reject_all, accept_all)


def _candidates(*score_arrays):
    scores = np.unique(np.concatenate(score_arrays))
    return np.concatenate(([-np.inf], scores, [np.inf]))


def _miss_rate(sorted_pos, taus):
    # fraction of positives strictly below tau
    return np.searchsorted(sorted_pos, taus, side="left") / sorted_pos.shape[0]


def _fa_rate(sorted_neg, taus):
    # fraction of negatives at or above tau
    n = sorted_neg.shape[0]
    return (n - np.searchsorted(sorted_neg, taus, side="left")) / n


def eer(positive, negative):
    """Equal error rate and its threshold over an exact sweep.

    Returns (eer, threshold). Among candidates with minimal
    |P_miss - P_fa| the lowest threshold wins.
    """
    pos = np.sort(np.asarray(positive, dtype=np.float64))
    neg = np.sort(np.asarray(negative, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise EmptyClass("eer needs at least one score in each class")
    taus = _candidates(pos, neg)
    frr = _miss_rate(pos, taus)
    far = _fa_rate(neg, taus)
    idx = int(np.argmin(np.abs(frr - far)))  # first minimum = lowest tau
    return float((frr[idx] + far[idx]) / 2.0), float(taus[idx])


def sv_eer(scores):
    """Speaker-verification EER: targets vs nontargets, spoofs excluded."""
    target, nontarget, _ = partition_scores(scores)
    if not target or not nontarget:
        raise EmptyClass("sv_eer needs target and nontarget scores")
    return eer(target, nontarget)


def spf_eer(scores):
    """Spoofing EER: targets vs spoofed trials, nontargets excluded."""
    target, _, spoof = partition_scores(scores)
    if not target or not spoof:
        raise EmptyClass("spf_eer needs target and spoof scores")
    return eer(target, spoof)


def a_dcf(scores, cfg=ADcfConfig()):
    """Minimum a-DCF, its threshold, and the normalized value.

    Returns (min_a_dcf, threshold, normalized). The normalizer is the
    cost of the better dummy system, so normalized = 1 means no better
    than always accepting or always rejecting.
    """
    target, nontarget, spoof = partition_scores(scores)
    if not target or not nontarget or not spoof:
        raise EmptyClass("a_dcf needs target, nontarget, and spoof scores")
    tar = np.sort(np.asarray(target, dtype=np.float64))
    non = np.sort(np.asarray(nontarget, dtype=np.float64))
    spf = np.sort(np.asarray(spoof, dtype=np.float64))
    taus = _candidates(tar, non, spf)
    cost = (
        cfg.c_miss * cfg.pi_target * _miss_rate(tar, taus)
        + cfg.c_fa_nontarget * cfg.pi_nontarget * _fa_rate(non, taus)
        + cfg.c_fa_spoof * cfg.pi_spoof * _fa_rate(spf, taus)
    )
    idx = int(np.argmin(cost))
    minimum = float(cost[idx])
    return minimum, float(taus[idx]), minimum / cfg.dummy_cost()


def det_points(scores):
    """Error rates at every candidate threshold, ascending threshold."""
    target, nontarget, spoof = partition_scores(scores)
    if not target or not nontarget or not spoof:
        raise EmptyClass("det_points needs all three classes")
    tar = np.sort(np.asarray(target, dtype=np.float64))
    non = np.sort(np.asarray(nontarget, dtype=np.float64))
    spf = np.sort(np.asarray(spoof, dtype=np.float64))
    taus = _candidates(tar, non, spf)
    p_miss = _miss_rate(tar, taus)
    p_fa_non = _fa_rate(non, taus)
    p_fa_spf = _fa_rate(spf, taus)
    return [
        ErrorRatePoint(float(t), float(m), float(fn), float(fs))
        for t, m, fn, fs in zip(taus, p_miss, p_fa_non, p_fa_spf)
    ]
