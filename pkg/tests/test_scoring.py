import numpy as np
import pytest

from sasvkit.core import Embedding, EmbeddingSet, ScoreSet, Trial, TrialLabel
from sasvkit.errors import (
    BadWeights,
    DimensionMismatch,
    EmptyCohort,
    EmptyList,
    MissingEmbedding,
    TrialMismatch,
    ZeroNorm,
)
from sasvkit.scoring import (
    AsNormConfig,
    CascadeConfig,
    as_norm,
    cascade,
    cohort_stats,
    cosine,
    ensemble,
    score_trials,
    top_k_cohort_scores,
)


def test_cosine_examples():
    assert cosine([3, 4], [3, 4]) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    assert abs(cosine([1, 2, 2], [2, 1, 2]) - 8 / 9) < 1e-15


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine([1, 0], [1, 0, 0])
    with pytest.raises(ZeroNorm):
        cosine([0, 0], [1, 0])


def test_cosine_scale_invariance():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = rng.standard_normal(5)
        b = rng.standard_normal(5)
        lam, mu = rng.uniform(0.01, 100, size=2)
        assert abs(cosine(a, b) - cosine(lam * a, mu * b)) < 1e-12


def _embset(vectors, prefix="c"):
    return EmbeddingSet(
        Embedding(f"{prefix}{i}", v) for i, v in enumerate(vectors)
    )


def test_top_k_selection_and_saturation():
    probe = Embedding("p", [1.0, 0.0])
    # cohort cosines 0.1, 0.5, 0.3 against the probe
    cohort = _embset(
        [
            [0.1, np.sqrt(1 - 0.01)],
            [0.5, np.sqrt(1 - 0.25)],
            [0.3, np.sqrt(1 - 0.09)],
        ]
    )
    top2 = top_k_cohort_scores(probe, cohort, 2)
    assert np.allclose(top2, [0.5, 0.3], atol=1e-6)
    assert len(top_k_cohort_scores(probe, cohort, 10)) == 3
    with pytest.raises(EmptyCohort):
        top_k_cohort_scores(probe, EmbeddingSet(), 2)


def test_top_k_matches_sort_oracle():
    rng = np.random.default_rng(11)
    probe = Embedding("p", rng.standard_normal(6))
    cohort = _embset(rng.standard_normal((50, 6)))
    got = top_k_cohort_scores(probe, cohort, 5)
    all_scores = [cosine(probe.values, e.values) for e in cohort]
    assert got == sorted(all_scores, reverse=True)[:5]
    # multiset subset, sorted descending
    assert got == sorted(got, reverse=True)


def test_top_k_tie_break_by_insertion_order():
    probe = Embedding("p", [1.0, 0.0])
    cohort = _embset([[0.0, 1.0], [1.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    # scores [0, 1, 1, 0]; ties resolved toward earlier members
    got = top_k_cohort_scores(probe, cohort, 3)
    assert got == [1.0, 1.0, 0.0]


def test_cohort_stats_examples():
    st = cohort_stats([0.1, 0.3])
    assert abs(st.mu - 0.2) < 1e-15 and abs(st.sigma - 0.1) < 1e-15
    assert st.k_used == 2
    degenerate = cohort_stats([0.7, 0.7, 0.7])
    assert degenerate.sigma == 1e-8  # floor on a zero-variance cohort
    st2 = cohort_stats([-1.0, 1.0])
    assert st2.mu == 0.0 and st2.sigma == 1.0
    with pytest.raises(EmptyList):
        cohort_stats([])


def test_as_norm_hand_example():
    value = as_norm(0.5, cohort_stats([0.1, 0.3]), cohort_stats([0.0, 0.4]))
    assert abs(value - 2.25) < 1e-12


def test_as_norm_identity_and_symmetric_collapse():
    unit = cohort_stats([-1.0, 1.0])  # mu 0, sigma 1
    assert as_norm(0.5, unit, unit) == 0.5
    st = cohort_stats([0.2, 0.6])
    raw = 0.9
    assert abs(as_norm(raw, st, st) - (raw - st.mu) / st.sigma) < 1e-15


def test_as_norm_joint_affine_invariance():
    rng = np.random.default_rng(5)
    for _ in range(200):
        raw = rng.standard_normal()
        ce = list(rng.standard_normal(8))
        ct = list(rng.standard_normal(8))
        alpha = rng.uniform(0.1, 10)
        beta = rng.standard_normal()
        base = as_norm(raw, cohort_stats(ce), cohort_stats(ct))
        moved = as_norm(
            alpha * raw + beta,
            cohort_stats([alpha * v + beta for v in ce]),
            cohort_stats([alpha * v + beta for v in ct]),
        )
        assert abs(base - moved) < 1e-9


def test_score_trials_raw_cosine():
    embs = EmbeddingSet([Embedding("e1", [1, 2, 2]), Embedding("t1", [2, 1, 2])])
    out = score_trials([Trial("e1", "t1")], embs)
    assert abs(out.score_of(("e1", "t1")) - 8 / 9) < 1e-6


def test_score_trials_asnorm_matches_manual_composition():
    rng = np.random.default_rng(2)
    embs = _embset(rng.standard_normal((12, 4)), prefix="u")
    cohort = _embset(rng.standard_normal((20, 4)), prefix="coh")
    trials = [Trial(f"u{i}", f"u{i + 6}") for i in range(6)]
    cfg = AsNormConfig(top_k=7)
    out = score_trials(trials, embs, cohort, cfg)
    for t in trials:
        raw = cosine(embs[t.enroll_id].values, embs[t.test_id].values)
        se = cohort_stats(top_k_cohort_scores(embs[t.enroll_id], cohort, 7))
        st = cohort_stats(top_k_cohort_scores(embs[t.test_id], cohort, 7))
        assert out.score_of(t.key) == as_norm(raw, se, st)


def test_score_trials_missing_embedding():
    embs = EmbeddingSet([Embedding("e1", [1.0])])
    with pytest.raises(MissingEmbedding, match="spk9-utt3"):
        score_trials([Trial("e1", "spk9-utt3")], embs)


def _scoreset(pairs_scores, label=TrialLabel.UNLABELED):
    s = ScoreSet()
    for (e, t), v in pairs_scores:
        s.append(Trial(e, t, label), v)
    return s


def test_cascade_examples():
    cfg = CascadeConfig(sd_threshold=0.5)
    asv = _scoreset([(("e", "t"), 2.25)])
    assert cascade(_scoreset([(("e", "t"), 0.1)]), asv, cfg).score_of(("e", "t")) == -5.0
    assert cascade(_scoreset([(("e", "t"), 0.9)]), asv, cfg).score_of(("e", "t")) == 2.25
    # boundary: equality counts as bona fide
    assert cascade(_scoreset([(("e", "t"), 0.5)]), asv, cfg).score_of(("e", "t")) == 2.25


def test_cascade_trial_mismatch():
    cfg = CascadeConfig(sd_threshold=0.0)
    with pytest.raises(TrialMismatch):
        cascade(_scoreset([(("a", "b"), 1.0)]), _scoreset([(("a", "c"), 1.0)]), cfg)


def test_cascade_reject_set_property():
    rng = np.random.default_rng(9)
    cfg = CascadeConfig(sd_threshold=0.3, reject_score=-5.0)
    keys = [(f"e{i}", f"t{i}") for i in range(40)]
    sd = _scoreset([(k, float(rng.standard_normal())) for k in keys])
    asv = _scoreset([(k, float(rng.standard_normal() + 10)) for k in keys])
    out = cascade(sd, asv, cfg)
    for k in keys:
        if sd.score_of(k) < 0.3:
            assert out.score_of(k) == -5.0
        else:
            assert out.score_of(k) == asv.score_of(k)


def test_ensemble_examples():
    s1 = _scoreset([(("e", "t"), 1.0)])
    assert ensemble([s1]).score_of(("e", "t")) == 1.0
    s3 = _scoreset([(("e", "t"), 3.0)])
    assert ensemble([s1, s3]).score_of(("e", "t")) == 2.0
    s0 = _scoreset([(("e", "t"), 0.0)])
    s4 = _scoreset([(("e", "t"), 4.0)])
    assert ensemble([s0, s4], weights=[1, 3]).score_of(("e", "t")) == 3.0


def test_ensemble_permutation_invariance():
    rng = np.random.default_rng(1)
    keys = [(f"e{i}", f"t{i}") for i in range(10)]
    sets = [_scoreset([(k, float(rng.standard_normal())) for k in keys]) for _ in range(3)]
    weights = [1.0, 2.0, 3.0]
    a = ensemble(sets, weights)
    b = ensemble([sets[2], sets[0], sets[1]], [weights[2], weights[0], weights[1]])
    for k in keys:
        assert abs(a.score_of(k) - b.score_of(k)) < 1e-12


def test_ensemble_errors():
    s1 = _scoreset([(("e", "t"), 1.0)])
    with pytest.raises(BadWeights):
        ensemble([s1], weights=[1.0, 2.0])
    with pytest.raises(BadWeights):
        ensemble([s1], weights=[0.0])
    with pytest.raises(TrialMismatch):
        ensemble([s1, _scoreset([(("x", "y"), 1.0)])])
    with pytest.raises(ValueError):
        ensemble([])
