from collections import Counter

import numpy as np
import pytest

import sasvkit.sampler as sampler_mod
from sasvkit.core import TrialLabel
from sasvkit.errors import BadParams, DivergenceDetected, TooFewSpeakers
from sasvkit.metrics import sv_eer
from sasvkit.sampler import (
    PkConfig,
    SpeakerDataset,
    ToyModel,
    TrainConfig,
    eval_toy,
    gen_synthetic,
    pk_batches,
    train_toy,
)


def test_gen_synthetic_zero_noise_collapses_to_means():
    ds = gen_synthetic(3, 4, 8, noise=0.0, seed=1)
    for i, sid in enumerate(ds.speaker_ids):
        for row in ds.speakers[sid]:
            assert np.allclose(row, ds.means[i], atol=1e-12)


def test_gen_synthetic_deterministic():
    a = gen_synthetic(5, 6, 8, noise=0.2, seed=42)
    b = gen_synthetic(5, 6, 8, noise=0.2, seed=42)
    for sid in a.speaker_ids:
        assert np.array_equal(a.speakers[sid], b.speakers[sid])


def test_gen_synthetic_within_vs_between_cosine():
    ds = gen_synthetic(20, 30, 32, noise=0.1, seed=0)
    mats = [ds.speakers[sid] for sid in ds.speaker_ids]
    within, between = [], []
    for i, m in enumerate(mats):
        within.append(np.mean(m @ m.T) )
        for j in range(i + 1, len(mats)):
            between.append(np.mean(m @ mats[j].T))
    assert np.mean(within) > np.mean(between)


def test_gen_synthetic_bad_params():
    with pytest.raises(BadParams):
        gen_synthetic(1, 5, 8, 0.1)
    with pytest.raises(BadParams):
        gen_synthetic(3, 0, 8, 0.1)


def test_pk_exact_cover():
    ds = gen_synthetic(2, 2, 4, noise=0.1, seed=0)
    batches = pk_batches(ds, PkConfig(P=2, K=2, seed=0))
    assert len(batches) == 1
    feats, labels = batches[0]
    assert feats.shape == (4, 4)
    assert Counter(labels.tolist()) == {0: 2, 1: 2}
    all_rows = np.concatenate([ds.speakers[s] for s in ds.speaker_ids])
    assert sorted(map(tuple, feats)) == sorted(map(tuple, all_rows))


def test_pk_label_multiset_property():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n_spk = int(rng.integers(2, 7))
        utts = int(rng.integers(1, 8))
        ds = gen_synthetic(n_spk, utts, 4, noise=0.2, seed=int(rng.integers(1 << 30)))
        P = int(rng.integers(2, n_spk + 1))
        K = int(rng.integers(1, 5))
        for feats, labels in pk_batches(ds, PkConfig(P=P, K=K, seed=7)):
            counts = Counter(labels.tolist())
            assert len(counts) == P
            assert all(c == K for c in counts.values())


def test_pk_epoch_coverage_and_proportionality():
    ds = gen_synthetic(20, 30, 8, noise=0.1, seed=3)
    cfg = PkConfig(P=8, K=4, seed=5)
    batches = pk_batches(ds, cfg)
    draws = Counter()
    used = {s: set() for s in range(20)}
    for feats, labels in batches:
        for row, lab in zip(feats, labels):
            draws[int(lab)] += 1
            sid = ds.speaker_ids[int(lab)]
            idx = np.flatnonzero((ds.speakers[sid] == row).all(axis=1))
            used[int(lab)].update(idx.tolist())
    # every utterance of every speaker sampled at least once
    assert all(len(used[s]) == 30 for s in range(20))
    per_spk = [draws[s] for s in range(20)]
    mean = np.mean(per_spk)
    assert all(abs(c - mean) <= cfg.K for c in per_spk)


def test_pk_too_few_speakers():
    ds = gen_synthetic(3, 4, 4, noise=0.1, seed=0)
    with pytest.raises(TooFewSpeakers):
        pk_batches(ds, PkConfig(P=4, K=2, seed=0))


def test_train_zero_steps_is_identity():
    ds = gen_synthetic(4, 6, 8, noise=0.1, seed=0)
    model0 = ToyModel.random(6, 8, 4, seed=0)
    model, history = train_toy(ds, model0, TrainConfig(steps=0), PkConfig(P=2, K=2))
    assert history == []
    assert np.array_equal(model.projection, model0.projection)
    assert np.array_equal(model.class_weights, model0.class_weights)


def test_first_step_descends_on_its_own_batch():
    from sasvkit.losses import LossBatch, combined_loss

    ds = gen_synthetic(6, 8, 12, noise=0.15, seed=2)
    model0 = ToyModel.random(8, 12, 6, seed=2)
    tc = TrainConfig(steps=1, learning_rate=1e-3, seed=2)
    pk = PkConfig(P=3, K=2, seed=2)
    model, history = train_toy(ds, model0, tc, pk)
    feats, labels = pk_batches(ds, pk)[0]
    after = combined_loss(
        LossBatch(model.embed(feats), model.class_weights, labels),
        tc.sphereface,
        tc.circle,
    )[0]
    assert history[0] > after


def test_training_does_not_mutate_inputs():
    ds = gen_synthetic(4, 6, 8, noise=0.1, seed=0)
    snapshot = {sid: ds.speakers[sid].copy() for sid in ds.speaker_ids}
    model0 = ToyModel.random(6, 8, 4, seed=0)
    proj0 = model0.projection.copy()
    train_toy(ds, model0, TrainConfig(steps=10), PkConfig(P=2, K=2))
    assert all(np.array_equal(ds.speakers[s], snapshot[s]) for s in snapshot)
    assert np.array_equal(model0.projection, proj0)


def test_training_bit_reproducible():
    ds = gen_synthetic(6, 8, 12, noise=0.15, seed=4)
    runs = []
    for _ in range(2):
        model0 = ToyModel.random(8, 12, 6, seed=4)
        model, history = train_toy(
            ds, model0, TrainConfig(steps=30, learning_rate=0.05, seed=4),
            PkConfig(P=3, K=2, seed=4),
        )
        runs.append((model, history))
    assert runs[0][1] == runs[1][1]
    assert np.array_equal(runs[0][0].projection, runs[1][0].projection)
    assert np.array_equal(runs[0][0].class_weights, runs[1][0].class_weights)


def test_divergence_detection(monkeypatch):
    ds = gen_synthetic(4, 6, 8, noise=0.1, seed=0)
    model0 = ToyModel.random(6, 8, 4, seed=0)

    def exploding_loss(batch, sf, cc):
        return float("nan"), np.zeros_like(batch.embeddings), np.zeros_like(
            batch.class_weights
        )

    monkeypatch.setattr(sampler_mod, "combined_loss", exploding_loss)
    with pytest.raises(DivergenceDetected) as err:
        train_toy(ds, model0, TrainConfig(steps=5), PkConfig(P=2, K=2))
    assert err.value.step == 0


def test_eval_toy_single_speaker_all_target():
    rng = np.random.default_rng(0)
    mean = rng.standard_normal(6)
    mean /= np.linalg.norm(mean)
    ds = SpeakerDataset(
        {"only": rng.standard_normal((4, 6))}, means=mean[None, :], noise=0.1, seed=0
    )
    model = ToyModel.random(4, 6, 2, seed=0)
    scores = eval_toy(model, ds, 10, seed=1)
    assert len(scores) == 10
    assert all(t.label is TrialLabel.TARGET for t, _ in scores)


def test_eval_toy_deterministic():
    ds = gen_synthetic(5, 6, 8, noise=0.1, seed=0)
    model = ToyModel.random(6, 8, 5, seed=0)
    a = eval_toy(model, ds, 100, seed=7)
    b = eval_toy(model, ds, 100, seed=7)
    assert a.keys() == b.keys()
    assert np.array_equal(a.scores(), b.scores())


def test_eval_toy_zero_noise_perfect():
    ds = gen_synthetic(5, 6, 8, noise=0.0, seed=0)
    model = ToyModel.random(6, 8, 5, seed=0)
    scores = eval_toy(model, ds, 50, seed=3)
    assert sv_eer(scores)[0] == 0.0
