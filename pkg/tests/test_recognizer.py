"""Recognizer tests: encoding, forward contracts, training behavior,
blending, the semi-supervised schedule and the gradient check."""

import math

import numpy as np
import pytest
import torch

from emoarrange.core import EmotionVA, REST, Segment, Tonality
from emoarrange.features import FormCache, features as compute_features
from emoarrange.paramfile import ParamFileError, load_params
from emoarrange.recognizer import (
    BlendSchedule,
    CONTENT_WIDTH,
    EmotionRecognizer,
    INPUT_WIDTH,
    blend_emotion,
    embed_inputs,
    encode_dataset,
    encode_inputs,
    encode_piece,
    fresh_recognizer,
    gradient_check,
    kfold_eval,
    load_recognizer,
    recognize,
    rmse,
    save_recognizer,
    train_semi_supervised,
    train_supervised,
)
from tests.conftest import C_MAJOR, constant_segment, random_segment
from tests.synthetic import synthetic_corpus


def _feats(seg):
    return compute_features(seg, FormCache())


class TestEncoding:
    def test_fixed_width(self, rng):
        for _ in range(10):
            seg = random_segment(rng)
            row = encode_inputs(seg, _feats(seg))
            assert row.shape == (INPUT_WIDTH,)

    def test_zero_segment_finite(self):
        seg = Segment(
            melody=tuple([REST] * 64), harmony=tuple([None] * 16), tonality=C_MAJOR
        )
        row = encode_inputs(seg, _feats(seg))
        assert np.all(np.isfinite(row))

    def test_collision_rate_over_random_segments(self, rng):
        est = fresh_recognizer(seed=5, hidden=32)
        seen = set()
        for _ in range(1000):
            seg = random_segment(rng)
            emb = embed_inputs(est, seg, _feats(seg))
            seen.add(emb.tobytes())
        assert len(seen) >= 999  # different segments, different vectors


class TestRecognize:
    def test_output_length_and_bounds(self, rng):
        est = fresh_recognizer(hidden=32)
        seg = random_segment(rng)
        out = recognize(est, seg, _feats(seg))
        assert len(out) == 16
        assert all(-1 <= p.valence <= 1 and -1 <= p.arousal <= 1 for p in out)

    def test_two_four_length(self):
        est = fresh_recognizer(hidden=32)
        seg = constant_segment(time_signature="2/4")
        assert len(recognize(est, seg, _feats(seg))) == 8

    def test_pure_function_repeatable(self, rng):
        est = fresh_recognizer(hidden=32)
        seg = random_segment(rng)
        feats = _feats(seg)
        a = recognize(est, seg, feats)
        b = recognize(est, seg, feats)
        assert a == b

    def test_golden_pinned_seed(self):
        # frozen from one run of the pinned-seed fixture (hidden=8, seed=123)
        est = fresh_recognizer(seed=123, hidden=8)
        seg = constant_segment(pitch=64)
        out = recognize(est, seg, _feats(seg))
        assert out[0].valence == pytest.approx(-0.00307467, abs=1e-6)
        assert out[0].arousal == pytest.approx(0.00385803, abs=1e-6)


class TestTrainSupervised:
    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_supervised([])

    def test_init_loss_is_log_bins(self):
        pieces = synthetic_corpus(64, seed=1)
        X, y = encode_dataset(pieces)
        est = EmotionRecognizer(hidden=32, max_epochs=1, lr=0.0, val_fraction=0.0)
        est.fit(X, y)
        assert est.loss_trace_[0] == pytest.approx(math.log(21), abs=1e-6)

    def test_zero_learning_rate_keeps_params(self):
        pieces = synthetic_corpus(32, seed=2)
        X, y = encode_dataset(pieces)
        est = EmotionRecognizer(hidden=16, max_epochs=3, lr=0.0, val_fraction=0.0, seed=7)
        est.fit(X, y)
        ref = EmotionRecognizer(hidden=16, max_epochs=0, lr=0.0, val_fraction=0.0, seed=7)
        ref.fit(X, y)
        for (na, pa), (nb, pb) in zip(
            est.net_.state_dict().items(), ref.net_.state_dict().items()
        ):
            assert na == nb
            assert torch.equal(pa, pb)

    def test_single_example_memorization(self):
        pieces = synthetic_corpus(1, seed=3)
        X, y = encode_dataset(pieces)
        est = EmotionRecognizer(
            hidden=64, max_epochs=500, lr=3e-3, val_fraction=0.0, tol=0.0,
            patience=10**9, batch_size=1,
        )
        est.fit(X, y)
        assert est.loss_trace_[-1] < 0.05 * est.loss_trace_[0]

    def test_loss_decreases_on_separable_corpus(self):
        pieces = synthetic_corpus(128, seed=4)
        est, trace = train_supervised(
            pieces, hidden=64, max_epochs=12, lr=1e-3, seed=0
        )
        assert trace[-1] < trace[0]

    def test_mse_loss_flag(self):
        pieces = synthetic_corpus(32, seed=15)
        est, trace = train_supervised(
            pieces, hidden=16, max_epochs=5, lr=1e-3, loss="mse", val_fraction=0.0
        )
        assert trace[-1] < trace[0]
        X, _ = encode_dataset(pieces)
        pred = est.predict(X)
        assert np.all(np.abs(pred) <= 1.0)


class TestBlend:
    def test_alpha_zero_is_label(self):
        label = (EmotionVA(0.5, -0.5),)
        recog = (EmotionVA(-1, 1),)
        assert blend_emotion(label, recog, BlendSchedule(0, 10)) == label

    def test_alpha_one_is_recognized(self):
        label = (EmotionVA(0.5, -0.5),)
        recog = (EmotionVA(-1, 1),)
        assert blend_emotion(label, recog, BlendSchedule(10, 10)) == recog

    def test_midpoint(self):
        label = (EmotionVA(1, 1),)
        recog = (EmotionVA(0, 0),)
        got = blend_emotion(label, recog, BlendSchedule(5, 10))
        assert got == (EmotionVA(0.5, 0.5),)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            blend_emotion((EmotionVA(0, 0),), (), BlendSchedule(1, 2))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            BlendSchedule(5, 0)
        with pytest.raises(ValueError):
            BlendSchedule(11, 10)

    def test_exact_linearity(self, rng):
        # blend(x, y, a) + blend(y, x, a) = x + y pointwise
        x = tuple(EmotionVA(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(16))
        y = tuple(EmotionVA(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(16))
        sched = BlendSchedule(3, 7)
        xy = blend_emotion(x, y, sched)
        yx = blend_emotion(y, x, sched)
        for a, b, xi, yi in zip(xy, yx, x, y):
            assert a.valence + b.valence == pytest.approx(xi.valence + yi.valence)
            assert a.arousal + b.arousal == pytest.approx(xi.arousal + yi.arousal)


class TestFeatureMask:
    def test_masked_features_do_not_affect_predictions(self, rng):
        pieces = synthetic_corpus(16, seed=5)
        X, y = encode_dataset(pieces)
        est = EmotionRecognizer(
            hidden=16, max_epochs=2, lr=1e-3, feature_mask=("rhythm",), val_fraction=0.0
        )
        est.fit(X, y)
        X2 = X.copy()
        X2[:, CONTENT_WIDTH + 16 : CONTENT_WIDTH + 80] = 123.0  # rhythm slice
        np.testing.assert_array_equal(est.predict(X), est.predict(X2))

    def test_unknown_mask_name(self):
        est = EmotionRecognizer(feature_mask=("texture",))
        with pytest.raises(ValueError):
            est._validate_X(np.zeros((1, INPUT_WIDTH), dtype=np.float32))


class TestSemiSupervised:
    def _converged_recognizer(self, pieces):
        est, _ = train_supervised(
            pieces, hidden=16, max_epochs=30, lr=1e-3, patience=2, tol=1e-6, seed=0
        )
        est.converged_ = True  # plateau may or may not fire on a tiny run
        return est

    def test_refused_before_convergence(self):
        pieces = synthetic_corpus(8, seed=6)
        est = fresh_recognizer(hidden=16)
        with pytest.raises(RuntimeError, match="converged"):
            train_semi_supervised(pieces, pieces, est)

    def test_two_phase_run_and_logs(self):
        labeled = synthetic_corpus(6, seed=7)
        unlabeled = synthetic_corpus(6, seed=8, labeled=False)
        est = self._converged_recognizer(labeled)
        result = train_semi_supervised(
            labeled, unlabeled, est, labeled_epochs=3, unlabeled_epochs=4,
            generator_kwargs=dict(d_model=32, num_layers=1, dim_feedforward=64),
        )
        assert len(result.labeled_log) == 3
        assert len(result.unlabeled_log) == 4
        # the recognition loss is computed in the labeled phase only
        assert all(e["l_recog"] is not None for e in result.labeled_log)
        assert all(e["l_recog"] is None for e in result.unlabeled_log)
        assert math.isfinite(result.final_gen_loss)

    def test_pseudo_labels_equal_recognize_outputs(self):
        from emoarrange.recognizer import _recognizer_emotion_tensor

        labeled = synthetic_corpus(4, seed=9)
        est = self._converged_recognizer(labeled)
        X = torch.from_numpy(est._apply_mask(np.stack([encode_piece(p) for p in labeled])))
        pseudo = _recognizer_emotion_tensor(est.net_, X).detach().numpy()
        for i, piece in enumerate(labeled):
            seg = piece.segment()
            seq = recognize(est, seg, _feats(seg))
            vmean = sum(p.valence for p in seq) / len(seq)
            amean = sum(p.arousal for p in seq) / len(seq)
            assert pseudo[i, 0] == pytest.approx(vmean, abs=1e-6)
            assert pseudo[i, 1] == pytest.approx(amean, abs=1e-6)


class TestKfold:
    def test_k_validation(self):
        pieces = synthetic_corpus(4, seed=10)
        with pytest.raises(ValueError):
            kfold_eval(pieces, 1)
        with pytest.raises(ValueError):
            kfold_eval(pieces, 8)

    def test_rmse_definitions(self, rng):
        y = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert rmse(y, y) == 0.0
        # constant-mean predictor RMSE equals the population std
        data = np.array([rng.uniform(-1, 1) for _ in range(200)])
        pred = np.full_like(data, data.mean())
        assert rmse(pred, data) == pytest.approx(float(data.std()), abs=1e-12)

    def test_kfold_runs(self):
        pieces = synthetic_corpus(30, seed=11)
        per_fold, mean = kfold_eval(
            pieces, 3, hidden=16, max_epochs=4, lr=1e-3, val_fraction=0.0
        )
        assert len(per_fold) == 3
        assert mean == pytest.approx(sum(per_fold) / 3)


def test_gradient_check_matches_central_differences():
    assert gradient_check(n_params=10, seed=0) < 1e-4


class TestFusionWeightTraining:
    def test_features_variant_trains_and_plugs_in(self, rng):
        from emoarrange.fusion import fuse_features
        from emoarrange.recognizer import train_fusion_weights

        pieces = synthetic_corpus(12, seed=16)
        est = fresh_recognizer(hidden=16)
        weights, _gen, trace = train_fusion_weights(
            pieces, est, method="features", epochs=20, lr=1e-3
        )
        assert trace[-1] < trace[0]
        assert weights.in_dim == 2 * 16 + 2
        seg = random_segment(rng)
        emb = embed_inputs(est, seg, _feats(seg))
        out = fuse_features(emb, (EmotionVA(0.2, 0.2),), weights)
        assert out.shape == (1, 2)

    def test_concat_variant_shape(self):
        from emoarrange.fusion import fuse_concat
        from emoarrange.recognizer import train_fusion_weights

        pieces = synthetic_corpus(8, seed=17)
        est = fresh_recognizer(hidden=16)
        weights, _gen, _trace = train_fusion_weights(
            pieces, est, method="concat", epochs=5, lr=1e-3
        )
        assert weights.in_dim == 4
        out = fuse_concat(
            (EmotionVA(0, 0),), (EmotionVA(1, 1),), weights
        )
        assert out.shape == (1, 2)

    def test_unlabeled_rejected(self):
        from emoarrange.recognizer import train_fusion_weights

        pieces = synthetic_corpus(4, seed=18, labeled=False)
        with pytest.raises(ValueError):
            train_fusion_weights(pieces, fresh_recognizer(hidden=16))


class TestParamFile:
    def test_round_trip(self, tmp_path, rng):
        pieces = synthetic_corpus(8, seed=12)
        est, _ = train_supervised(pieces, hidden=16, max_epochs=2, lr=1e-3)
        path = tmp_path / "recognizer.eapm"
        save_recognizer(path, est)
        again = load_recognizer(path)
        seg = random_segment(rng)
        feats = _feats(seg)
        assert recognize(again, seg, feats) == recognize(est, seg, feats)

    def test_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.eapm"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ParamFileError):
            load_params(path)

    def test_manifest_carries_shapes(self, tmp_path):
        pieces = synthetic_corpus(8, seed=13)
        est, _ = train_supervised(pieces, hidden=16, max_epochs=1, lr=1e-3)
        path = tmp_path / "recognizer.eapm"
        save_recognizer(path, est)
        tensors, meta = load_params(path)
        assert meta["model"] == "emotion-recognizer"
        assert meta["embedding_layers"] == 2
        assert all(tuple(t.shape) for t in tensors.values())


def test_default_recognizer_env(tmp_path, monkeypatch):
    from emoarrange.recognizer import default_recognizer

    pieces = synthetic_corpus(8, seed=14)
    est, _ = train_supervised(pieces, hidden=16, max_epochs=1, lr=1e-3)
    path = tmp_path / "params.eapm"
    save_recognizer(path, est)
    monkeypatch.setenv("REMAST_PARAMS", str(path))
    got = default_recognizer()
    assert got.hidden == 16
