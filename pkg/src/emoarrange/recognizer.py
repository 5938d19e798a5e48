"""Music emotion recognition: segment content + theory features -> a
fine-grained per-beat valence-arousal sequence.

Two embedding MLPs (one for content, one for the theory features, hidden
width 512, ReLU) feed a regression head. The head classifies each beat's
valence and arousal into 21 uniform bins over [-1, 1] under a
cross-entropy loss; the continuous output is the bin-center expectation,
so predictions are bounded by construction. An MSE head ships behind the
``loss="mse"`` flag.

``EmotionRecognizer`` is an sklearn-compatible estimator over encoded
input rows; module-level helpers translate Segments and DatasetPieces to
those rows and back.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from sklearn.base import BaseEstimator, RegressorMixin
from torch import nn

from emoarrange import arranger
from emoarrange.core import (
    MIDI_MAX,
    MIDI_MIN,
    EmotionVA,
    Segment,
    sounding_pitches,
)
from emoarrange.features import (
    FEATURE_WIDTH,
    FormCache,
    TheoryFeatures,
    features as compute_features,
    flatten_features,
)
from emoarrange.paramfile import load_params, save_params

log = logging.getLogger(__name__)

MAX_BEATS = 16
MAX_SLOTS = 64
CONTENT_WIDTH = MAX_SLOTS + MAX_SLOTS + MAX_BEATS * 12 + 12 + 1  # 333
INPUT_WIDTH = CONTENT_WIDTH + FEATURE_WIDTH

N_BINS = 21

# column slices of the feature block, for ablation masking
FEATURE_SLICES: Dict[str, slice] = {
    "harmonic_color": slice(0, 16),
    "rhythm": slice(16, 80),
    "contour": slice(80, 87),
    "form": slice(87, 94),
}


def encode_content(segment: Segment) -> np.ndarray:
    """Fixed-width numeric encoding of a segment's melody/harmony/tonality."""
    out = np.zeros(CONTENT_WIDTH, dtype=np.float32)
    sounding = sounding_pitches(segment.melody)
    for i, pitch in enumerate(sounding[:MAX_SLOTS]):
        if pitch is not None:
            out[i] = (pitch - MIDI_MIN) / (MIDI_MAX - MIDI_MIN)
            out[MAX_SLOTS + i] = 1.0
    base = 2 * MAX_SLOTS
    for beat, chord in enumerate(segment.harmony[:MAX_BEATS]):
        if chord is not None:
            for pc in chord.pitch_classes:
                out[base + beat * 12 + pc] = 1.0
    base += MAX_BEATS * 12
    out[base + segment.tonality.root] = 1.0
    out[base + 12] = 1.0 if segment.tonality.mode == "major" else 0.0
    return out


def encode_inputs(segment: Segment, feats: TheoryFeatures) -> np.ndarray:
    """One model input row: content block then feature block."""
    return np.concatenate([encode_content(segment), flatten_features(feats)])


def encode_piece(piece) -> np.ndarray:
    """Input row for a standalone dataset piece (fresh, empty form cache)."""
    seg = piece.segment()
    return encode_inputs(seg, compute_features(seg, FormCache()))


def emotion_targets(piece) -> np.ndarray:
    """Per-beat (v, a) labels flattened to MAX_BEATS*2, edge-padded for 2/4."""
    if piece.emotion is None:
        raise ValueError("piece has no emotion labels")
    vals = [(p.valence, p.arousal) for p in piece.emotion]
    while len(vals) < MAX_BEATS:
        vals.append(vals[-1])
    return np.asarray(vals[:MAX_BEATS], dtype=np.float32).reshape(-1)


def encode_dataset(pieces: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    labeled = [p for p in pieces if p.emotion is not None]
    if not labeled:
        raise ValueError("no labeled pieces")
    X = np.stack([encode_piece(p) for p in labeled])
    y = np.stack([emotion_targets(p) for p in labeled])
    return X, y


class RecognizerNet(nn.Module):
    """Content MLP || feature MLP -> per-beat, per-axis bin logits."""

    def __init__(
        self,
        hidden: int = 512,
        bins: int = N_BINS,
        beats: int = MAX_BEATS,
        loss: str = "xent",
        head_init: str = "zeros",
        seed: int = 0,
    ):
        super().__init__()
        torch.manual_seed(seed)
        self.bins = bins
        self.beats = beats
        self.loss_kind = loss
        self.content_mlp = nn.Sequential(
            nn.Linear(CONTENT_WIDTH, hidden),
            nn.ReLU(),
            nn.Linear(hidden, hidden),
            nn.ReLU(),
        )
        self.feature_mlp = nn.Sequential(
            nn.Linear(FEATURE_WIDTH, hidden),
            nn.ReLU(),
            nn.Linear(hidden, hidden),
            nn.ReLU(),
        )
        out_width = beats * 2 * (bins if loss == "xent" else 1)
        self.head = nn.Linear(2 * hidden, out_width)
        if head_init == "zeros":
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)
        centers = torch.linspace(-1.0, 1.0, bins)
        self.register_buffer("bin_centers", centers)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        content = x[:, :CONTENT_WIDTH]
        feats = x[:, CONTENT_WIDTH:]
        return torch.cat([self.content_mlp(content), self.feature_mlp(feats)], dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.head(self.embed(x))
        if not torch.isfinite(out).all():
            raise FloatingPointError("non-finite recognizer activation")
        if self.loss_kind == "xent":
            return out.view(-1, self.beats, 2, self.bins)
        return out.view(-1, self.beats, 2)

    def predict_va(self, x: torch.Tensor) -> torch.Tensor:
        out = self.forward(x)
        if self.loss_kind == "xent":
            probs = torch.softmax(out, dim=-1)
            return probs @ self.bin_centers
        return torch.tanh(out)

    def loss(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        """y: (B, beats*2) continuous targets in [-1, 1]."""
        target = y.view(-1, self.beats, 2)
        if self.loss_kind == "xent":
            logits = self.forward(x).reshape(-1, self.bins)
            idx = torch.round((target + 1) / 2 * (self.bins - 1)).long()
            return nn.functional.cross_entropy(logits, idx.reshape(-1))
        pred = torch.tanh(self.forward(x))
        return nn.functional.mse_loss(pred, target)


class EmotionRecognizer(BaseEstimator, RegressorMixin):
    """Sklearn-style wrapper: X rows are encoded inputs, y rows are
    flattened per-beat (valence, arousal) targets in [-1, 1].

    feature_mask lists theory-feature names (harmonic_color, rhythm,
    contour, form) to zero out, for ablation without code changes.
    """

    def __init__(
        self,
        hidden: int = 512,
        bins: int = N_BINS,
        lr: float = 1e-4,
        batch_size: int = 128,
        max_epochs: int = 40,
        patience: int = 3,
        tol: float = 1e-3,
        val_fraction: float = 0.1,
        loss: str = "xent",
        feature_mask: tuple = (),
        seed: int = 0,
    ):
        self.hidden = hidden
        self.bins = bins
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.tol = tol
        self.val_fraction = val_fraction
        self.loss = loss
        self.feature_mask = feature_mask
        self.seed = seed

    # -- input validation ------------------------------------------------

    def _validate_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim != 2 or X.shape[1] != INPUT_WIDTH:
            raise ValueError(f"X must be (n, {INPUT_WIDTH}), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        return self._apply_mask(X)

    def _validate_y(self, y, n: int) -> np.ndarray:
        y = np.asarray(y, dtype=np.float32)
        if y.shape != (n, MAX_BEATS * 2):
            raise ValueError(f"y must be (n, {MAX_BEATS * 2}), got {y.shape}")
        if np.any(np.abs(y) > 1.0 + 1e-6):
            raise ValueError("y values must lie in [-1, 1]")
        return np.clip(y, -1.0, 1.0)

    def _apply_mask(self, X: np.ndarray) -> np.ndarray:
        if not self.feature_mask:
            return X
        X = X.copy()
        for name in self.feature_mask:
            sl = FEATURE_SLICES.get(name)
            if sl is None:
                raise ValueError(f"unknown feature name {name!r} in feature_mask")
            X[:, CONTENT_WIDTH + sl.start : CONTENT_WIDTH + sl.stop] = 0.0
        return X

    # -- training ---------------------------------------------------------

    def fit(self, X, y) -> "EmotionRecognizer":
        X = self._validate_X(X)
        y = self._validate_y(y, X.shape[0])
        if X.shape[0] == 0:
            raise ValueError("empty dataset")

        torch.manual_seed(self.seed)
        rng = np.random.default_rng(self.seed)
        net = RecognizerNet(
            hidden=self.hidden, bins=self.bins, loss=self.loss, seed=self.seed
        )
        optimizer = torch.optim.Adam(net.parameters(), lr=self.lr)

        n = X.shape[0]
        n_val = int(round(n * self.val_fraction))
        order = rng.permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
        if len(train_idx) == 0:
            train_idx = order
            val_idx = order[:0]
        Xt = torch.from_numpy(X)
        yt = torch.from_numpy(y)

        self.loss_trace_: List[float] = []
        self.val_trace_: List[float] = []
        best_val = float("inf")
        stale = 0
        self.converged_ = False

        net.train()
        for _epoch in range(self.max_epochs):
            perm = rng.permutation(len(train_idx))
            epoch_losses: List[float] = []
            for start in range(0, len(perm), self.batch_size):
                batch = train_idx[perm[start : start + self.batch_size]]
                optimizer.zero_grad()
                loss = net.loss(Xt[batch], yt[batch])
                loss.backward()
                optimizer.step()
                epoch_losses.append(float(loss.item()))
            self.loss_trace_.append(sum(epoch_losses) / max(1, len(epoch_losses)))

            if len(val_idx) > 0:
                net.eval()
                with torch.no_grad():
                    val = float(net.loss(Xt[val_idx], yt[val_idx]).item())
                net.train()
            else:
                val = self.loss_trace_[-1]
            self.val_trace_.append(val)

            if val < best_val - self.tol:
                best_val = val
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    self.converged_ = True
                    break

        net.eval()
        self.net_ = net
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "net_"):
            raise RuntimeError("estimator is not fitted")
        X = self._validate_X(X)
        with torch.no_grad():
            va = self.net_.predict_va(torch.from_numpy(X))
        return va.reshape(X.shape[0], -1).numpy()

    def score(self, X, y) -> float:
        """Negative RMSE (higher is better, sklearn convention)."""
        return -rmse(self.predict(X), np.asarray(y, dtype=np.float32))


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def fresh_recognizer(seed: int = 0, **kwargs) -> EmotionRecognizer:
    """A deterministic, untrained recognizer (for streaming without weights)."""
    est = EmotionRecognizer(seed=seed, **kwargs)
    est.net_ = RecognizerNet(
        hidden=est.hidden, bins=est.bins, loss=est.loss, head_init="random", seed=seed
    )
    est.net_.eval()
    est.converged_ = False
    return est


PARAMS_ENV_VAR = "REMAST_PARAMS"


def default_recognizer() -> EmotionRecognizer:
    """Recognizer from the REMAST_PARAMS parameter file, else a seeded fresh one."""
    import os

    path = os.environ.get(PARAMS_ENV_VAR)
    if path and os.path.exists(path):
        return load_recognizer(path)
    return fresh_recognizer()


def embed_inputs(est: EmotionRecognizer, segment: Segment, feats: TheoryFeatures) -> np.ndarray:
    """The concatenated (content || feature) music embedding of a segment."""
    row = est._apply_mask(encode_inputs(segment, feats)[None, :].astype(np.float32))
    with torch.no_grad():
        emb = est.net_.embed(torch.from_numpy(row))
    return emb[0].numpy()


def recognize(est: EmotionRecognizer, segment: Segment, feats: TheoryFeatures) -> tuple:
    """Per-beat V-A sequence for a segment (length = beats in segment)."""
    row = est._apply_mask(encode_inputs(segment, feats)[None, :].astype(np.float32))
    with torch.no_grad():
        va = est.net_.predict_va(torch.from_numpy(row))[0].numpy()
    beats = segment.beats
    return tuple(EmotionVA(float(v), float(a)) for v, a in va[:beats])


def train_supervised(
    pieces: Sequence, **hyper
) -> Tuple[EmotionRecognizer, List[float]]:
    """Fit the recognizer on labeled pieces; returns (estimator, loss trace)."""
    X, y = encode_dataset(pieces)
    est = EmotionRecognizer(**hyper)
    est.fit(X, y)
    return est, est.loss_trace_


@dataclass(frozen=True)
class BlendSchedule:
    """Label/recognition mixing schedule: alpha = n_cur / n_total."""

    n_cur: int
    n_total: int

    def __post_init__(self) -> None:
        if self.n_total <= 0:
            raise ValueError("n_total must be positive")
        if not 0 <= self.n_cur <= self.n_total:
            raise ValueError("n_cur must lie in [0, n_total]")

    @property
    def alpha(self) -> float:
        return self.n_cur / self.n_total


def blend_emotion(label: Sequence, recog: Sequence, sched: BlendSchedule) -> tuple:
    """Pointwise convex combination (1-alpha)*label + alpha*recognized."""
    if len(label) != len(recog):
        raise ValueError(f"length mismatch: {len(label)} vs {len(recog)}")
    a = sched.alpha
    return tuple(
        EmotionVA(
            (1 - a) * l.valence + a * r.valence,
            (1 - a) * l.arousal + a * r.arousal,
        )
        for l, r in zip(label, recog)
    )


# ---------------------------------------------------------------------------
# semi-supervised coupling with the toy generator


@dataclass
class SemiSupervisedResult:
    recognizer: EmotionRecognizer
    generator: "arranger.NeuralToy"
    labeled_log: List[dict] = field(default_factory=list)
    unlabeled_log: List[dict] = field(default_factory=list)
    final_gen_loss: float = float("nan")


def _recognizer_emotion_tensor(net: RecognizerNet, X: torch.Tensor) -> torch.Tensor:
    """Differentiable mean V-A over beats, the generator's pseudo-label."""
    va = net.predict_va(X)  # (B, beats, 2)
    return va.mean(dim=1)


def train_semi_supervised(
    labeled: Sequence,
    unlabeled: Sequence,
    recognizer: EmotionRecognizer,
    labeled_epochs: int = 10,
    unlabeled_epochs: int = 20,
    lr: float = 1e-3,
    recognizer_lr: Optional[float] = None,
    couple_recognizer: bool = True,
    generator_kwargs: Optional[dict] = None,
    seed: int = 0,
) -> SemiSupervisedResult:
    """Two-phase schedule: labeled phase trains recognition + generation
    losses with the blended emotion condition; the unlabeled phase trains
    the generation loss only, with the recognizer supplying differentiable
    pseudo-labels so its parameters keep updating (unless frozen).

    recognizer_lr lets the pseudo-labeler move faster than the generator
    (pseudo-label refinement is a coarse search); defaults to lr.

    Refuses to run if the supervised phase has not converged.
    """
    if not getattr(recognizer, "converged_", False):
        raise RuntimeError(
            "semi-supervised phase requires a converged supervised recognizer "
            "(train_supervised until the validation plateau criterion fires)"
        )
    if not labeled or not unlabeled:
        raise ValueError("need both labeled and unlabeled pieces")

    torch.manual_seed(seed)
    recognizer = copy.deepcopy(recognizer)
    net = recognizer.net_
    net.train()
    if not couple_recognizer:
        net.requires_grad_(False)

    gen_kwargs = dict(d_model=64, nhead=2, num_layers=2, dim_feedforward=128, dropout=0.0)
    gen_kwargs.update(generator_kwargs or {})
    generator = arranger.NeuralToy(seed=seed, **gen_kwargs)
    generator.train()

    groups = [{"params": list(generator.parameters()), "lr": lr}]
    if couple_recognizer:
        groups.append(
            {"params": list(net.parameters()),
             "lr": lr if recognizer_lr is None else recognizer_lr}
        )
    optimizer = torch.optim.Adam(groups)

    lab_X = torch.from_numpy(
        recognizer._apply_mask(np.stack([encode_piece(p) for p in labeled]))
    )
    lab_y = torch.from_numpy(np.stack([emotion_targets(p) for p in labeled]))
    lab_src, _lab_emo, lab_tin, lab_tout = arranger.batch_tensors(labeled)
    unl_X = torch.from_numpy(
        recognizer._apply_mask(np.stack([encode_piece(p) for p in unlabeled]))
    )
    unl_src, _unl_emo, unl_tin, unl_tout = arranger.batch_tensors(unlabeled)

    result = SemiSupervisedResult(recognizer=recognizer, generator=generator)

    # phase 1: labeled data, L_recog + L_gen, blended conditioning
    for epoch in range(labeled_epochs):
        sched = BlendSchedule(n_cur=epoch, n_total=max(1, labeled_epochs - 1) )
        optimizer.zero_grad()
        l_recog = net.loss(lab_X, lab_y)
        label_emo = lab_y.view(len(labeled), MAX_BEATS, 2).mean(dim=1)
        recog_emo = _recognizer_emotion_tensor(net, lab_X)
        blended = (1 - sched.alpha) * label_emo + sched.alpha * recog_emo
        logits = generator(lab_src, blended, lab_tin)
        l_gen = arranger.generation_loss(logits, lab_tout)
        (l_recog + l_gen).backward()
        optimizer.step()
        result.labeled_log.append(
            {"phase": "labeled", "l_recog": float(l_recog.item()), "l_gen": float(l_gen.item())}
        )

    # phase 2: unlabeled data, L_gen only (the recognition loss is never
    # evaluated here; pseudo-labels flow through the recognizer graph)
    for _epoch in range(unlabeled_epochs):
        optimizer.zero_grad()
        pseudo = _recognizer_emotion_tensor(net, unl_X)
        logits = generator(unl_src, pseudo, unl_tin)
        l_gen = arranger.generation_loss(logits, unl_tout)
        l_gen.backward()
        optimizer.step()
        result.unlabeled_log.append(
            {"phase": "unlabeled", "l_recog": None, "l_gen": float(l_gen.item())}
        )

    generator.eval()
    net.eval()
    with torch.no_grad():
        pseudo = _recognizer_emotion_tensor(net, unl_X)
        logits = generator(unl_src, pseudo, unl_tin)
        result.final_gen_loss = float(arranger.generation_loss(logits, unl_tout).item())
    return result


# ---------------------------------------------------------------------------
# fusion-weight training (generation loss only, toy scale)


def train_fusion_weights(
    labeled: Sequence,
    recognizer: EmotionRecognizer,
    method: str = "features",
    epochs: int = 60,
    lr: float = 1e-3,
    generator_kwargs: Optional[dict] = None,
    seed: int = 0,
):
    """Learn the linear projection of a concat fusion variant.

    The projected conditioning drives a toy generator and both are
    optimized under the generation loss; the recognizer stays fixed and
    provides the previous-segment ingredient (its recognized emotion for
    the concat variant, its music embedding for the features variant).
    Returns (ConcatWeights, generator, loss trace).
    """
    from emoarrange.fusion import ConcatWeights

    if method not in ("concat", "features"):
        raise ValueError(f"no learned weights for fusion method {method!r}")
    if not labeled:
        raise ValueError("empty dataset")
    for piece in labeled:
        if piece.emotion is None:
            raise ValueError("fusion-weight training needs labeled pieces")

    torch.manual_seed(seed)
    net = recognizer.net_
    net.eval()

    X = torch.from_numpy(
        recognizer._apply_mask(np.stack([encode_piece(p) for p in labeled]))
    )
    with torch.no_grad():
        if method == "concat":
            prev = net.predict_va(X).mean(dim=1)  # (B, 2) recognized emotion
        else:
            prev = net.embed(X)  # (B, 2*hidden) music embedding
    target = torch.from_numpy(
        np.stack([emotion_targets(p) for p in labeled])
    ).view(len(labeled), MAX_BEATS, 2).mean(dim=1)

    in_dim = prev.shape[1] + 2
    projection = nn.Linear(in_dim, 2)
    gen_kwargs = dict(d_model=32, nhead=2, num_layers=1, dim_feedforward=64, dropout=0.0)
    gen_kwargs.update(generator_kwargs or {})
    generator = arranger.NeuralToy(seed=seed, **gen_kwargs)
    generator.train()

    src, _, tgt_in, tgt_out = arranger.batch_tensors(labeled)
    optimizer = torch.optim.Adam(
        list(projection.parameters()) + list(generator.parameters()), lr=lr
    )
    trace: List[float] = []
    stacked = torch.cat([prev, target], dim=1).float()
    for _ in range(epochs):
        optimizer.zero_grad()
        fused = projection(stacked)
        loss = arranger.generation_loss(generator(src, fused, tgt_in), tgt_out)
        loss.backward()
        optimizer.step()
        trace.append(float(loss.item()))

    weights = ConcatWeights(
        projection.weight.detach().numpy().astype(float),
        projection.bias.detach().numpy().astype(float),
    )
    return weights, generator, trace


# ---------------------------------------------------------------------------
# evaluation


def kfold_eval(pieces: Sequence, k: int, **hyper) -> Tuple[List[float], float]:
    """k-fold cross-validated RMSE of the V-A predictions."""
    labeled = [p for p in pieces if p.emotion is not None]
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(labeled) < k:
        raise ValueError(f"need at least {k} labeled pieces, got {len(labeled)}")
    X, y = encode_dataset(labeled)
    seed = hyper.get("seed", 0)
    idx = np.random.default_rng(seed).permutation(len(labeled))
    folds = np.array_split(idx, k)
    per_fold: List[float] = []
    for i in range(k):
        test = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        est = EmotionRecognizer(**hyper)
        est.fit(X[train], y[train])
        per_fold.append(rmse(est.predict(X[test]), y[test]))
    return per_fold, float(np.mean(per_fold))


def gradient_check(
    n_params: int = 10, h: float = 1e-5, seed: int = 0, hidden: int = 16
) -> float:
    """Max relative error between autograd and central-difference gradients
    of the recognition loss, on a parameter slice, in float64."""
    torch.manual_seed(seed)
    net = RecognizerNet(hidden=hidden, head_init="random", seed=seed).double()
    rng = np.random.default_rng(seed)
    X = torch.from_numpy(rng.standard_normal((4, INPUT_WIDTH)))
    y = torch.from_numpy(rng.uniform(-1, 1, (4, MAX_BEATS * 2)))

    loss = net.loss(X, y)
    loss.backward()

    tensors = [p for p in net.parameters() if p.grad is not None]
    worst = 0.0
    for i in range(n_params):
        tensor = tensors[i % len(tensors)]
        flat = tensor.detach().view(-1)
        pos = int(rng.integers(flat.numel()))
        analytic = float(tensor.grad.view(-1)[pos].item())
        with torch.no_grad():
            orig = float(flat[pos].item())
            flat[pos] = orig + h
            up = float(net.loss(X, y).item())
            flat[pos] = orig - h
            down = float(net.loss(X, y).item())
            flat[pos] = orig
        numeric = (up - down) / (2 * h)
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# parameter file I/O


def save_recognizer(path, est: EmotionRecognizer) -> None:
    tensors = {
        name: param.detach().numpy() for name, param in est.net_.state_dict().items()
    }
    meta = {
        "model": "emotion-recognizer",
        "hidden": est.hidden,
        "bins": est.bins,
        "loss": est.loss,
        "embedding_layers": 2,
        "feature_mask": list(est.feature_mask),
        "converged": bool(getattr(est, "converged_", False)),
    }
    save_params(path, tensors, meta)


def load_recognizer(path) -> EmotionRecognizer:
    tensors, meta = load_params(path)
    if meta.get("model") != "emotion-recognizer":
        raise ValueError(f"{path} holds {meta.get('model')!r}, not a recognizer")
    est = EmotionRecognizer(
        hidden=int(meta["hidden"]),
        bins=int(meta["bins"]),
        loss=meta.get("loss", "xent"),
        feature_mask=tuple(meta.get("feature_mask", ())),
    )
    net = RecognizerNet(hidden=est.hidden, bins=est.bins, loss=est.loss)
    state = {name: torch.from_numpy(arr) for name, arr in tensors.items()}
    net.load_state_dict(state)
    net.eval()
    est.net_ = net
    est.converged_ = bool(meta.get("converged", False))
    return est
