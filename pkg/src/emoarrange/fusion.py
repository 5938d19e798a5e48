"""Emotion fusion: combine the last segment's recognized emotion with the
current target, then package the result as the generator's conditioning.

Three methods, selectable at runtime:

* median: pointwise midpoint in V-A space.
* concat: concatenate the two V-A points and project back to 2-D with a
  linear layer.
* features: concatenate the previous segment's music embedding with the
  target and project to 2-D (the default; substitutes the embedding for
  the recognized emotion point).

The fused sequence is mean-pooled once and the mean is replicated onto
every melody token as the conditioning vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from emoarrange.core import EmotionVA

EMOTION_DIM = 2

FUSION_METHODS = ("median", "concat", "features")


def _as_array(seq: Sequence) -> np.ndarray:
    if isinstance(seq, np.ndarray):
        arr = np.asarray(seq, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"expected (n, k) array, got shape {arr.shape}")
        return arr
    return np.array([(p.valence, p.arousal) for p in seq], dtype=float)


def fuse_median(prev: Sequence, target: Sequence) -> tuple:
    """Pointwise arithmetic midpoint of two equal-length V-A sequences."""
    if len(prev) != len(target):
        raise ValueError(f"length mismatch: {len(prev)} vs {len(target)}")
    return tuple(
        EmotionVA((p.valence + t.valence) / 2, (p.arousal + t.arousal) / 2)
        for p, t in zip(prev, target)
    )


@dataclass(frozen=True)
class ConcatWeights:
    """Linear projection for the concat variants: out = W @ concat + b."""

    matrix: np.ndarray  # (EMOTION_DIM, in_dim)
    bias: np.ndarray  # (EMOTION_DIM,)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if m.ndim != 2 or m.shape[0] != EMOTION_DIM:
            raise ValueError(f"weight matrix must be ({EMOTION_DIM}, in_dim)")
        if b.shape != (EMOTION_DIM,):
            raise ValueError(f"bias must have shape ({EMOTION_DIM},)")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite fusion weights")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def median_equivalent(cls) -> "ConcatWeights":
        """0.5*[I | I]: makes the concat method reproduce the median method."""
        eye = np.eye(EMOTION_DIM)
        return cls(np.hstack([eye, eye]) * 0.5, np.zeros(EMOTION_DIM))

    @classmethod
    def target_passthrough(cls, embed_dim: int) -> "ConcatWeights":
        """Zero block for the embedding, identity for the target point."""
        m = np.hstack([np.zeros((EMOTION_DIM, embed_dim)), np.eye(EMOTION_DIM)])
        return cls(m, np.zeros(EMOTION_DIM))


def fuse_concat(
    prev: Sequence, target: Sequence, weights: ConcatWeights
) -> np.ndarray:
    """Per-point concat of (prev, target) projected back to V-A width."""
    a = _as_array(prev)
    b = _as_array(target)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    stacked = np.hstack([a, b])  # (n, 4)
    if weights.in_dim != stacked.shape[1]:
        raise ValueError(
            f"weights expect {weights.in_dim} inputs, got {stacked.shape[1]}"
        )
    return stacked @ weights.matrix.T + weights.bias


def fuse_features(
    embedding: np.ndarray, target: Sequence, weights: ConcatWeights
) -> np.ndarray:
    """Concat the music embedding with each target point; project to V-A width."""
    emb = np.asarray(embedding, dtype=float).ravel()
    t = _as_array(target)
    if weights.in_dim != emb.shape[0] + t.shape[1]:
        raise ValueError(
            f"weights expect {weights.in_dim} inputs, got {emb.shape[0] + t.shape[1]}"
        )
    stacked = np.hstack([np.tile(emb, (t.shape[0], 1)), t])
    return stacked @ weights.matrix.T + weights.bias


@dataclass(frozen=True)
class ConditionedInput:
    """Downsampled melody tokens, each carrying one shared emotion vector."""

    anchors: tuple
    emotion: tuple  # the fused-emotion vector replicated onto every token

    def __post_init__(self) -> None:
        if not self.anchors:
            raise ValueError("empty melody")
        object.__setattr__(self, "emotion", tuple(float(x) for x in self.emotion))

    def emotion_va(self) -> EmotionVA:
        return EmotionVA(self.emotion[0], self.emotion[1])


def make_conditioned_input(
    melody_ds: Sequence, fused: Union[Sequence, np.ndarray]
) -> ConditionedInput:
    """Mean-pool the fused sequence once; every token carries the mean."""
    arr = _as_array(fused)
    if arr.shape[0] == 0:
        raise ValueError("empty fused sequence")
    mean = arr.mean(axis=0)
    return ConditionedInput(anchors=tuple(melody_ds), emotion=tuple(mean))
