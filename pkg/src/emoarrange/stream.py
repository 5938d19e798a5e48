"""The real-time arrangement loop: one 4-bar step at a time.

Each step (1) recognizes the emotion of the segment emitted at the
previous step, (2) fuses it with the current target emotion, (3)
downsamples the next 4 bars of the original melody, (4) regenerates
melody detail and harmony from that skeleton under the fused emotion, and
(5) renders it to tracks while the metric traces update.

The recognized emotion always comes from the *generated* stream, never
from the original song: that feedback path is what softens transitions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from emoarrange import metrics
from emoarrange.arranger import GeneratorBackend, RuleBased, generate, render_texture
from emoarrange.core import (
    BEATS_PER_BAR,
    HOLD,
    REST,
    EmotionVA,
    Segment,
    Tonality,
    constant_emotion,
    sixteenths_per_bar,
    sounding_pitches,
    validate_grid,
)
from emoarrange.features import FormCache, features as compute_features
from emoarrange.fusion import (
    ConcatWeights,
    fuse_concat,
    fuse_features,
    fuse_median,
    make_conditioned_input,
)
from emoarrange.midi import MidiFile, MidiTrack, write_midi
from emoarrange.pipeline import SEGMENT_BARS, downsample
from emoarrange.recognizer import (
    EmotionRecognizer,
    embed_inputs,
    fresh_recognizer,
    recognize,
)


class EndOfSong(Exception):
    """Raised by step() when the original melody is exhausted."""


def demo_song(bars: int = 60, seed: int = 7, tonality: Optional[Tonality] = None) -> "Song":
    """A deterministic folk-like melody for demos and tests.

    Random-walk over the scale with duration weights favoring quarters, so
    it resembles the material the pipeline normally ingests.
    """
    import random as _random

    from emoarrange.core import MAJOR_STEPS, MINOR_STEPS

    tonality = tonality or Tonality(0, "major")
    rng = _random.Random(seed)
    steps = MAJOR_STEPS if tonality.mode == "major" else MINOR_STEPS
    scale = [(tonality.root + s) % 12 for s in steps]
    total = bars * 16
    melody: List = []
    degree = 35  # around C5
    while len(melody) < total:
        if rng.random() < 0.06:
            dur = rng.choice((2, 4))
            melody.extend([REST] * min(dur, total - len(melody)))
            continue
        degree += rng.choice((-2, -1, -1, 0, 0, 1, 1, 2))
        degree = max(28, min(44, degree))
        octave, idx = divmod(degree, 7)
        pitch = octave * 12 + scale[idx]
        dur = rng.choices((1, 2, 4, 8), weights=(2, 4, 6, 1))[0]
        dur = min(dur, total - len(melody))
        melody.append(pitch)
        melody.extend([HOLD] * (dur - 1))
    return Song(melody=tuple(melody), tonality=tonality)


@dataclass(frozen=True)
class Song:
    """The user-selected original: full melody grid plus key and meter."""

    melody: tuple
    tonality: Tonality
    time_signature: str = "4/4"
    tempo_bpm: float = 120.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "melody", validate_grid(self.melody))
        spb = sixteenths_per_bar(self.time_signature)
        if len(self.melody) % spb:
            raise ValueError(
                f"melody length {len(self.melody)} is not whole bars of "
                f"{self.time_signature}"
            )

    @property
    def bars(self) -> int:
        return len(self.melody) // sixteenths_per_bar(self.time_signature)

    @property
    def steps(self) -> int:
        return self.bars // SEGMENT_BARS


@dataclass
class StreamConfig:
    fusion: str = "features"
    backend: str = "rule"
    granularity: str = "beat"

    def __post_init__(self) -> None:
        if self.fusion not in ("median", "concat", "features"):
            raise ValueError(f"unknown fusion method {self.fusion!r}")
        if self.backend not in ("rule", "neural"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.granularity not in ("beat", "bar"):
            raise ValueError(f"unknown granularity {self.granularity!r}")


@dataclass
class StepResult:
    segment: Segment
    tracks: List[MidiTrack]
    recognized_prev: Optional[tuple]
    fused: tuple  # the conditioning V-A vector actually used
    metrics_so_far: metrics.MetricReport
    latency_ms: float
    bar_index: int


@dataclass
class SessionState:
    song: Song
    config: StreamConfig
    recognizer: EmotionRecognizer
    backend: GeneratorBackend
    concat_weights: ConcatWeights
    features_weights: ConcatWeights
    cursor: int = 0  # next bar index
    last_segment: Optional[Segment] = None
    last_recognized: Optional[tuple] = None
    form_cache: FormCache = field(default_factory=FormCache)
    segments: List[Segment] = field(default_factory=list)
    targets: List[EmotionVA] = field(default_factory=list)
    recognized_trace: List[EmotionVA] = field(default_factory=list)
    step_index: int = 0

    @property
    def exhausted(self) -> bool:
        return self.cursor + SEGMENT_BARS > self.song.bars


def open_session(
    song: Song,
    config: Optional[StreamConfig] = None,
    recognizer: Optional[EmotionRecognizer] = None,
    backend: Optional[GeneratorBackend] = None,
    concat_weights: Optional[ConcatWeights] = None,
    features_weights: Optional[ConcatWeights] = None,
) -> SessionState:
    """Start a stream over a screened song (must be at least 4 bars).

    The concat-variant fusion weights default to the median-equivalent and
    target-passthrough projections; pass trained weights (see
    recognizer.train_fusion_weights) to override.
    """
    config = config or StreamConfig()
    if song.bars < SEGMENT_BARS:
        raise ValueError(f"song has {song.bars} bars; need at least {SEGMENT_BARS}")
    recognizer = recognizer if recognizer is not None else fresh_recognizer()
    if backend is None:
        if config.backend == "neural":
            from emoarrange.arranger import NeuralToy

            backend = NeuralToy(
                d_model=64, nhead=2, num_layers=2, dim_feedforward=128, dropout=0.0
            )
        else:
            backend = RuleBased()
    embed_dim = 2 * recognizer.hidden
    return SessionState(
        song=song,
        config=config,
        recognizer=recognizer,
        backend=backend,
        concat_weights=concat_weights or ConcatWeights.median_equivalent(),
        features_weights=features_weights
        or ConcatWeights.target_passthrough(embed_dim),
    )


def _original_segment(state: SessionState) -> Segment:
    """The next 4 bars of the original melody as a melody-only segment."""
    song = state.song
    spb = sixteenths_per_bar(song.time_signature)
    start = state.cursor * spb
    melody = song.melody[start : start + SEGMENT_BARS * spb]
    # a mid-song slice may open with HOLD; resolve it so the slice stands alone
    if melody and melody[0] is HOLD:
        pitch = sounding_pitches(song.melody)[start]
        melody = ((REST if pitch is None else pitch),) + melody[1:]
    beats = SEGMENT_BARS * BEATS_PER_BAR[song.time_signature]
    return Segment(
        melody=melody,
        harmony=tuple([None] * beats),
        tonality=song.tonality,
        time_signature=song.time_signature,  # type: ignore[arg-type]
        bar_count=SEGMENT_BARS,
    )


def _fuse(state: SessionState, target_seq: tuple, feats) -> np.ndarray:
    """Apply the configured fusion method; returns an (n, 2) array."""
    method = state.config.fusion
    if method == "median":
        fused = fuse_median(state.last_recognized, target_seq)
        return np.array([(p.valence, p.arousal) for p in fused])
    if method == "concat":
        return fuse_concat(state.last_recognized, target_seq, state.concat_weights)
    embedding = embed_inputs(state.recognizer, state.last_segment, feats)
    return fuse_features(embedding, target_seq, state.features_weights)


def step(state: SessionState, target: EmotionVA) -> StepResult:
    """Run one recognize -> fuse -> downsample -> generate -> render step."""
    if state.exhausted:
        raise EndOfSong(f"all {state.song.steps} steps already emitted")
    started = time.perf_counter()

    beats = SEGMENT_BARS * BEATS_PER_BAR[state.song.time_signature]
    target_seq = constant_emotion(target, beats)

    recognized_prev: Optional[tuple] = None
    if state.last_segment is not None:
        feats = compute_features(state.last_segment, state.form_cache)
        recognized_prev = recognize(state.recognizer, state.last_segment, feats)
        state.last_recognized = recognized_prev
        state.recognized_trace.append(_seq_mean(recognized_prev))
        fused_arr = _fuse(state, target_seq, feats)
    else:
        fused_arr = np.array([(p.valence, p.arousal) for p in target_seq])

    original = _original_segment(state)
    anchors = downsample(
        original.melody, state.config.granularity, state.song.time_signature
    )
    cond = make_conditioned_input(anchors, fused_arr)
    segment = generate(
        state.backend, cond, state.song.tonality, state.song.time_signature
    )
    tracks = render_texture(segment, cond.emotion_va())

    bar_index = state.cursor
    state.cursor += SEGMENT_BARS
    state.last_segment = segment
    state.segments.append(segment)
    state.targets.append(target)
    state.step_index += 1

    latency_ms = (time.perf_counter() - started) * 1000.0
    report = _report_so_far(state)
    return StepResult(
        segment=segment,
        tracks=tracks,
        recognized_prev=recognized_prev,
        fused=cond.emotion,
        metrics_so_far=report,
        latency_ms=latency_ms,
        bar_index=bar_index,
    )


def _seq_mean(seq: Sequence) -> EmotionVA:
    v = sum(p.valence for p in seq) / len(seq)
    a = sum(p.arousal for p in seq) / len(seq)
    return EmotionVA(v, a)


def _original_segments(state: SessionState, count: int) -> List[Segment]:
    saved = state.cursor
    out = []
    try:
        for i in range(count):
            state.cursor = i * SEGMENT_BARS
            out.append(_original_segment(state))
    finally:
        state.cursor = saved
    return out


def _report_so_far(state: SessionState) -> metrics.MetricReport:
    originals = _original_segments(state, len(state.segments))
    # recognition of segment t happens at step t+1, so the recognized trace
    # trails the target trace by one entry
    n = len(state.recognized_trace)
    return metrics.evaluate_stream(
        originals,
        state.segments,
        targets=state.targets[:n],
        recognized=state.recognized_trace,
    )


def finalize_recognition(state: SessionState) -> Optional[EmotionVA]:
    """Recognize the final emitted segment so the fit trace is complete."""
    if state.last_segment is None or len(state.recognized_trace) >= len(state.targets):
        return None
    feats = compute_features(state.last_segment, state.form_cache)
    recognized = recognize(state.recognizer, state.last_segment, feats)
    state.recognized_trace.append(_seq_mean(recognized))
    return state.recognized_trace[-1]


def run_offline(
    song: Song,
    trajectory: Sequence,
    config: Optional[StreamConfig] = None,
    recognizer: Optional[EmotionRecognizer] = None,
    backend: Optional[GeneratorBackend] = None,
) -> Tuple[bytes, metrics.MetricReport, List[StepResult]]:
    """Arrange a whole song against a per-step emotion trajectory.

    Returns the rendered multi-track MIDI bytes, the final metric report
    and the per-step results. The trajectory must supply exactly one V-A
    target per 4-bar step.
    """
    state = open_session(song, config, recognizer, backend)
    if len(trajectory) != song.steps:
        raise ValueError(
            f"trajectory length {len(trajectory)} != {song.steps} steps"
        )
    results: List[StepResult] = []
    for target in trajectory:
        results.append(step(state, target))
    finalize_recognition(state)
    report = _report_so_far(state)

    melody_track = MidiTrack(name="melody")
    accomp_track = MidiTrack(name="accompaniment")
    beats_per_seg = SEGMENT_BARS * BEATS_PER_BAR[song.time_signature]
    for i, result in enumerate(results):
        offset = i * beats_per_seg
        for src, dst in zip(result.tracks, (melody_track, accomp_track)):
            for note in src.notes:
                dst.notes.append(
                    type(note)(
                        pitch=note.pitch,
                        onset=note.onset + offset,
                        duration=note.duration,
                        velocity=note.velocity,
                        channel=note.channel,
                    )
                )
    mid = MidiFile(
        tracks=[melody_track, accomp_track],
        tempo_bpm=song.tempo_bpm,
        time_signature=(4, 4) if song.time_signature == "4/4" else (2, 4),
    )
    return write_midi(mid), report, results
