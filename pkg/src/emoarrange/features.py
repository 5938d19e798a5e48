"""Emotion-related music theory features computed per 4-bar segment.

Four features feed the emotion recognizer:

* Harmonic Color: signed circle-of-fifths freshness of each chord against
  the key's reference major triad, normalized to [-1, 1].
* Rhythm Pattern: run lengths of successive distinct pitches.
* Contour Factor: extrema, trend (last minus first) and concavity (mean
  minus endpoint mean) in a melody dimension and a low-chord dimension.
* Form Factor: five structure flags (repetition, transposed repetition,
  octave shift, rhythm variation) judged against a rolling cache of the
  last 80 bars.
"""

from __future__ import annotations

import difflib
from collections import Counter, deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from emoarrange.core import (
    SIXTEENTHS_PER_BEAT,
    Chord,
    Segment,
    Tonality,
    decode_melody,
    is_pitch,
    sounding_pitches,
)

# Repetition thresholds: positional match ratio and normalized rhythm edit
# distance. Config knobs; defaults chosen ahead of any corpus tuning.
THETA_REP = 0.8
THETA_RHY = 0.5

# Max circle-of-fifths position difference; the Harmonic Color normalizer
# is n_unshared * |B| * MAX_CIRCLE_DISTANCE, the largest possible raw sum.
MAX_CIRCLE_DISTANCE = 11

FORM_CACHE_BARS = 80


def circle_position(pitch_class: int) -> int:
    """Clockwise circle-of-fifths position with C at 0 (C,G,D,...,F -> 0..11)."""
    if not 0 <= pitch_class <= 11:
        raise ValueError(f"pitch class {pitch_class} not in 0..11")
    return (7 * pitch_class) % 12


def k_value(chord: Chord) -> float:
    """Mean circle-of-fifths position of a chord's pitch classes."""
    pcs = chord.pitch_classes
    if not pcs:
        raise ValueError("empty chord")
    return sum(circle_position(pc) for pc in pcs) / len(pcs)


def harmonic_color(a: Chord, b: Chord) -> float:
    """Signed, normalized circle-of-fifths contrast of chord a against b.

    Sign follows the K-value difference; magnitude sums the position
    distances from every note of a that b lacks to every note of b,
    normalized by the maximum possible sum. 0 when a's notes are all in b.
    """
    pcs_a = a.pitch_classes
    pcs_b = b.pitch_classes
    unshared = [pc for pc in pcs_a if pc not in pcs_b]
    if not unshared:
        return 0.0
    raw = sum(
        abs(circle_position(x) - circle_position(y)) for x in unshared for y in pcs_b
    )
    magnitude = raw / (len(unshared) * len(pcs_b) * MAX_CIRCLE_DISTANCE)
    k_diff = k_value(a) - k_value(b)
    sign = 1.0 if k_diff > 0 else -1.0 if k_diff < 0 else 0.0
    return sign * magnitude


def reference_triad(tonality: Tonality) -> Chord:
    """The major triad on the key's root (register is irrelevant here)."""
    root = 60 + tonality.root
    return Chord.of(root, root + 4, root + 7)


def harmonic_color_vec(segment: Segment) -> tuple:
    """Per-beat harmonic color against the key's reference triad.

    Rest beats contribute a neutral 0.0 rather than an error so streaming
    segments with silent beats stay scoreable.
    """
    ref = reference_triad(segment.tonality)
    return tuple(
        0.0 if chord is None else harmonic_color(chord, ref)
        for chord in segment.harmony
    )


@dataclass(frozen=True)
class ContourFactorVec:
    melody_max: int
    chord_min: int
    melody_trend: int
    chord_trend: int
    melody_concavity: float
    chord_concavity: float
    valid: bool = True


def contour_factor(segment: Segment) -> ContourFactorVec:
    """Extrema, trends and concavities of the melody and low-chord lines."""
    notes = decode_melody(segment.melody)
    lows = [c.lowest for c in segment.harmony if c is not None]

    if not notes and not lows:
        return ContourFactorVec(0, 0, 0, 0, 0.0, 0.0, valid=False)

    if notes:
        pitches = [n.pitch for n in notes]
        melody_max = max(pitches)
        melody_trend = pitches[-1] - pitches[0]
        melody_conc = sum(pitches) / len(pitches) - (pitches[0] + pitches[-1]) / 2
    else:
        melody_max, melody_trend, melody_conc = 0, 0, 0.0

    if lows:
        chord_min = min(lows)
        chord_trend = lows[-1] - lows[0]
        chord_conc = sum(lows) / len(lows) - (lows[0] + lows[-1]) / 2
    else:
        chord_min, chord_trend, chord_conc = 0, 0, 0.0

    return ContourFactorVec(
        melody_max=melody_max,
        chord_min=chord_min,
        melody_trend=melody_trend,
        chord_trend=chord_trend,
        melody_concavity=melody_conc,
        chord_concavity=chord_conc,
        valid=bool(notes) and bool(lows),
    )


@dataclass(frozen=True)
class RhythmPattern:
    """Run-length encoding of the melody grid: (pitch or None, sixteenths)."""

    entries: tuple

    @property
    def durations(self) -> tuple:
        return tuple(d for _, d in self.entries)

    def total(self) -> int:
        return sum(d for _, d in self.entries)


def rhythm_pattern(segment: Segment, merge_reattacks: bool = True) -> RhythmPattern:
    """Durations of successive distinct pitches (rests kept as rest runs).

    A re-attacked equal pitch merges into the preceding run by default;
    merge_reattacks=False splits runs at every note onset instead.
    """
    entries = _rle_melody(segment.melody, merge_reattacks)
    return RhythmPattern(entries=tuple(entries))


def _rle_melody(melody: Sequence, merge_reattacks: bool) -> List[Tuple]:
    sounding = sounding_pitches(melody)
    entries: List[Tuple] = []
    for i, value in enumerate(sounding):
        is_onset = is_pitch(melody[i])
        if entries and entries[-1][0] == value and not (is_onset and not merge_reattacks):
            entries[-1] = (value, entries[-1][1] + 1)
        else:
            entries.append((value, 1))
    return entries


@dataclass(frozen=True)
class FormFactorVec:
    melody_rep: tuple  # (sign 0|1, interval in bars)
    chord_rep: tuple
    tonality_transform: int
    zone_transform: int
    rhythm_difference: int


@dataclass(frozen=True)
class _BarContent:
    melody: tuple  # per-slot sounding pitch, None = rest
    chord_roots: tuple  # per-beat lowest pitch class, None = rest


class FormCache:
    """Rolling pitch memory of the last 80 bars, FIFO-evicted."""

    def __init__(self, capacity_bars: int = FORM_CACHE_BARS):
        self.capacity_bars = capacity_bars
        self._bars: Deque[_BarContent] = deque(maxlen=capacity_bars)

    def __len__(self) -> int:
        return len(self._bars)

    def append_segment(self, segment: Segment) -> None:
        sounding = sounding_pitches(segment.melody)
        spb = segment.beats_per_bar * SIXTEENTHS_PER_BEAT
        for bar in range(segment.bar_count):
            melody = tuple(sounding[bar * spb : (bar + 1) * spb])
            roots = tuple(
                None if c is None else c.lowest % 12
                for c in segment.harmony[
                    bar * segment.beats_per_bar : (bar + 1) * segment.beats_per_bar
                ]
            )
            self._bars.append(_BarContent(melody=melody, chord_roots=roots))

    def windows(self, bars: int = 4):
        """Yield (interval_in_bars, window) for every cached window of `bars`."""
        snapshot = list(self._bars)
        for start in range(len(snapshot) - bars + 1):
            yield len(snapshot) - start, snapshot[start : start + bars]


def _positional_ratio(a: Sequence, b: Sequence) -> float:
    if len(a) != len(b) or not a:
        return 0.0
    return sum(1 for x, y in zip(a, b) if x == y) / len(a)


def _shift_match(cur: Sequence, cached: Sequence) -> Tuple[Optional[int], float]:
    """Best constant pitch shift explaining cur = cached + s, and its ratio.

    Slots where both are rests count as matching under any shift; the
    ratio is over all slots.
    """
    if len(cur) != len(cached) or not cur:
        return None, 0.0
    diffs = Counter(
        x - y for x, y in zip(cur, cached) if x is not None and y is not None
    )
    if not diffs:
        return None, 0.0
    shift, _ = max(diffs.items(), key=lambda kv: (kv[1], -abs(kv[0])))
    hits = sum(
        1
        for x, y in zip(cur, cached)
        if (x is None and y is None)
        or (x is not None and y is not None and x - y == shift)
    )
    return shift, hits / len(cur)


def _edit_distance(a: Sequence, b: Sequence) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        row = [i]
        for j, y in enumerate(b, 1):
            row.append(min(prev[j] + 1, row[-1] + 1, prev[j - 1] + (x != y)))
        prev = row
    return prev[-1]


def _runs(melody_slots: Sequence) -> List[Tuple]:
    runs: List[Tuple] = []
    for value in melody_slots:
        if runs and runs[-1][0] == value:
            runs[-1] = (value, runs[-1][1] + 1)
        else:
            runs.append((value, 1))
    return runs


def form_factor(segment: Segment, cache: FormCache) -> FormFactorVec:
    """Compute the five structure flags, then append the segment's bars.

    Each flag is judged against every cached 4-bar window; the repetition
    intervals record the nearest (smallest bar distance) match.
    """
    sounding = tuple(sounding_pitches(segment.melody))
    roots = tuple(None if c is None else c.lowest % 12 for c in segment.harmony)

    cur_runs = _runs(sounding)
    cur_pcs = [v % 12 for v, _ in cur_runs if v is not None]
    cur_durs = [d for _, d in cur_runs]

    melody_rep = (0, 0)
    chord_rep = (0, 0)
    tonality_transform = 0
    zone_transform = 0
    rhythm_difference = 0

    for interval, window in cache.windows(bars=segment.bar_count):
        win_melody = tuple(s for bar in window for s in bar.melody)
        win_roots = tuple(r for bar in window for r in bar.chord_roots)
        if len(win_melody) != len(sounding):
            continue

        if _positional_ratio(sounding, win_melody) >= THETA_REP:
            if melody_rep[0] == 0 or interval < melody_rep[1]:
                melody_rep = (1, interval)
        if len(win_roots) == len(roots) and _positional_ratio(roots, win_roots) >= THETA_REP:
            if chord_rep[0] == 0 or interval < chord_rep[1]:
                chord_rep = (1, interval)

        shift, ratio = _shift_match(sounding, win_melody)
        if shift is not None and shift != 0 and ratio >= THETA_REP:
            if shift % 12 == 0:
                zone_transform = 1
            else:
                tonality_transform = 1

        win_runs = _runs(win_melody)
        win_pcs = [v % 12 for v, _ in win_runs if v is not None]
        win_durs = [d for _, d in win_runs]
        if cur_pcs and win_pcs:
            pc_sim = difflib.SequenceMatcher(None, cur_pcs, win_pcs).ratio()
            rhy_dist = _edit_distance(cur_durs, win_durs) / max(
                len(cur_durs), len(win_durs), 1
            )
            if pc_sim >= THETA_REP and rhy_dist >= THETA_RHY:
                rhythm_difference = 1

    cache.append_segment(segment)
    return FormFactorVec(
        melody_rep=melody_rep,
        chord_rep=chord_rep,
        tonality_transform=tonality_transform,
        zone_transform=zone_transform,
        rhythm_difference=rhythm_difference,
    )


@dataclass(frozen=True)
class TheoryFeatures:
    harmonic_color: tuple
    rhythm: RhythmPattern
    contour: ContourFactorVec
    form: FormFactorVec


def features(segment: Segment, cache: FormCache) -> TheoryFeatures:
    """The full per-segment feature bundle (updates the form cache)."""
    return TheoryFeatures(
        harmonic_color=harmonic_color_vec(segment),
        rhythm=rhythm_pattern(segment),
        contour=contour_factor(segment),
        form=form_factor(segment, cache),
    )


# Fixed flattened widths (4/4 sizes; 2/4 segments pad up to these).
HC_WIDTH = 16
RHYTHM_WIDTH = 64
CONTOUR_WIDTH = 7
FORM_WIDTH = 7
FEATURE_WIDTH = HC_WIDTH + RHYTHM_WIDTH + CONTOUR_WIDTH + FORM_WIDTH


def flatten_features(feats: TheoryFeatures) -> np.ndarray:
    """Fixed-width float vector for model input (width FEATURE_WIDTH)."""
    hc = np.zeros(HC_WIDTH, dtype=np.float32)
    vals = np.asarray(feats.harmonic_color[:HC_WIDTH], dtype=np.float32)
    hc[: len(vals)] = vals

    # per-slot duration of the run covering the slot, scaled to [0, 1]
    rhythm = np.zeros(RHYTHM_WIDTH, dtype=np.float32)
    slot = 0
    for _, dur in feats.rhythm.entries:
        for _ in range(dur):
            if slot < RHYTHM_WIDTH:
                rhythm[slot] = dur / RHYTHM_WIDTH
            slot += 1

    c = feats.contour
    contour = np.array(
        [
            c.melody_max / 127.0,
            c.chord_min / 127.0,
            c.melody_trend / 24.0,
            c.chord_trend / 24.0,
            c.melody_concavity / 12.0,
            c.chord_concavity / 12.0,
            1.0 if c.valid else 0.0,
        ],
        dtype=np.float32,
    )

    f = feats.form
    form = np.array(
        [
            f.melody_rep[0],
            f.melody_rep[1] / FORM_CACHE_BARS,
            f.chord_rep[0],
            f.chord_rep[1] / FORM_CACHE_BARS,
            f.tonality_transform,
            f.zone_transform,
            f.rhythm_difference,
        ],
        dtype=np.float32,
    )

    return np.concatenate([hc, rhythm, contour, form])
