"""Objective evaluation metrics: coherence, similarity, real-time fit.

Coherence is scored three ways between consecutive segments, then folded
into one number:

* PCS/PCC: pitch consonance of melody against the concurrent chord, and
  the absolute PCS difference across segments.
* CHE/CEC: Shannon entropy of the chord histogram, and its difference.
* MCTD/MCTC: mean melody-chord distance in the 6-D tonal-centroid space
  (fifths circle r=1, minor-thirds circle r=1, major-thirds circle r=0.5),
  and its difference.
* overall = C_OVERALL - (PCC + CEC + MCTC).

Similarity compares arranged and original melody slot-for-slot; real-time
fit is C_FIT minus the mean valence-arousal distance between target and
recognized emotion.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from emoarrange.core import (
    SIXTEENTHS_PER_BEAT,
    Segment,
    sounding_pitches,
)

log = logging.getLogger(__name__)

# Fixed value the coherence sum is subtracted from. Recovered by solving
# overall = C - (PCC + CEC + MCTC) on the published comparison rows; every
# row yields 14.0.
C_OVERALL = 14.0

# Fixed value for real-time fit: the diameter of the [-1,1]^2 emotion square.
C_FIT = 2.0 * math.sqrt(2.0)

# Interval-class score of a melody note against one chord note
# (interval = (melody - chord) mod 12): consonances +1, the fourth 0,
# dissonances -1. Declared convention; the slot score is the mean over
# chord notes, keeping PCS within [-1, 1].
PCS_INTERVAL_SCORE: Dict[int, float] = {
    0: 1.0,
    3: 1.0,
    4: 1.0,
    7: 1.0,
    8: 1.0,
    9: 1.0,
    5: 0.0,
    1: -1.0,
    2: -1.0,
    6: -1.0,
    10: -1.0,
    11: -1.0,
}


def pitch_consonance_score(segment: Segment) -> float:
    """Mean interval-class score of sounding melody slots vs their chord.

    Slots with no concurrent chord are skipped; an all-rest melody is
    undefined and reported as 0.
    """
    sounding = sounding_pitches(segment.melody)
    scores: List[float] = []
    for slot, pitch in enumerate(sounding):
        if pitch is None:
            continue
        chord = segment.harmony[slot // SIXTEENTHS_PER_BEAT]
        if chord is None:
            continue
        per_note = [
            PCS_INTERVAL_SCORE[(pitch - note) % 12] for note in chord.notes
        ]
        scores.append(sum(per_note) / len(per_note))
    if not scores:
        log.warning("pitch consonance undefined (no sounding melody over chords)")
        return 0.0
    return sum(scores) / len(scores)


def pcc(prev: Segment, cur: Segment) -> float:
    """Absolute pitch-consonance difference between two segments."""
    return abs(pitch_consonance_score(prev) - pitch_consonance_score(cur))


def chord_histogram_entropy(harmony: Sequence) -> float:
    """Natural-log entropy of the chord histogram (chords as pitch-class sets)."""
    if not harmony:
        raise ValueError("empty harmony sequence")
    counts = Counter(
        frozenset() if chord is None else chord.pitch_classes for chord in harmony
    )
    total = sum(counts.values())
    return -sum((c / total) * math.log(c / total) for c in counts.values())


def cec(prev: Segment, cur: Segment) -> float:
    """Absolute chord-entropy difference between two segments."""
    return abs(
        chord_histogram_entropy(prev.harmony) - chord_histogram_entropy(cur.harmony)
    )


def _centroid_basis() -> np.ndarray:
    pcs = np.arange(12)
    angles = [
        (7 * math.pi / 6, 1.0),  # fifths circle
        (3 * math.pi / 2, 1.0),  # minor thirds circle
        (2 * math.pi / 3, 0.5),  # major thirds circle
    ]
    rows = []
    for step, radius in angles:
        rows.append(radius * np.sin(step * pcs))
        rows.append(radius * np.cos(step * pcs))
    return np.vstack(rows)  # (6, 12)


_CENTROID_BASIS = _centroid_basis()


def tonal_centroid(distribution: Sequence) -> np.ndarray:
    """Project a 12-bin pitch-class distribution into the 6-D tonal space."""
    dist = np.asarray(distribution, dtype=float)
    if dist.shape != (12,):
        raise ValueError(f"expected 12 bins, got shape {dist.shape}")
    if np.any(dist < 0):
        raise ValueError("distribution bins must be nonnegative")
    total = dist.sum()
    if total == 0:
        raise ValueError("all-zero pitch-class distribution")
    return _CENTROID_BASIS @ (dist / total)


def _beat_melody_distribution(segment: Segment, beat: int) -> Optional[np.ndarray]:
    start = beat * SIXTEENTHS_PER_BEAT
    sounding = sounding_pitches(segment.melody)[start : start + SIXTEENTHS_PER_BEAT]
    dist = np.zeros(12)
    for pitch in sounding:
        if pitch is not None:
            dist[pitch % 12] += 1
    return dist if dist.sum() > 0 else None


def mctd(segment: Segment) -> float:
    """Mean per-beat melody-chord distance in tonal-centroid space.

    Beats with silent melody or a rest chord are skipped; a segment with
    no scoreable beat reports 0.
    """
    distances: List[float] = []
    for beat, chord in enumerate(segment.harmony):
        if chord is None:
            continue
        melody_dist = _beat_melody_distribution(segment, beat)
        if melody_dist is None:
            continue
        chord_dist = np.zeros(12)
        for pc in chord.pitch_classes:
            chord_dist[pc] = 1
        diff = tonal_centroid(melody_dist) - tonal_centroid(chord_dist)
        distances.append(float(np.linalg.norm(diff)))
    if not distances:
        log.warning("melody-chord tonal distance undefined (no scoreable beats)")
        return 0.0
    return sum(distances) / len(distances)


def mctc(prev: Segment, cur: Segment) -> float:
    """Absolute melody-chord tonal distance difference between segments."""
    return abs(mctd(prev) - mctd(cur))


def overall_coherence(
    pcc_value: float, cec_value: float, mctc_value: float, c_overall: float = C_OVERALL
) -> float:
    """Fold the three coherence components into one quality-aligned number."""
    return c_overall - (pcc_value + cec_value + mctc_value)


def similarity(
    original: Sequence, arranged: Sequence, octave_strict: bool = False
) -> float:
    """Slot-for-slot melody agreement between two segment streams, 0..10.

    Compares the sounding pitch class at every sixteenth slot (exact pitch
    when octave_strict); rests match rests.
    """
    if len(original) != len(arranged):
        raise ValueError(
            f"stream lengths differ: {len(original)} vs {len(arranged)}"
        )
    matches = 0
    total = 0
    for orig_seg, arr_seg in zip(original, arranged):
        orig = sounding_pitches(orig_seg.melody)
        arr = sounding_pitches(arr_seg.melody)
        if len(orig) != len(arr):
            raise ValueError("segment grid lengths differ")
        for a, b in zip(orig, arr):
            total += 1
            if a is None or b is None:
                matches += a is None and b is None
            elif octave_strict:
                matches += a == b
            else:
                matches += a % 12 == b % 12
    if total == 0:
        return 10.0
    return 10.0 * matches / total


def realtime_fit(
    target: Sequence, recognized: Sequence, c_fit: float = C_FIT
) -> float:
    """C_FIT minus the mean V-A distance between target and recognized."""
    if len(target) != len(recognized):
        raise ValueError(
            f"trace lengths differ: {len(target)} vs {len(recognized)}"
        )
    if not target:
        return c_fit
    mean_dist = sum(t.distance(r) for t, r in zip(target, recognized)) / len(target)
    return c_fit - mean_dist


@dataclass
class MetricReport:
    """Aggregated metric values plus their per-timestep traces."""

    pcc: float = 0.0
    cec: float = 0.0
    mctc: float = 0.0
    overall: float = C_OVERALL
    similarity: float = 10.0
    rtfit: float = C_FIT
    pcc_trace: List[float] = field(default_factory=list)
    cec_trace: List[float] = field(default_factory=list)
    mctc_trace: List[float] = field(default_factory=list)
    rtfit_trace: List[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "pcc": self.pcc,
            "cec": self.cec,
            "mctc": self.mctc,
            "overall": self.overall,
            "similarity": self.similarity,
            "rtfit": self.rtfit,
            "traces": {
                "pcc": list(self.pcc_trace),
                "cec": list(self.cec_trace),
                "mctc": list(self.mctc_trace),
                "rtfit": list(self.rtfit_trace),
            },
        }

    def render_text(self) -> str:
        lines = [
            f"PCC (coherence, lower better):   {self.pcc:8.4f}",
            f"CEC (coherence, lower better):   {self.cec:8.4f}",
            f"MCTC (coherence, lower better):  {self.mctc:8.4f}",
            f"overall coherence (higher):      {self.overall:8.4f}",
            f"similarity (0..10, higher):      {self.similarity:8.4f}",
            f"real-time fit (higher):          {self.rtfit:8.4f}",
        ]
        return "\n".join(lines)


def evaluate_stream(
    original: Sequence,
    arranged: Sequence,
    targets: Optional[Sequence] = None,
    recognized: Optional[Sequence] = None,
) -> MetricReport:
    """Score a full arranged stream against the original and emotion traces."""
    report = MetricReport()
    for prev, cur in zip(arranged, arranged[1:]):
        report.pcc_trace.append(pcc(prev, cur))
        report.cec_trace.append(cec(prev, cur))
        report.mctc_trace.append(mctc(prev, cur))
    if report.pcc_trace:
        report.pcc = sum(report.pcc_trace) / len(report.pcc_trace)
        report.cec = sum(report.cec_trace) / len(report.cec_trace)
        report.mctc = sum(report.mctc_trace) / len(report.mctc_trace)
    report.overall = overall_coherence(report.pcc, report.cec, report.mctc)
    report.similarity = similarity(original, arranged)
    if targets is not None and recognized is not None and len(targets) > 0:
        report.rtfit_trace = [t.distance(r) for t, r in zip(targets, recognized)]
        report.rtfit = realtime_fit(list(targets), list(recognized))
    return report
