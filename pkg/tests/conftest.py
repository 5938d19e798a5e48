"""Shared fixture builders for the test suite."""

from __future__ import annotations

import random

import pytest

from emoarrange.core import (
    HOLD,
    REST,
    Chord,
    Segment,
    Tonality,
    encode_melody,
)

C_MAJOR = Tonality(0, "major")


def triad(root_pc: int, minor: bool = False, octave: int = 4) -> Chord:
    root = 12 * octave + root_pc
    third = root + (3 if minor else 4)
    return Chord.of(root, third, root + 7)


def constant_segment(
    pitch: int = 60,
    chord: Chord | None = None,
    tonality: Tonality = C_MAJOR,
    time_signature: str = "4/4",
) -> Segment:
    beats = 16 if time_signature == "4/4" else 8
    melody = (pitch,) + (HOLD,) * (beats * 4 - 1)
    harmony = tuple([chord if chord is not None else triad(0)] * beats)
    return Segment(
        melody=melody,
        harmony=harmony,
        tonality=tonality,
        time_signature=time_signature,
    )


def segment_from_notes(
    notes,
    harmony=None,
    tonality: Tonality = C_MAJOR,
    time_signature: str = "4/4",
) -> Segment:
    beats = 16 if time_signature == "4/4" else 8
    melody = encode_melody(notes, beats * 4)
    if harmony is None:
        harmony = tuple([triad(0)] * beats)
    return Segment(
        melody=melody,
        harmony=tuple(harmony),
        tonality=tonality,
        time_signature=time_signature,
    )


def random_segment(rng: random.Random, tonality: Tonality = C_MAJOR) -> Segment:
    """A plausible random 4/4 segment: random-walk melody, random triads."""
    melody = []
    slots = 64
    pitch = rng.randint(55, 75)
    while len(melody) < slots:
        if rng.random() < 0.1:
            dur = rng.choice((1, 2, 4))
            melody.extend([REST] * min(dur, slots - len(melody)))
            continue
        pitch = max(40, min(90, pitch + rng.randint(-4, 4)))
        dur = rng.choice((1, 2, 2, 4, 4, 8))
        dur = min(dur, slots - len(melody))
        melody.append(pitch)
        melody.extend([HOLD] * (dur - 1))
    harmony = []
    for _ in range(16):
        if rng.random() < 0.08:
            harmony.append(None)
        else:
            harmony.append(triad(rng.randrange(12), minor=rng.random() < 0.5))
    return Segment(
        melody=tuple(melody), harmony=tuple(harmony), tonality=tonality
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
