"""Core symbolic-music and emotion value types shared by every stage.

All types here are immutable values: safe to share between sessions and
threads without coordination.

Melody lives on a sixteenth-note grid of pitch tokens. A token is either a
MIDI pitch (a new note onset), ``HOLD`` (sustain the previous pitch) or
``REST`` (silence). Harmony lives on a quarter-note grid of chords, one
chord per beat; a silent beat is ``None`` (rest chord).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal, NamedTuple, Optional, Sequence, Union

MIDI_MIN = 21
MIDI_MAX = 108

SIXTEENTHS_PER_BEAT = 4

TimeSignature = Literal["4/4", "2/4"]
BEATS_PER_BAR: dict[str, int] = {"4/4": 4, "2/4": 2}

Mode = Literal["major", "minor"]

MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)
MINOR_STEPS = (0, 2, 3, 5, 7, 8, 10)  # natural minor


class Token(Enum):
    """Non-pitch melody grid tokens."""

    REST = "R"
    HOLD = "H"

    def __repr__(self) -> str:  # keeps fixtures readable
        return self.value


REST = Token.REST
HOLD = Token.HOLD

PitchToken = Union[int, Token]
MelodyGrid = tuple  # tuple[PitchToken, ...]
DownsampledMelody = tuple  # tuple[PitchToken, ...]


class MalformedGridError(ValueError):
    """A melody grid violates the token encoding (e.g. HOLD at slot 0)."""


class PolyphonyError(ValueError):
    """A note list claimed to be monophonic has overlapping notes."""


def sixteenths_per_bar(time_signature: TimeSignature) -> int:
    return BEATS_PER_BAR[time_signature] * SIXTEENTHS_PER_BEAT


def is_pitch(token: PitchToken) -> bool:
    return isinstance(token, int) and not isinstance(token, bool)


def validate_pitch(pitch: int) -> int:
    if not isinstance(pitch, int) or isinstance(pitch, bool):
        raise TypeError(f"pitch must be an int, got {pitch!r}")
    if not MIDI_MIN <= pitch <= MIDI_MAX:
        raise ValueError(f"pitch {pitch} outside MIDI range {MIDI_MIN}..{MIDI_MAX}")
    return pitch


def validate_grid(tokens: Sequence[PitchToken]) -> tuple:
    """Check token types and the no-leading-HOLD rule; returns a tuple."""
    toks = tuple(tokens)
    for i, tok in enumerate(toks):
        if tok is REST or tok is HOLD:
            continue
        validate_pitch(tok)
    if toks and toks[0] is HOLD:
        raise MalformedGridError("HOLD at slot 0 has no note to extend")
    return toks


@dataclass(frozen=True)
class Tonality:
    """Key as a pitch-class root plus major/minor mode."""

    root: int
    mode: Mode = "major"

    def __post_init__(self) -> None:
        if not 0 <= self.root <= 11:
            raise ValueError(f"tonality root {self.root} not a pitch class 0..11")
        if self.mode not in ("major", "minor"):
            raise ValueError(f"unknown mode {self.mode!r}")


def scale_pitch_classes(tonality: Tonality) -> frozenset:
    """The seven diatonic pitch classes of a major or natural-minor key."""
    steps = MAJOR_STEPS if tonality.mode == "major" else MINOR_STEPS
    return frozenset((tonality.root + s) % 12 for s in steps)


@dataclass(frozen=True)
class Chord:
    """A set of 1..5 distinct MIDI pitches sounded on one beat."""

    notes: frozenset

    def __post_init__(self) -> None:
        if not isinstance(self.notes, frozenset):
            object.__setattr__(self, "notes", frozenset(self.notes))
        if not 1 <= len(self.notes) <= 5:
            raise ValueError(f"chord must have 1..5 notes, got {len(self.notes)}")
        for p in self.notes:
            validate_pitch(p)

    @classmethod
    def of(cls, *pitches: int) -> "Chord":
        return cls(frozenset(pitches))

    @property
    def pitch_classes(self) -> frozenset:
        return frozenset(p % 12 for p in self.notes)

    @property
    def lowest(self) -> int:
        return min(self.notes)

    def sorted_notes(self) -> list:
        return sorted(self.notes)

    def transpose(self, semitones: int) -> "Chord":
        return Chord(frozenset(p + semitones for p in self.notes))


# A silent beat in a harmony sequence.
RestChord = None
HarmonySeq = tuple  # tuple[Optional[Chord], ...]


class Note(NamedTuple):
    """A decoded melody note: onset and duration in sixteenth slots."""

    pitch: int
    onset: int
    duration: int


def decode_melody(grid: Sequence[PitchToken]) -> list:
    """Expand a token grid into a non-overlapping monophonic note list.

    HOLD extends the preceding pitch, REST is silence. Raises
    MalformedGridError on a leading HOLD.
    """
    toks = validate_grid(grid)
    notes: list = []
    cur_pitch: Optional[int] = None
    cur_onset = 0
    cur_len = 0

    def flush() -> None:
        nonlocal cur_pitch, cur_len
        if cur_pitch is not None:
            notes.append(Note(cur_pitch, cur_onset, cur_len))
        cur_pitch = None
        cur_len = 0

    for i, tok in enumerate(toks):
        if tok is HOLD:
            cur_len += 1
        elif tok is REST:
            flush()
        else:
            flush()
            cur_pitch = tok
            cur_onset = i
            cur_len = 1
    flush()
    return notes


def encode_melody(notes: Iterable, grid_len: int) -> tuple:
    """Inverse of decode_melody: note list -> token grid of grid_len slots.

    Notes must be quantized to the sixteenth grid, monophonic and inside
    the grid; overlap raises PolyphonyError.
    """
    ordered = sorted((Note(*n) for n in notes), key=lambda n: n.onset)
    grid: list = [REST] * grid_len
    prev_end = 0
    for note in ordered:
        validate_pitch(note.pitch)
        if note.duration <= 0:
            raise ValueError(f"non-positive duration in {note}")
        if note.onset < prev_end:
            raise PolyphonyError(f"note {note} overlaps the previous note")
        if note.onset + note.duration > grid_len:
            raise ValueError(f"note {note} extends past grid length {grid_len}")
        grid[note.onset] = note.pitch
        for slot in range(note.onset + 1, note.onset + note.duration):
            grid[slot] = HOLD
        prev_end = note.onset + note.duration
    return tuple(grid)


def sounding_pitches(grid: Sequence[PitchToken]) -> list:
    """Per-slot sounding pitch with HOLD resolved; None where silent."""
    out: list = []
    current: Optional[int] = None
    for tok in grid:
        if tok is REST:
            current = None
        elif tok is HOLD:
            pass  # keep current; leading HOLD rejected by validate_grid callers
        else:
            current = tok
        out.append(current)
    return out


def _clamp(x: float) -> float:
    return max(-1.0, min(1.0, float(x)))


@dataclass(frozen=True)
class EmotionVA:
    """A point in the valence-arousal square; components clamp to [-1, 1]."""

    valence: float
    arousal: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "valence", _clamp(self.valence))
        object.__setattr__(self, "arousal", _clamp(self.arousal))

    def distance(self, other: "EmotionVA") -> float:
        return math.hypot(self.valence - other.valence, self.arousal - other.arousal)

    def as_tuple(self) -> tuple:
        return (self.valence, self.arousal)


EmotionSeq = tuple  # tuple[EmotionVA, ...]


def constant_emotion(va: EmotionVA, length: int) -> tuple:
    return tuple([va] * length)


@dataclass(frozen=True)
class Segment:
    """Four bars of music: melody grid, per-beat harmony, tonality."""

    melody: tuple
    harmony: tuple
    tonality: Tonality
    time_signature: TimeSignature = "4/4"
    bar_count: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "melody", validate_grid(self.melody))
        object.__setattr__(self, "harmony", tuple(self.harmony))
        want_melody = self.bar_count * sixteenths_per_bar(self.time_signature)
        want_harmony = self.bar_count * BEATS_PER_BAR[self.time_signature]
        if len(self.melody) != want_melody:
            raise ValueError(
                f"melody length {len(self.melody)} != {want_melody} for "
                f"{self.bar_count} bars of {self.time_signature}"
            )
        if len(self.harmony) != want_harmony:
            raise ValueError(
                f"harmony length {len(self.harmony)} != {want_harmony} for "
                f"{self.bar_count} bars of {self.time_signature}"
            )
        for chord in self.harmony:
            if chord is not None and not isinstance(chord, Chord):
                raise TypeError(f"harmony entries must be Chord or None, got {chord!r}")

    @property
    def beats(self) -> int:
        return len(self.harmony)

    @property
    def beats_per_bar(self) -> int:
        return BEATS_PER_BAR[self.time_signature]

    def melody_beat(self, beat: int) -> tuple:
        """Melody grid slots covering one beat."""
        start = beat * SIXTEENTHS_PER_BEAT
        return self.melody[start : start + SIXTEENTHS_PER_BEAT]

    def transpose(self, semitones: int) -> "Segment":
        melody = tuple(
            tok if not is_pitch(tok) else tok + semitones for tok in self.melody
        )
        harmony = tuple(
            None if c is None else c.transpose(semitones) for c in self.harmony
        )
        tonal = Tonality((self.tonality.root + semitones) % 12, self.tonality.mode)
        return Segment(melody, harmony, tonal, self.time_signature, self.bar_count)
