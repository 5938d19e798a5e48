"""MIDI ingestion pipeline: quantize, screen, extract, label, serialize.

Takes Standard MIDI Files to line-delimited JSON dataset pieces. A piece is
a 4-bar unit holding tonality, the sixteenth-grid melody, its downsampled
skeleton, the per-beat harmony and (for labeled sources) a per-beat
valence-arousal sequence.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from emoarrange.core import (
    BEATS_PER_BAR,
    HOLD,
    MIDI_MAX,
    MIDI_MIN,
    REST,
    SIXTEENTHS_PER_BEAT,
    Chord,
    EmotionVA,
    Note,
    Segment,
    Tonality,
    encode_melody,
    scale_pitch_classes,
    sixteenths_per_bar,
    sounding_pitches,
    validate_grid,
)
from emoarrange.midi import MidiFile, MidiNote, parse_midi

log = logging.getLogger(__name__)

MAX_CHORD_NOTES = 5
SEGMENT_BARS = 4

Granularity = str  # "beat" | "bar"


# ---------------------------------------------------------------------------
# screening and quantization


@dataclass(frozen=True)
class ScreenDecision:
    keep: bool
    reason: str = ""


def screen(mid: MidiFile) -> ScreenDecision:
    """Keep only 4/4 and 2/4 material; everything else is rejected."""
    if mid.time_signature_label not in ("4/4", "2/4"):
        return ScreenDecision(False, f"time_signature {mid.time_signature_label}")
    if not any(track.notes for track in mid.tracks):
        return ScreenDecision(False, "no notes")
    return ScreenDecision(True)


def quantize(notes: Sequence[MidiNote]) -> List[Note]:
    """Snap onsets and durations to the sixteenth grid; drop vanishing notes."""
    out: List[Note] = []
    for n in notes:
        onset = int(math.floor(n.onset * SIXTEENTHS_PER_BEAT + 0.5))
        end = int(math.floor((n.onset + n.duration) * SIXTEENTHS_PER_BEAT + 0.5))
        duration = end - onset
        if duration <= 0:
            continue
        if not MIDI_MIN <= n.pitch <= MIDI_MAX:
            continue
        out.append(Note(n.pitch, onset, duration))
    out.sort(key=lambda n: (n.onset, n.pitch))
    return out


def _monophony(notes: Sequence[Note]) -> float:
    if not notes:
        return 1.0
    clashes = 0
    prev_end = -1
    for n in sorted(notes, key=lambda n: n.onset):
        if n.onset < prev_end:
            clashes += 1
        prev_end = max(prev_end, n.onset + n.duration)
    return 1.0 - clashes / len(notes)


def select_melody_track(mid: MidiFile) -> int:
    """Pick the melody track: by name, else highest mean pitch with >=90% monophony."""
    for i, track in enumerate(mid.tracks):
        if "melody" in track.name.lower() and track.notes:
            return i
    best = -1
    best_pitch = -1.0
    for i, track in enumerate(mid.tracks):
        if not track.notes:
            continue
        if _monophony(quantize(track.notes)) < 0.9:
            continue
        mean_pitch = sum(n.pitch for n in track.notes) / len(track.notes)
        if mean_pitch > best_pitch:
            best = i
            best_pitch = mean_pitch
    if best < 0:
        # fall back to the densest track
        best = max(
            range(len(mid.tracks)), key=lambda i: len(mid.tracks[i].notes), default=0
        )
    return best


def _to_monophonic(notes: Sequence[Note]) -> List[Note]:
    """Resolve overlaps by truncating at the next onset (keep highest at ties)."""
    out: List[Note] = []
    for n in sorted(notes, key=lambda n: (n.onset, -n.pitch)):
        if out and out[-1].onset == n.onset:
            continue  # chord inside the melody track: keep the top note
        if out and out[-1].onset + out[-1].duration > n.onset:
            prev = out[-1]
            out[-1] = Note(prev.pitch, prev.onset, n.onset - prev.onset)
            if out[-1].duration <= 0:
                out.pop()
        out.append(n)
    return out


def melody_grid_from_notes(notes: Sequence[Note], grid_len: int) -> tuple:
    """Clip a quantized monophonic note list into a grid of grid_len slots."""
    clipped: List[Note] = []
    for n in _to_monophonic(notes):
        if n.onset >= grid_len:
            continue
        dur = min(n.duration, grid_len - n.onset)
        clipped.append(Note(n.pitch, n.onset, dur))
    return encode_melody(clipped, grid_len)


def extract_harmony(
    tracks: Sequence[Sequence[Note]], n_beats: int
) -> tuple:
    """Per-beat sets of distinct sounding pitches from accompaniment tracks.

    More than five simultaneous pitches keep the lowest five (the low notes
    carry the harmonic function). Silent beats repeat the previous chord;
    a leading silence is a rest chord.
    """
    chords: List[Optional[Chord]] = []
    all_notes = [n for track in tracks for n in track]
    for beat in range(n_beats):
        start = beat * SIXTEENTHS_PER_BEAT
        end = start + SIXTEENTHS_PER_BEAT
        pitches = sorted(
            {
                n.pitch
                for n in all_notes
                if n.onset < end and n.onset + n.duration > start
            }
        )
        if pitches:
            chords.append(Chord(frozenset(pitches[:MAX_CHORD_NOTES])))
        elif chords and chords[-1] is not None:
            chords.append(chords[-1])
        else:
            chords.append(None)
    return tuple(chords)


def downsample(
    melody: Sequence, granularity: Granularity = "beat", time_signature: str = "4/4"
) -> tuple:
    """Sample the sounding pitch every beat (or bar); HOLD resolves to the pitch."""
    if granularity == "beat":
        stride = SIXTEENTHS_PER_BEAT
    elif granularity == "bar":
        stride = sixteenths_per_bar(time_signature)
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    validate_grid(melody)
    sounding = sounding_pitches(melody)
    out: List = []
    for i in range(0, len(melody), stride):
        pitch = sounding[i]
        out.append(REST if pitch is None else pitch)
    return tuple(out)


def estimate_tonality(melody: Sequence, harmony: Sequence) -> Tonality:
    """Best-overlap major/minor key over the piece's pitch classes."""
    pcs: List[int] = [p % 12 for p in sounding_pitches(melody) if p is not None]
    for chord in harmony:
        if chord is not None:
            pcs.extend(chord.pitch_classes)
    if not pcs:
        return Tonality(0, "major")
    best = Tonality(0, "major")
    best_score = -1.0
    for root in range(12):
        for mode in ("major", "minor"):
            key = Tonality(root, mode)
            scale = scale_pitch_classes(key)
            score = sum(1 for pc in pcs if pc in scale) / len(pcs)
            # light tonic bias so enharmonically tied keys resolve stably
            score += 0.01 * sum(1 for pc in pcs if pc == root) / len(pcs)
            if score > best_score:
                best = key
                best_score = score
    return best


# ---------------------------------------------------------------------------
# emotion label harmonization


@dataclass(frozen=True)
class DiscreteEmotionLabel:
    name: str
    anchor: EmotionVA
    spread: float = 0.1

    def __post_init__(self) -> None:
        if self.spread <= 0:
            raise ValueError("spread must be positive")


def _circumplex(angle_deg: float) -> EmotionVA:
    rad = math.radians(angle_deg)
    return EmotionVA(0.75 * math.cos(rad), 0.75 * math.sin(rad))


# Reconstructed anchor table: the published figure shows the layout only
# qualitatively, so these coordinates are our explicit config. Twelve
# circumferential labels at radius 0.75 every 30 degrees, four interior
# labels at (+-0.35, +-0.35), and the four quadrant labels at (+-0.5, +-0.5).
LABEL_TABLE: dict = {
    label.name: label
    for label in [
        DiscreteEmotionLabel("pleased", _circumplex(0)),
        DiscreteEmotionLabel("happy", _circumplex(30)),
        DiscreteEmotionLabel("excited", _circumplex(60)),
        DiscreteEmotionLabel("aroused", _circumplex(90)),
        DiscreteEmotionLabel("tense", _circumplex(120)),
        DiscreteEmotionLabel("angry", _circumplex(150)),
        DiscreteEmotionLabel("miserable", _circumplex(180)),
        DiscreteEmotionLabel("depressed", _circumplex(210)),
        DiscreteEmotionLabel("bored", _circumplex(240)),
        DiscreteEmotionLabel("sleepy", _circumplex(270)),
        DiscreteEmotionLabel("calm", _circumplex(300)),
        DiscreteEmotionLabel("relaxed", _circumplex(330)),
        DiscreteEmotionLabel("cheerful", EmotionVA(0.35, 0.35)),
        DiscreteEmotionLabel("nervous", EmotionVA(-0.35, 0.35)),
        DiscreteEmotionLabel("gloomy", EmotionVA(-0.35, -0.35)),
        DiscreteEmotionLabel("serene", EmotionVA(0.35, -0.35)),
        # quadrant labels (4Q-format datasets)
        DiscreteEmotionLabel("q1", EmotionVA(0.5, 0.5)),
        DiscreteEmotionLabel("q2", EmotionVA(-0.5, 0.5)),
        DiscreteEmotionLabel("q3", EmotionVA(-0.5, -0.5)),
        DiscreteEmotionLabel("q4", EmotionVA(0.5, -0.5)),
    ]
}


class UnknownLabelError(KeyError):
    pass


def label_anchor(name: str) -> EmotionVA:
    """Deterministic anchor lookup for a discrete emotion label."""
    try:
        return LABEL_TABLE[name.lower()].anchor
    except KeyError:
        raise UnknownLabelError(name) from None


def map_discrete_label(
    name: str, rng: Optional[random.Random] = None, spread: Optional[float] = None
) -> EmotionVA:
    """Sample a V-A point from the normal around the label's anchor, clamped.

    With no rng (or spread 0) returns exactly the anchor.
    """
    label = LABEL_TABLE.get(name.lower())
    if label is None:
        raise UnknownLabelError(name)
    sd = label.spread if spread is None else spread
    if rng is None or sd == 0:
        return label.anchor
    return EmotionVA(
        rng.gauss(label.anchor.valence, sd), rng.gauss(label.anchor.arousal, sd)
    )


def normalize_range(value: float, src: Tuple[float, float] = (0.0, 1.0)) -> float:
    """Affine map from src (default [0,1]) onto [-1,1]; clamps with a warning."""
    lo, hi = src
    if not lo <= value <= hi:
        log.warning("value %.4f outside source range [%s, %s]; clamping", value, lo, hi)
        value = max(lo, min(hi, value))
    return 2.0 * (value - lo) / (hi - lo) - 1.0


def reduce_3dim(
    energy_arousal: float, tension_arousal: float, valence: float
) -> EmotionVA:
    """Collapse (energy arousal, tension arousal, valence) to V-A.

    Tension arousal duplicates valence information and is dropped; energy
    arousal becomes the arousal axis.
    """
    del tension_arousal
    return EmotionVA(valence=valence, arousal=energy_arousal)


def align_labels(
    timeline: Sequence[Tuple[float, EmotionVA]], n_beats: int, bpm: float
) -> tuple:
    """Step-hold resample of a (seconds, V-A) timeline onto the beat grid."""
    if not timeline:
        raise ValueError("empty label timeline")
    ordered = sorted(timeline, key=lambda kv: kv[0])
    seconds_per_beat = 60.0 / bpm
    out: List[EmotionVA] = []
    for beat in range(n_beats):
        t = beat * seconds_per_beat
        current = ordered[0][1]
        for ts, va in ordered:
            if ts <= t:
                current = va
            else:
                break
        out.append(current)
    return tuple(out)


# ---------------------------------------------------------------------------
# dataset pieces


@dataclass(frozen=True)
class DatasetPiece:
    """One serialized 4-bar training unit."""

    tonality: Tonality
    melody: tuple
    melody_ds: tuple
    harmony: tuple
    emotion: Optional[tuple] = None
    time_signature: str = "4/4"

    def __post_init__(self) -> None:
        bars = SEGMENT_BARS
        want_melody = bars * sixteenths_per_bar(self.time_signature)
        beats = bars * BEATS_PER_BAR[self.time_signature]
        if len(self.melody) != want_melody:
            raise ValueError(
                f"melody length {len(self.melody)} != {want_melody}"
            )
        if len(self.harmony) != beats:
            raise ValueError(f"harmony length {len(self.harmony)} != {beats}")
        if len(self.melody_ds) not in (beats, bars):
            raise ValueError(
                f"downsampled length {len(self.melody_ds)} is neither "
                f"{beats} (beat) nor {bars} (bar)"
            )
        if self.emotion is not None and len(self.emotion) != beats:
            raise ValueError(
                f"emotion length {len(self.emotion)} != {beats} beats"
            )

    @property
    def granularity(self) -> Granularity:
        return "beat" if len(self.melody_ds) != SEGMENT_BARS else "bar"

    def segment(self) -> Segment:
        return Segment(
            melody=self.melody,
            harmony=self.harmony,
            tonality=self.tonality,
            time_signature=self.time_signature,  # type: ignore[arg-type]
            bar_count=SEGMENT_BARS,
        )


def _token_to_json(tok):
    if tok is REST:
        return "R"
    if tok is HOLD:
        return "H"
    return tok


def _token_from_json(value):
    if value == "R":
        return REST
    if value == "H":
        return HOLD
    if isinstance(value, int):
        return value
    raise ValueError(f"bad melody token {value!r}")


def piece_to_json(piece: DatasetPiece) -> dict:
    return {
        "tonality": {"root": piece.tonality.root, "mode": piece.tonality.mode},
        "time_signature": piece.time_signature,
        "melody": [_token_to_json(t) for t in piece.melody],
        "melody_ds": [_token_to_json(t) for t in piece.melody_ds],
        "harmony": [
            None if c is None else sorted(c.notes) for c in piece.harmony
        ],
        "emotion": None
        if piece.emotion is None
        else [[va.valence, va.arousal] for va in piece.emotion],
    }


def piece_from_json(obj: dict) -> DatasetPiece:
    tonality = Tonality(obj["tonality"]["root"], obj["tonality"]["mode"])
    melody = tuple(_token_from_json(t) for t in obj["melody"])
    melody_ds = tuple(_token_from_json(t) for t in obj["melody_ds"])
    harmony = tuple(
        None if notes is None else Chord(frozenset(notes)) for notes in obj["harmony"]
    )
    emotion = None
    if obj.get("emotion") is not None:
        emotion = tuple(EmotionVA(v, a) for v, a in obj["emotion"])
    return DatasetPiece(
        tonality=tonality,
        melody=melody,
        melody_ds=melody_ds,
        harmony=harmony,
        emotion=emotion,
        time_signature=obj.get("time_signature", "4/4"),
    )


def write_pieces(path, pieces: Iterable[DatasetPiece]) -> int:
    """Write pieces as line-delimited JSON; returns the count written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for piece in pieces:
            fh.write(json.dumps(piece_to_json(piece), separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def read_pieces(path) -> Iterator[DatasetPiece]:
    """Stream pieces back; malformed records are skipped with a counted warning."""
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield piece_from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                skipped += 1
                log.warning("skipping malformed record at line %d: %s", lineno, exc)
    if skipped:
        log.warning("skipped %d malformed record(s) in %s", skipped, path)


# ---------------------------------------------------------------------------
# full ingestion


@dataclass
class IngestStats:
    files: int = 0
    rejected: int = 0
    pieces: int = 0
    reasons: dict = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.reasons is None:
            self.reasons = {}


def split_song(
    mid: MidiFile,
    granularity: Granularity = "beat",
    emotion_timeline: Optional[Sequence[Tuple[float, EmotionVA]]] = None,
    constant_emotion: Optional[EmotionVA] = None,
) -> List[DatasetPiece]:
    """Cut one screened MIDI file into 4-bar dataset pieces."""
    ts = mid.time_signature_label
    spb = sixteenths_per_bar(ts)
    beats_per_bar = BEATS_PER_BAR[ts]

    melody_idx = select_melody_track(mid)
    melody_notes = quantize(mid.tracks[melody_idx].notes)
    accomp = [
        quantize(t.notes) for i, t in enumerate(mid.tracks) if i != melody_idx
    ]
    if not accomp:
        accomp = [[]]

    last_slot = 0
    for track in [melody_notes, *accomp]:
        for n in track:
            last_slot = max(last_slot, n.onset + n.duration)
    total_bars = last_slot // spb  # trailing partial bar dropped
    n_segments = total_bars // SEGMENT_BARS
    if n_segments == 0:
        return []

    grid_len = total_bars * spb
    melody = melody_grid_from_notes(melody_notes, grid_len)
    harmony = extract_harmony(accomp, total_bars * beats_per_bar)
    tonality = estimate_tonality(melody, harmony)

    per_beat_emotion: Optional[tuple] = None
    total_beats = total_bars * beats_per_bar
    if emotion_timeline is not None:
        per_beat_emotion = align_labels(emotion_timeline, total_beats, mid.tempo_bpm)
    elif constant_emotion is not None:
        per_beat_emotion = tuple([constant_emotion] * total_beats)

    pieces: List[DatasetPiece] = []
    for s in range(n_segments):
        m0 = s * SEGMENT_BARS * spb
        b0 = s * SEGMENT_BARS * beats_per_bar
        seg_melody = melody[m0 : m0 + SEGMENT_BARS * spb]
        # a segment must stand alone: resolve a leading HOLD to its pitch
        seg_melody = _resolve_leading_hold(seg_melody, melody, m0)
        seg_harmony = harmony[b0 : b0 + SEGMENT_BARS * beats_per_bar]
        emotion = (
            None
            if per_beat_emotion is None
            else per_beat_emotion[b0 : b0 + SEGMENT_BARS * beats_per_bar]
        )
        pieces.append(
            DatasetPiece(
                tonality=tonality,
                melody=seg_melody,
                melody_ds=downsample(seg_melody, granularity, ts),
                harmony=seg_harmony,
                emotion=emotion,
                time_signature=ts,
            )
        )
    return pieces


def _resolve_leading_hold(seg_melody: tuple, full_melody: tuple, offset: int) -> tuple:
    if not seg_melody or seg_melody[0] is not HOLD:
        return seg_melody
    pitch = sounding_pitches(full_melody)[offset]
    head = REST if pitch is None else pitch
    return (head,) + seg_melody[1:]


def _parse_label_value(value) -> Tuple[Optional[List[Tuple[float, EmotionVA]]], Optional[EmotionVA]]:
    """Labels file values: a label name, a [v, a] pair, or a [[t, v, a], ...] timeline."""
    if isinstance(value, str):
        return None, label_anchor(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(x, (int, float)) for x in value
    ):
        return None, EmotionVA(value[0], value[1])
    timeline = [(float(t), EmotionVA(v, a)) for t, v, a in value]
    return timeline, None


def ingest_directory(
    in_dir, out_file, labels_file=None, granularity: Granularity = "beat"
) -> IngestStats:
    """Ingest every .mid/.midi file under in_dir into a JSONL piece file."""
    stats = IngestStats()
    labels = {}
    if labels_file is not None:
        with open(labels_file, "r", encoding="utf-8") as fh:
            labels = json.load(fh)

    def pieces() -> Iterator[DatasetPiece]:
        for path in sorted(Path(in_dir).rglob("*.mid*")):
            stats.files += 1
            try:
                mid = parse_midi(path.read_bytes())
            except Exception as exc:
                stats.rejected += 1
                stats.reasons["parse_error"] = stats.reasons.get("parse_error", 0) + 1
                log.warning("failed to parse %s: %s", path, exc)
                continue
            decision = screen(mid)
            if not decision.keep:
                stats.rejected += 1
                stats.reasons[decision.reason] = stats.reasons.get(decision.reason, 0) + 1
                continue
            timeline = constant = None
            if path.name in labels:
                timeline, constant = _parse_label_value(labels[path.name])
            for piece in split_song(
                mid,
                granularity=granularity,
                emotion_timeline=timeline,
                constant_emotion=constant,
            ):
                stats.pieces += 1
                yield piece

    write_pieces(out_file, pieces())
    return stats
