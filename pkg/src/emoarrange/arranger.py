"""Generation phase: regenerate full-resolution melody and harmony from a
downsampled melody skeleton plus a fused emotion vector.

Two interchangeable backends honor the same output contract (anchor
pitches are preserved at the sample instants, harmony is one chord per
beat):

* RuleBased: deterministic, emotion-sensitive infill and diatonic
  harmonization. Arousal drives note density, valence drives harmonic
  function choice.
* NeuralToy: a small encoder-decoder sequence model exercising the
  training-loop machinery (generation loss, semi-supervised coupling) at
  desk scale.

A texture renderer turns the per-beat harmony into a multi-track
accompaniment (block / broken / arpeggio figuration by arousal band).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import torch
from torch import nn

from emoarrange.core import (
    BEATS_PER_BAR,
    HOLD,
    MAJOR_STEPS,
    MIDI_MAX,
    MIDI_MIN,
    MINOR_STEPS,
    REST,
    SIXTEENTHS_PER_BEAT,
    Chord,
    EmotionVA,
    Segment,
    Tonality,
    decode_melody,
    is_pitch,
    sounding_pitches,
)
from emoarrange.features import harmonic_color
from emoarrange.fusion import ConditionedInput
from emoarrange.midi import MidiNote, MidiTrack

SEGMENT_BARS = 4

# Valence/arousal band edges for the rule tables (invented config, not from
# any published source).
BAND_EDGE = 1.0 / 3.0

# Onset slots inside a beat for each note density; tail-loaded so the
# anchor keeps sounding as long as the density allows.
DENSITY_ONSETS = {1: (0,), 2: (0, 3), 3: (0, 2, 3), 4: (0, 1, 2, 3)}

# Diatonic scale degrees allowed per valence band (tonic/subdominant/
# dominant functions when bright, the relative-minor side when dark).
BRIGHT_DEGREES = (0, 3, 4)
DARK_DEGREES = (1, 2, 5)
ALL_DEGREES = (0, 1, 2, 3, 4, 5)


def note_density(arousal: float) -> int:
    """Notes per beat: 1 at arousal -1 up to 4 at arousal +1."""
    return max(1, min(4, math.ceil(1 + 3 * (arousal + 1) / 2)))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class _ScaleWalker:
    """Maps pitches to absolute diatonic degree indices and back.

    sorted_pcs orders the scale by pitch class (for stepwise walking);
    tonic_pcs orders it by scale degree from the root (for triad building).
    """

    def __init__(self, tonality: Tonality):
        steps = MAJOR_STEPS if tonality.mode == "major" else MINOR_STEPS
        self.tonic_pcs = [(tonality.root + s) % 12 for s in steps]
        self.sorted_pcs = sorted(self.tonic_pcs)

    def degree(self, pitch: int) -> int:
        octave, pc = divmod(pitch, 12)
        best = min(
            range(7),
            key=lambda i: min(
                abs(self.sorted_pcs[i] - pc), 12 - abs(self.sorted_pcs[i] - pc)
            ),
        )
        return octave * 7 + best

    def pitch(self, degree: int) -> int:
        octave, idx = divmod(degree, 7)
        return max(MIDI_MIN, min(MIDI_MAX, octave * 12 + self.sorted_pcs[idx]))


def _normalize_anchors(anchors: Sequence, beats: int) -> tuple:
    """Bar-level anchors expand to per-beat; HOLD tokens are rejected."""
    toks = tuple(anchors)
    for t in toks:
        if t is HOLD:
            raise ValueError("downsampled melody must not contain HOLD tokens")
        if t is not REST and not is_pitch(t):
            raise ValueError(f"bad anchor token {t!r}")
    if len(toks) == beats:
        return toks
    if len(toks) == SEGMENT_BARS and beats % SEGMENT_BARS == 0:
        per_bar = beats // SEGMENT_BARS
        return tuple(t for t in toks for _ in range(per_bar))
    raise ValueError(f"{len(toks)} anchors fit neither {beats} beats nor {SEGMENT_BARS} bars")


def infill_melody(
    anchors: Sequence,
    emotion: EmotionVA,
    tonality: Tonality,
    time_signature: str = "4/4",
) -> tuple:
    """Place one anchor per beat and fill between with diatonic steps.

    Anchors land on beat onsets untouched (even when off-scale); inserted
    tones walk the scale from the anchor toward the next one, with
    note-per-beat density driven by arousal.
    """
    beats = SEGMENT_BARS * BEATS_PER_BAR[time_signature]
    toks = _normalize_anchors(anchors, beats)
    walker = _ScaleWalker(tonality)
    onsets = DENSITY_ONSETS[note_density(emotion.arousal)]

    grid: List = []
    for i, anchor in enumerate(toks):
        beat: List = [REST] * SIXTEENTHS_PER_BEAT
        if anchor is REST:
            grid.extend(beat)
            continue
        nxt = toks[i + 1] if i + 1 < len(toks) else anchor
        if nxt is REST:
            nxt = anchor
        deg_a = walker.degree(anchor)
        diff = walker.degree(nxt) - deg_a
        n = len(onsets)
        for j, slot in enumerate(onsets):
            if j == 0:
                beat[slot] = anchor
            else:
                beat[slot] = walker.pitch(deg_a + _round_half_up(diff * j / n))
        for slot in range(1, SIXTEENTHS_PER_BEAT):
            if beat[slot] is REST:
                beat[slot] = HOLD
        grid.extend(beat)
    return tuple(grid)


def _diatonic_triad(degree: int, walker: _ScaleWalker) -> Chord:
    root_pc = walker.tonic_pcs[degree % 7]
    third_pc = walker.tonic_pcs[(degree + 2) % 7]
    fifth_pc = walker.tonic_pcs[(degree + 4) % 7]
    root = 48 + root_pc
    return Chord.of(
        root, root + (third_pc - root_pc) % 12, root + (fifth_pc - root_pc) % 12
    )


def _function_degrees(valence: float) -> tuple:
    if valence > BAND_EDGE:
        return BRIGHT_DEGREES
    if valence < -BAND_EDGE:
        return DARK_DEGREES
    return ALL_DEGREES


def harmonize(
    anchors: Sequence,
    emotion: EmotionVA,
    tonality: Tonality,
    time_signature: str = "4/4",
) -> tuple:
    """One diatonic triad per beat, maximizing chord-tone coverage of that
    beat's melody content within the valence-selected function set; ties go
    to the smallest harmonic-color step from the previous chord."""
    beats = SEGMENT_BARS * BEATS_PER_BAR[time_signature]
    toks = _normalize_anchors(anchors, beats)
    walker = _ScaleWalker(tonality)
    melody = infill_melody(toks, emotion, tonality, time_signature)
    sounding = sounding_pitches(melody)
    degrees = _function_degrees(emotion.valence)
    candidates = [_diatonic_triad(d, walker) for d in degrees]

    chords: List[Optional[Chord]] = []
    prev: Optional[Chord] = None
    tonic = _diatonic_triad(0, walker)
    for beat in range(beats):
        start = beat * SIXTEENTHS_PER_BEAT
        pcs = [
            p % 12 for p in sounding[start : start + SIXTEENTHS_PER_BEAT] if p is not None
        ]
        if not pcs:
            chords.append(prev)
            continue

        def rank(cand: Chord) -> tuple:
            coverage = sum(1 for pc in pcs if pc in cand.pitch_classes)
            hc_step = abs(harmonic_color(cand, prev if prev is not None else tonic))
            return (-coverage, hc_step, min(cand.pitch_classes))

        best = min(candidates, key=rank)
        chords.append(best)
        prev = best
    return tuple(chords)


@dataclass(frozen=True)
class RuleBased:
    """Deterministic generation backend (pure function of its inputs)."""

    def generate(
        self, cond: ConditionedInput, tonality: Tonality, time_signature: str = "4/4"
    ) -> Segment:
        emotion = cond.emotion_va()
        melody = infill_melody(cond.anchors, emotion, tonality, time_signature)
        harmony = harmonize(cond.anchors, emotion, tonality, time_signature)
        return Segment(
            melody=melody,
            harmony=harmony,
            tonality=tonality,
            time_signature=time_signature,  # type: ignore[arg-type]
            bar_count=SEGMENT_BARS,
        )


# ---------------------------------------------------------------------------
# token layout for the sequence-model backend

PAD, BOS, EOS, SEP, BSEP = 0, 1, 2, 3, 4
REST_ID, HOLD_ID = 5, 6
PITCH_BASE = 7
VOCAB = PITCH_BASE + (MIDI_MAX - MIDI_MIN + 1)  # 95

MAX_INPUT_TOKENS = 64
MAX_OUTPUT_TOKENS = 256


class TruncationError(ValueError):
    """A token sequence exceeds the model's input/output budget."""


def token_id(tok) -> int:
    if tok is REST:
        return REST_ID
    if tok is HOLD:
        return HOLD_ID
    return PITCH_BASE + tok - MIDI_MIN


def token_from_id(tid: int):
    if tid == REST_ID:
        return REST
    if tid == HOLD_ID:
        return HOLD
    if PITCH_BASE <= tid < VOCAB:
        return tid - PITCH_BASE + MIDI_MIN
    return None


def encode_source(anchors: Sequence) -> List[int]:
    ids = [BOS] + [token_id(t) for t in anchors]
    if len(ids) > MAX_INPUT_TOKENS:
        raise TruncationError(f"source length {len(ids)} exceeds {MAX_INPUT_TOKENS}")
    return ids


def encode_target(melody: Sequence, harmony: Sequence) -> List[int]:
    ids = [token_id(t) for t in melody] + [SEP]
    for chord in harmony:
        if chord is not None:
            ids.extend(token_id(p) for p in chord.sorted_notes())
        ids.append(BSEP)
    ids.append(EOS)
    if len(ids) > MAX_OUTPUT_TOKENS:
        raise TruncationError(f"target length {len(ids)} exceeds {MAX_OUTPUT_TOKENS}")
    return ids


def decode_target(
    ids: Sequence[int],
    anchors: Sequence,
    tonality: Tonality,
    time_signature: str = "4/4",
) -> Segment:
    """Parse decoder output into a valid Segment; anchors are re-imposed at
    the sample instants so the backend honors the output contract."""
    beats = SEGMENT_BARS * BEATS_PER_BAR[time_signature]
    slots = beats * SIXTEENTHS_PER_BEAT
    toks = _normalize_anchors(anchors, beats)

    seq = list(ids)
    if seq and seq[0] == BOS:
        seq = seq[1:]
    if EOS in seq:
        seq = seq[: seq.index(EOS)]
    if SEP in seq:
        cut = seq.index(SEP)
        melody_ids, harmony_ids = seq[:cut], seq[cut + 1 :]
    else:
        melody_ids, harmony_ids = seq[:slots], []

    melody: List = []
    for tid in melody_ids[:slots]:
        tok = token_from_id(tid)
        melody.append(REST if tok is None else tok)
    melody.extend([REST] * (slots - len(melody)))

    # re-impose the anchors, then repair any HOLD with nothing to extend
    for i, anchor in enumerate(toks):
        melody[i * SIXTEENTHS_PER_BEAT] = anchor
    current = None
    for i, tok in enumerate(melody):
        if tok is HOLD and current is None:
            melody[i] = REST
        elif tok is REST:
            current = None
        elif tok is not HOLD:
            current = tok

    chords: List[Optional[Chord]] = []
    group: List[int] = []
    for tid in harmony_ids:
        if tid == BSEP:
            pitches = sorted({p for p in group if p is not None})[:5]
            chords.append(Chord(frozenset(pitches)) if pitches else None)
            group = []
        else:
            tok = token_from_id(tid)
            group.append(tok if is_pitch(tok) else None)
    chords = chords[:beats]
    chords.extend([None] * (beats - len(chords)))

    return Segment(
        melody=tuple(melody),
        harmony=tuple(chords),
        tonality=tonality,
        time_signature=time_signature,  # type: ignore[arg-type]
        bar_count=SEGMENT_BARS,
    )


class NeuralToy(nn.Module):
    """Encoder-decoder sequence model over the melody/harmony token layout.

    The fused emotion is concatenated to every encoder token embedding
    (then projected back to the model width) as the conditioning channel.
    The output projection starts at zero so the initial loss is ln(vocab).
    """

    def __init__(
        self,
        vocab: int = VOCAB,
        d_model: int = 512,
        nhead: int = 2,
        num_layers: int = 4,
        dim_feedforward: int = 1024,
        dropout: float = 0.1,
        seed: int = 0,
    ):
        super().__init__()
        torch.manual_seed(seed)
        self.vocab = vocab
        self.d_model = d_model
        self.tok_emb = nn.Embedding(vocab, d_model, padding_idx=PAD)
        self.pos_emb = nn.Embedding(MAX_OUTPUT_TOKENS, d_model)
        self.cond_proj = nn.Linear(d_model + 2, d_model)
        self.transformer = nn.Transformer(
            d_model=d_model,
            nhead=nhead,
            num_encoder_layers=num_layers,
            num_decoder_layers=num_layers,
            dim_feedforward=dim_feedforward,
            dropout=dropout,
            batch_first=True,
        )
        self.out_proj = nn.Linear(d_model, vocab)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        pos = torch.arange(ids.shape[1], device=ids.device)
        return self.tok_emb(ids) + self.pos_emb(pos)[None, :, :]

    def forward(
        self, src: torch.Tensor, emotion: torch.Tensor, tgt_in: torch.Tensor
    ) -> torch.Tensor:
        """src (B,S) ids, emotion (B,2), tgt_in (B,T) ids -> logits (B,T,V)."""
        src_emb = self._embed(src)
        cond = emotion[:, None, :].expand(-1, src.shape[1], -1)
        src_emb = self.cond_proj(torch.cat([src_emb, cond], dim=-1))
        tgt_emb = self._embed(tgt_in)
        causal = nn.Transformer.generate_square_subsequent_mask(
            tgt_in.shape[1], device=src.device
        )
        hidden = self.transformer(src_emb, tgt_emb, tgt_mask=causal)
        logits = self.out_proj(hidden)
        if not torch.isfinite(logits).all():
            raise FloatingPointError("non-finite generator logits")
        return logits

    @torch.no_grad()
    def greedy_decode(
        self, src_ids: Sequence[int], emotion: Sequence[float], max_len: int = MAX_OUTPUT_TOKENS
    ) -> List[int]:
        self.eval()
        src = torch.tensor([list(src_ids)], dtype=torch.long)
        emo = torch.tensor([list(emotion)], dtype=torch.float32)
        out = [BOS]
        for _ in range(max_len):
            tgt = torch.tensor([out], dtype=torch.long)
            logits = self.forward(src, emo, tgt)
            nxt = int(logits[0, -1].argmax().item())
            if nxt == EOS:
                break
            out.append(nxt)
        return out[1:]

    def generate(
        self, cond: ConditionedInput, tonality: Tonality, time_signature: str = "4/4"
    ) -> Segment:
        src = encode_source(cond.anchors)
        ids = self.greedy_decode(src, cond.emotion[:2])
        return decode_target(ids, cond.anchors, tonality, time_signature)


GeneratorBackend = Union[RuleBased, NeuralToy]


def generate(
    backend: GeneratorBackend,
    cond: ConditionedInput,
    tonality: Tonality,
    time_signature: str = "4/4",
) -> Segment:
    """Produce a full-resolution segment from the conditioned input."""
    if not cond.anchors:
        raise ValueError("empty conditioned input")
    return backend.generate(cond, tonality, time_signature)


def train_generator_toy(
    pieces: Sequence,
    epochs: int = 60,
    lr: float = 1e-3,
    d_model: int = 64,
    nhead: int = 2,
    num_layers: int = 2,
    dim_feedforward: int = 128,
    dropout: float = 0.0,
    seed: int = 0,
) -> Tuple[NeuralToy, List[float]]:
    """Fit a toy-sized sequence model on (skeleton+emotion -> detail) pairs."""
    if not pieces:
        raise ValueError("empty dataset")
    model = NeuralToy(
        d_model=d_model,
        nhead=nhead,
        num_layers=num_layers,
        dim_feedforward=dim_feedforward,
        dropout=dropout,
        seed=seed,
    )
    src, emo, tgt_in, tgt_out = batch_tensors(pieces)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    trace: List[float] = []
    model.train()
    for _ in range(epochs):
        optimizer.zero_grad()
        logits = model(src, emo, tgt_in)
        loss = generation_loss(logits, tgt_out)
        loss.backward()
        optimizer.step()
        trace.append(float(loss.item()))
    return model, trace


def generation_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=PAD
    )


def batch_tensors(pieces: Sequence):
    """Stack pieces into (src, emotion, tgt_in, tgt_out) training tensors."""
    srcs, emos, tgts = [], [], []
    for piece in pieces:
        srcs.append(encode_source(piece.melody_ds))
        if piece.emotion is not None:
            v = sum(p.valence for p in piece.emotion) / len(piece.emotion)
            a = sum(p.arousal for p in piece.emotion) / len(piece.emotion)
        else:
            v = a = 0.0
        emos.append([v, a])
        tgts.append([BOS] + encode_target(piece.melody, piece.harmony))
    src_len = max(len(s) for s in srcs)
    tgt_len = max(len(t) for t in tgts)
    src = torch.full((len(pieces), src_len), PAD, dtype=torch.long)
    tgt = torch.full((len(pieces), tgt_len), PAD, dtype=torch.long)
    for i, (s, t) in enumerate(zip(srcs, tgts)):
        src[i, : len(s)] = torch.tensor(s)
        tgt[i, : len(t)] = torch.tensor(t)
    emo = torch.tensor(emos, dtype=torch.float32)
    return src, emo, tgt[:, :-1], tgt[:, 1:]


# ---------------------------------------------------------------------------
# texture rendering


def _mean_emotion(emotion) -> EmotionVA:
    if isinstance(emotion, EmotionVA):
        return emotion
    vs = [p.valence for p in emotion]
    As = [p.arousal for p in emotion]
    return EmotionVA(sum(vs) / len(vs), sum(As) / len(As))


def render_texture(segment: Segment, emotion) -> List[MidiTrack]:
    """Melody passthrough plus a chord accompaniment track.

    Figuration follows the arousal band: block chords when calm, broken
    chords in the middle band, sixteenth arpeggios when energetic.
    """
    emo = _mean_emotion(emotion)
    velocity = int(56 + 32 * (emo.arousal + 1) / 2)

    melody_track = MidiTrack(name="melody")
    for note in decode_melody(segment.melody):
        melody_track.notes.append(
            MidiNote(
                pitch=note.pitch,
                onset=note.onset / SIXTEENTHS_PER_BEAT,
                duration=note.duration / SIXTEENTHS_PER_BEAT,
                velocity=velocity,
            )
        )

    accomp = MidiTrack(name="accompaniment")
    for beat, chord in enumerate(segment.harmony):
        if chord is None:
            continue
        tones = chord.sorted_notes()
        if emo.arousal < -BAND_EDGE:  # block
            for pitch in tones:
                accomp.notes.append(MidiNote(pitch, beat, 1.0, velocity - 12))
        elif emo.arousal <= BAND_EDGE:  # broken: bass then the rest
            accomp.notes.append(MidiNote(tones[0], beat, 0.5, velocity - 12))
            for pitch in tones[1:] or tones:
                accomp.notes.append(MidiNote(pitch, beat + 0.5, 0.5, velocity - 12))
        else:  # arpeggio
            for k in range(SIXTEENTHS_PER_BEAT):
                accomp.notes.append(
                    MidiNote(tones[k % len(tones)], beat + k / 4, 0.25, velocity - 12)
                )
    return [melody_track, accomp]
