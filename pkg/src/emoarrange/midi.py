"""Minimal Standard MIDI File reader and writer (formats 0 and 1).

Covers exactly what the ingestion pipeline and the arranger need: matched
note on/off pairs with times in beats, the first tempo and time-signature
events, and track names. Everything else (controllers, pitch bend, sysex)
is skipped. Output is deterministic: identical input produces identical
bytes.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

log = logging.getLogger(__name__)

DEFAULT_DIVISION = 480  # ticks per quarter note when writing
DEFAULT_TEMPO_BPM = 120.0

META_TRACK_NAME = 0x03
META_END_OF_TRACK = 0x2F
META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58


class MidiParseError(ValueError):
    """Corrupt SMF data; offset is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass
class MidiNote:
    pitch: int
    onset: float  # beats (quarter notes) from track start
    duration: float  # beats
    velocity: int = 80
    channel: int = 0


@dataclass
class MidiTrack:
    name: str = ""
    notes: List[MidiNote] = field(default_factory=list)


@dataclass
class MidiFile:
    tracks: List[MidiTrack] = field(default_factory=list)
    tempo_bpm: float = DEFAULT_TEMPO_BPM
    time_signature: Tuple[int, int] = (4, 4)

    @property
    def time_signature_label(self) -> str:
        return f"{self.time_signature[0]}/{self.time_signature[1]}"


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def need(self, n: int) -> None:
        if self.pos + n > len(self.data):
            raise MidiParseError(f"truncated data, wanted {n} more bytes", self.pos)

    def bytes(self, n: int) -> bytes:
        self.need(n)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.bytes(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.bytes(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.bytes(4))[0]

    def vlq(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", self.pos)


def parse_midi(data: bytes) -> MidiFile:
    """Parse an SMF byte string into tracks of beat-timed notes.

    Raises MidiParseError (with byte offset) on corrupt header or track
    chunks. Unmatched note on/off events are dropped with a warning.
    """
    r = _Reader(data)
    if r.bytes(4) != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = r.u32()
    if header_len < 6:
        raise MidiParseError(f"bad MThd length {header_len}", r.pos - 4)
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.bytes(header_len - 6)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division not supported", 12)
    if division == 0:
        raise MidiParseError("zero time division", 12)

    out = MidiFile(tracks=[])
    tempo_seen = False
    timesig_seen = False

    for _ in range(ntrks):
        chunk_start = r.pos
        if r.bytes(4) != b"MTrk":
            raise MidiParseError("missing MTrk chunk", chunk_start)
        length = r.u32()
        tr = _Reader(data[r.pos : r.pos + length], 0)
        r.need(length)
        r.pos += length

        track = MidiTrack()
        open_notes: dict = {}  # (channel, pitch) -> (onset_ticks, velocity)
        ticks = 0
        running_status: Optional[int] = None

        while tr.pos < len(tr.data):
            ticks += tr.vlq()
            status = tr.u8()
            if status < 0x80:
                if running_status is None:
                    raise MidiParseError(
                        "data byte with no running status", chunk_start + 8 + tr.pos
                    )
                tr.pos -= 1
                status = running_status

            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0x80, 0x90):
                running_status = status
                pitch = tr.u8()
                velocity = tr.u8()
                key = (channel, pitch)
                if kind == 0x90 and velocity > 0:
                    if key in open_notes:
                        # re-attack with no note-off: close the old note here
                        onset, vel = open_notes.pop(key)
                        _close_note(track, pitch, onset, ticks, vel, channel, division)
                    open_notes[key] = (ticks, velocity)
                else:
                    if key in open_notes:
                        onset, vel = open_notes.pop(key)
                        _close_note(track, pitch, onset, ticks, vel, channel, division)
                    else:
                        log.warning("unmatched note-off for pitch %d; dropped", pitch)
            elif kind in (0xA0, 0xB0, 0xE0):
                running_status = status
                tr.bytes(2)
            elif kind in (0xC0, 0xD0):
                running_status = status
                tr.bytes(1)
            elif status == 0xFF:
                running_status = None
                meta = tr.u8()
                length = tr.vlq()
                payload = tr.bytes(length)
                if meta == META_TRACK_NAME:
                    track.name = payload.decode("latin-1", errors="replace")
                elif meta == META_TEMPO and not tempo_seen and length == 3:
                    usec = (payload[0] << 16) | (payload[1] << 8) | payload[2]
                    if usec > 0:
                        out.tempo_bpm = 60_000_000 / usec
                        tempo_seen = True
                elif meta == META_TIME_SIGNATURE and not timesig_seen and length >= 2:
                    out.time_signature = (payload[0], 1 << payload[1])
                    timesig_seen = True
                elif meta == META_END_OF_TRACK:
                    break
            elif status in (0xF0, 0xF7):
                running_status = None
                length = tr.vlq()
                tr.bytes(length)
            else:
                raise MidiParseError(
                    f"unexpected status byte 0x{status:02X}", chunk_start + 8 + tr.pos
                )

        for (channel, pitch), (onset, _vel) in open_notes.items():
            log.warning("note-on without note-off for pitch %d; dropped", pitch)
        track.notes.sort(key=lambda n: (n.onset, n.pitch))
        out.tracks.append(track)

    return out


def _close_note(
    track: MidiTrack,
    pitch: int,
    onset_ticks: int,
    off_ticks: int,
    velocity: int,
    channel: int,
    division: int,
) -> None:
    if off_ticks <= onset_ticks:
        return
    track.notes.append(
        MidiNote(
            pitch=pitch,
            onset=onset_ticks / division,
            duration=(off_ticks - onset_ticks) / division,
            velocity=velocity,
            channel=channel,
        )
    )


def _vlq(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


def _meta(meta_type: int, payload: bytes) -> bytes:
    return bytes([0xFF, meta_type]) + _vlq(len(payload)) + payload


def write_midi(mid: MidiFile) -> bytes:
    """Serialize to SMF format 1 (format 0 when there is a single track)."""
    division = DEFAULT_DIVISION
    fmt = 0 if len(mid.tracks) <= 1 else 1

    def track_chunk(events: bytes) -> bytes:
        body = events + _vlq(0) + _meta(META_END_OF_TRACK, b"")
        return b"MTrk" + struct.pack(">I", len(body)) + body

    usec = round(60_000_000 / mid.tempo_bpm)
    numer, denom = mid.time_signature
    conductor = _vlq(0) + _meta(META_TEMPO, struct.pack(">I", usec)[1:])
    conductor += _vlq(0) + _meta(
        META_TIME_SIGNATURE, bytes([numer, denom.bit_length() - 1, 24, 8])
    )

    chunks: List[bytes] = []
    for i, track in enumerate(mid.tracks):
        events = b""
        if fmt == 0 or i == 0:
            events += conductor
        if track.name:
            events += _vlq(0) + _meta(META_TRACK_NAME, track.name.encode("latin-1"))
        # interleave on/off events in tick order
        points: List[Tuple[int, int, int, int, int]] = []
        for n in track.notes:
            on_t = round(n.onset * division)
            off_t = round((n.onset + n.duration) * division)
            if off_t <= on_t:
                off_t = on_t + 1
            # order key: time, offs before ons at the same tick
            points.append((on_t, 1, n.pitch, n.velocity, n.channel))
            points.append((off_t, 0, n.pitch, 0, n.channel))
        points.sort(key=lambda p: (p[0], p[1], p[2]))
        ticks = 0
        for t, is_on, pitch, velocity, channel in points:
            events += _vlq(t - ticks)
            status = (0x90 if is_on else 0x80) | (channel & 0x0F)
            events += bytes([status, pitch & 0x7F, velocity & 0x7F])
            ticks = t
        chunks.append(track_chunk(events))

    ntrks = max(1, len(mid.tracks))
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, ntrks, division)
    if not mid.tracks:
        chunks = [track_chunk(conductor)]
    return header + b"".join(chunks)
