"""Long-running session service speaking a small WebSocket protocol.

One logical arrangement session per connection; sessions share nothing
but read-only model parameters. Frames are JSON text:

client -> server:
  {"type": "select_song", "id": "demo"} or {"type": "select_song", "midi_b64": ...}
  {"type": "set_config", "fusion": ..., "backend": ..., "granularity": ...}
  {"type": "target", "v": float, "a": float}

server -> client:
  {"type": "segment", "bar_index", "notes", "recognized": {"v","a"}|null,
   "fused": {"v","a"}, "latency_ms"}
  {"type": "metrics", ...}
  {"type": "error", "code", "msg"}
  {"type": "end_of_song"}

A malformed message yields an error frame; the session stays alive.

The WebSocket layer is a minimal RFC 6455 implementation (text frames,
no extensions or fragmentation) so browsers can connect without any
third-party dependency.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import socket
import socketserver
import struct
import threading
from typing import Dict, Optional, Tuple

from emoarrange.core import EmotionVA, sixteenths_per_bar
from emoarrange.midi import parse_midi
from emoarrange.pipeline import (
    estimate_tonality,
    extract_harmony,
    melody_grid_from_notes,
    quantize,
    screen,
    select_melody_track,
)
from emoarrange.recognizer import EmotionRecognizer, default_recognizer
from emoarrange.stream import (
    EndOfSong,
    SessionState,
    Song,
    StreamConfig,
    demo_song,
    open_session,
    step,
)

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class ProtocolError(Exception):
    def __init__(self, code: str, msg: str):
        super().__init__(msg)
        self.code = code
        self.msg = msg


# ---------------------------------------------------------------------------
# websocket plumbing


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> Tuple[int, bytes]:
    """Read one frame; returns (opcode, payload). Raises on fragmentation."""
    head = _recv_exact(sock, 2)
    fin = head[0] & 0x80
    opcode = head[0] & 0x0F
    if not fin:
        raise ProtocolError("bad_frame", "fragmented frames not supported")
    masked = head[1] & 0x80
    length = head[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", _recv_exact(sock, 2))[0]
    elif length == 127:
        length = struct.unpack(">Q", _recv_exact(sock, 8))[0]
    mask = _recv_exact(sock, 4) if masked else b""
    payload = _recv_exact(sock, length) if length else b""
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def write_frame(
    sock: socket.socket, payload: bytes, opcode: int = OP_TEXT, mask: bool = False
) -> None:
    head = bytes([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        head += bytes([mask_bit | length])
    elif length < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", length)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", length)
    if mask:
        key = b"\x12\x34\x56\x78"  # test client; server frames go unmasked
        payload = key + bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    sock.sendall(head + payload)


def _handshake_server(sock: socket.socket) -> None:
    request = b""
    while b"\r\n\r\n" not in request:
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("client closed during handshake")
        request += chunk
        if len(request) > 65536:
            raise ProtocolError("bad_handshake", "oversized handshake")
    key = None
    for line in request.split(b"\r\n"):
        if line.lower().startswith(b"sec-websocket-key:"):
            key = line.split(b":", 1)[1].strip().decode("ascii")
    if key is None:
        raise ProtocolError("bad_handshake", "missing Sec-WebSocket-Key")
    accept = base64.b64encode(
        hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    ).decode("ascii")
    sock.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode("ascii")
    )


# ---------------------------------------------------------------------------
# session handling


def song_from_midi_bytes(data: bytes) -> Song:
    mid = parse_midi(data)
    decision = screen(mid)
    if not decision.keep:
        raise ProtocolError("rejected", f"song rejected: {decision.reason}")
    ts = mid.time_signature_label
    spb = sixteenths_per_bar(ts)
    notes = quantize(mid.tracks[select_melody_track(mid)].notes)
    last = max((n.onset + n.duration for n in notes), default=0)
    bars = last // spb
    if bars < 4:
        raise ProtocolError("rejected", "song shorter than 4 bars")
    melody = melody_grid_from_notes(notes, bars * spb)
    harmony = extract_harmony([], 0)
    tonality = estimate_tonality(melody, harmony)
    return Song(melody=melody, tonality=tonality, time_signature=ts, tempo_bpm=mid.tempo_bpm)


class _SessionHandler(socketserver.BaseRequestHandler):
    server: "StreamServer"

    def handle(self) -> None:
        sock: socket.socket = self.request
        try:
            _handshake_server(sock)
        except (ProtocolError, ConnectionError, OSError) as exc:
            log.debug("handshake failed: %s", exc)
            return

        config = self.server.default_config
        state: Optional[SessionState] = None
        song: Optional[Song] = None

        def send(obj: dict) -> None:
            write_frame(sock, json.dumps(obj).encode("utf-8"))

        while True:
            try:
                opcode, payload = read_frame(sock)
            except (ConnectionError, OSError):
                return
            except ProtocolError as exc:
                send({"type": "error", "code": exc.code, "msg": exc.msg})
                continue
            if opcode == OP_CLOSE:
                try:
                    write_frame(sock, payload, OP_CLOSE)
                except OSError:
                    pass
                return
            if opcode == OP_PING:
                write_frame(sock, payload, OP_PONG)
                continue
            if opcode != OP_TEXT:
                send({"type": "error", "code": "bad_frame", "msg": "expected text frame"})
                continue

            try:
                message = json.loads(payload.decode("utf-8"))
                if not isinstance(message, dict) or "type" not in message:
                    raise ValueError("frame must be an object with a 'type'")
            except (ValueError, UnicodeDecodeError) as exc:
                send({"type": "error", "code": "bad_json", "msg": str(exc)})
                continue

            try:
                kind = message["type"]
                if kind == "select_song":
                    song = self._load_song(message)
                    state = open_session(
                        song, config, recognizer=self.server.recognizer
                    )
                elif kind == "set_config":
                    config = StreamConfig(
                        fusion=message.get("fusion", config.fusion),
                        backend=message.get("backend", config.backend),
                        granularity=message.get("granularity", config.granularity),
                    )
                    if song is not None:
                        state = open_session(
                            song, config, recognizer=self.server.recognizer
                        )
                elif kind == "target":
                    if state is None:
                        raise ProtocolError("no_song", "select a song first")
                    target = EmotionVA(float(message["v"]), float(message["a"]))
                    try:
                        result = step(state, target)
                    except EndOfSong:
                        send({"type": "end_of_song"})
                        continue
                    send(_segment_frame(result))
                    send({"type": "metrics", **result.metrics_so_far.as_dict()})
                    if state.exhausted:
                        send({"type": "end_of_song"})
                else:
                    raise ProtocolError("unknown_type", f"unknown frame type {kind!r}")
            except ProtocolError as exc:
                send({"type": "error", "code": exc.code, "msg": exc.msg})
            except (KeyError, TypeError, ValueError) as exc:
                send({"type": "error", "code": "bad_fields", "msg": str(exc)})
            except Exception as exc:  # backend failure: report, keep session
                log.exception("step failed")
                send({"type": "error", "code": "internal", "msg": str(exc)})

    def _load_song(self, message: dict) -> Song:
        if "midi_b64" in message:
            try:
                data = base64.b64decode(message["midi_b64"])
            except Exception as exc:
                raise ProtocolError("bad_fields", f"bad base64: {exc}") from exc
            return song_from_midi_bytes(data)
        song_id = message.get("id")
        song = self.server.songs.get(song_id)
        if song is None:
            raise ProtocolError("unknown_song", f"unknown song id {song_id!r}")
        return song


def _segment_frame(result) -> dict:
    notes = []
    for track in result.tracks:
        for n in track.notes:
            notes.append(
                {
                    "track": track.name,
                    "pitch": n.pitch,
                    "onset": n.onset,
                    "duration": n.duration,
                    "velocity": n.velocity,
                }
            )
    recognized = None
    if result.recognized_prev is not None:
        mean_v = sum(p.valence for p in result.recognized_prev) / len(result.recognized_prev)
        mean_a = sum(p.arousal for p in result.recognized_prev) / len(result.recognized_prev)
        recognized = {"v": mean_v, "a": mean_a}
    return {
        "type": "segment",
        "bar_index": result.bar_index,
        "notes": notes,
        "recognized": recognized,
        "fused": {"v": result.fused[0], "a": result.fused[1]},
        "latency_ms": result.latency_ms,
    }


class StreamServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        bind: Tuple[str, int],
        recognizer: Optional[EmotionRecognizer] = None,
        songs: Optional[Dict[str, Song]] = None,
        default_config: Optional[StreamConfig] = None,
    ):
        self.recognizer = recognizer if recognizer is not None else default_recognizer()
        self.songs = songs if songs is not None else {"demo": demo_song()}
        self.default_config = default_config or StreamConfig()
        super().__init__(bind, _SessionHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(
    bind: str = "127.0.0.1:8765",
    recognizer: Optional[EmotionRecognizer] = None,
    songs: Optional[Dict[str, Song]] = None,
    default_config: Optional[StreamConfig] = None,
    background: bool = False,
) -> StreamServer:
    """Start the session service; background=True returns immediately."""
    host, _, port = bind.partition(":")
    server = StreamServer(
        (host, int(port or 0)),
        recognizer=recognizer,
        songs=songs,
        default_config=default_config,
    )
    if background:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
    else:
        log.info("listening on %s:%d", host, server.port)
        server.serve_forever()
    return server


class WsClient:
    """Minimal scriptable client (handshake + masked text frames)."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(b"0123456789abcdef").decode("ascii")
        self.sock.sendall(
            (
                f"GET / HTTP/1.1\r\nHost: {host}:{port}\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
            ).encode("ascii")
        )
        response = b""
        while b"\r\n\r\n" not in response:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("server closed during handshake")
            response += chunk
        if b"101" not in response.split(b"\r\n", 1)[0]:
            raise ConnectionError(f"handshake rejected: {response[:80]!r}")

    def send_json(self, obj: dict) -> None:
        write_frame(self.sock, json.dumps(obj).encode("utf-8"), mask=True)

    def send_text(self, text: str) -> None:
        write_frame(self.sock, text.encode("utf-8"), mask=True)

    def recv_json(self) -> dict:
        while True:
            opcode, payload = read_frame(self.sock)
            if opcode == OP_TEXT:
                return json.loads(payload.decode("utf-8"))
            if opcode == OP_CLOSE:
                raise ConnectionError("server closed")

    def close(self) -> None:
        try:
            write_frame(self.sock, b"", OP_CLOSE, mask=True)
        except OSError:
            pass
        self.sock.close()
