"""Versioned binary container for model parameters.

Layout: magic ``EAPM`` + u16 version + u32 manifest length + UTF-8 JSON
manifest + concatenated little-endian float32 tensors. The manifest lists
every tensor name and shape in order plus free-form model metadata, so a
reader can validate shapes before touching the payload.
"""

from __future__ import annotations

import json
import struct
from typing import Dict, List, Tuple

import numpy as np

MAGIC = b"EAPM"
VERSION = 1


class ParamFileError(ValueError):
    pass


def save_params(path, tensors: Dict[str, np.ndarray], meta: dict) -> None:
    entries: List[dict] = []
    payload = bytearray()
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape)})
        payload += arr.tobytes()
    manifest = json.dumps({"meta": meta, "tensors": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(manifest)))
        fh.write(manifest)
        fh.write(bytes(payload))


def load_params(path) -> Tuple[Dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ParamFileError(f"{path}: not a parameter file (bad magic)")
    version, manifest_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ParamFileError(f"{path}: unsupported version {version}")
    manifest_end = 10 + manifest_len
    try:
        manifest = json.loads(data[10:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParamFileError(f"{path}: corrupt manifest: {exc}") from exc
    tensors: Dict[str, np.ndarray] = {}
    offset = manifest_end
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(data):
            raise ParamFileError(f"{path}: truncated tensor {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(
            data[offset:end], dtype="<f4"
        ).reshape(shape).copy()
        offset = end
    return tensors, manifest["meta"]
