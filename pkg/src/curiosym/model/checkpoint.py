"""Binary checkpoint container.

Layout::

    b"CSYMCKPT"            8-byte magic
    uint32 version          little endian
    uint64 header_len
    header                  UTF-8 JSON, sorted keys
    payload                 concatenated little-endian float64 arrays

The header lists every array with its offset and shape, the encoder config,
head mode, training-step counter and an optional config hash. Writing the
same network twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .network import EncoderConfig, Network

MAGIC = b"CSYMCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def to_bytes(net: Network, meta: dict | None = None) -> bytes:
    arrays = []
    for kind, table in (("param", net.params), ("buffer", net.buffers)):
        for name in sorted(table):
            arrays.append((kind, name, np.ascontiguousarray(table[name], dtype="<f8")))
    entries = []
    offset = 0
    for kind, name, arr in arrays:
        entries.append({"kind": kind, "name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "arrays": entries,
        "config": net.config.to_dict(),
        "head": net.head,
        "step": int(net.step),
        "meta": meta or {},
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = [MAGIC, struct.pack("<IQ", VERSION, len(hb)), hb]
    out.extend(arr.tobytes() for _, _, arr in arrays)
    return b"".join(out)


def from_bytes(data: bytes) -> tuple[Network, dict]:
    if len(data) < 20 or data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[20 : 20 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    payload = memoryview(data)[20 + hlen :]
    try:
        config = EncoderConfig(**header["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad encoder config in checkpoint: {exc}") from exc
    if config.head != header["head"]:
        raise CheckpointError("head mode does not match stored config")
    net = Network.__new__(Network)
    net.config = config
    net.params = {}
    net.buffers = {}
    net.step = int(header["step"])
    for e in header["arrays"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        end = e["offset"] + 8 * count
        if end > len(payload):
            raise CheckpointError("truncated checkpoint payload")
        arr = np.frombuffer(payload[e["offset"] : end], dtype="<f8").reshape(e["shape"]).astype(float)
        (net.params if e["kind"] == "param" else net.buffers)[e["name"]] = arr
    expected = Network(config, seed=0)
    if set(expected.params) != set(net.params) or set(expected.buffers) != set(net.buffers):
        raise CheckpointError("checkpoint arrays do not match the architecture")
    for k, v in expected.params.items():
        if v.shape != net.params[k].shape:
            raise CheckpointError(f"shape mismatch for {k}")
    return net, header.get("meta", {})


def save(net: Network, path, meta: dict | None = None) -> None:
    from ..io import atomic_write_bytes

    atomic_write_bytes(Path(path), to_bytes(net, meta))


def load(path) -> tuple[Network, dict]:
    return from_bytes(Path(path).read_bytes())
