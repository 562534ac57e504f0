"""Named-tensor parameter stores and the byte-exact "SMG1" checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"SMG1"
    u32     metadata byte length
    bytes   UTF-8 "key=value" lines
    then per tensor, until end of file:
        u16     name byte length
        bytes   tensor name (UTF-8)
        u8      rank
        u32[r]  dims
        f32[n]  raw IEEE-754 values, n = product of dims

The container is language-neutral; round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SMG1"


class ParamStore:
    """Ordered map from tensor name to a float32 array; names unique."""

    def __init__(self):
        self._tensors: dict[str, np.ndarray] = {}

    def add(self, name: str, values: np.ndarray) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate tensor name {name!r}")
        arr = np.ascontiguousarray(values, dtype=np.float32)
        self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self):
        return list(self._tensors.keys())

    def items(self):
        return self._tensors.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(a.shape == other[n].shape and a.tobytes() == other[n].tobytes()
                   for n, a in self.items())


def format_metadata(meta: dict) -> str:
    lines = []
    for k, v in meta.items():
        k, v = str(k), str(v)
        if "=" in k or "\n" in k or "\n" in v:
            raise ValueError(f"illegal metadata entry {k!r}={v!r}")
        lines.append(f"{k}={v}")
    return "\n".join(lines)


def parse_metadata(text: str) -> dict:
    meta = {}
    for line in text.splitlines():
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"malformed metadata line {line!r}")
        k, v = line.split("=", 1)
        meta[k] = v
    return meta


def save_checkpoint(store: ParamStore, meta: dict, path) -> None:
    blob = bytearray()
    blob += MAGIC
    meta_bytes = format_metadata(meta).encode("utf-8")
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for name, arr in store.items():
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name!r}")
        if arr.ndim > 0xFF:
            raise ValueError(f"tensor rank too large: {arr.ndim}")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<I", d)
        blob += arr.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.data):
            raise FormatError(f"truncated checkpoint: wanted {n} bytes for {what} "
                              f"at offset {self.off}, file has {len(self.data)}")
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def eof(self) -> bool:
        return self.off >= len(self.data)


def load_checkpoint(path):
    """Read an SMG1 file; returns (ParamStore, metadata dict)."""
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError(f"bad magic at offset 0 in {path}")
    (meta_len,) = struct.unpack("<I", r.take(4, "metadata length"))
    meta = parse_metadata(r.take(meta_len, "metadata").decode("utf-8"))
    store = ParamStore()
    while not r.eof():
        (name_len,) = struct.unpack("<H", r.take(2, "tensor name length"))
        name = r.take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", r.take(1, "tensor rank"))
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "tensor dims")) if rank else ()
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(4 * n, f"tensor {name!r} values")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
        if name in store:
            raise FormatError(f"duplicate tensor {name!r} at offset {r.off}")
        store.add(name, arr)
    return store, meta


def sha256_file(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
