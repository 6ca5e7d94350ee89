"""STGW tensor container: magic, version, JSON manifest, aligned raw payload.

Layout::

    b"STGW" | u32 version | u64 manifest byte length | manifest (UTF-8 JSON)
    | zero padding to a 16-byte boundary | payload

The manifest is ``{"tensors": [{name, dtype, shape, offset, length}, ...]}``
with an optional ``"meta"`` object. Offsets are relative to the payload
start. All integers and values are little-endian.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from math import prod

import numpy as np

from ..errors import ArchiveError

MAGIC = b"STGW"
VERSION = 1
ALIGN = 16
DTYPE_TAGS = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}
ENTRY_FIELDS = frozenset({"name", "dtype", "shape", "offset", "length"})
_HEADER = struct.Struct("<4sIQ")


@dataclass(frozen=True)
class ArchiveEntry:
    name: str
    dtype: str
    shape: tuple
    offset: int
    length: int

    def to_dict(self):
        return {"name": self.name, "dtype": self.dtype, "shape": list(self.shape),
                "offset": self.offset, "length": self.length}


@dataclass
class WeightArchive:
    entries: list
    payload: bytes
    version: int = VERSION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _validate(self.entries, len(self.payload))

    @classmethod
    def from_arrays(cls, items, dtype="f32", meta=None):
        """Pack ``(name, array)`` or ``(name, array, dtype_tag)`` items.

        Values are converted to the item's tag, ``dtype`` by default.
        """
        entries, chunks, offset = [], [], 0
        for item in items:
            name, arr = item[0], item[1]
            tag = item[2] if len(item) > 2 else dtype
            raw = np.ascontiguousarray(arr, dtype=DTYPE_TAGS[tag]).tobytes()
            entries.append(ArchiveEntry(name, tag, tuple(int(s) for s in np.shape(arr)), offset, len(raw)))
            chunks.append(raw)
            offset += len(raw)
        return cls(entries, b"".join(chunks), meta=dict(meta or {}))

    def names(self):
        return [e.name for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def array(self, name):
        for e in self.entries:
            if e.name == name:
                return self._decode(e)
        raise KeyError(name)

    def tensors(self):
        return {e.name: self._decode(e) for e in self.entries}

    def _decode(self, e):
        buf = self.payload[e.offset:e.offset + e.length]
        return np.frombuffer(buf, dtype=DTYPE_TAGS[e.dtype]).reshape(e.shape).copy()

    def manifest(self):
        doc = {"tensors": [e.to_dict() for e in self.entries]}
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def to_bytes(self):
        manifest = json.dumps(self.manifest(), separators=(",", ":"), sort_keys=True).encode("utf-8")
        head = _HEADER.pack(MAGIC, self.version, len(manifest)) + manifest
        pad = (-len(head)) % ALIGN
        return head + b"\0" * pad + self.payload

    @classmethod
    def from_bytes(cls, blob):
        if len(blob) < _HEADER.size:
            raise ArchiveError("file too short for an STGW header")
        magic, version, mlen = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise ArchiveError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ArchiveError(f"unsupported format version {version}")
        start = _HEADER.size
        if start + mlen > len(blob):
            raise ArchiveError("manifest extends past end of file")
        try:
            doc = json.loads(blob[start:start + mlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ArchiveError(f"malformed manifest: {exc}") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("tensors"), list):
            raise ArchiveError("manifest must be an object with a 'tensors' list")
        entries = []
        for i, raw in enumerate(doc["tensors"]):
            if not isinstance(raw, dict) or set(raw) != ENTRY_FIELDS:
                raise ArchiveError(f"manifest entry {i} must have exactly the fields {sorted(ENTRY_FIELDS)}")
            try:
                entries.append(ArchiveEntry(
                    str(raw["name"]), str(raw["dtype"]), tuple(int(s) for s in raw["shape"]),
                    int(raw["offset"]), int(raw["length"]),
                ))
            except (TypeError, ValueError) as exc:
                raise ArchiveError(f"manifest entry {i}: {exc}") from None
        end = start + mlen
        payload = blob[end + (-end) % ALIGN:]
        return cls(entries, bytes(payload), version=version, meta=doc.get("meta", {}))


def _validate(entries, payload_len):
    seen = set()
    spans = []
    for e in entries:
        if e.name in seen:
            raise ArchiveError(f"duplicate tensor name {e.name!r}")
        seen.add(e.name)
        if e.dtype not in DTYPE_TAGS:
            raise ArchiveError(f"{e.name}: unknown dtype tag {e.dtype!r}")
        if any(s < 0 for s in e.shape) or e.offset < 0:
            raise ArchiveError(f"{e.name}: negative shape or offset")
        expected = prod(e.shape) * DTYPE_TAGS[e.dtype].itemsize
        if e.length != expected:
            raise ArchiveError(f"{e.name}: length {e.length} does not match shape {list(e.shape)} ({expected} bytes)")
        spans.append((e.offset, e.offset + e.length, e.name))
    spans.sort()
    for (_, end, a), (start, _, b) in zip(spans, spans[1:]):
        if start < end:
            raise ArchiveError(f"tensors {a!r} and {b!r} overlap")
    total = sum(e.length for e in entries)
    if payload_len < total or any(end > payload_len for _, end, _ in spans):
        raise ArchiveError(f"truncated payload: {payload_len} bytes, manifest needs {total}")
    if payload_len != total:
        raise ArchiveError(f"payload has {payload_len} bytes, manifest accounts for {total}")


def write_archive(archive, path):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(archive.to_bytes())
    os.replace(tmp, path)


def read_archive(path):
    with open(path, "rb") as fh:
        return WeightArchive.from_bytes(fh.read())


def save_archive(params, path, meta=None):
    """Write every parameter of ``params`` as 32-bit floats."""
    archive = WeightArchive.from_arrays(((p.name, p.value) for p in params), "f32", meta)
    write_archive(archive, path)
    return archive


def load_archive(path):
    archive = read_archive(path)
    bad = [e.name for e in archive.entries if e.dtype != "f32"]
    if bad:
        raise ArchiveError(f"weight archives hold f32 tensors only; {bad[0]!r} is not")
    return archive
