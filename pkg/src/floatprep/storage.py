"""On-disk formats: the transformed-words archive, the transform metadata
JSON, and the compressed-blob container.

Archive layout (little-endian throughout):
  magic "FPTX", version u8, column count u16,
  then per column: name length u16 + UTF-8 name, row count u64,
  raw little-endian float32 words.

Metadata schema:
  {"version": 1, "columns": [{"name", "transform", "parameter",
    "bound": {"kind", "limit"},
    "achieved": {"max_abs", "max_rel", "min_trailing_zeros", "shared_exponent"}}]}

Blob container:
  magic "FPCZ", version u8, backend tag u8 (0 builtin, 1 command),
  column count u16, then per column: name length u16 + name,
  blob length u64 + blob bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .exceptions import CorruptBlobError
from .metrics import ErrorBound

__all__ = [
    "ARCHIVE_MAGIC",
    "CONTAINER_MAGIC",
    "Achieved",
    "TransformRecord",
    "pack_archive",
    "unpack_archive",
    "pack_container",
    "unpack_container",
    "metadata_to_dict",
    "metadata_from_dict",
]

ARCHIVE_MAGIC = b"FPTX"
CONTAINER_MAGIC = b"FPCZ"
_ARCHIVE_VERSION = 1
_CONTAINER_VERSION = 1

TRANSFORM_KINDS = ("none", "addition", "multiplication", "lossless")


@dataclass(frozen=True)
class Achieved:
    """Measured facts about one transformed column."""

    max_abs: float
    max_rel: float
    min_trailing_zeros: int
    shared_exponent: int | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "min_trailing_zeros": self.min_trailing_zeros,
            "shared_exponent": self.shared_exponent,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Achieved":
        return cls(
            max_abs=float(data["max_abs"]),
            max_rel=float(data["max_rel"]),
            min_trailing_zeros=int(data["min_trailing_zeros"]),
            shared_exponent=None if data["shared_exponent"] is None else int(data["shared_exponent"]),
        )


@dataclass(frozen=True)
class TransformRecord:
    """Everything needed to invert one column's transform without the originals.

    ``parameter`` encoding: addition stores the shift's exact 32-bit pattern
    as 8 hex digits (decimal text could change the inverse); multiplication
    stores the multiplier as a decimal integer; lossless stores the power of
    ten; none stores null.
    """

    column: str
    kind: str
    parameter: str | int | None
    bound: ErrorBound
    achieved: Achieved

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.column,
            "transform": self.kind,
            "parameter": self.parameter,
            "bound": self.bound.to_dict(),
            "achieved": self.achieved.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TransformRecord":
        return cls(
            column=data["name"],
            kind=data["transform"],
            parameter=data["parameter"],
            bound=ErrorBound.from_dict(data["bound"]),
            achieved=Achieved.from_dict(data["achieved"]),
        )


def metadata_to_dict(records: Sequence[TransformRecord]) -> dict[str, Any]:
    return {"version": 1, "columns": [r.to_dict() for r in records]}


def metadata_from_dict(data: dict[str, Any]) -> list[TransformRecord]:
    if data.get("version") != 1:
        raise CorruptBlobError(f"unsupported metadata version {data.get('version')!r}")
    return [TransformRecord.from_dict(c) for c in data["columns"]]


def pack_archive(columns: Sequence[tuple[str, np.ndarray]]) -> bytes:
    parts = [ARCHIVE_MAGIC, struct.pack("<BH", _ARCHIVE_VERSION, len(columns))]
    for name, values in columns:
        encoded = name.encode("utf-8")
        words = np.asarray(values, dtype=np.float32).astype("<f4")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<Q", words.size))
        parts.append(words.tobytes())
    return b"".join(parts)


def unpack_archive(blob: bytes) -> list[tuple[str, np.ndarray]]:
    if len(blob) < 7 or blob[:4] != ARCHIVE_MAGIC:
        raise CorruptBlobError("not a transformed-words archive (bad magic)")
    version, count = struct.unpack_from("<BH", blob, 4)
    if version != _ARCHIVE_VERSION:
        raise CorruptBlobError(f"unsupported archive version {version}")
    pos = 7
    out: list[tuple[str, np.ndarray]] = []
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rows,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            payload = blob[pos : pos + 4 * rows]
            if len(payload) != 4 * rows:
                raise CorruptBlobError("archive truncated")
            pos += 4 * rows
        except struct.error as exc:
            raise CorruptBlobError("archive truncated") from exc
        out.append((name, np.frombuffer(payload, dtype="<f4").astype(np.float32)))
    if pos != len(blob):
        raise CorruptBlobError(f"{len(blob) - pos} trailing bytes after the last column")
    return out


def pack_container(columns: Sequence[tuple[str, bytes]], backend_tag: int) -> bytes:
    parts = [CONTAINER_MAGIC, struct.pack("<BBH", _CONTAINER_VERSION, backend_tag, len(columns))]
    for name, blob in columns:
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def unpack_container(blob: bytes) -> tuple[int, list[tuple[str, bytes]]]:
    if len(blob) < 8 or blob[:4] != CONTAINER_MAGIC:
        raise CorruptBlobError("not a compressed container (bad magic)")
    version, backend_tag, count = struct.unpack_from("<BBH", blob, 4)
    if version != _CONTAINER_VERSION:
        raise CorruptBlobError(f"unsupported container version {version}")
    pos = 8
    out: list[tuple[str, bytes]] = []
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (size,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            payload = blob[pos : pos + size]
            if len(payload) != size:
                raise CorruptBlobError("container truncated")
            pos += size
        except struct.error as exc:
            raise CorruptBlobError("container truncated") from exc
        out.append((name, payload))
    return backend_tag, out
