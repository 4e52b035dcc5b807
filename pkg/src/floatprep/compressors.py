"""Compression backends over transformed 32-bit words.

The built-in backend is a deliberately simple deduplication layout: one split
point divides every word into a leading "base" (deduplicated through a
dictionary) and a trailing "deviation" (stored raw, bit-packed). It is a
measurement instrument with an exactly predictable size, not a competitive
compressor. A generic adapter runs external compressors as child processes
over stdin/stdout.
"""

from __future__ import annotations

import shutil
import struct
import subprocess
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, CorruptBlobError, ExternalCompressorError

__all__ = [
    "GD_MAGIC",
    "GdLayout",
    "gd_layout",
    "gd_size",
    "gd_compress",
    "gd_decompress",
    "choose_base_bits",
    "ExternalCompressor",
    "external_compress",
    "BuiltinBackend",
    "CommandBackend",
]

GD_MAGIC = b"GD01"
_HEADER = struct.Struct("<4sBQI")  # magic, base_bits, word count, dictionary size


def _as_words(words: Sequence[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(words, dtype=np.uint32)
    if arr.ndim != 1:
        raise ConfigError("word series must be one-dimensional")
    return arr


def _check_base_bits(base_bits: int) -> None:
    if not 1 <= base_bits <= 31:
        raise ConfigError(f"base bits must be in [1, 31], got {base_bits}")


@dataclass(frozen=True)
class GdLayout:
    """Split of a word series into dictionary-coded bases and raw deviations."""

    base_bits: int
    dictionary: np.ndarray  # unique base values, ordered by first occurrence
    indices: np.ndarray  # per-word reference into the dictionary
    deviations: np.ndarray  # per-word trailing bits

    @property
    def deviation_bits(self) -> int:
        return 32 - self.base_bits

    @property
    def index_bits(self) -> int:
        return int(len(self.dictionary) - 1).bit_length() if len(self.dictionary) > 1 else 0


def gd_layout(words: Sequence[int] | np.ndarray, base_bits: int) -> GdLayout:
    arr = _as_words(words)
    _check_base_bits(base_bits)
    bases = arr >> np.uint32(32 - base_bits)
    deviations = arr & np.uint32((1 << (32 - base_bits)) - 1)
    uniq, first_pos, inverse = np.unique(bases, return_index=True, return_inverse=True)
    order = np.argsort(first_pos, kind="stable")
    dictionary = uniq[order]
    rank = np.empty(len(uniq), dtype=np.uint32)
    rank[order] = np.arange(len(uniq), dtype=np.uint32)
    return GdLayout(
        base_bits=base_bits,
        dictionary=dictionary,
        indices=rank[inverse].astype(np.uint32),
        deviations=deviations,
    )


def _pack_bits(values: np.ndarray, width: int) -> bytes:
    """Bit-pack fixed-width values, MSB-first within each value."""
    if width == 0 or values.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint32)
    bits = ((values[:, None] >> shifts[None, :]) & np.uint32(1)).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def _unpack_bits(data: bytes, width: int, count: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint32)
    raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count * width)
    bits = raw.reshape(count, width).astype(np.uint32)
    weights = (np.uint32(1) << np.arange(width - 1, -1, -1, dtype=np.uint32)).astype(np.uint64)
    return (bits.astype(np.uint64) @ weights).astype(np.uint32)


def gd_size(words: Sequence[int] | np.ndarray, base_bits: int) -> int:
    """Exact blob size of the layout, in bytes.

    header (17) + dict_size * ceil(base_bits / 8)
    + ceil(n * index_bits / 8) + ceil(n * (32 - base_bits) / 8)
    """
    arr = _as_words(words)
    _check_base_bits(base_bits)
    n = arr.size
    dict_size = int(np.unique(arr >> np.uint32(32 - base_bits)).size) if n else 0
    index_bits = (dict_size - 1).bit_length() if dict_size > 1 else 0
    entry_bytes = (base_bits + 7) // 8
    return (
        _HEADER.size
        + dict_size * entry_bytes
        + (n * index_bits + 7) // 8
        + (n * (32 - base_bits) + 7) // 8
    )


def gd_compress(words: Sequence[int] | np.ndarray, base_bits: int) -> bytes:
    layout = gd_layout(words, base_bits)
    n = layout.indices.size
    entry_bytes = (base_bits + 7) // 8
    parts = [_HEADER.pack(GD_MAGIC, base_bits, n, len(layout.dictionary))]
    for entry in layout.dictionary:
        parts.append(int(entry).to_bytes(entry_bytes, "little"))
    parts.append(_pack_bits(layout.indices, layout.index_bits))
    parts.append(_pack_bits(layout.deviations, layout.deviation_bits))
    return b"".join(parts)


def gd_decompress(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise CorruptBlobError("blob shorter than the header")
    magic, base_bits, n, dict_size = _HEADER.unpack_from(blob)
    if magic != GD_MAGIC:
        raise CorruptBlobError(f"bad magic {magic!r}")
    _check_base_bits(base_bits)
    entry_bytes = (base_bits + 7) // 8
    index_bits = (dict_size - 1).bit_length() if dict_size > 1 else 0
    deviation_bits = 32 - base_bits
    pos = _HEADER.size
    dict_end = pos + dict_size * entry_bytes
    idx_end = dict_end + (n * index_bits + 7) // 8
    dev_end = idx_end + (n * deviation_bits + 7) // 8
    if len(blob) != dev_end:
        raise CorruptBlobError(f"blob length {len(blob)} does not match layout {dev_end}")
    dictionary = np.array(
        [int.from_bytes(blob[pos + i * entry_bytes : pos + (i + 1) * entry_bytes], "little")
         for i in range(dict_size)],
        dtype=np.uint32,
    )
    indices = _unpack_bits(blob[dict_end:idx_end], index_bits, n)
    deviations = _unpack_bits(blob[idx_end:dev_end], deviation_bits, n)
    if n and dict_size == 0:
        raise CorruptBlobError("non-empty series with an empty dictionary")
    if n == 0:
        return np.zeros(0, dtype=np.uint32)
    if indices.size and int(indices.max()) >= dict_size:
        raise CorruptBlobError("index out of dictionary range")
    bases = dictionary[indices]
    return (bases << np.uint32(32 - base_bits)) | deviations


def choose_base_bits(words: Sequence[int] | np.ndarray) -> int:
    """Split point minimising the exact size formula (exhaustive scan)."""
    arr = _as_words(words)
    if arr.size == 0:
        raise ConfigError("cannot choose a split for an empty series")
    sizes = [(gd_size(arr, b), b) for b in range(1, 32)]
    return min(sizes)[1]


@dataclass(frozen=True)
class ExternalCompressor:
    """Child-process compressor: raw bytes on stdin, compressed bytes on stdout.

    When a decompress command is configured and verification is on, every
    compression is round-tripped and must reproduce the input bit-exactly.
    """

    compress_argv: tuple[str, ...]
    decompress_argv: tuple[str, ...] | None = None
    verify: bool = True
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not self.compress_argv:
            raise ConfigError("external compressor needs a command")
        if shutil.which(self.compress_argv[0]) is None:
            raise ConfigError(f"compressor executable not found: {self.compress_argv[0]!r}")
        if self.decompress_argv and shutil.which(self.decompress_argv[0]) is None:
            raise ConfigError(f"decompressor executable not found: {self.decompress_argv[0]!r}")

    def _run(self, argv: tuple[str, ...], data: bytes) -> bytes:
        try:
            proc = subprocess.run(
                list(argv), input=data, capture_output=True, timeout=self.timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise ExternalCompressorError(f"{argv[0]} timed out after {self.timeout}s") from exc
        except OSError as exc:
            raise ConfigError(f"cannot run {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalCompressorError(
                f"{argv[0]} exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}"
            )
        return proc.stdout

    def compress(self, data: bytes) -> bytes:
        blob = self._run(self.compress_argv, data)
        if self.verify and self.decompress_argv:
            recovered = self._run(self.decompress_argv, blob)
            if recovered != data:
                raise ExternalCompressorError(
                    f"{self.compress_argv[0]} round trip mismatch "
                    f"({len(recovered)} bytes back, {len(data)} in)"
                )
        return blob


def external_compress(data: bytes, backend: ExternalCompressor) -> int:
    """Compressed byte count under an external backend."""
    return len(backend.compress(data))


class BuiltinBackend:
    """Dedup-layout backend over 32-bit words; always verifies its round trip."""

    name = "builtin"

    def __init__(self, base_bits: int | None = None) -> None:
        if base_bits is not None:
            _check_base_bits(base_bits)
        self.base_bits = base_bits

    def compress_words(self, words: np.ndarray) -> bytes:
        arr = _as_words(words)
        bits = self.base_bits if self.base_bits is not None else choose_base_bits(arr) if arr.size else 1
        blob = gd_compress(arr, bits)
        if not np.array_equal(gd_decompress(blob), arr):
            raise CorruptBlobError("builtin backend failed its own round trip")
        return blob

    def describe(self) -> dict:
        return {"type": "builtin", "base_bits": self.base_bits}


class CommandBackend:
    """External-process backend; words are serialised little-endian."""

    name = "command"

    def __init__(self, compressor: ExternalCompressor) -> None:
        self.compressor = compressor

    def compress_words(self, words: np.ndarray) -> bytes:
        data = _as_words(words).astype("<u4").tobytes()
        return self.compressor.compress(data)

    def describe(self) -> dict:
        return {
            "type": "command",
            "compress_cmd": list(self.compressor.compress_argv),
            "decompress_cmd": list(self.compressor.decompress_argv)
            if self.compressor.decompress_argv
            else None,
            "verify": self.compressor.verify,
        }
