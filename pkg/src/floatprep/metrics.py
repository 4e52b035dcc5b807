"""Recovery-error and compression-ratio arithmetic shared by all transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

__all__ = [
    "ErrorBound",
    "CompressionReport",
    "max_abs_error",
    "max_rel_error",
    "compression_ratio",
    "delta_cr_percent",
    "within_bound",
]


@dataclass(frozen=True)
class ErrorBound:
    """User's maximum-recovery-error policy: absolute or relative ceiling."""

    kind: str  # "absolute" | "relative"
    limit: float

    def __post_init__(self) -> None:
        if self.kind not in ("absolute", "relative"):
            raise ValueError(f"bound kind must be 'absolute' or 'relative', got {self.kind!r}")
        if not self.limit > 0:
            raise ValueError(f"bound limit must be positive, got {self.limit}")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "limit": self.limit}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ErrorBound":
        return cls(kind=data["kind"], limit=float(data["limit"]))


def _pair(original: Sequence[float], recovered: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    orig = np.asarray(original, dtype=np.float64)
    rec = np.asarray(recovered, dtype=np.float64)
    if orig.shape != rec.shape:
        raise ValueError(f"length mismatch: {orig.shape} vs {rec.shape}")
    return orig, rec


def max_abs_error(original: Sequence[float], recovered: Sequence[float]) -> float:
    """max_i |recovered_i - original_i|."""
    orig, rec = _pair(original, recovered)
    if orig.size == 0:
        return 0.0
    return float(np.max(np.abs(rec - orig)))


def max_rel_error(original: Sequence[float], recovered: Sequence[float]) -> float:
    """max_i |(recovered_i - original_i) / original_i|.

    A zero original must be recovered exactly; any deviation there yields
    ``inf`` so that no finite relative bound can accept it.
    """
    orig, rec = _pair(original, recovered)
    if orig.size == 0:
        return 0.0
    diff = np.abs(rec - orig)
    zero = orig == 0.0
    if np.any(diff[zero] != 0.0):
        return math.inf
    nz = ~zero
    if not np.any(nz):
        return 0.0
    return float(np.max(diff[nz] / np.abs(orig[nz])))


def compression_ratio(compressed_bytes: int, uncompressed_bytes: int) -> float:
    """Compressed size over uncompressed size."""
    if uncompressed_bytes <= 0:
        raise ValueError("uncompressed size must be positive")
    return compressed_bytes / uncompressed_bytes


def delta_cr_percent(cr: float, cr_np: float) -> float:
    """Percentage change versus the no-preprocessing baseline; negative = improved."""
    if cr_np <= 0:
        raise ValueError("baseline compression ratio must be positive")
    return (cr - cr_np) / cr_np * 100.0


def within_bound(
    original: Sequence[float], recovered: Sequence[float], bound: ErrorBound
) -> bool:
    if bound.kind == "absolute":
        return max_abs_error(original, recovered) <= bound.limit
    return max_rel_error(original, recovered) <= bound.limit


@dataclass(frozen=True)
class CompressionReport:
    """Sizes, CR, CR change and measured max errors for one pipeline run."""

    uncompressed_bytes: int
    compressed_bytes: int
    cr: float
    delta_cr_percent: float
    max_abs_error: float
    max_rel_error: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "uncompressed_bytes": self.uncompressed_bytes,
            "compressed_bytes": self.compressed_bytes,
            "cr": self.cr,
            "delta_cr_percent": self.delta_cr_percent,
            "max_abs_error": self.max_abs_error,
            "max_rel_error": self.max_rel_error,
        }
