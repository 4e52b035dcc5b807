"""End-to-end batch flow: CSV ingestion, per-column transform execution,
compression measurement against the untransformed baseline, recovery
verification, and report assembly.

Every column is processed independently with its own parameter. The
compressors are lossless over the transformed words, so the transform stage
is the only loss in the pipeline; recovery is verified against the retained
originals and any bound violation aborts the run.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import addition, lossless, multiplication
from .compressors import BuiltinBackend, CommandBackend
from .exceptions import (
    BoundViolationError,
    ConfigError,
    IngestError,
    InfeasibleTransformError,
    LosslessInfeasibleError,
    UnsupportedDataError,
)
from .floatbits import BIAS, bits_to_float, vec_biased_exponent, vec_trailing_zeros
from .metrics import (
    CompressionReport,
    ErrorBound,
    compression_ratio,
    delta_cr_percent,
    max_abs_error,
    max_rel_error,
    within_bound,
)
from .storage import Achieved, TransformRecord, metadata_to_dict

__all__ = [
    "ColumnSeries",
    "RunConfig",
    "ColumnResult",
    "PipelineResult",
    "ingest",
    "run_pipeline",
    "recover_columns",
    "build_report",
]

TRANSFORM_CHOICES = ("none", "addition", "multiplication", "lossless", "auto")
FALLBACK_CHOICES = ("fail", "none", "lossless")

_MIN_NORMAL = 2.0**-126


@dataclass(frozen=True)
class ColumnSeries:
    """One numeric column: float32 values plus the source decimal tokens."""

    name: str
    values: np.ndarray
    source_tokens: tuple[str, ...]


@dataclass(frozen=True)
class RunConfig:
    transform: str
    bound: ErrorBound
    fallback: str = "fail"

    def __post_init__(self) -> None:
        if self.transform not in TRANSFORM_CHOICES:
            raise ConfigError(f"unknown transform {self.transform!r}")
        if self.fallback not in FALLBACK_CHOICES:
            raise ConfigError(f"unknown fallback policy {self.fallback!r}")


def ingest(csv_text: str, columns: Sequence[str] | None = None) -> list[ColumnSeries]:
    """Parse CSV text into per-column series with their tokens retained.

    The first row is treated as a header when any of its cells is not
    numeric; otherwise columns are named col0, col1, ... NaN and infinite
    tokens are rejected, as are values that land in float32's subnormal
    range; negative zero is normalised to positive zero.
    """
    rows = [row for row in csv.reader(io.StringIO(csv_text)) if row]
    if not rows:
        raise IngestError("empty CSV input")

    def numeric(token: str) -> bool:
        try:
            float(token)
        except ValueError:
            return False
        return True

    header_present = not all(numeric(cell.strip()) for cell in rows[0])
    if header_present:
        names = [cell.strip() for cell in rows[0]]
        data_rows = rows[1:]
        first_data_row = 2
    else:
        names = [f"col{i}" for i in range(len(rows[0]))]
        data_rows = rows
        first_data_row = 1
    if not data_rows:
        raise IngestError("CSV has a header but no data rows")

    width = len(names)
    tokens: list[list[str]] = [[] for _ in range(width)]
    for r, row in enumerate(data_rows, start=first_data_row):
        if len(row) != width:
            raise IngestError(f"row {r} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            tokens[c].append(cell.strip())

    if columns is not None:
        unknown = [c for c in columns if c not in names]
        if unknown:
            raise ConfigError(f"unknown columns {unknown}; available: {names}")
        selected = [names.index(c) for c in columns]
    else:
        selected = list(range(width))

    out: list[ColumnSeries] = []
    for c in selected:
        values = np.empty(len(tokens[c]), dtype=np.float32)
        for r, token in enumerate(tokens[c]):
            try:
                parsed = float(token)
            except ValueError as exc:
                raise IngestError(
                    f"row {r + first_data_row}, column {names[c]!r}: not numeric: {token!r}"
                ) from exc
            v = np.float32(parsed)
            if math.isnan(v) or math.isinf(v):
                raise IngestError(
                    f"row {r + first_data_row}, column {names[c]!r}: non-finite value {token!r}"
                )
            if v != 0 and abs(float(v)) < _MIN_NORMAL:
                raise IngestError(
                    f"row {r + first_data_row}, column {names[c]!r}: subnormal value {token!r} "
                    "is outside the supported range"
                )
            values[r] = np.float32(0.0) if v == 0 else v
        out.append(ColumnSeries(name=names[c], values=values, source_tokens=tuple(tokens[c])))
    return out


@dataclass
class ColumnResult:
    record: TransformRecord
    transformed: np.ndarray
    recovered: np.ndarray
    compressed_bytes: int
    baseline_compressed_bytes: int
    uncompressed_bytes: int
    fallback_applied: bool = False
    lossless_tokens: tuple[str, ...] | None = None

    @property
    def cr(self) -> float:
        return compression_ratio(self.compressed_bytes, self.uncompressed_bytes)

    @property
    def cr_np(self) -> float:
        return compression_ratio(self.baseline_compressed_bytes, self.uncompressed_bytes)

    @property
    def delta_cr_percent(self) -> float:
        return delta_cr_percent(self.cr, self.cr_np)


@dataclass
class PipelineResult:
    columns: list[ColumnResult] = field(default_factory=list)

    @property
    def records(self) -> list[TransformRecord]:
        return [c.record for c in self.columns]

    def global_report(self) -> CompressionReport:
        uncompressed = sum(c.uncompressed_bytes for c in self.columns)
        compressed = sum(c.compressed_bytes for c in self.columns)
        baseline = sum(c.baseline_compressed_bytes for c in self.columns)
        cr = compression_ratio(compressed, uncompressed)
        cr_np = compression_ratio(baseline, uncompressed)
        return CompressionReport(
            uncompressed_bytes=uncompressed,
            compressed_bytes=compressed,
            cr=cr,
            delta_cr_percent=delta_cr_percent(cr, cr_np),
            max_abs_error=max(c.record.achieved.max_abs for c in self.columns),
            max_rel_error=max(c.record.achieved.max_rel for c in self.columns),
        )


def _achieved_stats(
    original: np.ndarray, recovered: np.ndarray, transformed: np.ndarray
) -> Achieved:
    words = np.asarray(transformed, dtype=np.float32).view(np.uint32)
    exponents = vec_biased_exponent(words)
    shared = int(exponents[0]) - BIAS if words.size and np.all(exponents == exponents[0]) else None
    zeros = int(vec_trailing_zeros(words).min()) if words.size else 23
    return Achieved(
        max_abs=max_abs_error(original, recovered),
        max_rel=max_rel_error(original, recovered),
        min_trailing_zeros=zeros,
        shared_exponent=shared,
    )


def _transform_column(
    series: ColumnSeries, kind: str, bound: ErrorBound
) -> tuple[str, str | int | None, np.ndarray, np.ndarray, tuple[str, ...] | None]:
    """Returns (kind, parameter, transformed, recovered, lossless tokens)."""
    if kind == "none":
        return "none", None, series.values.copy(), series.values.copy(), None
    if kind == "addition":
        plan = addition.select_addition_parameter(series.values, bound)
        transformed = addition.apply_addition(series.values, plan)
        recovered = addition.invert_addition(transformed, plan)
        return "addition", plan.parameter_hex, transformed, recovered, None
    if kind == "multiplication":
        plan = multiplication.select_multiplication_parameter(series.values, bound)
        transformed = multiplication.apply_multiplication(series.values, plan)
        recovered = multiplication.invert_multiplication(transformed, plan)
        return "multiplication", plan.m, transformed, recovered, None
    if kind == "lossless":
        plan = lossless.select_scale(series.source_tokens)
        transformed = lossless.apply_scale(series.source_tokens, plan)
        tokens = tuple(lossless.invert_scale(transformed, plan))
        recovered = np.array([np.float32(float(t)) for t in tokens], dtype=np.float32)
        return "lossless", plan.power, transformed, recovered, tokens
    raise ConfigError(f"unknown transform {kind!r}")


def _run_column(series: ColumnSeries, config: RunConfig, backend) -> ColumnResult:
    words_before = series.values.view(np.uint32)
    baseline_blob = backend.compress_words(words_before)
    uncompressed = 4 * series.values.size

    fallback_applied = False

    def attempt(kind: str):
        return _transform_column(series, kind, config.bound)

    try:
        if config.transform == "auto":
            outcomes = []
            for kind in ("addition", "multiplication"):
                try:
                    outcome = attempt(kind)
                except (InfeasibleTransformError, UnsupportedDataError):
                    continue
                blob = backend.compress_words(outcome[2].view(np.uint32))
                outcomes.append((len(blob), kind, outcome, blob))
            if not outcomes:
                raise InfeasibleTransformError(
                    f"neither lossy transform satisfies the bound for column {series.name!r}"
                )
            # smaller compressed size wins; the tie (and ordering) prefers addition
            size, _, outcome, blob = min(outcomes, key=lambda o: (o[0], o[1] != "addition"))
            kind, parameter, transformed, recovered, tokens = outcome
        else:
            kind, parameter, transformed, recovered, tokens = attempt(config.transform)
            blob = backend.compress_words(transformed.view(np.uint32))
    except (InfeasibleTransformError, UnsupportedDataError, LosslessInfeasibleError):
        if config.fallback == "fail":
            raise
        fallback_applied = True
        fallback_kind = config.fallback
        if fallback_kind == "lossless":
            try:
                kind, parameter, transformed, recovered, tokens = attempt("lossless")
            except (LosslessInfeasibleError, IngestError):
                kind, parameter, transformed, recovered, tokens = attempt("none")
        else:
            kind, parameter, transformed, recovered, tokens = attempt("none")
        blob = backend.compress_words(transformed.view(np.uint32))

    if not within_bound(series.values, recovered, config.bound):
        raise BoundViolationError(
            f"column {series.name!r}: recovered series violates the {config.bound.kind} "
            f"bound {config.bound.limit!r} "
            f"(max abs {max_abs_error(series.values, recovered)!r}, "
            f"max rel {max_rel_error(series.values, recovered)!r})"
        )

    record = TransformRecord(
        column=series.name,
        kind=kind,
        parameter=parameter,
        bound=config.bound,
        achieved=_achieved_stats(series.values, recovered, transformed),
    )
    return ColumnResult(
        record=record,
        transformed=transformed,
        recovered=recovered,
        compressed_bytes=len(blob),
        baseline_compressed_bytes=len(baseline_blob),
        uncompressed_bytes=uncompressed,
        fallback_applied=fallback_applied,
        lossless_tokens=tokens,
    )


def run_pipeline(
    series_list: Sequence[ColumnSeries], config: RunConfig, backend
) -> PipelineResult:
    """Transform, compress, measure, invert and verify every column.

    The no-preprocessing baseline is compressed with the same backend in the
    same run; bound violations after inversion abort with diagnostics.
    """
    if not series_list:
        raise IngestError("no columns to process")
    result = PipelineResult()
    for series in series_list:
        if series.values.size == 0:
            raise IngestError(f"column {series.name!r} is empty")
        result.columns.append(_run_column(series, config, backend))
    return result


def recover_columns(
    archive_columns: Sequence[tuple[str, np.ndarray]],
    records: Sequence[TransformRecord],
) -> list[tuple[str, np.ndarray, list[str]]]:
    """Reconstruct recovered values (and output tokens) from artifacts alone."""
    by_name = {r.column: r for r in records}
    out: list[tuple[str, np.ndarray, list[str]]] = []
    for name, words in archive_columns:
        record = by_name.get(name)
        if record is None:
            raise ConfigError(f"metadata has no record for column {name!r}")
        if record.kind == "none":
            recovered = np.asarray(words, dtype=np.float32)
            tokens = [str(v) for v in recovered]
        elif record.kind == "addition":
            a = np.float32(bits_to_float(int(str(record.parameter), 16)))
            recovered = (np.asarray(words, dtype=np.float32) - a).astype(np.float32)
            tokens = [str(v) for v in recovered]
        elif record.kind == "multiplication":
            recovered = multiplication.divide_by_multiplier(words, int(record.parameter))
            tokens = [str(v) for v in recovered]
        elif record.kind == "lossless":
            plan = lossless.ScalePlan(power=int(record.parameter), scaled_are_integers=True)
            text = lossless.invert_scale(words, plan)
            recovered = np.array([np.float32(float(t)) for t in text], dtype=np.float32)
            tokens = list(text)
        else:
            raise ConfigError(f"unknown transform kind {record.kind!r} in metadata")
        out.append((name, recovered, tokens))
    return out


def build_report(
    result: PipelineResult,
    config: RunConfig,
    backend,
    generated_at: str | None = None,
) -> dict[str, Any]:
    """Machine-readable run report; identical runs produce identical content
    apart from the separate timestamp field."""
    columns = []
    for col in result.columns:
        columns.append(
            {
                "name": col.record.column,
                "transform": col.record.kind,
                "parameter": col.record.parameter,
                "bound": col.record.bound.to_dict(),
                "achieved": col.record.achieved.to_dict(),
                "uncompressed_bytes": col.uncompressed_bytes,
                "compressed_bytes": col.compressed_bytes,
                "baseline_compressed_bytes": col.baseline_compressed_bytes,
                "cr": col.cr,
                "cr_np": col.cr_np,
                "delta_cr_percent": col.delta_cr_percent,
                "fallback_applied": col.fallback_applied,
            }
        )
    globals_ = result.global_report()
    report = {
        "version": 1,
        "transform_requested": config.transform,
        "fallback": config.fallback,
        "bound": config.bound.to_dict(),
        "compressor": backend.describe(),
        "columns": columns,
        "global": {
            **globals_.to_dict(),
            "cr_np": compression_ratio(
                sum(c.baseline_compressed_bytes for c in result.columns),
                sum(c.uncompressed_bytes for c in result.columns),
            ),
        },
        "generated_at": generated_at,
    }
    return report


def metadata_for(result: PipelineResult) -> dict[str, Any]:
    return metadata_to_dict(result.records)
