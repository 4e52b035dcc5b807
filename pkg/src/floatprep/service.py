"""HTTP service wrapping the preprocessing pipeline.

All functionality sits behind four JSON endpoints (transform, compress,
recover, bench); binary artifacts travel base64-encoded. The CLI is a thin
client of this service. Command compressors configured in a request run as
child processes on the service host, so deploy it only for trusted callers.
"""

from __future__ import annotations

import base64
import binascii
import json
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from . import __version__
from .compressors import BuiltinBackend, CommandBackend, ExternalCompressor
from .exceptions import (
    BoundViolationError,
    ConfigError,
    CorruptBlobError,
    ExternalCompressorError,
    FloatprepError,
    IngestError,
    InfeasibleTransformError,
    LosslessInfeasibleError,
    UnadjustableError,
    UnsupportedDataError,
    UnsupportedValueError,
)
from .metrics import ErrorBound
from .pipeline import (
    RunConfig,
    build_report,
    ingest,
    metadata_for,
    recover_columns,
    run_pipeline,
)
from .storage import metadata_from_dict, pack_archive, pack_container, unpack_archive

__all__ = ["app", "create_app", "ERROR_KINDS"]

ERROR_KINDS: dict[type[FloatprepError], tuple[str, int]] = {
    BoundViolationError: ("bound_violation", 409),
    InfeasibleTransformError: ("infeasible", 409),
    UnadjustableError: ("infeasible", 409),
    LosslessInfeasibleError: ("infeasible", 409),
    UnsupportedDataError: ("infeasible", 409),
    UnsupportedValueError: ("config", 400),
    ConfigError: ("config", 400),
    IngestError: ("ingest", 422),
    CorruptBlobError: ("io", 422),
    ExternalCompressorError: ("io", 502),
}


class BoundModel(BaseModel):
    kind: Literal["absolute", "relative"]
    limit: float = Field(gt=0)

    def to_bound(self) -> ErrorBound:
        return ErrorBound(kind=self.kind, limit=self.limit)


class CompressorModel(BaseModel):
    type: Literal["builtin", "command"] = "builtin"
    base_bits: int | None = Field(default=None, ge=1, le=31)
    compress_cmd: list[str] | None = None
    decompress_cmd: list[str] | None = None
    verify: bool = True
    timeout_s: float = Field(default=120.0, gt=0)

    def to_backend(self):
        if self.type == "builtin":
            return BuiltinBackend(base_bits=self.base_bits)
        if not self.compress_cmd:
            raise ConfigError("command compressor needs compress_cmd")
        return CommandBackend(
            ExternalCompressor(
                compress_argv=tuple(self.compress_cmd),
                decompress_argv=tuple(self.decompress_cmd) if self.decompress_cmd else None,
                verify=self.verify,
                timeout=self.timeout_s,
            )
        )


class TransformConfigModel(BaseModel):
    transform: Literal["none", "addition", "multiplication", "lossless", "auto"]
    bound: BoundModel
    columns: list[str] | None = None
    fallback: Literal["fail", "none", "lossless"] = "fail"

    def to_config(self) -> RunConfig:
        return RunConfig(
            transform=self.transform, bound=self.bound.to_bound(), fallback=self.fallback
        )


class TransformRequest(BaseModel):
    csv_text: str
    config: TransformConfigModel


class ColumnSummary(BaseModel):
    name: str
    transform: str
    parameter: str | int | None
    rows: int
    max_abs_error: float
    max_rel_error: float
    min_trailing_zeros: int
    shared_exponent: int | None
    fallback_applied: bool


class TransformResponse(BaseModel):
    archive_b64: str
    metadata: dict[str, Any]
    columns: list[ColumnSummary]


class CompressRequest(BaseModel):
    archive_b64: str
    compressor: CompressorModel = CompressorModel()


class ColumnSizes(BaseModel):
    name: str
    uncompressed_bytes: int
    compressed_bytes: int
    cr: float


class CompressResponse(BaseModel):
    blob_b64: str
    uncompressed_bytes: int
    compressed_bytes: int
    cr: float
    columns: list[ColumnSizes]


class RecoverRequest(BaseModel):
    archive_b64: str
    metadata: dict[str, Any]


class RecoverResponse(BaseModel):
    csv_text: str


class BenchRequest(BaseModel):
    csv_text: str
    config: TransformConfigModel
    compressor: CompressorModel = CompressorModel()


class BenchResponse(BaseModel):
    report: dict[str, Any]


class HealthResponse(BaseModel):
    status: str
    version: str


def _decode_b64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise CorruptBlobError(f"invalid base64 payload: {exc}") from exc


def _summaries(result) -> list[ColumnSummary]:
    return [
        ColumnSummary(
            name=col.record.column,
            transform=col.record.kind,
            parameter=col.record.parameter,
            rows=int(col.transformed.size),
            max_abs_error=col.record.achieved.max_abs,
            max_rel_error=col.record.achieved.max_rel,
            min_trailing_zeros=col.record.achieved.min_trailing_zeros,
            shared_exponent=col.record.achieved.shared_exponent,
            fallback_applied=col.fallback_applied,
        )
        for col in result.columns
    ]


def create_app() -> FastAPI:
    app = FastAPI(title="floatprep", version=__version__)

    @app.exception_handler(FloatprepError)
    async def _floatprep_error(request: Request, exc: FloatprepError) -> JSONResponse:
        kind, status = "internal", 500
        for klass, (k, s) in ERROR_KINDS.items():
            if isinstance(exc, klass):
                kind, status = k, s
                break
        return JSONResponse(
            status_code=status, content={"detail": {"kind": kind, "message": str(exc)}}
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/transform", response_model=TransformResponse)
    def transform(request: TransformRequest) -> TransformResponse:
        series = ingest(request.csv_text, request.config.columns)
        result = run_pipeline(series, request.config.to_config(), BuiltinBackend())
        archive = pack_archive(
            [(col.record.column, col.transformed) for col in result.columns]
        )
        return TransformResponse(
            archive_b64=base64.b64encode(archive).decode("ascii"),
            metadata=metadata_for(result),
            columns=_summaries(result),
        )

    @app.post("/v1/compress", response_model=CompressResponse)
    def compress(request: CompressRequest) -> CompressResponse:
        backend = request.compressor.to_backend()
        columns = unpack_archive(_decode_b64(request.archive_b64))
        blobs = []
        sizes = []
        for name, values in columns:
            blob = backend.compress_words(values.view("uint32"))
            blobs.append((name, blob))
            sizes.append(
                ColumnSizes(
                    name=name,
                    uncompressed_bytes=4 * values.size,
                    compressed_bytes=len(blob),
                    cr=len(blob) / (4 * values.size) if values.size else 0.0,
                )
            )
        container = pack_container(blobs, backend_tag=0 if isinstance(backend, BuiltinBackend) else 1)
        total_unc = sum(s.uncompressed_bytes for s in sizes)
        total_cmp = sum(s.compressed_bytes for s in sizes)
        return CompressResponse(
            blob_b64=base64.b64encode(container).decode("ascii"),
            uncompressed_bytes=total_unc,
            compressed_bytes=total_cmp,
            cr=total_cmp / total_unc if total_unc else 0.0,
            columns=sizes,
        )

    @app.post("/v1/recover", response_model=RecoverResponse)
    def recover(request: RecoverRequest) -> RecoverResponse:
        columns = unpack_archive(_decode_b64(request.archive_b64))
        records = metadata_from_dict(request.metadata)
        recovered = recover_columns(columns, records)
        lines = [",".join(name for name, _, _ in recovered)]
        if recovered:
            rows = len(recovered[0][1])
            for name, values, _ in recovered:
                if len(values) != rows:
                    raise CorruptBlobError("columns have differing row counts")
            for r in range(rows):
                lines.append(",".join(tokens[r] for _, _, tokens in recovered))
        return RecoverResponse(csv_text="\n".join(lines) + "\n")

    @app.post("/v1/bench", response_model=BenchResponse)
    def bench(request: BenchRequest) -> BenchResponse:
        series = ingest(request.csv_text, request.config.columns)
        backend = request.compressor.to_backend()
        result = run_pipeline(series, request.config.to_config(), backend)
        return BenchResponse(report=build_report(result, request.config.to_config(), backend))

    return app


app = create_app()
