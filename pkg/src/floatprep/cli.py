"""Command-line client for the preprocessing service.

Talks HTTP to a running server when --server is given; otherwise drives the
bundled application in-process through an ASGI transport, so no server is
needed for local batch work.

Exit codes: 0 success, 2 bound violation or infeasible transform,
3 configuration error, 4 I/O error.
"""

from __future__ import annotations

import asyncio
import base64
import json
import shlex
import sys
from pathlib import Path

import click
import httpx

EXIT_BOUND = 2
EXIT_CONFIG = 3
EXIT_IO = 4

_KIND_EXIT_CODES = {
    "bound_violation": EXIT_BOUND,
    "infeasible": EXIT_BOUND,
    "config": EXIT_CONFIG,
    "ingest": EXIT_IO,
    "io": EXIT_IO,
}


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        try:
            response = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
        except httpx.HTTPError as exc:
            _fail(EXIT_IO, f"cannot reach server: {exc}")
    else:
        response = _post_in_process(path, payload)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail")
        except json.JSONDecodeError:
            detail = None
        if isinstance(detail, dict) and "kind" in detail:
            _fail(_KIND_EXIT_CODES.get(detail["kind"], 1), detail.get("message", "error"))
        _fail(1, f"server error {response.status_code}: {response.text[:300]}")
    return response.json()


def _post_in_process(path: str, payload: dict) -> httpx.Response:
    from .service import app  # deferred: keeps --help fast

    async def call() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://floatprep.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(call())


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {path}: {exc}")


def _write_bytes(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {path}: {exc}")


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {path}: {exc}")


def _bound_payload(bound_abs: float | None, bound_rel: float | None) -> dict:
    if (bound_abs is None) == (bound_rel is None):
        _fail(EXIT_CONFIG, "exactly one of --bound-abs and --bound-rel is required")
    if bound_abs is not None:
        return {"kind": "absolute", "limit": bound_abs}
    return {"kind": "relative", "limit": bound_rel / 100.0}


def _compressor_payload(spec: str, decompress_cmd: str | None, no_verify: bool, base_bits: int | None) -> dict:
    if spec == "builtin":
        return {"type": "builtin", "base_bits": base_bits}
    if spec.startswith("cmd:"):
        argv = shlex.split(spec[4:])
        if not argv:
            _fail(EXIT_CONFIG, "empty compressor command")
        return {
            "type": "command",
            "compress_cmd": argv,
            "decompress_cmd": shlex.split(decompress_cmd) if decompress_cmd else None,
            "verify": not no_verify,
        }
    _fail(EXIT_CONFIG, f"compressor must be 'builtin' or 'cmd:<command>', got {spec!r}")


def _columns_list(columns: str | None) -> list[str] | None:
    if columns is None:
        return None
    return [c.strip() for c in columns.split(",") if c.strip()]


@click.group()
@click.option("--server", default=None, metavar="URL", help="Remote service URL; defaults to in-process execution.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Error-bounded float32 preprocessing and compression benchmarking."""
    ctx.obj = {"server": server}


_transform_opt = click.option(
    "--transform",
    type=click.Choice(["none", "addition", "multiplication", "lossless", "auto"]),
    default="auto",
    show_default=True,
)
_bound_abs_opt = click.option("--bound-abs", type=float, default=None, help="Absolute max recovery error.")
_bound_rel_opt = click.option("--bound-rel", type=float, default=None, help="Relative max recovery error, in percent.")
_columns_opt = click.option("--columns", default=None, help="Comma-separated column names (default: all).")
_fallback_opt = click.option(
    "--fallback", type=click.Choice(["fail", "none", "lossless"]), default="fail", show_default=True,
    help="Policy when the transform is infeasible under the bound.",
)


@main.command()
@click.argument("csv_path")
@click.option("-o", "--output", default=None, help="Archive output path [default: <csv>.fptx].")
@click.option("--metadata", "metadata_path", default=None, help="Metadata output path [default: <csv>.meta.json].")
@_transform_opt
@_bound_abs_opt
@_bound_rel_opt
@_columns_opt
@_fallback_opt
@click.pass_context
def transform(ctx, csv_path, output, metadata_path, transform, bound_abs, bound_rel, columns, fallback):
    """Transform CSV columns and persist the words archive plus metadata."""
    payload = {
        "csv_text": _read_text(csv_path),
        "config": {
            "transform": transform,
            "bound": _bound_payload(bound_abs, bound_rel),
            "columns": _columns_list(columns),
            "fallback": fallback,
        },
    }
    reply = _post(ctx.obj["server"], "/v1/transform", payload)
    stem = Path(csv_path)
    out_path = output or str(stem.with_suffix(".fptx"))
    meta_path = metadata_path or str(stem.with_suffix(".meta.json"))
    _write_bytes(out_path, base64.b64decode(reply["archive_b64"]))
    _write_text(meta_path, json.dumps(reply["metadata"], indent=2) + "\n")
    click.echo(json.dumps({"archive": out_path, "metadata": meta_path, "columns": reply["columns"]}, indent=2))


@main.command()
@click.argument("archive_path")
@click.option("-o", "--output", default=None, help="Blob output path [default: <archive>.fpcz].")
@click.option("--compressor", default="builtin", show_default=True, help="'builtin' or 'cmd:<command>'.")
@click.option("--decompress-cmd", default=None, help="Paired decompress command for round-trip verification.")
@click.option("--no-verify", is_flag=True, help="Skip external round-trip verification.")
@click.option("--base-bits", type=int, default=None, help="Fix the builtin split point instead of scanning.")
@click.pass_context
def compress(ctx, archive_path, output, compressor, decompress_cmd, no_verify, base_bits):
    """Compress a transformed archive and report sizes."""
    try:
        archive = Path(archive_path).read_bytes()
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {archive_path}: {exc}")
    payload = {
        "archive_b64": base64.b64encode(archive).decode("ascii"),
        "compressor": _compressor_payload(compressor, decompress_cmd, no_verify, base_bits),
    }
    reply = _post(ctx.obj["server"], "/v1/compress", payload)
    out_path = output or str(Path(archive_path).with_suffix(".fpcz"))
    _write_bytes(out_path, base64.b64decode(reply.pop("blob_b64")))
    reply["blob"] = out_path
    click.echo(json.dumps(reply, indent=2))


@main.command()
@click.argument("archive_path")
@click.argument("metadata_path")
@click.option("-o", "--output", default=None, help="Recovered CSV path [default: stdout].")
@click.pass_context
def recover(ctx, archive_path, metadata_path, output):
    """Reconstruct the recovered series from archive + metadata alone."""
    try:
        archive = Path(archive_path).read_bytes()
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {archive_path}: {exc}")
    try:
        metadata = json.loads(_read_text(metadata_path))
    except json.JSONDecodeError as exc:
        _fail(EXIT_IO, f"invalid metadata JSON: {exc}")
    payload = {"archive_b64": base64.b64encode(archive).decode("ascii"), "metadata": metadata}
    reply = _post(ctx.obj["server"], "/v1/recover", payload)
    if output:
        _write_text(output, reply["csv_text"])
        click.echo(json.dumps({"recovered": output}))
    else:
        click.echo(reply["csv_text"], nl=False)


@main.command()
@click.argument("csv_path")
@_transform_opt
@_bound_abs_opt
@_bound_rel_opt
@_columns_opt
@_fallback_opt
@click.option("--compressor", default="builtin", show_default=True, help="'builtin' or 'cmd:<command>'.")
@click.option("--decompress-cmd", default=None, help="Paired decompress command for round-trip verification.")
@click.option("--no-verify", is_flag=True, help="Skip external round-trip verification.")
@click.option("--base-bits", type=int, default=None, help="Fix the builtin split point instead of scanning.")
@click.option("--report", "report_path", default=None, help="Write the JSON report here as well.")
@click.pass_context
def bench(ctx, csv_path, transform, bound_abs, bound_rel, columns, fallback,
          compressor, decompress_cmd, no_verify, base_bits, report_path):
    """Run transform -> compress -> recover -> verify and report CR changes."""
    payload = {
        "csv_text": _read_text(csv_path),
        "config": {
            "transform": transform,
            "bound": _bound_payload(bound_abs, bound_rel),
            "columns": _columns_list(columns),
            "fallback": fallback,
        },
        "compressor": _compressor_payload(compressor, decompress_cmd, no_verify, base_bits),
    }
    reply = _post(ctx.obj["server"], "/v1/bench", payload)
    text = json.dumps(reply["report"], indent=2)
    if report_path:
        _write_text(report_path, text + "\n")
    click.echo(text)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8331, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("floatprep.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
