#!/usr/bin/env python3
"""Result envelopes and on-disk formats.

Three formats, one per audience: JSON envelopes for machines, CSV tables for
plotting, and the ``ZGKNGRID`` binary container (with a JSON sidecar) for
bi-spinor grids. Every envelope carries the SHA-256 of the configuration that
produced it.

Example:
    >>> from zgkn.results import ResultEnvelope
    >>> env = ResultEnvelope(command="spectrum", config_hash="ab12", payload=[])
    >>> sorted(env.to_dict())[:3]
    ['command', 'config_hash', 'created']
"""

import csv
import hashlib
import io
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from ._version import __version__
from .errors import ConfigError

logger = logging.getLogger(__name__)

# Bump when the envelope layout changes in a way readers must notice.
RESULT_FORMAT_VERSION = "1"

GRID_MAGIC = b"ZGKNGRID"
GRID_FORMAT_VERSION = 1
_GRID_HEADER = struct.Struct("<8sIIII")


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy values, complex numbers and dataclasses to JSON types."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def canonical_json(data: Any, compact: bool = True) -> str:
    """Deterministic JSON: sorted keys, fixed separators."""
    if compact:
        return json.dumps(to_jsonable(data), sort_keys=True, separators=(",", ":"))
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2)


def sha256_of(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def timestamp() -> str:
    """ISO timestamp; SOURCE_DATE_EPOCH pins it for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        try:
            return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
        except ValueError as e:
            raise ConfigError("SOURCE_DATE_EPOCH must be an integer", value=epoch) from e
    return datetime.now(timezone.utc).isoformat()


@dataclass
class ResultEnvelope:
    """A payload bound to the configuration that produced it.

    Attributes:
        command: Subcommand that produced the payload.
        config_hash: SHA-256 of the canonical configuration.
        payload: Spectrum list, trajectory, quadrature report, ...
        diagnostics: Solver statistics and checks.
        warnings: Admissibility and numerical warnings.
        created: ISO timestamp.
        version: Package version.
        format: Envelope layout version.
    """

    command: str
    config_hash: str
    payload: Any = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    created: str = field(default_factory=timestamp)
    version: str = __version__
    format: str = RESULT_FORMAT_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "created": self.created,
            "diagnostics": to_jsonable(self.diagnostics),
            "format": self.format,
            "payload": to_jsonable(self.payload),
            "version": self.version,
            "warnings": list(self.warnings),
        }

    def to_json(self, compact: bool = False) -> str:
        return canonical_json(self.to_dict(), compact=compact)

    def write(self, path: str | Path, compact: bool = False) -> None:
        Path(path).write_text(self.to_json(compact) + "\n", encoding="utf-8")
        logger.info("Wrote %s result to %s", self.command, path)

    @classmethod
    def load(cls, path: str | Path) -> "ResultEnvelope":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read result file {path}: {e}", path=str(path)) from e
        missing = {"command", "config_hash"} - set(data)
        if missing:
            raise ConfigError(
                f"Result file {path} is missing keys: {', '.join(sorted(missing))}",
                path=str(path),
            )
        return cls(
            command=data["command"],
            config_hash=data["config_hash"],
            payload=data.get("payload"),
            diagnostics=data.get("diagnostics", {}),
            warnings=data.get("warnings", []),
            created=data.get("created", ""),
            version=data.get("version", ""),
            format=data.get("format", RESULT_FORMAT_VERSION),
        )


@dataclass
class GridRecord:
    """Contents of a grid container plus its sidecar metadata."""

    r: NDArray
    theta: NDArray
    values: NDArray
    metadata: dict[str, Any] = field(default_factory=dict)


def sidecar_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def write_grid(
    path: str | Path,
    r: NDArray,
    theta: NDArray,
    values: NDArray,
    metadata: dict[str, Any] | None = None,
) -> None:
    """Write a complex (Nr, Ntheta, ncomp) array to the binary container.

    Layout: magic, then little-endian uint32 version, Nr, Ntheta, ncomp,
    then the r grid, the theta grid and the values as interleaved re/im, all
    little-endian float64.
    """
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim != 3 or values.shape[:2] != (len(r), len(theta)):
        raise ConfigError("values must have shape (len(r), len(theta), ncomp)", shape=values.shape)
    n_r, n_theta, ncomp = values.shape
    with open(path, "wb") as f:
        f.write(_GRID_HEADER.pack(GRID_MAGIC, GRID_FORMAT_VERSION, n_r, n_theta, ncomp))
        f.write(np.asarray(r, dtype="<f8").tobytes())
        f.write(np.asarray(theta, dtype="<f8").tobytes())
        f.write(values.view(np.float64).astype("<f8").tobytes())
    sidecar_path(path).write_text(canonical_json(metadata or {}, compact=False) + "\n", "utf-8")
    logger.debug("Wrote grid %s (%d x %d x %d)", path, n_r, n_theta, ncomp)


def read_grid(path: str | Path) -> GridRecord:
    """Read a grid container and its sidecar."""
    data = Path(path).read_bytes()
    if len(data) < _GRID_HEADER.size:
        raise ConfigError(f"{path} is too short to be a grid container", path=str(path))
    magic, version, n_r, n_theta, ncomp = _GRID_HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise ConfigError(f"{path} is not a grid container", path=str(path))
    if version != GRID_FORMAT_VERSION:
        raise ConfigError(f"Unsupported grid format version {version}", path=str(path))
    body = np.frombuffer(data, dtype="<f8", offset=_GRID_HEADER.size)
    expected = n_r + n_theta + 2 * n_r * n_theta * ncomp
    if body.size != expected:
        raise ConfigError(
            f"{path} holds {body.size} values, expected {expected}", path=str(path)
        )
    r = body[:n_r].astype(float)
    theta = body[n_r : n_r + n_theta].astype(float)
    flat = body[n_r + n_theta :].astype(np.float64)
    values = flat.view(np.complex128).reshape(n_r, n_theta, ncomp).copy()
    side = sidecar_path(path)
    metadata = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return GridRecord(r=r, theta=theta, values=values, metadata=metadata)


def rows_to_csv(rows: list[dict[str, Any]], columns: list[str] | tuple[str, ...]) -> str:
    """Render table rows as CSV with a header row; floats use repr precision."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(col)) for col in columns])
    return buffer.getvalue()


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_result(
    envelope: ResultEnvelope,
    args: Any,
    rows: list[dict[str, Any]] | None = None,
    columns: list[str] | tuple[str, ...] | None = None,
    text: str | None = None,
) -> None:
    """Write a subcommand's result to --output and print it to stdout.

    A ``.csv`` output path gets the table rows; anything else gets the JSON
    envelope. stdout shows the envelope with --json (or when no text
    rendering exists) and the text rendering otherwise.
    """
    compact = bool(getattr(args, "compact", False))
    output = getattr(args, "output", None)
    if output:
        if str(output).endswith(".csv"):
            if rows is None or columns is None:
                raise ConfigError(f"The {envelope.command} result has no table form", path=output)
            Path(output).write_text(rows_to_csv(rows, columns), encoding="utf-8")
            logger.info("Wrote %s table to %s", envelope.command, output)
        else:
            envelope.write(output, compact=compact)
    if getattr(args, "json", False) or text is None:
        print(envelope.to_json(compact=compact))
    else:
        print(text)
