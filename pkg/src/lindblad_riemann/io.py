"""Atomic CSV/JSON output and the binary isometry archive."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import splitting
from .exceptions import ConfigError

SCHEMA_PREFIX = "lindblad-riemann"
ARCHIVE_MAGIC = b"LRISO1\x00\x00"
ARCHIVE_VERSION = 1
_HEADER_LEN = struct.Struct("<I")


def atomic_write_bytes(path, data):
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, name, columns, rows):
    """Write a CSV whose first line is the comment ``# schema: lindblad-riemann/<name>/v1``."""
    lines = [f"# schema: {SCHEMA_PREFIX}/{name}/v1", ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ConfigError("rows", f"row {row!r} does not match columns {columns}")
        lines.append(",".join(format_value(v) for v in row))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_csv(path):
    """Parse a file written by :func:`write_csv` into ``(schema, columns, rows of str)``."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# schema: "):
        raise ConfigError("csv", f"{path} lacks a schema header")
    columns = text[1].split(",")
    return text[0][len("# schema: "):], columns, [line.split(",") for line in text[2:] if line]


def write_json(path, payload):
    atomic_write_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _metric_dict(metric):
    return {"alpha0": float(metric.alpha0), "alpha1": float(metric.alpha1)}


def save_archive(path, xvec, model, tau, sites, metric):
    """Store an isometry vector as ``magic | uint32 header length | JSON header | float64 layers``.

    A sidecar ``<path>.json`` repeats the header and adds the SHA-256 of the
    binary file.
    """
    n, p = xvec.shape
    header = {
        "version": ARCHIVE_VERSION,
        "model": str(model),
        "tau": float(tau),
        "n_tau": int(xvec.schedule.n_tau),
        "N": int(sites),
        "d": splitting.LOCAL_DIM,
        "R": int(xvec.rank),
        "m": int(xvec.schedule.m),
        "n": int(n),
        "p": int(p),
        "metric": _metric_dict(metric),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    body = b"".join(np.ascontiguousarray(X, dtype="<f8").tobytes() for X in xvec.layers)
    data = ARCHIVE_MAGIC + _HEADER_LEN.pack(len(blob)) + blob + body
    atomic_write_bytes(path, data)
    sidecar = dict(header, sha256=hashlib.sha256(data).hexdigest())
    write_json(_sidecar(path), sidecar)
    return header


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def load_archive(path, verify=True):
    """Read an archive; returns ``(header, IsometryVector)``.

    Raises
    ------
    ConfigError
        On a bad magic number, truncated payload or checksum mismatch.
    """
    data = Path(path).read_bytes()
    if not data.startswith(ARCHIVE_MAGIC):
        raise ConfigError("archive", f"{path} is not an isometry archive")
    offset = len(ARCHIVE_MAGIC)
    (hlen,) = _HEADER_LEN.unpack_from(data, offset)
    offset += _HEADER_LEN.size
    header = json.loads(data[offset : offset + hlen])
    offset += hlen
    m, n, p = header["m"], header["n"], header["p"]
    expected = m * n * p * 8
    if len(data) - offset != expected:
        raise ConfigError("archive", f"payload has {len(data) - offset} bytes, expected {expected}")
    if verify and _sidecar(path).exists():
        stored = json.loads(_sidecar(path).read_text()).get("sha256")
        if stored != hashlib.sha256(data).hexdigest():
            raise ConfigError("archive", f"checksum mismatch for {path}")
    flat = np.frombuffer(data, dtype="<f8", offset=offset).astype(float)
    layers = tuple(flat.reshape(m, n, p))
    schedule = splitting.layer_schedule(header["n_tau"])
    return header, splitting.IsometryVector(layers, schedule)
