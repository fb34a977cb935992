"""On-disk formats: PATB binary arrays, CSV tables and key=value manifests.

PATB layout (all little-endian)::

    b"PATB"  u32 version=1  u8 kind
    kind 0 (field):      u32 n, f64 physical_size, f64 sound_speed, n*n f64
    kind 1 (sensordata): u32 N_s, u32 N_t, f64 dt, N_s*N_t f64 (sensor-major)
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import BadMagic, Truncated, VersionMismatch, WrongKind
from .grid import Field, GridSpec
from .sensors import SensorData, TimeAxis

MAGIC = b"PATB"
VERSION = 1
KIND_FIELD = 0
KIND_SENSORDATA = 1

_PREAMBLE = struct.Struct("<4sIB")
_FIELD_HEADER = struct.Struct("<Idd")
_DATA_HEADER = struct.Struct("<IId")


def field_to_bytes(f: Field) -> bytes:
    head = _PREAMBLE.pack(MAGIC, VERSION, KIND_FIELD)
    head += _FIELD_HEADER.pack(f.grid.n, f.grid.physical_size, f.grid.sound_speed)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def sensordata_to_bytes(d: SensorData) -> bytes:
    n_s, n_t = d.values.shape
    head = _PREAMBLE.pack(MAGIC, VERSION, KIND_SENSORDATA)
    head += _DATA_HEADER.pack(n_s, n_t, d.times.dt)
    return head + np.ascontiguousarray(d.values, dtype="<f8").tobytes()


def _parse_preamble(buf: bytes, expected_kind: int) -> int:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagic("not a PATB file (bad magic)")
    if len(buf) < _PREAMBLE.size:
        raise Truncated("truncated PATB preamble")
    _, version, kind = _PREAMBLE.unpack_from(buf)
    if version != VERSION:
        raise VersionMismatch(f"PATB version {version} is not supported (expected {VERSION})")
    if kind != expected_kind:
        raise WrongKind(f"PATB kind {kind} where {expected_kind} was expected")
    return _PREAMBLE.size


def _payload(buf: bytes, offset: int, count: int) -> np.ndarray:
    need = offset + 8 * count
    if len(buf) < need:
        raise Truncated(f"truncated PATB payload: {len(buf)} bytes, expected {need}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64)


def field_from_bytes(buf: bytes, pad_factor: int = 2) -> Field:
    off = _parse_preamble(buf, KIND_FIELD)
    if len(buf) < off + _FIELD_HEADER.size:
        raise Truncated("truncated PATB field header")
    n, size, speed = _FIELD_HEADER.unpack_from(buf, off)
    vals = _payload(buf, off + _FIELD_HEADER.size, n * n)
    return Field(GridSpec(n, size, speed, pad_factor), vals.reshape(n, n))


def sensordata_from_bytes(buf: bytes) -> SensorData:
    off = _parse_preamble(buf, KIND_SENSORDATA)
    if len(buf) < off + _DATA_HEADER.size:
        raise Truncated("truncated PATB sensordata header")
    n_s, n_t, dt = _DATA_HEADER.unpack_from(buf, off)
    vals = _payload(buf, off + _DATA_HEADER.size, n_s * n_t)
    return SensorData(None, TimeAxis(n_t, dt), vals.reshape(n_s, n_t))


def write_field(f: Field, path) -> None:
    Path(path).write_bytes(field_to_bytes(f))


def read_field(path, pad_factor: int = 2) -> Field:
    return field_from_bytes(Path(path).read_bytes(), pad_factor)


def write_sensordata(d: SensorData, path) -> None:
    Path(path).write_bytes(sensordata_to_bytes(d))


def read_sensordata(path) -> SensorData:
    return sensordata_from_bytes(Path(path).read_bytes())


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def write_manifest(path, entries: Mapping[str, object]) -> Path:
    """Write a flat ``key=value`` manifest next to ``path`` and return its location."""
    out = manifest_path(path)
    lines = []
    for k, v in entries.items():
        text = str(v)
        if "\n" in text or "=" in k:
            raise ValueError(f"manifest entry {k!r} is not flat")
        lines.append(f"{k}={text}")
    out.write_text("\n".join(lines) + "\n")
    return out


def read_manifest(path) -> Optional[dict]:
    """Parse a manifest; ``path`` may be the data file or the manifest itself."""
    path = Path(path)
    if path.suffix != ".manifest":
        path = manifest_path(path)
    if not path.exists():
        return None
    return parse_key_values(path.read_text())


def parse_key_values(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed key=value line: {line!r}")
        out[key.strip()] = value.strip()
    return out
