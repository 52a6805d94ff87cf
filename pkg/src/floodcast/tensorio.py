"""On-disk container for named float32 arrays plus JSON metadata.

Byte layout (all integers little-endian), designed so any language can
parse it without a binary-format library:

    offset  size  field
    0       8     magic ``b"FCTC0001"``
    8       4     uint32 header length H
    12      H     UTF-8 JSON header
    12+H    ...   payload: raw C-order little-endian float32 array data

The JSON header is ``{"arrays": {name: {"shape": [...], "dtype": "<f4",
"offset": int, "nbytes": int}}, "meta": {...}}`` with offsets relative to
the payload start. Reading back a written container reproduces every
array bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from floodcast.core import GridSpec, Sample

MAGIC = b"FCTC0001"
_DTYPE = "<f4"


class ContainerError(ValueError):
    """File is not a valid tensor container."""


def write_container(
    path: str | Path,
    arrays: Mapping[str, np.ndarray],
    meta: Mapping | None = None,
) -> None:
    """Write named arrays (coerced to little-endian float32) and metadata."""
    entries: dict[str, dict] = {}
    blobs: list[bytes] = []
    offset = 0
    for name, array in arrays.items():
        data = np.ascontiguousarray(np.asarray(array, dtype=_DTYPE)).tobytes()
        entries[name] = {
            "shape": list(np.asarray(array).shape),
            "dtype": _DTYPE,
            "offset": offset,
            "nbytes": len(data),
        }
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"arrays": entries, "meta": dict(meta or {})}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a container back as ``(arrays, meta)``."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:8]!r}")
    (header_len,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: corrupt header: {exc}") from exc
    payload = raw[12 + header_len :]
    arrays = {}
    for name, entry in header["arrays"].items():
        start, nbytes = entry["offset"], entry["nbytes"]
        flat = np.frombuffer(payload[start : start + nbytes], dtype=entry["dtype"])
        arrays[name] = flat.reshape(entry["shape"]).copy()
    return arrays, header.get("meta", {})


def save_sample(path: str | Path, sample: Sample, region: str = "", grid: GridSpec | None = None) -> None:
    """Persist one training sample as a container."""
    meta = {"scenario": sample.scenario_id, "slr_m": sample.slr_m, "region": region}
    if grid is not None:
        meta["grid"] = grid.to_dict()
    write_container(
        path,
        {"input_grid": sample.input_grid, "output_grid": sample.output_grid},
        meta,
    )


def load_sample(path: str | Path) -> Sample:
    arrays, meta = read_container(path)
    return Sample(
        input_grid=arrays["input_grid"],
        slr_m=float(meta["slr_m"]),
        output_grid=arrays["output_grid"],
        scenario_id=str(meta.get("scenario", "")),
    )
