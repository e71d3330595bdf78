"""Single-file tensor container: one JSON header line, then raw tensor bytes.

Tensors are stored row-major, little-endian, in header manifest order. The
format is deliberately timestamp-free so identical contents produce identical
bytes (np.savez embeds zip mtimes and cannot give that guarantee).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

FORMAT_VERSION = 1

_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int64": "<i8",
    "bool": "|b1",
}


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray],
                 meta: dict | None = None) -> None:
    manifest = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dtype_name = arr.dtype.name
        if dtype_name not in _DTYPES:
            raise ConfigError(f"unsupported tensor dtype {dtype_name!r} for {name!r}")
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": dtype_name})
        blobs.append(arr.astype(_DTYPES[dtype_name], copy=False).tobytes(order="C"))
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta or {},
        "tensors": manifest,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load_tensors(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: not a tensor container ({exc})") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise ConfigError(
                f"{path}: unsupported container version {header.get('format_version')!r}"
            )
        tensors: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            dtype = np.dtype(_DTYPES[entry["dtype"]])
            n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            raw = fh.read(n_bytes)
            if len(raw) != n_bytes:
                raise ConfigError(f"{path}: truncated tensor {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return header["meta"], tensors
