"""Binary weights container.

Layout (all integers little-endian):

    magic   4 bytes  b"MBTW"
    version u32
    meta    u32 byte length + UTF-8 JSON (topology, training metadata)
    count   u32
    records count times:
        path   u16 length + UTF-8 bytes
        dtype  u8 (0 = float32, 1 = float64)
        ndim   u8
        dims   ndim * u32
        data   raw little-endian values

Round trips are bit-exact for float32 and float64 arrays.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

__all__ = ["WeightsContainer", "save_weights", "load_weights"]

_MAGIC = b"MBTW"
_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class WeightsContainer:
    """Named float arrays plus a JSON-serializable metadata dict.

    Arrays are immutable by convention after load; consumers copy before
    mutating.
    """

    def __init__(self, arrays: dict[str, np.ndarray], metadata: dict | None = None):
        self.arrays = dict(arrays)
        self.metadata = dict(metadata or {})

    def __contains__(self, key: str) -> bool:
        return key in self.arrays

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def param_count(self) -> int:
        return sum(a.size for a in self.arrays.values())


def save_weights(path: str | Path, container: WeightsContainer) -> None:
    meta = json.dumps(container.metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(container.arrays)))
        for name, arr in container.arrays.items():
            if arr.dtype not in _DTYPE_CODES:
                raise DataError(f"unsupported dtype {arr.dtype} for record {name!r}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError("weights file truncated")
    return buf


def load_weights(path: str | Path) -> WeightsContainer:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _MAGIC:
            raise DataError(f"{path}: not a weights container (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4))
        metadata = json.loads(_read_exact(fh, meta_len).decode("utf-8")) if meta_len else {}
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            code, ndim = struct.unpack("<BB", _read_exact(fh, 2))
            if code not in _CODE_DTYPES:
                raise DataError(f"{path}: unknown dtype code {code} for {name!r}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            dtype = _CODE_DTYPES[code]
            n_items = int(np.prod(shape)) if ndim else 1
            raw = _read_exact(fh, n_items * dtype.itemsize)
            arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return WeightsContainer(arrays, metadata)
