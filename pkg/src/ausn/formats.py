"""Tensor files (raw float32 + JSON sidecar, NPY v1) and the AUSN container.

Container layout::

    b"AUSN" | version (u8 = 1) | metadata length (u32 LE) | metadata (UTF-8 JSON)
    | packed code bitstream
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.lib import format as npy_format

from . import __version__
from .coding import BitLayout, pack_arrays, unpack_arrays
from .errors import FormatError, PayloadError
from .quantizer import QuantizedTensor

MAGIC = b"AUSN"
VERSION = 1
_HEADER = struct.Struct("<4sBI")
_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


@dataclass
class TensorFile:
    name: str
    shape: tuple[int, ...]
    dtype: str
    data: np.ndarray

    @property
    def array(self) -> np.ndarray:
        return self.data.reshape(self.shape)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _read_npy(path: Path) -> TensorFile:
    with open(path, "rb") as fh:
        try:
            version = npy_format.read_magic(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: not an NPY file ({exc})") from None
        if version != (1, 0):
            raise FormatError(f"{path}: NPY version {version} unsupported, need 1.0")
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: malformed NPY header ({exc})") from None
        if fortran_order:
            raise FormatError(f"{path}: Fortran-ordered arrays are not supported")
        name = {4: "float32", 8: "float64"}.get(dtype.itemsize) if dtype.kind == "f" else None
        if name is None or dtype.str[0] == ">":
            raise FormatError(f"{path}: unsupported dtype {dtype}")
        payload = fh.read()
    count = int(np.prod(shape, dtype=np.int64))
    if len(payload) != count * dtype.itemsize:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, shape {shape} needs "
                          f"{count * dtype.itemsize}")
    data = np.frombuffer(payload, dtype=_DTYPES[name]).copy()
    return TensorFile(path.stem, tuple(shape), name, data)


def _read_raw(path: Path) -> TensorFile:
    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"{path}: raw tensor needs a sidecar {side.name}")
    try:
        meta = json.loads(side.read_text())
        shape = tuple(int(s) for s in meta["shape"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{side}: malformed sidecar ({exc})") from None
    dtype = meta.get("dtype", "float32")
    if dtype not in _DTYPES:
        raise FormatError(f"{side}: unsupported dtype {dtype!r}")
    payload = path.read_bytes()
    count = int(np.prod(shape, dtype=np.int64))
    if len(payload) != count * _DTYPES[dtype].itemsize:
        raise FormatError(f"{path}: {len(payload)} bytes do not match shape {list(shape)} "
                          f"of {dtype}")
    data = np.frombuffer(payload, dtype=_DTYPES[dtype]).copy()
    return TensorFile(meta.get("name", path.stem), shape, dtype, data)


def load_tensor(path) -> TensorFile:
    """Read a ``.npy`` file or a raw little-endian float file with its sidecar."""
    path = Path(path)
    if path.suffix == ".npy":
        return _read_npy(path)
    return _read_raw(path)


def save_tensor(path, array, name: Optional[str] = None) -> Path:
    """Write ``array`` as NPY v1 (``.npy`` suffix) or raw float + sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(array)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    dtype = "float32" if arr.dtype == np.float32 else "float64"
    arr = arr.astype(_DTYPES[dtype], copy=False)
    if path.suffix == ".npy":
        with open(path, "wb") as fh:
            npy_format.write_array(fh, arr, version=(1, 0), allow_pickle=False)
    else:
        path.write_bytes(arr.tobytes())
        meta = {"name": name or path.stem, "shape": list(arr.shape), "dtype": dtype}
        sidecar_path(path).write_text(json.dumps(meta) + "\n")
    return path


def container_bytes(qt: QuantizedTensor, extra: Optional[dict] = None) -> bytes:
    meta = {
        "layout": qt.layout.to_dict(),
        "shape": list(qt.shape),
        "power_j": qt.power_j,
        "count": len(qt),
        "mode": qt.mode,
        "creator": f"ausn {__version__}",
    }
    if qt.origin_stats:
        meta["origin_stats"] = qt.origin_stats
    if extra:
        meta["extra"] = extra
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(blob)) + blob + pack_arrays(qt.signs, qt.k, qt.layout)


def parse_container(data: bytes) -> QuantizedTensor:
    if len(data) < _HEADER.size:
        raise PayloadError("container shorter than its fixed header")
    magic, version, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version > VERSION or version == 0:
        raise FormatError(f"container version {version} unsupported (this reader handles {VERSION})")
    end = _HEADER.size + meta_len
    if len(data) < end:
        raise PayloadError("metadata truncated")
    try:
        meta = json.loads(data[_HEADER.size:end].decode("utf-8"))
        layout = BitLayout.from_dict(meta["layout"])
        shape = tuple(int(s) for s in meta["shape"])
        count = int(meta["count"])
        power_j = int(meta["power_j"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed container metadata ({exc})") from None
    if count != int(np.prod(shape, dtype=np.int64)):
        raise PayloadError(f"count {count} disagrees with shape {list(shape)}")
    payload = data[end:]
    expected = -(-count * layout.total_bits // 8)
    if len(payload) != expected:
        raise PayloadError(f"payload has {len(payload)} bytes, expected {expected}")
    signs, k = unpack_arrays(payload, count, layout)
    return QuantizedTensor(layout, power_j, shape, signs, k, meta.get("mode", "floor"),
                           meta.get("origin_stats"))


def save_container(path, qt: QuantizedTensor, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.write_bytes(container_bytes(qt, extra))
    return path


def load_container(path) -> QuantizedTensor:
    return parse_container(Path(path).read_bytes())
