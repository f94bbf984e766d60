"""Minimal reader/writer for the NumPy ``.npy`` array format (v1.0 / v2.0).

Only C-ordered, little-endian arrays are supported. Floats (``<f4``, ``<f8``)
are returned as float64; ``<i4``/``<i8`` integers and ``|b1`` booleans are
also accepted so label vectors and masks use the same code path.
"""
from __future__ import annotations

import ast
import struct

import numpy as np

from .exceptions import BadMagic, FortranOrderUnsupported, LengthMismatch, UnsupportedDtype

MAGIC = b"\x93NUMPY"
ALIGN = 64

_READ_DTYPES = {
    "<f4": np.float64,
    "<f8": np.float64,
    "<i4": np.int64,
    "<i8": np.int64,
    "|b1": np.bool_,
    "|u1": np.int64,
}
_WRITE_DTYPES = {"f": "<f8", "i": "<i8", "u": "<i8", "b": "|b1"}


def _parse_header(raw, path):
    try:
        header = ast.literal_eval(raw.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise BadMagic(f"{path}: unreadable header: {exc}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise BadMagic(f"{path}: header must have exactly descr, fortran_order, shape")
    descr = header["descr"]
    if not isinstance(descr, str):
        raise UnsupportedDtype(f"{path}: structured dtypes are not supported")
    if descr not in _READ_DTYPES:
        raise UnsupportedDtype(f"{path}: dtype {descr!r} not supported "
                               f"(expected one of {sorted(_READ_DTYPES)})")
    if header["fortran_order"]:
        raise FortranOrderUnsupported(f"{path}: Fortran-ordered arrays are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise BadMagic(f"{path}: invalid shape {shape!r}")
    return descr, shape


def read_npy(path) -> np.ndarray:
    """Load an array; float32 data is widened to float64."""
    with open(path, "rb") as fh:
        if fh.read(6) != MAGIC:
            raise BadMagic(f"{path}: not a .npy file (magic string missing)")
        version = fh.read(2)
        if version == b"\x01\x00":
            (hlen,) = struct.unpack("<H", fh.read(2))
        elif version == b"\x02\x00":
            (hlen,) = struct.unpack("<I", fh.read(4))
        else:
            raise BadMagic(f"{path}: unsupported format version {tuple(version)}")
        descr, shape = _parse_header(fh.read(hlen), path)
        dtype = np.dtype(descr)
        count = int(np.prod(shape, dtype=np.int64))
        payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise LengthMismatch(f"{path}: expected {count} items, file is truncated")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return arr.astype(_READ_DTYPES[descr])


def header_bytes(descr: str, shape) -> bytes:
    """Magic, version 1.0 and padded header dict for an array of ``shape``."""
    shape = tuple(int(d) for d in shape)
    text = "{'descr': '%s', 'fortran_order': False, 'shape': %r, }" % (descr, shape)
    base = len(MAGIC) + 2 + 2
    # pad with spaces so data starts on a 64-byte boundary; header ends in \n
    pad = -(base + len(text) + 1) % ALIGN
    body = (text + " " * pad + "\n").encode("latin1")
    if len(body) > 0xFFFF:
        raise ValueError("header too large for format version 1.0")
    return MAGIC + b"\x01\x00" + struct.pack("<H", len(body)) + body


def write_npy(path, data, shape=None) -> None:
    """Write ``data`` as a version 1.0, C-ordered ``.npy`` file.

    Floats are written as ``<f8``, integers as ``<i8``, booleans as ``|b1``.
    If ``shape`` is given, ``data`` is treated as a flat vector of that
    shape. Zero-dimensional arrays are rejected.
    """
    arr = np.asarray(data)
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise LengthMismatch(f"{arr.size} values do not fill shape {shape}")
        arr = arr.reshape(shape)
    if arr.ndim == 0:
        raise LengthMismatch("scalar arrays are not supported; use at least 1-D")
    if arr.dtype.kind not in _WRITE_DTYPES:
        raise UnsupportedDtype(f"cannot write dtype {arr.dtype}")
    descr = _WRITE_DTYPES[arr.dtype.kind]
    arr = np.ascontiguousarray(arr, dtype=np.dtype(descr))
    with open(path, "wb") as fh:
        fh.write(header_bytes(descr, arr.shape))
        fh.write(arr.tobytes(order="C"))
