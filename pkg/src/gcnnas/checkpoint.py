"""Versioned binary container of named arrays.

Layout (all integers little-endian):

    magic     8 bytes  b"GCNNAS01"
    version   u32      container format version (currently 1)
    count     u32      number of entries
    entry*    u16 name length | name utf-8 | u8 dtype code | u8 ndim
              | u32 * ndim dims | raw data (little-endian, C order)

Entries are written in sorted-name order so equal contents give equal
bytes. Strings ride along as uint8 arrays via the meta helpers.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ParseError

MAGIC = b"GCNNAS01"
VERSION = 1

_DTYPE_CODES = {0: "<f4", 1: "<f8", 2: "<i8", 3: "u1"}
_CODE_FOR = {np.dtype("float32"): 0, np.dtype("float64"): 1,
             np.dtype("int64"): 2, np.dtype("uint8"): 3}


def write_container(path, entries: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(entries)))
        for name in sorted(entries):
            arr = np.ascontiguousarray(entries[name])
            if arr.dtype not in _CODE_FOR:
                if arr.dtype.kind == "f":
                    arr = arr.astype(np.float64)
                elif arr.dtype.kind in "iu":
                    arr = arr.astype(np.int64)
                else:
                    raise ParseError(f"unsupported dtype {arr.dtype} for entry {name!r}")
            code = _CODE_FOR[arr.dtype]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype(_DTYPE_CODES[code], copy=False).tobytes(order="C"))


def read_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ParseError(f"{path}: bad magic, not a container file")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != VERSION:
        raise ParseError(f"{path}: unsupported container version {version}")
    entries: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            code, ndim = struct.unpack_from("<BB", blob, off)
            off += 2
            if code not in _DTYPE_CODES:
                raise ParseError(f"{path}: unknown dtype code {code}")
            shape = struct.unpack_from(f"<{ndim}I", blob, off)
            off += 4 * ndim
            dtype = np.dtype(_DTYPE_CODES[code])
            numel = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(blob, dtype=dtype, count=numel, offset=off)
            off += numel * dtype.itemsize
            entries[name] = arr.reshape(shape).copy()
    except struct.error as exc:
        raise ParseError(f"{path}: truncated container") from exc
    if off != len(blob):
        raise ParseError(f"{path}: trailing bytes after last entry")
    return entries


def encode_text(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).copy()


def decode_text(arr: np.ndarray) -> str:
    return bytes(np.asarray(arr, dtype=np.uint8)).decode("utf-8")
