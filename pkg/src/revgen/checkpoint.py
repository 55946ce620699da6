"""Versioned binary checkpoints with named parameter blocks.

Byte layout (all integers little-endian):

    magic   4 bytes  b"RVGC"
    version u32      currently 1
    meta    u32 length + UTF-8 JSON (sorted keys, compact separators)
    nblocks u32
    block*  name   u16 length + UTF-8
            dtype  u8   0=float32 1=float64 2=int64
            ndim   u8
            dims   u32 * ndim
            data   row-major raw bytes

The JSON meta carries model geometry, training progress and RNG
states.  Serialization is deterministic, so save -> load -> save
round-trips to identical bytes.
"""

import json
import os
import struct

import numpy as np

from .errors import DataError

MAGIC = b"RVGC"
VERSION = 1

_DTYPE_CODES = {"float32": 0, "float64": 1, "int64": 2}
_CODE_DTYPES = {0: "<f4", 1: "<f8", 2: "<i8"}


def save_checkpoint(path, meta, blocks):
    """Write meta (JSON-serializable dict) and named numpy blocks."""
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        meta_bytes = json.dumps(meta, sort_keys=True,
                                separators=(",", ":")).encode("utf-8")
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        names = sorted(blocks)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(blocks[name])
            if arr.dtype.name not in _DTYPE_CODES:
                raise DataError(f"unsupported dtype {arr.dtype} "
                                f"for block {name}")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype.name],
                                 arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype(arr.dtype.newbyteorder("<"),
                                copy=False).tobytes())
    os.replace(tmp, path)


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise DataError(f"truncated checkpoint while reading {what} "
                        f"at offset {fh.tell() - len(data)}")
    return data


def load_checkpoint(path):
    """Read (meta, blocks) back; truncation and bad magic are fatal."""
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise DataError(f"not a checkpoint file: {path}")
        version, = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != VERSION:
            raise DataError(f"checkpoint version {version} not supported "
                            f"(expected {VERSION})")
        meta_len, = struct.unpack("<I", _read_exact(fh, 4, "meta length"))
        meta = json.loads(_read_exact(fh, meta_len, "meta").decode("utf-8"))
        nblocks, = struct.unpack("<I", _read_exact(fh, 4, "block count"))
        blocks = {}
        for _ in range(nblocks):
            nlen, = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, nlen, "name").decode("utf-8")
            code, ndim = struct.unpack("<BB", _read_exact(fh, 2, "header"))
            if code not in _CODE_DTYPES:
                raise DataError(f"unknown dtype code {code} in {name}")
            dims = struct.unpack("<" + "I" * ndim,
                                 _read_exact(fh, 4 * ndim, "dims"))
            dtype = np.dtype(_CODE_DTYPES[code])
            count = int(np.prod(dims)) if ndim else 1
            raw = _read_exact(fh, count * dtype.itemsize, f"data of {name}")
            blocks[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
        extra = fh.read(1)
        if extra:
            raise DataError(f"trailing bytes after checkpoint blocks "
                            f"at offset {fh.tell() - 1}")
    return meta, blocks
