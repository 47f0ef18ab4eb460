"""Binary image/sinogram files, chain CSV files and 16-bit PGM export.

Binary layout (all little-endian)::

    magic   4 bytes   b"CTSG" (sinogram) or b"CTIM" (image)
    version u32       1
    dim0    u32       n_angles (sinogram) or image rows
    dim1    u32       n_detector (sinogram) or image columns
    payload float64   dim0 * dim1 values, row-major
"""

from __future__ import annotations

import csv
import os
import re
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FormatError",
    "ChainRecords",
    "ChainWriter",
    "write_sinogram",
    "read_sinogram",
    "write_image",
    "read_image",
    "write_chain",
    "read_chain",
    "write_pgm",
    "read_pgm",
    "CHAIN_HEADER",
]

SINOGRAM_MAGIC = b"CTSG"
IMAGE_MAGIC = b"CTIM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
CHAIN_HEADER = ("iter", "lambda", "delta", "c", "mh_accepts")


class FormatError(ValueError):
    """Malformed or inconsistent file contents."""


def _write_array(path, magic, arr):
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, VERSION, arr.shape[0], arr.shape[1]))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _read_array(path, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got, version, d0, d1 = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = d0 * d1 * 8
    payload = raw[_HEADER.size:]
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise FormatError(f"{path}: payload longer than header declares")
    return np.frombuffer(payload, dtype="<f8").reshape(d0, d1).astype(np.float64)


def write_sinogram(path, sino):
    _write_array(path, SINOGRAM_MAGIC, sino)


def read_sinogram(path) -> np.ndarray:
    return _read_array(path, SINOGRAM_MAGIC)


def write_image(path, img):
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"images are square, got shape {img.shape}")
    _write_array(path, IMAGE_MAGIC, img)


def read_image(path) -> np.ndarray:
    img = _read_array(path, IMAGE_MAGIC)
    if img.shape[0] != img.shape[1]:
        raise FormatError(f"{path}: image is not square {img.shape}")
    return img


@dataclass
class ChainRecords:
    """Scalar per-iteration records of a Gibbs chain."""

    iter: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    c: np.ndarray
    mh_accepts: np.ndarray

    def __len__(self):
        return len(self.iter)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, np.int64))

    def __eq__(self, other):
        if not isinstance(other, ChainRecords):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("iter", "lam", "delta", "c", "mh_accepts"))


def _format_row(it, lam, delta, c, acc):
    return f"{int(it)},{lam:.17g},{delta:.17g},{c:.17g},{int(acc)}\n"


class ChainWriter:
    """Append chain rows to a CSV file, flushing after every row."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(CHAIN_HEADER) + "\n")
        self._fh.flush()

    def write(self, it, lam, delta, c, acc):
        self._fh.write(_format_row(it, lam, delta, c, acc))
        self._fh.flush()

    def close(self):
        if not self._fh.closed:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_chain(path, records: ChainRecords):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CHAIN_HEADER) + "\n")
        for row in zip(records.iter, records.lam, records.delta, records.c, records.mh_accepts):
            fh.write(_format_row(*row))


def read_chain(path) -> ChainRecords:
    """Read a chain CSV; a trailing partially written line is dropped."""
    with open(path, newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or lines[0].strip() != ",".join(CHAIN_HEADER):
        raise FormatError(f"{path}: missing or wrong chain header")
    complete = lines[1:-1] if not text.endswith("\n") else lines[1:]
    rows = [r for r in csv.reader(complete) if r]
    cols = list(zip(*rows)) if rows else [()] * 5
    try:
        it = np.array(cols[0], dtype=np.int64)
        lam = np.array(cols[1], dtype=np.float64)
        delta = np.array(cols[2], dtype=np.float64)
        c = np.array(cols[3], dtype=np.float64)
        acc = np.array(cols[4], dtype=np.int64)
    except (ValueError, IndexError) as err:
        raise FormatError(f"{path}: corrupt chain row ({err})") from err
    if any(len(r) != 5 for r in rows):
        raise FormatError(f"{path}: chain row with wrong column count")
    return ChainRecords(it, lam, delta, c, acc)


def write_pgm(path, img, scale: bool = True):
    """Write a binary 16-bit PGM (P5).

    With ``scale=True`` values are clipped at zero and scaled so the maximum
    maps to 65535; otherwise `img` must already hold integers in [0, 65535].
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    if scale:
        img = np.clip(img, 0.0, None)
        peak = img.max() if img.size else 0.0
        data = np.zeros(img.shape) if peak <= 0 else np.rint(img / peak * 65535.0)
    else:
        data = img
    data = data.astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if m is None:
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    payload = raw[m.end():]
    need = w * h * np.dtype(dtype).itemsize
    if len(payload) < need:
        raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload[:need], dtype=dtype).reshape(h, w).astype(np.int64)
