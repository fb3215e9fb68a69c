"""Binary checkpoints: fixed little-endian header plus raw coefficients.

Layout: magic "SHLB", u32 version, u32 n_z, u32 n_v, f64 L_v, f64 nu,
f64 N, f64 t, u8 frame tag, then n_z*n_v complex coefficients as
little-endian float64 (re, im) pairs in row-major order.  Writes are
atomic (temp file then rename) and round trips are bit-exact.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import ShearlabError
from .spectral import FrequencyGrid, SpectralField

MAGIC = b"SHLB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddddB")
_FRAME_TAGS = {"couette": 0, "general": 1}
_FRAME_NAMES = {v: k for k, v in _FRAME_TAGS.items()}


def write_checkpoint(path, field: SpectralField, t: float, nu: float,
                     N: float, frame: str = "couette") -> None:
    if frame not in _FRAME_TAGS:
        raise ShearlabError(f"unknown frame tag: {frame!r}")
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.n_z, grid.n_v,
                          grid.L_v, nu, N, t, _FRAME_TAGS[frame])
    payload = np.ascontiguousarray(field.coeffs.astype("<c16", copy=False))
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_checkpoint(path) -> tuple[SpectralField, dict]:
    """Returns (field, meta) with meta keys t, nu, N, frame, version."""
    with open(os.fspath(path), "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ShearlabError("checkpoint truncated: short header")
    magic, version, n_z, n_v, L_v, nu, N, t, tag = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ShearlabError("not a checkpoint file: bad magic")
    if version != VERSION:
        raise ShearlabError(f"unsupported checkpoint version {version}")
    if tag not in _FRAME_NAMES:
        raise ShearlabError(f"unknown frame tag byte {tag}")
    expect = _HEADER.size + 16 * n_z * n_v
    if len(blob) != expect:
        raise ShearlabError(
            f"checkpoint truncated: {len(blob)} bytes, expected {expect}")
    coeffs = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size)
    coeffs = coeffs.reshape(n_z, n_v).astype(np.complex128)
    grid = FrequencyGrid(n_z, n_v, L_v)
    meta = {"t": t, "nu": nu, "N": N, "frame": _FRAME_NAMES[tag],
            "version": version}
    return SpectralField(grid, coeffs), meta
