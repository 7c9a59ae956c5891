"""Flat binary checkpoints of a solver state.

Layout (little endian): 8-byte magic, uint32 version, uint32 n_h, uint32
n_v, then float64 L, eps, t, theta, followed by the (3, n_h, n_h, n_v/2+1)
complex128 coefficient array in C order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..spectral import Grid
from .state import VelocityState

MAGIC = b"RNSLAB\x00\x01"
VERSION = 1
_HEADER = struct.Struct("<8sIII4d")


def save_checkpoint(path, state: VelocityState, eps: float, theta: float) -> None:
    g = state.grid
    head = _HEADER.pack(MAGIC, VERSION, g.n_h, g.n_v, g.L, eps, state.t, theta)
    with open(Path(path), "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(state.v, dtype="<c16").tobytes())


def load_checkpoint(path) -> tuple[VelocityState, float, float]:
    """Returns ``(state, eps, theta)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("checkpoint truncated in header")
    magic, version, n_h, n_v, L, eps, t, theta = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not an rnslab checkpoint")
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    grid = Grid(n_h, n_v, L)
    shape = (3,) + grid.spectral_shape
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    if body.size != int(np.prod(shape)):
        raise ValueError("checkpoint payload does not match its header")
    return VelocityState(grid, body.reshape(shape).astype(complex), t), eps, theta
