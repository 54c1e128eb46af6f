"""Deterministic random streams.

All randomness comes from the counter-based Philox generator keyed by the
user seed. Two derivations are used:

* ``replica_uniforms``: replica ``r`` owns a fixed-stride window of the
  stream (``stride`` doubles, a multiple of four so windows start on a
  counter boundary), reached with ``advance``. A replica's draws are thus a
  pure function of ``(seed, r)``, whichever block or thread computes them.
* ``block_generator``: block ``b`` gets the stream jumped by ``b * 2**128``
  counter steps (``Philox.jumped``), for samplers whose per-sample draw
  count is not fixed.
"""
from __future__ import annotations

import os

import numpy as np
from numpy.random import Generator, Philox

from .errors import UsageError

_KEY_MASK = (1 << 128) - 1
_U_SHIFT = 2.0**-54  # keeps uniforms in the open interval (0, 1)


def _key(seed: int) -> int:
    seed = int(seed)
    if seed < 0:
        raise UsageError("seeds must be nonnegative integers")
    return seed & _KEY_MASK


def replica_stride(width: int) -> int:
    return max(4, -(-width // 4) * 4)


def replica_uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Open-interval uniforms of shape ``(count, width)`` for replicas ``start..start+count-1``."""
    stride = replica_stride(width)
    bitgen = Philox(key=_key(seed))
    if start:
        bitgen.advance(start * stride // 4)
    u = Generator(bitgen).random(count * stride).reshape(count, stride)[:, :width]
    return u + _U_SHIFT


def block_generator(seed: int, block: int) -> Generator:
    return Generator(Philox(key=_key(seed)).jumped(int(block)))


def worker_count() -> int:
    """Thread cap from ``WALLPERC_THREADS`` (default: CPU count)."""
    raw = os.environ.get("WALLPERC_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise UsageError(f"WALLPERC_THREADS must be an integer, got {raw!r}") from None
        return max(1, value)
    return max(1, os.cpu_count() or 1)
