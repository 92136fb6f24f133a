"""Seeded random streams.

All randomness goes through numpy's ``PCG64`` bit generator (PCG-XSL-RR
128/64), which produces the same stream on every platform for a given seed.
Sub-streams for (class, run) pairs are derived by XOR-ing the user seed with
the first 8 bytes (little endian) of ``blake2b(b"cgscore:<class>:<run>")``.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def stream_key(class_id: int, run_index: int) -> int:
    digest = hashlib.blake2b(f"cgscore:{int(class_id)}:{int(run_index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, class_id: int, run_index: int) -> int:
    return (int(seed) & _MASK64) ^ stream_key(class_id, run_index)
