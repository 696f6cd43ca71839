"""Packed sifted-key dump.

Layout: 7-byte magic ``b"QKDBITS"``, 1-byte format version, 8-byte
little-endian bit count, then the bits packed MSB-first and zero-padded to a
whole byte.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"QKDBITS"
VERSION = 1
HEADER = struct.Struct("<7sBQ")


def write_bits(path, bits) -> int:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise ValueError("key bits must be 0 or 1")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, arr.size))
        fh.write(np.packbits(arr, bitorder="big").tobytes())
    return arr.size


def read_bits(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError("truncated key file header")
        magic, version, count = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError("not a sifted-key file")
        if version != VERSION:
            raise ValueError(f"unsupported key file version {version}")
        payload = np.frombuffer(fh.read(), dtype=np.uint8)
    if payload.size != (count + 7) // 8:
        raise ValueError("key file length does not match its bit count")
    return np.unpackbits(payload, bitorder="big")[:count]
