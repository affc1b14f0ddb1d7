"""Keyed uniform draws from the secret key, the initial chunk and the context window.

The PRF is HMAC-SHA256 keyed by the 32-byte secret over the message::

    len(R) as 8-byte big-endian || R packed MSB-first || window packed MSB-first

The first 8 bytes of the tag, read big-endian, give an integer ``z`` and the
draw is ``y = z / 2**64``. Keeping ``z`` as an integer lets every interval
test in the encoders be an exact integer comparison.
"""

import hashlib
import hmac
import json
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TWO_64",
    "SecretKey",
    "context_window",
    "pack_bits",
    "draw_integer",
    "uniform_draw",
    "DrawGenerator",
    "load_known_answers",
    "dump_known_answers",
]

TWO_64 = 1 << 64
KEY_BYTES = 32


@dataclass(frozen=True)
class SecretKey:
    """Opaque 256-bit secret shared by encoder and detector."""

    key_bytes: bytes

    def __post_init__(self):
        if not isinstance(self.key_bytes, (bytes, bytearray)) or len(self.key_bytes) != KEY_BYTES:
            raise ValueError(f"secret key must be exactly {KEY_BYTES} bytes")
        object.__setattr__(self, "key_bytes", bytes(self.key_bytes))

    @property
    def security_parameter(self):
        return 8 * KEY_BYTES

    @classmethod
    def generate(cls):
        return cls(os.urandom(KEY_BYTES))

    @classmethod
    def from_hex(cls, text):
        return cls(bytes.fromhex(text))

    @classmethod
    def from_seed(cls, seed):
        """Derive a key deterministically from an integer seed (simulations only)."""
        return cls(hashlib.sha256(b"discwm-sim-key" + int(seed).to_bytes(16, "big", signed=True)).digest())

    def hex(self):
        return self.key_bytes.hex()

    def __repr__(self):
        # never leak the key through logs or reports
        return "SecretKey(<redacted>)"


def pack_bits(bits):
    """Pack a 0/1 sequence MSB-first, zero-filling the final byte."""
    arr = np.asarray(bits, dtype=np.uint8)
    return np.packbits(arr).tobytes() if arr.size else b""


def context_window(history, h_bits):
    """Return the last ``h_bits`` bits of ``history``, zero-padded on the left."""
    hist = np.asarray(history, dtype=np.uint8)
    if h_bits < 1:
        raise ValueError("context length must be >= 1")
    if hist.size >= h_bits:
        return hist[hist.size - h_bits:]
    return np.concatenate([np.zeros(h_bits - hist.size, dtype=np.uint8), hist])


def _chunk_prefix(initial_chunk):
    chunk = np.asarray(initial_chunk, dtype=np.uint8)
    return int(chunk.size).to_bytes(8, "big") + pack_bits(chunk)


def draw_integer(key, initial_chunk, window):
    """64-bit PRF output ``z`` for (key, R, S); the draw is ``z / 2**64``."""
    msg = _chunk_prefix(initial_chunk) + pack_bits(window)
    return int.from_bytes(hmac.digest(key.key_bytes, msg, "sha256")[:8], "big")


def uniform_draw(key, initial_chunk, window):
    """Uniform draw in [0, 1) for (key, R, S)."""
    return draw_integer(key, initial_chunk, window) / TWO_64


class DrawGenerator:
    """Draw factory with the HMAC state for one (key, R) pair precomputed.

    Detectors evaluate many windows per candidate chunk, so the keyed inner
    state absorbing ``len(R) || R`` is built once and copied per window.
    """

    def __init__(self, key, initial_chunk=()):
        self._base = hmac.new(key.key_bytes, _chunk_prefix(initial_chunk), hashlib.sha256)

    def integer(self, window_bytes):
        mac = self._base.copy()
        mac.update(window_bytes)
        return int.from_bytes(mac.digest()[:8], "big")

    def integers(self, windows_bytes):
        out = np.empty(len(windows_bytes), dtype=np.uint64)
        base = self._base
        for i, wb in enumerate(windows_bytes):
            mac = base.copy()
            mac.update(wb)
            out[i] = int.from_bytes(mac.digest()[:8], "big")
        return out


def _bits_from_str(text):
    return np.array([int(c) for c in text], dtype=np.uint8)


def load_known_answers(path):
    """Read JSON-lines known-answer vectors ``{key_hex, r_bits, context_bits, z_hex}``."""
    vectors = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                vectors.append(json.loads(line))
    return vectors


def dump_known_answers(path, cases):
    """Write known-answer vectors for ``cases`` of (key, r_bits_str, context_bits_str)."""
    with open(path, "w") as fh:
        for key, r_bits, ctx_bits in cases:
            z = draw_integer(key, _bits_from_str(r_bits), _bits_from_str(ctx_bits))
            record = {"key_hex": key.hex(), "r_bits": r_bits, "context_bits": ctx_bits, "z_hex": f"{z:016x}"}
            fh.write(json.dumps(record) + "\n")
