"""Shared machinery for the encoders and detectors.

Draws stay as 64-bit integers ``z`` (``y = z / 2**64``) and message shifts as
integers ``M << (64 - payload_bits)``, so both the mapping rule and the
cyclic shift are exact integer operations.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .prf import TWO_64, DrawGenerator, context_window, pack_bits
from .special import LOG_CLAMP, log_regularized_gamma_q

INV_TWO_64 = 2.0 ** -64
MASK_64 = TWO_64 - 1


class TextTooShortError(ValueError):
    """Raised when a text has no position the detector can score."""


def one_threshold(p1):
    """Smallest integer ``T`` with ``z < T  <=>  z / 2**64 < p1`` for integer ``z``."""
    return math.ceil(math.ldexp(float(p1), 64))


def shift_integer(message, payload_bits):
    """Integer form of the shift ``message / 2**payload_bits`` on the 2**64 grid."""
    if payload_bits == 0:
        return 0
    return int(message) << (64 - payload_bits)


def map_bit(z, p1, shift=0):
    """Bit emitted for draw ``z``: 1 iff the shifted draw falls in the length-``p1`` interval."""
    return int(((z - shift) & MASK_64) < one_threshold(p1))


def as_bits(bits):
    arr = np.asarray(bits)
    if arr.dtype.kind in "US":
        arr = np.array([int(c) for c in "".join(arr.ravel().tolist())], dtype=np.uint8)
    arr = np.asarray(arr, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("bit strings may only contain 0 and 1")
    return arr.astype(np.uint8)


def window_bytes(bits, h):
    """Packed context window preceding every position of ``bits`` (left zero-padded)."""
    padded = np.concatenate([np.zeros(h, dtype=np.uint8), bits])
    windows = sliding_window_view(padded, h)[: bits.size]
    packed = np.packbits(windows, axis=1)
    return [row.tobytes() for row in packed]


def draw_for_position(key, chunk, history, h):
    return DrawGenerator(key, chunk).integer(pack_bits(context_window(history, h)))


def dedup_positions(bits, windows, start):
    """Positions ``>= start`` whose (window, bit) pair has not been seen before."""
    seen = set()
    keep = []
    for i in range(start, bits.size):
        token = (windows[i], int(bits[i]))
        if token not in seen:
            seen.add(token)
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def scored_draws(bits, windows, key, chunk_len, start):
    """Draw integers and bits for the deduplicated positions of one candidate chunk."""
    positions = dedup_positions(bits, windows, start)
    gen = DrawGenerator(key, bits[:chunk_len])
    z = gen.integers([windows[i] for i in positions])
    return z, bits[positions].astype(bool)


def shifted_scores(z, w, shift=0):
    """Per-position scores after cyclically shifting the draws down by ``shift``."""
    zs = z - np.uint64(shift) if shift else z
    # 2**64 - zs, exact in uint64 except zs == 0 where the true value 2**64 wraps to 0
    comp = (np.uint64(0) - zs).astype(float)
    comp[zs == 0] = 2.0 ** 64
    y = zs.astype(float) * INV_TWO_64
    one_minus_y = comp * INV_TWO_64
    arg = np.where(w, y, one_minus_y)
    return -np.log(np.maximum(arg, LOG_CLAMP))


def score_sums(z, w, shifts, block=64):
    """Score sums ``C`` for every integer shift in ``shifts``."""
    shifts = np.asarray(shifts, dtype=np.uint64)
    out = np.empty(shifts.size)
    if z.size == 0:
        out[:] = 0.0
        return out
    for lo in range(0, shifts.size, block):
        sh = shifts[lo:lo + block]
        zs = z[None, :] - sh[:, None]
        comp = (np.uint64(0) - zs).astype(float)
        comp[zs == 0] = 2.0 ** 64
        arg = np.where(w[None, :], zs.astype(float), comp) * INV_TWO_64
        out[lo:lo + block] = -np.log(np.maximum(arg, LOG_CLAMP)).sum(axis=1)
    return out


def log_pvalue(count, score):
    """``ln Q(count, score)``: log p-value of a dedup'd score sum under the null."""
    if count < 1:
        return 0.0
    return log_regularized_gamma_q(count, max(float(score), 0.0))


def global_pvalue(log_p, n_candidates, n_messages=1):
    """``1 - (1 - |M| p)**K`` evaluated stably; 1 when ``|M| p >= 1``."""
    q = n_messages * math.exp(log_p)
    if q >= 1.0:
        return 1.0
    return float(-math.expm1(n_candidates * math.log1p(-q)))


def generate(source, key, h, max_bits, rng, random_init, entropy_threshold, shift=0):
    """Sample ``max_bits`` bits, watermarking every bit after the initial chunk.

    Returns ``(bits, probabilities, chunk_len, watermarked)``. With
    ``random_init`` the first bits are sampled plainly until their empirical
    entropy reaches ``entropy_threshold`` nats and at least ``h`` bits exist;
    if that never happens ``watermarked`` is False and ``chunk_len`` is the
    whole text.
    """
    bits = np.zeros(max_bits, dtype=np.uint8)
    probs = np.zeros(max_bits)
    sampling = bool(random_init)
    chunk_len = 0
    gen = None if sampling else DrawGenerator(key, bits[:0])
    entropy = 0.0
    for t in range(max_bits):
        p = float(source.next_bit_probability(bits[:t]))
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"source returned probability {p} outside [0, 1]")
        probs[t] = p
        if sampling:
            w = int(rng.random() < p)
            entropy -= math.log(p if w else 1.0 - p)
            bits[t] = w
            if entropy >= entropy_threshold and t + 1 >= h:
                sampling = False
                chunk_len = t + 1
                gen = DrawGenerator(key, bits[:chunk_len])
        else:
            z = gen.integer(pack_bits(context_window(bits[:t], h)))
            bits[t] = map_bit(z, p, shift)
    if sampling:
        chunk_len = max_bits
    return bits, probs, chunk_len, not sampling
