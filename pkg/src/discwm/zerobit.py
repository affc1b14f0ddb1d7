"""Zero-bit watermark: distortion-free binary sampling and score-based detection.

Each watermarked bit is chosen by comparing a keyed uniform draw ``y`` with
the model's ``p_i(1)``: the bit is 1 iff ``y < p_i(1)``. Marginally over the
key this is exactly a sample from the model. The detector sums the scores
``-ln y`` (bit 1) or ``-ln(1 - y)`` (bit 0) over deduplicated positions and
turns the sum into a p-value with the Erlang tail ``Q(count, score)``.
"""

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from ._engine import TextTooShortError, as_bits, global_pvalue, log_pvalue, score_sums, scored_draws, window_bytes
from .prf import SecretKey
from .special import LOG_CLAMP

__all__ = [
    "DEFAULT_ENTROPY_THRESHOLD",
    "EncoderConfig",
    "WatermarkedText",
    "DetectionReport",
    "ScoreAccumulator",
    "TextTooShortError",
    "watermark_bit",
    "score_bit",
    "encode_no_init",
    "encode_with_init",
    "detect_no_init",
    "detect_with_init",
]

SCHEMA_VERSION = 1
# four bits' worth of entropy, in nats
DEFAULT_ENTROPY_THRESHOLD = 4.0 * math.log(2.0)
SCHEMES = ("zerobit-noinit", "zerobit-init", "disc")


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder parameters shared by the zero-bit and multi-bit schemes.

    Parameters
    ----------
    h_bits : int
        Context window length in bits.
    max_bits : int
        Number of bits to generate.
    entropy_threshold : float
        Empirical entropy (nats) the initial chunk must reach before
        watermarking starts. Only used by the encoders with an initial chunk.
    bits_per_token : int, optional
        Token width; only used to report lengths in tokens.
    """

    h_bits: int
    max_bits: int
    entropy_threshold: float = DEFAULT_ENTROPY_THRESHOLD
    bits_per_token: int = 1

    def __post_init__(self):
        if self.h_bits < 1:
            raise ValueError("h_bits must be >= 1")
        if self.max_bits < 1:
            raise ValueError("max_bits must be >= 1")
        if not self.entropy_threshold >= 0:
            raise ValueError("entropy_threshold must be >= 0")
        if self.bits_per_token < 1:
            raise ValueError("bits_per_token must be >= 1")


def _pack(bits):
    return base64.b64encode(np.packbits(bits).tobytes()).decode("ascii")


def _unpack(text, length):
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    return np.unpackbits(raw)[:length].astype(np.uint8)


@dataclass
class WatermarkedText:
    """Output of an encoder.

    ``initial_chunk_len`` is the length ``n`` of the plainly sampled initial chunk
    (0 for the schemes without one). ``watermarked`` is False when the
    entropy gate was never reached, in which case no bit carries a mark.
    """

    bits: np.ndarray
    initial_chunk_len: int
    scheme: str
    payload_bits: int = 0
    message: int = None
    watermarked: bool = True
    per_bit_probabilities: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.bits = as_bits(self.bits)

    @property
    def length_bits(self):
        return int(self.bits.size)

    def bitstring(self):
        return "".join(map(str, self.bits.tolist()))

    def to_dict(self):
        out = {
            "schema_version": SCHEMA_VERSION,
            "bits": _pack(self.bits),
            "n": int(self.initial_chunk_len),
            "length_bits": self.length_bits,
            "scheme": self.scheme,
            "payload_bits": int(self.payload_bits),
            "watermarked": bool(self.watermarked),
        }
        if self.message is not None:
            out["message"] = int(self.message)
        return out

    @classmethod
    def from_dict(cls, data):
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported text artifact schema_version {version}")
        return cls(
            bits=_unpack(data["bits"], int(data["length_bits"])),
            initial_chunk_len=int(data.get("n", 0)),
            scheme=data["scheme"],
            payload_bits=int(data.get("payload_bits", 0)),
            message=data.get("message"),
            watermarked=bool(data.get("watermarked", True)),
        )


@dataclass
class DetectionReport:
    """Result of a detection run. Never contains key material.

    Attributes
    ----------
    is_watermarked : bool
        ``global_p_value <= fpr``.
    global_p_value : float
        p-value corrected for the number of candidate chunk lengths (and
        messages, for the multi-bit decoder).
    p_value : float
        Uncorrected p-value at the selected chunk length.
    n_star : int or None
        Selected initial chunk length (None for the scheme without one).
    best_score : float
        Score sum ``C`` at the selected chunk length.
    dedup_count : int
        Number of distinct (context, bit) positions that were scored.
    n_candidates : int
        Number of chunk lengths tried (``K``).
    """

    is_watermarked: bool
    global_p_value: float
    p_value: float
    n_star: int
    best_score: float
    dedup_count: int
    n_candidates: int
    fpr: float
    scheme: str
    log_p_value: float = 0.0

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION}
        for name, value in self.__dict__.items():
            if isinstance(value, (np.integer,)):
                value = int(value)
            elif isinstance(value, (np.floating,)):
                value = float(value)
            out[name] = value
        return out


def watermark_bit(y, p1):
    """Watermarked bit for draw ``y`` in [0, 1): 1 iff ``y < p1``."""
    return int(y < p1)


def score_bit(w, y):
    """Detector score of bit ``w`` given its draw ``y``.

    ``-ln y`` for a 1 and ``-ln(1 - y)`` for a 0, with the argument clamped
    at ``1e-300`` so the score is always finite.
    """
    arg = y if w else 1.0 - y
    return -math.log(max(arg, LOG_CLAMP))


class ScoreAccumulator:
    """Running score sum over distinct (context, bit) keys.

    Repeated keys contribute nothing, which keeps the null distribution of
    the sum Erlang even when the text repeats itself.
    """

    def __init__(self):
        self._seen = set()
        self.total = 0.0

    def add(self, context_key, bit, score):
        """Add ``score`` unless ``(context_key, bit)`` was seen; return whether it counted."""
        token = (context_key, int(bit))
        if token in self._seen:
            return False
        self._seen.add(token)
        self.total += float(score)
        return True

    @property
    def count(self):
        return len(self._seen)

    def log_p_value(self):
        return log_pvalue(self.count, self.total)

    def p_value(self):
        return math.exp(self.log_p_value())


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def encode_no_init(source, key, config, rng=None):
    """Generate a text where every bit is watermarked (no initial chunk).

    Parameters
    ----------
    source : BitDistributionSource
    key : SecretKey
    config : EncoderConfig
    rng : numpy Generator or seed, optional
        Unused by this scheme; accepted for a uniform encoder signature.

    Returns
    -------
    WatermarkedText
    """
    bits, probs, _, _ = _engine.generate(source, key, config.h_bits, config.max_bits, None, False, 0.0)
    return WatermarkedText(bits, 0, "zerobit-noinit", per_bit_probabilities=probs)


def encode_with_init(source, key, config, rng=None):
    """Generate a text whose plainly sampled initial chunk salts every later draw.

    Bits are sampled from the model until their accumulated ``-ln p(w)``
    reaches ``config.entropy_threshold`` and at least ``h_bits`` bits exist.
    The chunk ``R`` so far is then fixed and every remaining bit is
    watermarked with draws keyed on ``(key, R, window)``. If the gate is never
    reached the text comes back with ``watermarked=False``.
    """
    bits, probs, n, ok = _engine.generate(
        source, key, config.h_bits, config.max_bits, _rng(rng), True, config.entropy_threshold)
    return WatermarkedText(bits, n, "zerobit-init", watermarked=ok, per_bit_probabilities=probs)


def _check_common(key, h_bits, fpr):
    if not isinstance(key, SecretKey):
        raise TypeError("key must be a SecretKey")
    if h_bits < 1:
        raise ValueError("h_bits must be >= 1")
    if not 0.0 < fpr < 1.0:
        raise ValueError("fpr must lie in (0, 1)")


def detect_no_init(bits, key, h_bits, fpr, score_padded=False):
    """Detect the zero-bit watermark generated without an initial chunk.

    Parameters
    ----------
    bits : array-like of {0, 1}
    key : SecretKey
    h_bits : int
    fpr : float
        Target false positive rate.
    score_padded : bool, default False
        Also score the first ``h_bits`` positions, whose windows are partly
        zero padding. By default scoring starts once a full window exists.

    Returns
    -------
    DetectionReport
    """
    _check_common(key, h_bits, fpr)
    bits = as_bits(bits)
    start = 0 if score_padded else h_bits
    if bits.size <= start:
        raise TextTooShortError(f"need more than {start} bits, got {bits.size}")
    windows = window_bytes(bits, h_bits)
    z, w = scored_draws(bits, windows, key, 0, start)
    score = float(score_sums(z, w, [0])[0])
    log_p = log_pvalue(z.size, score)
    p = math.exp(log_p)
    return DetectionReport(p <= fpr, p, p, None, score, int(z.size), 1, fpr, "zerobit-noinit", log_p)


def candidate_chunks(length, h_bits, chunk_lengths=None):
    if chunk_lengths is None:
        cands = list(range(h_bits, length))
    else:
        cands = sorted({int(m) for m in chunk_lengths})
        if any(m < 0 or m >= length for m in cands):
            raise ValueError(f"chunk lengths must lie in [0, {length - 1}]")
    if not cands:
        raise TextTooShortError(f"text of {length} bits leaves no candidate chunk with h={h_bits}")
    return cands


def detect_with_init(bits, key, h_bits, fpr, chunk_lengths=None):
    """Detect the zero-bit watermark that uses an initial chunk.

    Every candidate chunk length ``m`` is tried (by default ``h .. L-1``):
    positions after ``m`` are scored with draws keyed on the first ``m``
    bits, and the most significant ``m`` is kept (smallest ``m`` on ties).
    The global p-value corrects for the ``K`` candidates as
    ``1 - (1 - p)**K``.

    Parameters
    ----------
    bits : array-like of {0, 1}
    key : SecretKey
    h_bits : int
    fpr : float
    chunk_lengths : iterable of int, optional
        Restrict the search, e.g. ``[0]`` to score every position against an
        empty chunk.

    Returns
    -------
    DetectionReport
    """
    _check_common(key, h_bits, fpr)
    bits = as_bits(bits)
    cands = candidate_chunks(bits.size, h_bits, chunk_lengths)
    windows = window_bytes(bits, h_bits)
    best = None
    for m in cands:
        z, w = scored_draws(bits, windows, key, m, m)
        score = float(score_sums(z, w, [0])[0])
        log_p = log_pvalue(z.size, score)
        if best is None or log_p < best[0]:
            best = (log_p, m, score, int(z.size))
    log_p, m, score, count = best
    g = global_pvalue(log_p, len(cands))
    return DetectionReport(g <= fpr, g, math.exp(log_p), m, score, count, len(cands), fpr, "zerobit-init", log_p)
