"""Multi-bit watermarking by cyclically shifting the sampling interval.

A message ``M`` with ``payload_bits`` bits selects the shift
``delta_M = M / 2**payload_bits``. The encoder emits a 1 iff the keyed draw
lands in the length-``p1`` interval starting at ``delta_M`` (wrapping around
1), which keeps every message distortion-free. The decoder recomputes the
draws once per candidate chunk and tries every shift, or a coarse grid
followed by a local refinement.
"""

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from . import _engine
from ._engine import as_bits, global_pvalue, log_pvalue, score_sums, scored_draws, window_bytes
from .special import LOG_CLAMP, binary_entropy, gaussian_tail_q, regularized_gamma_q, second_moment_g
from .zerobit import DetectionReport, EncoderConfig, WatermarkedText, _check_common, _rng, candidate_chunks

__all__ = [
    "DiscConfig",
    "DiscDetectionReport",
    "disc_map_bit",
    "disc_score_bit",
    "disc_encode",
    "disc_decode_exhaustive",
    "disc_decode_fast",
    "disc_pvalue_floor",
    "conditional_score_moments",
]

MAX_PAYLOAD_BITS = 32


@dataclass(frozen=True)
class DiscConfig:
    """Message space and fast-search settings.

    Parameters
    ----------
    payload_bits : int
        Message length ``m``; messages are ``0 .. 2**m - 1``.
    coarse_grid_size : int, optional
        Number of equally spaced shifts tried first by the fast decoder.
        Defaults to ``min(16, 2**m)``; must be a power of two.
    refine_radius : int
        Half-width, in coarse cells, of the window searched exhaustively
        around the best coarse shift.
    enforce_floor : bool, default False
        Force the global p-value to 1 whenever the best p-value exceeds the
        validity floor of :func:`disc_pvalue_floor`. The ``|M| p`` union
        bound stays a valid (conservative) upper bound either way, and for
        ``payload_bits >= 2`` the floor is tiny enough that enforcing it
        rejects nearly every text.
    """

    payload_bits: int
    coarse_grid_size: int = None
    refine_radius: int = 1
    enforce_floor: bool = False

    def __post_init__(self):
        if not 0 <= self.payload_bits <= MAX_PAYLOAD_BITS:
            raise ValueError(f"payload_bits must lie in [0, {MAX_PAYLOAD_BITS}]")
        size = self.message_space_size
        if self.coarse_grid_size is None:
            object.__setattr__(self, "coarse_grid_size", min(16, size))
        g = self.coarse_grid_size
        if g < 1 or g > size or g & (g - 1):
            raise ValueError("coarse_grid_size must be a power of two between 1 and 2**payload_bits")
        if self.refine_radius < 0:
            raise ValueError("refine_radius must be >= 0")

    @property
    def message_space_size(self):
        return 1 << self.payload_bits

    @property
    def delta(self):
        return 2.0 ** -self.payload_bits

    def shift(self, message):
        """Integer shift on the 2**64 grid for ``message``."""
        self.check_message(message)
        return _engine.shift_integer(message, self.payload_bits)

    def delta_of(self, message):
        self.check_message(message)
        return message / self.message_space_size

    def check_message(self, message):
        if not 0 <= int(message) < self.message_space_size:
            raise ValueError(f"message {message} outside [0, {self.message_space_size})")


@dataclass
class DiscDetectionReport(DetectionReport):
    """Detection report of the multi-bit decoder.

    ``m_star`` and ``delta_star`` are the decoded message and its shift.
    ``search_evaluations`` counts score sums computed, one per (chunk length,
    message hypothesis). ``floor_binding`` is set when the best p-value lies
    above the validity floor ``p_min``, where the ``|M|`` correction is only
    an upper bound; with ``enforce_floor`` the global p-value is then 1.
    """

    m_star: int = 0
    delta_star: float = 0.0
    payload_bits: int = 0
    search_evaluations: int = 0
    p_min: float = 1.0
    floor_binding: bool = False
    strategy: str = "exhaustive"


def disc_map_bit(p1, delta_m, y):
    """Bit emitted for draw ``y`` under shift ``delta_m``.

    1 iff ``y`` lies in ``[delta_m, delta_m + p1)`` taken modulo 1.

    >>> disc_map_bit(0.7, 0.5, 0.1)  # the interval wraps past 1
    1
    """
    # exact rational arithmetic on the float inputs, so endpoints never flip
    return int((Fraction(y) - Fraction(delta_m)) % 1 < Fraction(p1))


def disc_score_bit(w, y, delta):
    """Score of bit ``w`` with draw ``y`` under the hypothesis shift ``delta``.

    The zero-bit score applied to the cyclically shifted draw
    ``(y - delta) mod 1``.
    """
    y_shift = y - delta
    if y_shift < 0.0:
        y_shift += 1.0
    arg = y_shift if w else 1.0 - y_shift
    return -math.log(max(arg, LOG_CLAMP))


def conditional_score_moments(p1, diff):
    """First and second moments of a watermarked bit's score under a wrong shift.

    Parameters
    ----------
    p1 : float
        ``p_i(1)`` of the position.
    diff : float
        ``delta_{M'} - delta_M`` in ``(-1, 1)``: decoder shift minus encoder shift.

    Returns
    -------
    (float, float)
        ``E[s]`` and ``E[s**2]`` over the uniform draw.
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    if not -1.0 < diff < 1.0:
        raise ValueError("diff must lie in (-1, 1)")
    p0 = 1.0 - p1
    if diff >= p1:
        a, b = diff, diff - p1
    elif diff >= 0.0:
        a, b = diff, p1 - diff
    elif diff >= -p0:
        a, b = -diff, p1 - diff
    else:
        a, b = -diff, -p0 - diff
    h_a, h_b = binary_entropy(a), binary_entropy(b)
    mean = 1.0 - h_a + h_b
    second = 2.0 - second_moment_g(a) - 2.0 * h_a + second_moment_g(b) + 2.0 * h_b
    return mean, second


def disc_encode(source, key, config, disc, message, rng=None, random_init=True):
    """Generate a text carrying ``message``.

    Same control flow as the zero-bit encoder with an initial chunk, except
    that each watermarked bit uses the shifted interval of ``message``. With
    ``random_init=False`` every bit is watermarked against an empty chunk.

    Parameters
    ----------
    source : BitDistributionSource
    key : SecretKey
    config : EncoderConfig
    disc : DiscConfig
    message : int
    rng : numpy Generator or seed, optional
        Randomness for the plainly sampled initial chunk.
    random_init : bool, default True

    Returns
    -------
    WatermarkedText
    """
    shift = disc.shift(message)
    bits, probs, n, ok = _engine.generate(
        source, key, config.h_bits, config.max_bits, _rng(rng), random_init, config.entropy_threshold, shift)
    return WatermarkedText(bits, n, "disc", disc.payload_bits, int(message), ok, probs)


def disc_pvalue_floor(length, h_bits, payload_bits, approximate=False):
    """Largest p-value at which the ``|M| p`` message correction is exact.

    Below the score threshold ``k m ln 2`` on ``k`` positions the events
    "message ``M'`` scores above threshold" overlap, so ``|M| p`` only bounds
    the null probability from above. The floor is the smallest
    ``Q(k, k m ln 2)`` over ``k = 1 .. L-h``.

    Parameters
    ----------
    length : int
        Text length ``L`` in bits.
    h_bits : int
        Smallest candidate chunk length; ``k`` ranges up to ``length - h_bits``.
    payload_bits : int
    approximate : bool, default False
        Return the Gaussian form ``Q(sqrt(L-h) (m ln2 - 1))`` instead.

    Returns
    -------
    float
    """
    k = int(length) - int(h_bits)
    if k < 1:
        raise ValueError("length must exceed h_bits")
    if payload_bits == 0:
        return 1.0
    rate = payload_bits * math.log(2.0)
    if approximate:
        return float(gaussian_tail_q(math.sqrt(k) * (rate - 1.0)))
    # Q(k, c k) is monotone in k (decreasing for c > 1, increasing for c < 1),
    # so the minimum sits at one end of the range
    return float(min(regularized_gamma_q(1, rate), regularized_gamma_q(k, k * rate)))


def _h_bits(cfg):
    return cfg.h_bits if isinstance(cfg, EncoderConfig) else int(cfg)


def _all_shifts(disc, messages):
    return np.asarray(messages, dtype=np.uint64) << np.uint64(64 - disc.payload_bits) if disc.payload_bits else \
        np.zeros(len(messages), dtype=np.uint64)


def _search_exhaustive(z, w, disc):
    messages = np.arange(disc.message_space_size)
    sums = score_sums(z, w, _all_shifts(disc, messages))
    best = int(np.argmax(sums))
    return best, float(sums[best]), messages.size


def _search_fast(z, w, disc):
    size = disc.message_space_size
    step = size // disc.coarse_grid_size
    coarse = np.arange(0, size, step)
    sums = dict(zip(coarse.tolist(), score_sums(z, w, _all_shifts(disc, coarse)).tolist()))
    centre = max(sums, key=lambda m: (sums[m], -m))
    reach = disc.refine_radius * step
    window = sorted({(centre + j) % size for j in range(-reach, reach + 1)} - sums.keys())
    if window:
        sums.update(zip(window, score_sums(z, w, _all_shifts(disc, window)).tolist()))
    best = max(sums, key=lambda m: (sums[m], -m))
    return best, sums[best], len(sums)


def _decode(bits, key, cfg, disc, fpr, chunk_lengths, strategy):
    h = _h_bits(cfg)
    _check_common(key, h, fpr)
    bits = as_bits(bits)
    cands = candidate_chunks(bits.size, h, chunk_lengths)
    windows = window_bytes(bits, h)
    search = _search_fast if strategy == "fast" else _search_exhaustive
    best = None
    evaluations = 0
    for m in cands:
        z, w = scored_draws(bits, windows, key, m, m)
        message, score, n_eval = search(z, w, disc)
        evaluations += n_eval
        log_p = log_pvalue(z.size, score)
        # candidates run in increasing m and each search returns the smallest
        # maximizing message, so a strict comparison gives the (p, m, M') order
        if best is None or log_p < best[0]:
            best = (log_p, m, message, score, int(z.size))
    log_p, m, message, score, count = best
    p = math.exp(log_p)
    p_min = disc_pvalue_floor(bits.size, cands[0], disc.payload_bits)
    binding = p > p_min
    if binding and disc.enforce_floor:
        g = 1.0
    else:
        g = global_pvalue(log_p, len(cands), disc.message_space_size)
    return DiscDetectionReport(
        is_watermarked=g <= fpr, global_p_value=g, p_value=p, n_star=m, best_score=score, dedup_count=count,
        n_candidates=len(cands), fpr=fpr, scheme="disc", log_p_value=log_p, m_star=int(message),
        delta_star=message / disc.message_space_size, payload_bits=disc.payload_bits, search_evaluations=evaluations,
        p_min=p_min, floor_binding=bool(binding), strategy=strategy)


def disc_decode_exhaustive(bits, key, cfg, disc, fpr, chunk_lengths=None):
    """Decode by trying every message for every candidate chunk length.

    Parameters
    ----------
    bits : array-like of {0, 1}
    key : SecretKey
    cfg : EncoderConfig or int
        Encoder configuration, or just the context length ``h_bits``.
    disc : DiscConfig
    fpr : float
    chunk_lengths : iterable of int, optional
        Candidate chunk lengths; default ``h .. L-1``. ``[0]`` scores every
        position against an empty chunk.

    Returns
    -------
    DiscDetectionReport
    """
    return _decode(bits, key, cfg, disc, fpr, chunk_lengths, "exhaustive")


def disc_decode_fast(bits, key, cfg, disc, fpr, chunk_lengths=None):
    """Decode with a coarse grid of shifts refined around the best one.

    For each chunk length, ``disc.coarse_grid_size`` equally spaced messages
    are scored; every message within ``disc.refine_radius`` coarse cells of
    the best is then scored as well. Arguments as for
    :func:`disc_decode_exhaustive`.
    """
    return _decode(bits, key, cfg, disc, fpr, chunk_lengths, "fast")
