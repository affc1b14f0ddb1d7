"""Minimum text length needed to meet a false positive / false negative target.

Each solver looks for the smallest length ``L`` (in bits) at which a
Gaussian bound on the miss probability drops to ``fnr`` while the detection
threshold holds the false positive rate at ``fpr``. The watermarked score sum
over ``k`` positions is modelled as normal with mean ``k (1 + zeta_b)`` and
standard deviation ``1.5 sqrt(k)``. Closed-form approximations are returned
alongside the exact search.
"""

import math
from dataclasses import dataclass

from .special import gaussian_tail_q, regularized_gamma_q_inverse

__all__ = ["LminSolution", "lmin_no_init", "lmin_with_init", "disc_lmin", "approximation_factor"]

SCORE_STD_FACTOR = 1.5
MAX_LENGTH = 1 << 26


@dataclass(frozen=True)
class LminSolution:
    """Exact and approximate minimum lengths.

    Attributes
    ----------
    exact_bits : int
        Smallest ``L`` whose miss bound is ``<= fnr``.
    exact_tokens : int
        ``exact_bits`` rounded up to whole tokens.
    approx_bits : float
        Closed-form approximation of ``exact_bits``.
    approx_tokens : int
        ``approx_bits`` rounded up to whole tokens.
    chunk_len : int
        Initial chunk length ``n`` (0 without one).
    bound_at_exact, bound_below : float
        Miss bound at ``exact_bits`` and at ``exact_bits - 1`` (nan when
        ``exact_bits - 1`` is outside the domain).
    """

    exact_bits: int
    exact_tokens: int
    approx_bits: float
    approx_tokens: int
    chunk_len: int
    vocab_bits: int
    bound_at_exact: float
    bound_below: float

    @property
    def watermarked_bits(self):
        return self.exact_bits - self.chunk_len

    @property
    def approx_watermarked_bits(self):
        return self.approx_bits - self.chunk_len

    def to_dict(self):
        d = dict(self.__dict__)
        d["watermarked_bits"] = self.watermarked_bits
        return d


def approximation_factor(fpr, fnr):
    """``sqrt(2 ln(1/(2 fpr))) + sqrt(4.4 ln(1/(2 fnr)))``."""
    return math.sqrt(2.0 * math.log(1.0 / (2.0 * fpr))) + math.sqrt(4.4 * math.log(1.0 / (2.0 * fnr)))


def _validate(zeta_b, fpr, fnr, vocab_bits):
    if not 0.0 < zeta_b <= math.log(2.0) + 1e-12:
        raise ValueError("zeta_b must lie in (0, ln 2]")
    for name, v in (("fpr", fpr), ("fnr", fnr)):
        if not 0.0 < v < 0.5:
            raise ValueError(f"{name} must lie in (0, 0.5)")
    if vocab_bits < 1:
        raise ValueError("vocab_bits must be >= 1")


def _miss_bound(k, zeta_b, alpha, n_messages=1):
    """Gaussian miss bound for ``k`` watermarked positions at per-test level ``alpha``."""
    theta = regularized_gamma_q_inverse(k, alpha)
    mean = k * (1.0 + zeta_b)
    tail = gaussian_tail_q((theta - mean) / (SCORE_STD_FACTOR * math.sqrt(k)))
    if n_messages == 1:
        return 1.0 - tail
    # chance that some wrong message outscores the true one, union-bounded
    log_mult = math.log(n_messages - 1) + math.log(k) - k * math.log(2.0)
    mult = 1.0 + math.exp(log_mult) if log_mult < 700 else math.inf
    return max(0.0, 1.0 - mult * tail)


def _smallest(bound, lo, fnr):
    """Smallest integer ``L >= lo`` with ``bound(L) <= fnr``: gallop, then bisect."""
    if bound(lo) <= fnr:
        return lo
    fail, step = lo, 1
    while True:
        probe = fail + step
        if probe > MAX_LENGTH:
            raise ValueError("no feasible length below the search limit")
        if bound(probe) <= fnr:
            ok = probe
            break
        fail, step = probe, 2 * step
    while ok - fail > 1:
        mid = (ok + fail) // 2
        if bound(mid) <= fnr:
            ok = mid
        else:
            fail = mid
    return ok


def _tokens(bits, vocab_bits):
    return int(math.ceil(bits / vocab_bits - 1e-12))


def _fixed_point(fn, start, tol=1e-9, max_iter=500):
    x = start
    for _ in range(max_iter):
        nxt = fn(x)
        if abs(nxt - x) <= tol * max(1.0, abs(x)):
            return nxt
        x = nxt
    return x


def lmin_no_init(zeta_b, fpr, fnr, vocab_bits=1):
    """Minimum length for the zero-bit scheme without an initial chunk.

    Parameters
    ----------
    zeta_b : float
        Average binary entropy per bit, in nats, in ``(0, ln 2]``.
    fpr, fnr : float
        Target false positive and false negative rates.
    vocab_bits : int
        Bits per token, for the token counts.

    Returns
    -------
    LminSolution
    """
    _validate(zeta_b, fpr, fnr, vocab_bits)

    def bound(length):
        return _miss_bound(length, zeta_b, fpr)

    exact = _smallest(bound, 1, fnr)
    approx = approximation_factor(fpr, fnr) ** 2 / zeta_b ** 2
    below = bound(exact - 1) if exact > 1 else math.nan
    return LminSolution(exact, _tokens(exact, vocab_bits), approx, _tokens(approx, vocab_bits), 0, vocab_bits,
                        bound(exact), below)


def _chunked(zeta_b, fpr, fnr, vocab_bits, chunk_len, h_bits, n_messages):
    _validate(zeta_b, fpr, fnr, vocab_bits)
    if h_bits < 1 or chunk_len < h_bits:
        raise ValueError("need 1 <= h_bits <= chunk_len")

    def bound(length):
        k_cand = length - h_bits
        alpha = -math.expm1(math.log1p(-fpr) / k_cand) / n_messages
        gate = math.exp((k_cand - 1) / k_cand * math.log1p(-fpr))
        return gate * _miss_bound(length - chunk_len, zeta_b, alpha, n_messages)

    lo = chunk_len + 1
    exact = _smallest(bound, lo, fnr)
    f1 = approximation_factor
    approx = chunk_len + _fixed_point(
        lambda k: f1(fpr / (n_messages * (chunk_len + k)), fnr) ** 2 / zeta_b ** 2,
        f1(fpr, fnr) ** 2 / zeta_b ** 2)
    below = bound(exact - 1) if exact - 1 >= lo else math.nan
    return LminSolution(exact, _tokens(exact, vocab_bits), approx, _tokens(approx, vocab_bits), chunk_len, vocab_bits,
                        bound(exact), below)


def lmin_with_init(zeta_b, fpr, fnr, vocab_bits, chunk_len, h_bits=None):
    """Minimum length for the zero-bit scheme with an initial chunk of ``chunk_len`` bits.

    The detector tries ``L - h`` chunk lengths, so each test runs at
    ``1 - (1 - fpr)**(1/(L-h))`` and only ``L - chunk_len`` bits carry the
    mark. The approximation solves ``L - n = f1(fpr/L, fnr)**2 / zeta_b**2``
    by fixed-point iteration. ``h_bits`` defaults to ``chunk_len // 3``.

    Returns
    -------
    LminSolution
        ``watermarked_bits`` gives ``L - chunk_len``.
    """
    if h_bits is None:
        h_bits = max(1, chunk_len // 3)
    return _chunked(zeta_b, fpr, fnr, vocab_bits, chunk_len, h_bits, 1)


def disc_lmin(zeta_b, fpr, fnr, vocab_bits, chunk_len, payload_bits, h_bits=None):
    """Minimum length for the multi-bit scheme carrying ``payload_bits`` bits.

    Like :func:`lmin_with_init` with the per-test level divided by ``|M|``
    and the miss bound widened for the chance that a wrong message wins.
    ``h_bits`` defaults to ``chunk_len // 3``.
    """
    if h_bits is None:
        h_bits = max(1, chunk_len // 3)
    if payload_bits < 0:
        raise ValueError("payload_bits must be >= 0")
    return _chunked(zeta_b, fpr, fnr, vocab_bits, chunk_len, h_bits, 1 << payload_bits)
