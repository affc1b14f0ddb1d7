"""Statistical special functions used by the detectors and the L_min solvers.

Only integer gamma shapes are supported: every shape that appears in the
watermark statistics is a count of score terms, so the upper regularized
incomplete gamma function reduces to a finite Poisson partial sum.
"""

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "LOG_CLAMP",
    "neg_log",
    "regularized_gamma_q",
    "log_regularized_gamma_q",
    "regularized_gamma_q_inverse",
    "gaussian_tail_q",
    "binary_entropy",
    "second_moment_g",
]

# Floor applied inside -ln(.) so a uniform draw of exactly 0 gives a finite score.
LOG_CLAMP = 1e-300


def neg_log(y):
    """Return ``-ln(max(y, LOG_CLAMP))``; accepts scalars or arrays."""
    if np.ndim(y) == 0:
        return -math.log(max(float(y), LOG_CLAMP))
    return -np.log(np.maximum(np.asarray(y, dtype=float), LOG_CLAMP))


def _check_shape(shape):
    if isinstance(shape, (bool, np.bool_)) or int(shape) != shape:
        raise ValueError(f"gamma shape must be a positive integer, got {shape!r}")
    shape = int(shape)
    if shape < 1:
        raise ValueError(f"gamma shape must be >= 1, got {shape}")
    return shape


@lru_cache(maxsize=64)
def _log_factorials(n):
    # lgamma(j + 1) for j < n, each term computed independently (no running sum)
    return np.array([math.lgamma(j + 1.0) for j in range(n)])


def _log_factorial_table(n):
    # round the cache key up so nearby shapes share one table
    size = 1 << max(6, (n - 1).bit_length())
    return _log_factorials(size)[:n]


def _log_q_scalar(shape, x):
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return -math.inf
    j = np.arange(shape, dtype=float)
    terms = j * math.log(x) - x - _log_factorial_table(shape)
    top = terms.max()
    return float(top + math.log(np.exp(terms - top).sum()))


def log_regularized_gamma_q(shape, x):
    """Natural log of :func:`regularized_gamma_q`, accurate far into the tail."""
    shape = _check_shape(shape)
    if np.ndim(x) > 0:
        arr = np.asarray(x, dtype=float)
        return np.array([log_regularized_gamma_q(shape, v) for v in arr.ravel()]).reshape(arr.shape)
    x = float(x)
    if not x >= 0.0:
        raise ValueError(f"x must be >= 0, got {x}")
    return _log_q_scalar(shape, x)


def regularized_gamma_q(shape, x):
    """Upper regularized incomplete gamma function Q(shape, x) for integer shape.

    Equals the survival function of an Erlang(shape, rate 1) variate, i.e.
    ``exp(-x) * sum(x**j / j! for j < shape)``. The sum is evaluated in
    log space so it stays accurate when ``x`` is large.

    Parameters
    ----------
    shape : int
        Number of unit-rate exponential terms, ``>= 1``.
    x : float or array-like
        Threshold, ``>= 0``.

    Returns
    -------
    float or ndarray
        Tail probability ``Pr{Erlang(shape, 1) > x}``.

    Examples
    --------
    >>> round(regularized_gamma_q(3, 2.0), 6)
    0.676676
    """
    out = log_regularized_gamma_q(shape, x)
    return np.exp(out) if np.ndim(out) > 0 else math.exp(out)


def _log_erlang_pdf(shape, x):
    if x <= 0.0:
        return 0.0 if shape == 1 else -math.inf
    return (shape - 1) * math.log(x) - x - math.lgamma(shape)


def regularized_gamma_q_inverse(shape, p, rtol=1e-13):
    """Return ``x`` such that ``Q(shape, x) == p``.

    Safeguarded Newton iteration on ``ln Q(shape, x) - ln p`` inside a
    bisection bracket that starts at ``[0, shape + 40*sqrt(shape) + 40]``
    and is widened if the target lies further out.
    """
    shape = _check_shape(shape)
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return 0.0
    log_p = math.log(p)

    lo, hi = 0.0, shape + 40.0 * math.sqrt(shape) + 40.0
    while _log_q_scalar(shape, hi) > log_p:
        lo, hi = hi, 2.0 * hi

    # Gaussian guess, clipped into the bracket
    z = math.sqrt(2.0) * _erfcinv(2.0 * p)
    x = min(max(shape + z * math.sqrt(shape), lo), hi)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(200):
        f = _log_q_scalar(shape, x) - log_p
        if f > 0.0:
            lo = x
        else:
            hi = x
        log_pdf = _log_erlang_pdf(shape, x)
        slope = -math.exp(log_pdf - (f + log_p)) if log_pdf > -math.inf else 0.0
        step = f / slope if slope != 0.0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rtol * max(x_new, 1.0) or hi - lo <= rtol * max(hi, 1.0):
            return x_new
        x = x_new
    return x


def _erfcinv(y):
    # rough inverse of erfc for the starting guess only
    y = min(max(y, 1e-300), 2.0 - 1e-16)
    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian_tail_q(x):
    """Standard normal upper tail ``Pr{N(0,1) > x}``."""
    if np.ndim(x) > 0:
        return 0.5 * np.vectorize(math.erfc, otypes=[float])(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return 0.5 * math.erfc(float(x) / math.sqrt(2.0))


def _xlogx_pow(p, power):
    # p * (ln p)**power with the 0 * ln 0 = 0 convention
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * np.log(p) ** power
    return np.where(p > 0.0, out, 0.0)


def _check_prob(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ValueError("probability arguments must lie in [0, 1]")
    return arr


def _symmetric(p, power):
    arr = _check_prob(p)
    q = 1.0 - arr
    a = np.minimum(arr, q)
    b = np.maximum(arr, q)
    out = _xlogx_pow(a, power) + _xlogx_pow(b, power)
    return float(out) if np.ndim(p) == 0 else out


def binary_entropy(p):
    """Binary entropy in nats, ``-p ln p - (1-p) ln(1-p)``."""
    return -_symmetric(p, 1) + 0.0


def second_moment_g(p):
    """``p ln^2 p + (1-p) ln^2 (1-p)``, the extra term in the watermarked score's second moment."""
    return _symmetric(p, 2)
