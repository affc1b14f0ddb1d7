"""Input checks shared by the estimator wrappers and the CLI."""

import numpy as np

from ._engine import as_bits
from .prf import SecretKey


def check_texts(X):
    """Return ``X`` as a list of 0/1 uint8 arrays (one per text)."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [as_bits(row) for row in X]
    if isinstance(X, (str, bytes)) or np.ndim(X) == 1 and len(X) and np.isscalar(X[0]) and not isinstance(X[0], str):
        raise ValueError("expected a collection of texts, got a single bit string; wrap it in a list")
    texts = [as_bits(t) for t in X]
    if not texts:
        raise ValueError("no texts given")
    return texts


def check_probability(value, name, *, open_left=True, open_right=True):
    value = float(value)
    lo_ok = value > 0.0 if open_left else value >= 0.0
    hi_ok = value < 1.0 if open_right else value <= 1.0
    if not (lo_ok and hi_ok):
        raise ValueError(f"{name} must be a probability in the allowed range, got {value}")
    return value


def check_key(key):
    if isinstance(key, SecretKey):
        return key
    if isinstance(key, str):
        return SecretKey.from_hex(key)
    raise TypeError("key must be a SecretKey or a 64-character hex string")
