"""Binarized language models.

A token distribution over a vocabulary of size ``|V|`` becomes a chain of
Bernoulli draws once every token is written as a fixed-width bit string.
This module holds the bit-probability source contract, the adapter from
token distributions, the simulated binary model used by the experiments,
and chunk entropy estimates.
"""

import abc
import math
from dataclasses import dataclass

import numpy as np

from .special import binary_entropy

__all__ = [
    "DegeneratePrefixError",
    "Vocabulary",
    "BitDistributionSource",
    "TokenDistributionSource",
    "SimulatedBinaryLm",
    "FixedSequenceSource",
    "EntropyEstimate",
    "binarize_distribution",
    "sample_plain_bit",
    "estimate_zeta_from_chunk",
    "empirical_entropy",
]

PROBABILITY_LAWS = ("uniform01", "beta", "fixed")


class DegeneratePrefixError(ValueError):
    """Raised when no token with positive probability extends a bit prefix."""


@dataclass(frozen=True)
class Vocabulary:
    """Fixed-width MSB-first binary encoding of token indices ``0 .. size-1``.

    ``bits_per_token`` defaults to ``ceil(log2(size))``; a wider width may be
    configured, in which case the extra codes are simply never used.
    """

    size: int
    bits_per_token: int = None

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("vocabulary needs at least two tokens")
        needed = max(1, math.ceil(math.log2(self.size)))
        if self.bits_per_token is None:
            object.__setattr__(self, "bits_per_token", needed)
        elif self.bits_per_token < needed:
            raise ValueError(f"{self.bits_per_token} bits cannot encode {self.size} tokens")

    def encode(self, index):
        if not 0 <= index < self.size:
            raise ValueError(f"token index {index} outside vocabulary")
        b = self.bits_per_token
        return np.array([(index >> (b - 1 - k)) & 1 for k in range(b)], dtype=np.uint8)

    def decode(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != self.bits_per_token:
            raise ValueError("wrong code width")
        index = 0
        for bit in bits:
            index = (index << 1) | int(bit)
        if index >= self.size:
            raise ValueError(f"code {index} is not assigned to any token")
        return index


def _check_distribution(dist):
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.size < 2:
        raise ValueError("distribution must be a 1-d vector over at least two tokens")
    if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
        raise ValueError("distribution must be nonnegative and sum to 1")
    return dist


def binarize_distribution(dist, prefix_bits, vocab=None):
    """Probability that the next bit is 1 given the token's bits so far.

    Parameters
    ----------
    dist : array-like
        Token distribution ``D_t`` over the vocabulary.
    prefix_bits : sequence of {0, 1}
        Bits of the current token already emitted (shorter than the width).
    vocab : Vocabulary, optional
        Encoding; defaults to the minimal width for ``len(dist)``.

    Returns
    -------
    float
        ``sum(D[v] : E(v) extends prefix+1) / sum(D[v] : E(v) extends prefix)``.

    Raises
    ------
    DegeneratePrefixError
        If the prefix carries zero probability mass.
    """
    dist = _check_distribution(dist)
    vocab = vocab or Vocabulary(dist.size)
    if vocab.size != dist.size:
        raise ValueError("vocabulary size does not match distribution length")
    prefix = [int(b) for b in prefix_bits]
    k = len(prefix)
    width = vocab.bits_per_token
    if k >= width:
        raise ValueError("prefix must be shorter than the token width")

    value = 0
    for bit in prefix:
        value = (value << 1) | bit
    span = 1 << (width - k)
    start = value * span
    mid = start + span // 2
    stop = start + span
    # codes >= size are unassigned padding and carry no mass
    total = dist[min(start, dist.size):min(stop, dist.size)].sum()
    if total <= 0.0:
        raise DegeneratePrefixError(f"prefix {''.join(map(str, prefix))!r} has zero probability")
    ones = dist[min(mid, dist.size):min(stop, dist.size)].sum()
    return float(min(1.0, ones / total))


class BitDistributionSource(abc.ABC):
    """Provider of ``p_i(1)`` given the binary history of the response.

    Implementations must be deterministic in the history so the same text
    can be regenerated in tests, and safe for concurrent read-only use.
    """

    @abc.abstractmethod
    def next_bit_probability(self, history):
        """Return ``Pr{next bit = 1 | history}`` for a 0/1 ``history`` array."""


class TokenDistributionSource(BitDistributionSource):
    """Binarize a token-level model given as ``token_distribution(token_history)``."""

    def __init__(self, token_distribution, vocab):
        self.token_distribution = token_distribution
        self.vocab = vocab

    def next_bit_probability(self, history):
        history = np.asarray(history, dtype=np.uint8)
        width = self.vocab.bits_per_token
        n_done = history.size // width
        tokens = [self.vocab.decode(history[t * width:(t + 1) * width]) for t in range(n_done)]
        dist = self.token_distribution(tokens)
        return binarize_distribution(dist, history[n_done * width:], self.vocab)


class SimulatedBinaryLm(BitDistributionSource):
    """Binary model whose per-position ``p_i(1)`` is drawn once from a seeded law.

    The probability sequence does not depend on the history, which matches
    the simulation setup: each bit gets an independent random probability.
    """

    def __init__(self, seed, length_bits, law="uniform01", law_params=None):
        if law not in PROBABILITY_LAWS:
            raise ValueError(f"unknown probability law {law!r}; expected one of {PROBABILITY_LAWS}")
        if length_bits < 1:
            raise ValueError("length_bits must be positive")
        self.seed = int(seed)
        self.length_bits = int(length_bits)
        self.law = law
        self.law_params = dict(law_params or {})
        rng = np.random.default_rng(self.seed)
        if law == "uniform01":
            probs = rng.random(self.length_bits)
        elif law == "beta":
            probs = rng.beta(self.law_params["a"], self.law_params["b"], self.length_bits)
        else:
            p = float(self.law_params["p"])
            if not 0.0 <= p <= 1.0:
                raise ValueError("fixed probability must lie in [0, 1]")
            probs = np.full(self.length_bits, p)
        probs.setflags(write=False)
        self._probs = probs

    @property
    def probabilities(self):
        return self._probs

    def next_bit_probability(self, history):
        i = len(history)
        if i >= self.length_bits:
            raise IndexError(f"simulated model only defines {self.length_bits} bits")
        return float(self._probs[i])

    def to_dict(self):
        return {"seed": self.seed, "length_bits": self.length_bits, "law": self.law, "law_params": self.law_params}

    @classmethod
    def from_dict(cls, spec):
        return cls(spec["seed"], spec["length_bits"], spec.get("law", "uniform01"), spec.get("law_params"))


class FixedSequenceSource(BitDistributionSource):
    """Source that replays a given ``p_i(1)`` sequence regardless of history."""

    def __init__(self, probabilities):
        self.probabilities = np.asarray(probabilities, dtype=float)

    def next_bit_probability(self, history):
        return float(self.probabilities[len(history)])


def sample_plain_bit(source, history, rng):
    """Sample the next bit from ``source`` without watermarking."""
    p = source.next_bit_probability(history)
    return int(rng.random() < p)


@dataclass(frozen=True)
class EntropyEstimate:
    zeta_b: float
    zeta: float
    n_samples: int


def estimate_zeta_from_chunk(probabilities, observed_bits, bits_per_token=1):
    """Average binary entropy of the chunk's bit probabilities.

    ``observed_bits`` only fixes the chunk length; the estimate uses the
    conditional probabilities the model assigned along the way.
    """
    probs = np.asarray(probabilities, dtype=float)
    bits = np.asarray(observed_bits)
    if probs.size == 0:
        raise ValueError("cannot estimate entropy from an empty chunk")
    if probs.size != bits.size:
        raise ValueError("probabilities and bits must have equal length")
    zeta_b = float(np.mean(binary_entropy(probs)))
    return EntropyEstimate(zeta_b=zeta_b, zeta=bits_per_token * zeta_b, n_samples=int(probs.size))


def empirical_entropy(probabilities, bits):
    """Sum of ``-ln p_i(w_i)`` over a sampled chunk."""
    probs = np.asarray(probabilities, dtype=float)
    bits = np.asarray(bits)
    chosen = np.where(bits == 1, probs, 1.0 - probs)
    with np.errstate(divide="ignore"):
        return float(-np.log(chosen).sum())

