"""scikit-learn style wrappers around the detectors and the multi-bit decoder.

The detectors are keyed, not trained: ``fit`` only validates the parameters
and the inputs, so the wrappers can sit inside pipelines or be cloned with
``sklearn.base.clone``. ``X`` is a sequence of bit strings of any length.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_key, check_probability, check_texts
from .disc import DiscConfig, disc_decode_exhaustive, disc_decode_fast, disc_encode
from .zerobit import EncoderConfig, detect_no_init, detect_with_init, encode_no_init, encode_with_init

__all__ = ["ZeroBitWatermarkDetector", "DiscWatermarkDecoder", "WatermarkGenerator"]


class _KeyedDetector(ClassifierMixin, BaseEstimator):

    def fit(self, X, y=None):
        """Validate parameters and inputs; nothing is learned."""
        self._validate()
        check_texts(X)
        self.classes_ = np.array([0, 1])
        self.is_fitted_ = True
        return self

    def _validate(self):
        check_key(self.key)
        check_probability(self.fpr, "fpr")
        if int(self.h_bits) < 1:
            raise ValueError("h_bits must be >= 1")

    def _ensure(self):
        if not getattr(self, "is_fitted_", False):
            self._validate()

    def decision_function(self, X):
        """``-ln`` of the global p-value; larger means stronger evidence."""
        return np.array([-math.log(max(r.global_p_value, 1e-300)) for r in self.detect(X)])

    def predict(self, X):
        """1 for texts flagged as watermarked, 0 otherwise."""
        return np.array([int(r.is_watermarked) for r in self.detect(X)])


class ZeroBitWatermarkDetector(_KeyedDetector):
    """Zero-bit watermark detector.

    Parameters
    ----------
    key : SecretKey or str
        Secret key or its hex form.
    h_bits : int
        Context window length in bits.
    fpr : float
        Target false positive rate.
    with_init : bool, default True
        Search over initial chunk lengths (texts from the encoder with an
        initial chunk); False for texts watermarked from the first bit.
    chunk_lengths : sequence of int, optional
        Candidate chunk lengths when ``with_init`` is set.
    score_padded : bool, default False
        Without initial chunk, also score positions with padded windows.
    """

    def __init__(self, key=None, h_bits=85, fpr=0.01, with_init=True, chunk_lengths=None, score_padded=False):
        self.key = key
        self.h_bits = h_bits
        self.fpr = fpr
        self.with_init = with_init
        self.chunk_lengths = chunk_lengths
        self.score_padded = score_padded

    def detect(self, X):
        """Full :class:`DetectionReport` for each text."""
        self._ensure()
        key = check_key(self.key)
        if self.with_init:
            return [detect_with_init(t, key, self.h_bits, self.fpr, self.chunk_lengths) for t in check_texts(X)]
        return [detect_no_init(t, key, self.h_bits, self.fpr, self.score_padded) for t in check_texts(X)]


class DiscWatermarkDecoder(_KeyedDetector):
    """Multi-bit decoder; ``predict`` flags texts, ``decode`` recovers messages.

    Parameters
    ----------
    key : SecretKey or str
    h_bits : int
    payload_bits : int
    fpr : float
    strategy : {"fast", "exhaustive"}
    coarse_grid_size : int, optional
    refine_radius : int
    chunk_lengths : sequence of int, optional
    enforce_floor : bool
    """

    def __init__(self, key=None, h_bits=85, payload_bits=4, fpr=0.01, strategy="fast", coarse_grid_size=None,
                 refine_radius=1, chunk_lengths=None, enforce_floor=False):
        self.key = key
        self.h_bits = h_bits
        self.payload_bits = payload_bits
        self.fpr = fpr
        self.strategy = strategy
        self.coarse_grid_size = coarse_grid_size
        self.refine_radius = refine_radius
        self.chunk_lengths = chunk_lengths
        self.enforce_floor = enforce_floor

    def _validate(self):
        super()._validate()
        if self.strategy not in ("fast", "exhaustive"):
            raise ValueError("strategy must be 'fast' or 'exhaustive'")
        self._config()

    def _config(self):
        return DiscConfig(self.payload_bits, self.coarse_grid_size, self.refine_radius, self.enforce_floor)

    def detect(self, X):
        """Full :class:`DiscDetectionReport` for each text."""
        self._ensure()
        key = check_key(self.key)
        decode = disc_decode_fast if self.strategy == "fast" else disc_decode_exhaustive
        disc = self._config()
        return [decode(t, key, self.h_bits, disc, self.fpr, self.chunk_lengths) for t in check_texts(X)]

    def decode(self, X):
        """Decoded message index for each text, flagged or not."""
        return np.array([r.m_star for r in self.detect(X)])


class WatermarkGenerator(BaseEstimator):
    """Generate watermarked texts from a bit-probability source.

    Parameters
    ----------
    key : SecretKey or str
    h_bits : int
    max_bits : int
    scheme : {"zerobit-noinit", "zerobit-init", "disc"}
    payload_bits : int
        Only for ``scheme="disc"``.
    entropy_threshold : float, optional
    random_init : bool
        For ``"disc"``: sample an initial chunk first.
    """

    def __init__(self, key=None, h_bits=85, max_bits=340, scheme="zerobit-init", payload_bits=0,
                 entropy_threshold=None, random_init=True):
        self.key = key
        self.h_bits = h_bits
        self.max_bits = max_bits
        self.scheme = scheme
        self.payload_bits = payload_bits
        self.entropy_threshold = entropy_threshold
        self.random_init = random_init

    def generate(self, source, message=None, rng=None):
        key = check_key(self.key)
        kwargs = {} if self.entropy_threshold is None else {"entropy_threshold": self.entropy_threshold}
        cfg = EncoderConfig(self.h_bits, self.max_bits, **kwargs)
        if self.scheme == "zerobit-noinit":
            return encode_no_init(source, key, cfg)
        if self.scheme == "zerobit-init":
            return encode_with_init(source, key, cfg, rng)
        if self.scheme == "disc":
            return disc_encode(source, key, cfg, DiscConfig(self.payload_bits), message or 0, rng, self.random_init)
        raise ValueError(f"unknown scheme {self.scheme!r}")
