"""Distortion-free binary watermarking with zero-bit and multi-bit payloads."""

from .binarize import (BitDistributionSource, DegeneratePrefixError, FixedSequenceSource, SimulatedBinaryLm,
                       TokenDistributionSource, Vocabulary, binarize_distribution, estimate_zeta_from_chunk)
from .disc import (DiscConfig, DiscDetectionReport, conditional_score_moments, disc_decode_exhaustive,
                   disc_decode_fast, disc_encode, disc_map_bit, disc_pvalue_floor, disc_score_bit)
from .estimators import DiscWatermarkDecoder, WatermarkGenerator, ZeroBitWatermarkDetector
from .lmin import LminSolution, disc_lmin, lmin_no_init, lmin_with_init
from .prf import DrawGenerator, SecretKey, draw_integer, uniform_draw
from .zerobit import (DetectionReport, EncoderConfig, ScoreAccumulator, TextTooShortError, WatermarkedText,
                      detect_no_init, detect_with_init, encode_no_init, encode_with_init, score_bit, watermark_bit)

__version__ = "0.1.0"
