import json
import math

import numpy as np
import pytest

from discwm._engine import TextTooShortError
from discwm.binarize import FixedSequenceSource, SimulatedBinaryLm
from discwm.prf import SecretKey
from discwm.zerobit import (EncoderConfig, ScoreAccumulator, WatermarkedText, detect_no_init, detect_with_init,
                            encode_no_init, encode_with_init, score_bit, watermark_bit)


def test_score_bit_examples():
    assert score_bit(1, math.exp(-1)) == pytest.approx(1.0)
    assert score_bit(0, 1 - math.exp(-2)) == pytest.approx(2.0)
    assert score_bit(1, 0.0) == pytest.approx(-math.log(1e-300))
    assert watermark_bit(0.2, 0.3) == 1 and watermark_bit(0.3, 0.3) == 0


def test_null_score_mean():
    y = np.random.default_rng(5).random(100_000)
    for w in (0, 1):
        assert np.mean([score_bit(w, v) for v in y]) == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("p, expected", [(1.0, 1), (0.0, 0)])
def test_degenerate_probabilities(key, p, expected):
    cfg = EncoderConfig(8, 50)
    text = encode_no_init(FixedSequenceSource([p] * 50), key, cfg)
    assert set(text.bits.tolist()) == {expected}
    other = encode_no_init(FixedSequenceSource([p] * 50), SecretKey.from_seed(7), cfg)
    assert np.array_equal(text.bits, other.bits)


def test_encoder_deterministic(key):
    src = SimulatedBinaryLm(3, 200)
    cfg = EncoderConfig(20, 200)
    assert np.array_equal(encode_no_init(src, key, cfg).bits, encode_no_init(src, key, cfg).bits)
    a = encode_with_init(src, key, cfg, np.random.default_rng(1))
    b = encode_with_init(src, key, cfg, np.random.default_rng(1))
    assert np.array_equal(a.bits, b.bits) and a.initial_chunk_len == b.initial_chunk_len


@pytest.mark.parametrize("h", [1, 2, 3, 5, 10])
def test_gate_threshold_zero(key, h):
    text = encode_with_init(FixedSequenceSource([0.5] * 40), key, EncoderConfig(h, 40, 0.0), 0)
    assert text.initial_chunk_len == h and text.watermarked


@pytest.mark.parametrize("h", [1, 2, 3, 4, 7])
def test_gate_three_bits(key, h):
    text = encode_with_init(FixedSequenceSource([0.5] * 40), key, EncoderConfig(h, 40, 3 * math.log(2)), 0)
    assert text.initial_chunk_len == max(h, 3)


def test_gate_never_trips(key):
    probs = np.tile([0.0, 1.0], 30)
    text = encode_with_init(FixedSequenceSource(probs), key, EncoderConfig(4, 60), 0)
    assert not text.watermarked
    assert text.initial_chunk_len == 60
    assert text.bits.tolist() == probs.astype(int).tolist()


def test_roundtrip_detection(key):
    src = SimulatedBinaryLm(11, 400)
    cfg = EncoderConfig(32, 400)
    rep = detect_no_init(encode_no_init(src, key, cfg).bits, key, 32, 1e-3)
    assert rep.is_watermarked and rep.global_p_value < 1e-6
    text = encode_with_init(src, key, cfg, 4)
    rep = detect_with_init(text.bits, key, 32, 1e-3)
    assert rep.is_watermarked
    assert rep.n_star == text.initial_chunk_len
    assert not detect_with_init(text.bits, SecretKey.from_seed(1), 32, 1e-3).is_watermarked


def test_lmin_sized_text_is_flagged():
    from discwm.lmin import lmin_no_init
    # uniform p law has zeta_b = 0.5
    length = 4 * lmin_no_init(0.5, 0.01, 0.01).exact_bits
    hits = 0
    for seed in range(20):
        key = SecretKey.from_seed(seed)
        text = encode_no_init(SimulatedBinaryLm(seed, length + 16), key, EncoderConfig(16, length + 16))
        hits += detect_no_init(text.bits, key, 16, 0.01).is_watermarked
    assert hits == 20


def test_periodic_text_dedup(key):
    h = 6
    period = [1, 0, 1, 1]
    bits = np.tile(period, 50)
    rep = detect_no_init(bits, key, h, 0.01)
    assert rep.dedup_count == len(period)
    rep = detect_no_init(bits, key, h, 0.01, score_padded=True)
    # padded windows at the start are distinct from the steady-state ones
    assert len(period) <= rep.dedup_count <= len(period) + h


def test_with_init_extremes(key):
    # a constant text has exactly one distinct (context, bit) after h
    rep = detect_with_init(np.ones(60, dtype=np.uint8), key, 10, 0.01)
    assert 0.0 <= rep.global_p_value <= 1.0
    assert rep.n_candidates == 50
    assert rep.dedup_count == 1


def test_global_pvalue_formula(key):
    bits = np.random.default_rng(3).integers(0, 2, 120)
    rep = detect_with_init(bits, key, 20, 0.05)
    k = rep.n_candidates
    assert rep.global_p_value == pytest.approx(1 - (1 - rep.p_value) ** k, rel=1e-9)
    single = detect_with_init(bits, key, 20, 0.05, chunk_lengths=[rep.n_star])
    assert single.p_value == pytest.approx(rep.p_value) and single.global_p_value == pytest.approx(rep.p_value)


def test_score_matches_accumulator(key):
    from discwm.prf import context_window, uniform_draw
    bits = np.random.default_rng(8).integers(0, 2, 70).astype(np.uint8)
    h = 9
    acc = ScoreAccumulator()
    for i in range(h, bits.size):
        window = context_window(bits[:i], h)
        y = uniform_draw(key, [], window)
        acc.add(window.tobytes(), bits[i], score_bit(bits[i], y))
    rep = detect_no_init(bits, key, h, 0.01)
    assert rep.dedup_count == acc.count
    assert rep.best_score == pytest.approx(acc.total, rel=1e-12)
    assert rep.p_value == pytest.approx(acc.p_value(), rel=1e-9)


def test_too_short(key):
    with pytest.raises(TextTooShortError):
        detect_no_init([1, 0, 1], key, 5, 0.01)
    with pytest.raises(TextTooShortError):
        detect_with_init([1, 0, 1], key, 3, 0.01)
    with pytest.raises(ValueError):
        detect_with_init([1, 0, 1], key, 2, 0.0)
    with pytest.raises(ValueError):
        detect_no_init([1, 2, 1], key, 1, 0.1)


def test_artifact_roundtrip_and_no_key(key):
    src = SimulatedBinaryLm(2, 123)
    text = encode_with_init(src, key, EncoderConfig(10, 123), 0)
    data = json.loads(json.dumps(text.to_dict()))
    assert data["schema_version"] == 1 and data["n"] == text.initial_chunk_len
    back = WatermarkedText.from_dict(data)
    assert np.array_equal(back.bits, text.bits) and back.scheme == "zerobit-init"
    rep = detect_with_init(text.bits, key, 10, 0.01).to_dict()
    dumped = json.dumps(rep)
    assert key.hex() not in dumped and "key" not in rep
    with pytest.raises(ValueError):
        WatermarkedText.from_dict({**data, "schema_version": 99})


@pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
def test_watermarked_score_cdf(p):
    from scipy import stats
    from discwm._engine import shifted_scores
    from discwm.prf import DrawGenerator
    z = DrawGenerator(SecretKey.from_seed(31)).integers([i.to_bytes(4, "big") for i in range(100_000)])
    w = z < np.uint64(math.ceil(math.ldexp(p, 64)))
    s = shifted_scores(z, w)

    def cdf(x):
        e = np.exp(-np.asarray(x))
        return np.maximum(0.0, p - e) + np.maximum(0.0, 1.0 - p - e)

    assert stats.kstest(s, cdf).statistic < 0.01
