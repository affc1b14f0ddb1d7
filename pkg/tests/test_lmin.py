import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discwm.lmin import approximation_factor, disc_lmin, lmin_no_init, lmin_with_init
from discwm.special import gaussian_tail_q, regularized_gamma_q_inverse

LN2 = math.log(2)


def test_approximation_example():
    f1 = approximation_factor(1e-3, 1e-3)
    assert f1 == pytest.approx(math.sqrt(2 * math.log(500)) + math.sqrt(4.4 * math.log(500)))
    assert f1 == pytest.approx(8.754, abs=1e-3)
    sol = lmin_no_init(0.5, 1e-3, 1e-3)
    assert sol.approx_bits == pytest.approx(306.5, abs=0.2)
    assert 0.5 < sol.approx_bits / sol.exact_bits < 2.0


def test_disc_factor_example():
    assert approximation_factor(1e-3 / (1024 * 600), 1e-3) == pytest.approx(11.49, abs=0.02)


def test_miss_bound_oracle():
    # recompute the no-init bound independently with the normal approximation
    sol = lmin_no_init(0.5, 1e-3, 1e-3)

    def miss(k):
        theta = regularized_gamma_q_inverse(k, 1e-3)
        return 1 - gaussian_tail_q((theta - 1.5 * k) / (1.5 * math.sqrt(k)))

    assert miss(sol.exact_bits) <= 1e-3 < miss(sol.exact_bits - 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, LN2), st.sampled_from([1e-2, 1e-3, 1e-5]), st.sampled_from([1e-2, 1e-3, 1e-5]))
def test_minimality_all_solvers(zb, fpr, fnr):
    for sol in (lmin_no_init(zb, fpr, fnr), lmin_with_init(zb, fpr, fnr, 17, 255, 85),
                disc_lmin(zb, fpr, fnr, 17, 255, 6, 85)):
        assert sol.exact_bits >= 1
        assert sol.bound_at_exact <= fnr
        assert math.isnan(sol.bound_below) or sol.bound_below > fnr
        assert 0.5 < sol.approx_watermarked_bits / sol.watermarked_bits < 2.0


def test_monotone_in_entropy():
    assert lmin_no_init(0.6, 1e-3, 1e-3).exact_bits < lmin_no_init(0.3, 1e-3, 1e-3).exact_bits
    seq = [lmin_with_init(z, 1e-5, 1e-5, 17, 255, 85).exact_bits for z in (0.2, 0.3, 0.5, LN2)]
    assert seq == sorted(seq, reverse=True)


def test_with_init_needs_more():
    for zb in (0.2, 0.4, 0.6):
        a = lmin_no_init(zb, 1e-5, 1e-5).exact_bits
        b = lmin_with_init(zb, 1e-5, 1e-5, 16, 240, 80).watermarked_bits
        assert b > a


def test_payload_zero_and_monotone():
    base = lmin_with_init(0.5, 1e-3, 1e-3, 17, 255, 85)
    assert disc_lmin(0.5, 1e-3, 1e-3, 17, 255, 0, 85) == base
    lengths = [disc_lmin(0.5, 1e-3, 1e-3, 17, 255, m, 85).exact_bits for m in range(0, 12, 2)]
    assert lengths == sorted(lengths)


def test_tokens_and_validation():
    sol = lmin_no_init(0.5, 1e-3, 1e-3, vocab_bits=17)
    assert sol.exact_tokens == math.ceil(sol.exact_bits / 17)
    assert sol.to_dict()["watermarked_bits"] == sol.exact_bits
    for bad in ((0.0, 1e-3, 1e-3), (0.8, 1e-3, 1e-3), (0.5, 0.0, 1e-3), (0.5, 1e-3, 0.6)):
        with pytest.raises(ValueError):
            lmin_no_init(*bad)
    with pytest.raises(ValueError):
        lmin_with_init(0.5, 1e-3, 1e-3, 17, 10, 20)
