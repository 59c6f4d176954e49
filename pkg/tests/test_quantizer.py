import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plkg.quantizer import (
    DELTA_MAX,
    EventKind,
    GuardBandQuantizer,
    QuantSymbol,
    classify_event,
    classify_events,
    empirical_quantizer,
    make_quantizer,
    quantize,
    quantize_one,
    reconcile_indices,
)


class TestThresholds:
    def test_delta_max_value(self):
        assert DELTA_MAX == pytest.approx(1.913058380271101, abs=1e-14)
        assert DELTA_MAX == pytest.approx(math.sqrt(math.pi / (4.0 - math.pi)))

    def test_pdf_convention_moments(self):
        q = make_quantizer(1.0, 0.0)
        # Rayleigh with E[g^2] = 1: mean sqrt(pi)/2, std sqrt(1 - pi/4)
        assert q.mu_g == pytest.approx(0.886226925452758, abs=1e-14)
        assert q.sigma_g == pytest.approx(0.463251375176104, abs=1e-14)

    def test_per_quadrature_convention_is_sqrt2_larger(self):
        q1 = make_quantizer(1.0, 0.3, convention="pdf")
        q2 = make_quantizer(1.0, 0.3, convention="per-quadrature")
        assert q2.mu_g == pytest.approx(math.sqrt(2.0) * q1.mu_g, rel=1e-14)
        assert q2.sigma_g == pytest.approx(math.sqrt(2.0) * q1.sigma_g, rel=1e-14)

    def test_threshold_values(self):
        q = make_quantizer(1.0, 0.2)
        assert q.gamma_u == pytest.approx(0.978877200487979, abs=1e-14)
        assert q.gamma_l == pytest.approx(0.793576650417537, abs=1e-14)

    def test_zero_delta_collapses_band(self):
        q = make_quantizer(2.0, 0.0)
        assert q.gamma_u == q.gamma_l == q.mu_g

    def test_delta_bounds(self):
        make_quantizer(1.0, DELTA_MAX - 1e-9)  # just inside
        with pytest.raises(ValueError):
            make_quantizer(1.0, DELTA_MAX)
        with pytest.raises(ValueError):
            make_quantizer(1.0, 2.0)
        with pytest.raises(ValueError):
            make_quantizer(1.0, -0.1)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_quantizer(0.0, 0.1)
        with pytest.raises(ValueError):
            make_quantizer(1.0, 0.1, convention="other")
        with pytest.raises(ValueError):
            GuardBandQuantizer(delta=0.1, mu_g=0.0, sigma_g=1.0)

    def test_empirical_matches_sample_moments(self, rng):
        samples = rng.rayleigh(scale=1.0, size=50_000)
        q = empirical_quantizer(samples, 0.4)
        assert q.mu_g == pytest.approx(float(samples.mean()), rel=1e-12)
        assert q.sigma_g == pytest.approx(float(samples.std()), rel=1e-12)
        with pytest.raises(ValueError):
            empirical_quantizer([1.0], 0.4)


class TestQuantize:
    def setup_method(self):
        self.q = make_quantizer(1.0, 0.3)

    def test_regions(self):
        assert quantize_one(self.q, self.q.gamma_u + 0.01) is QuantSymbol.BIT1
        assert quantize_one(self.q, self.q.gamma_u) is QuantSymbol.BIT1  # boundary
        assert quantize_one(self.q, self.q.gamma_l) is QuantSymbol.DISCARD
        assert quantize_one(self.q, self.q.gamma_l - 0.01) is QuantSymbol.BIT0
        assert quantize_one(self.q, 0.0) is QuantSymbol.BIT0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            quantize_one(self.q, -0.1)
        with pytest.raises(ValueError):
            quantize(self.q, [0.5, -0.1])

    def test_vector_agrees_with_scalar(self, rng):
        g = rng.rayleigh(scale=0.7, size=500)
        vec = quantize(self.q, g)
        for gi, si in zip(g, vec):
            assert quantize_one(self.q, float(gi)) == si


class TestEvents:
    def setup_method(self):
        self.q = make_quantizer(1.0, 0.3)

    def test_kinds(self):
        hi = self.q.gamma_u + 0.1
        lo = self.q.gamma_l - 0.1
        mid = self.q.mu_g
        assert classify_event(self.q, hi, hi) is EventKind.EVENT1
        assert classify_event(self.q, lo, lo) is EventKind.EVENT1
        assert classify_event(self.q, hi, lo) is EventKind.EVENT2
        assert classify_event(self.q, mid, hi) is EventKind.EVENT3
        assert classify_event(self.q, lo, mid) is EventKind.EVENT3
        assert classify_event(self.q, mid, mid) is EventKind.EVENT3

    @given(
        st.floats(min_value=0.0, max_value=4.0),
        st.floats(min_value=0.0, max_value=4.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_symmetric_in_parties(self, a, b):
        q = make_quantizer(1.0, 0.3)
        assert classify_event(q, a, b) == classify_event(q, b, a)

    def test_vector_agrees_with_scalar(self, rng):
        g_a = rng.rayleigh(scale=0.7, size=300)
        g_b = rng.rayleigh(scale=0.7, size=300)
        vec = classify_events(self.q, g_a, g_b)
        for a, b, e in zip(g_a, g_b, vec):
            assert classify_event(self.q, float(a), float(b)) == e

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            classify_events(self.q, [0.5, 0.6], [0.5])


class TestReconcile:
    def test_drops_discards_on_either_side(self):
        sa = [1, 0, -1, 1, 0]
        sb = [1, -1, 0, 0, 0]
        key_a, key_b, kept = reconcile_indices(sa, sb)
        assert kept.tolist() == [0, 3, 4]
        assert key_a.tolist() == [1, 1, 0]
        assert key_b.tolist() == [1, 0, 0]
        assert len(key_a) == len(key_b)

    def test_all_discarded(self):
        key_a, key_b, kept = reconcile_indices([-1, -1], [0, 1])
        assert kept.size == 0 and key_a.size == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            reconcile_indices([1, 0], [1])

    def test_end_to_end_agreement_probability(self, rng):
        # with a guard band the disagreement rate of kept bits is the KDR
        q = make_quantizer(1.0, 0.3)
        n = 50_000
        g = rng.rayleigh(scale=math.sqrt(0.5), size=n)  # E[g^2] = 1
        sa = quantize(q, g)
        sb = quantize(q, g)
        key_a, key_b, kept = reconcile_indices(sa, sb)
        assert np.array_equal(key_a, key_b)  # identical observations agree
        assert 0 < kept.size < n
