from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deadtime_qkd import analysis, model
from deadtime_qkd.analysis import DetectorOrder
from deadtime_qkd.errors import ParameterError


class TestTransitionProbability:
    @pytest.mark.parametrize(
        "bits,expected",
        [("0101", 1.0), ("0000", 0.0), ("0011", 1 / 3), ("10", 1.0)],
    )
    def test_examples(self, bits, expected):
        assert analysis.transition_probability(bits) == pytest.approx(expected)

    def test_array_input(self):
        assert analysis.transition_probability(np.array([1, 1, 0, 1], dtype=np.uint8)) == pytest.approx(2 / 3)

    @pytest.mark.parametrize("bits", ["", "1", "0121"])
    def test_rejects(self, bits):
        with pytest.raises(ParameterError):
            analysis.transition_probability(bits)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=200))
    def test_complement_invariant(self, bits):
        flipped = [1 - b for b in bits]
        assert analysis.transition_probability(bits) == analysis.transition_probability(flipped)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=200))
    def test_streaming_form_agrees(self, bits):
        flips = sum(a != b for a, b in zip(bits, bits[1:]))
        assert analysis.ptrans_from_counts(flips, len(bits)) == analysis.transition_probability(bits)

    def test_random_bits_near_half(self):
        bits = np.random.default_rng(3).integers(0, 2, 1_000_000)
        assert abs(analysis.transition_probability(bits) - 0.5) < 0.002

    def test_streaming_too_short(self):
        assert np.isnan(analysis.ptrans_from_counts(0, 1))


class TestDetectorOrder:
    def test_parse(self):
        o = DetectorOrder.parse("1-3-4-2")
        assert o.cycle == (1, 3, 4, 2)
        assert str(o) == "1-3-4-2"

    @pytest.mark.parametrize("text", ["1-1-2-3", "1-2-3", "2-1-3-4", "1-2-3-5", "a-b-c-d"])
    def test_rejects(self, text):
        with pytest.raises(ParameterError):
            DetectorOrder.parse(text)

    def test_six_orders(self):
        orders = analysis.all_orders()
        assert len(orders) == 6
        assert len({o.cycle for o in orders}) == 6


class TestAsymptotics:
    @pytest.mark.parametrize(
        "order,expected",
        [("1-3-4-2", Fraction(2, 5)), ("1-2-4-3", Fraction(4, 5)), ("1-2-3-4", Fraction(2, 3))],
    )
    def test_known_orders(self, order, expected):
        assert analysis.asymptotic_ptrans(DetectorOrder.parse(order)) == expected

    def test_multiplicities(self):
        values = Counter(analysis.asymptotic_ptrans(o) for o in analysis.all_orders())
        assert values == {Fraction(2, 3): 2, Fraction(4, 5): 2, Fraction(2, 5): 2}

    def test_average(self):
        avg = analysis.asymptotic_ptrans_avg()
        assert avg == Fraction(28, 45)
        assert 6 * avg == 2 * Fraction(2, 3) + 2 * Fraction(4, 5) + 2 * Fraction(2, 5)

    def test_brute_force(self):
        assert abs(analysis.firing_order_mc(1_000_000, seed=1) - 28 / 45) < 0.002

    def test_brute_force_too_small(self):
        with pytest.raises(ParameterError):
            analysis.firing_order_mc(10)


class TestFit:
    def test_exact_data(self):
        ps = [1e-4, 1e-3, 1e-2]
        sweep = [(p, 5.0 / (8 * p), 0.7 / (5.0 / (8 * p))) for p in ps]
        fit = analysis.fit_constants(sweep)
        assert fit.c_sbr == pytest.approx(1.4)
        assert fit.c_rho == pytest.approx(5.0)
        assert fit.residual_norm == pytest.approx(0.0, abs=1e-12)

    def test_reproduces_constants(self):
        sweep = []
        for db in range(-30, -9, 2):
            p = model.loss_db_to_linear(db) / 8
            k, s = model.find_optimum(p)
            sweep.append((p, k, s))
        fit = analysis.fit_constants(sweep)
        assert abs(fit.c_sbr - analysis.REFERENCE_C_SBR) / analysis.REFERENCE_C_SBR < 0.02
        assert abs(fit.c_rho - analysis.REFERENCE_C_RHO) / analysis.REFERENCE_C_RHO < 0.02

    def test_needs_three_points(self):
        with pytest.raises(ParameterError):
            analysis.fit_constants([(1e-3, 100, 0.007), (1e-2, 10, 0.07)])

    def test_needs_span(self):
        with pytest.raises(ParameterError):
            analysis.fit_constants([(1e-3, 100, 0.007), (1.5e-3, 70, 0.01), (2e-3, 50, 0.014)])

    def test_bad_shape(self):
        with pytest.raises(ParameterError):
            analysis.fit_constants([])
