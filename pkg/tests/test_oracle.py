import numpy as np
import pytest

from deadtime_qkd import model, oracle
from deadtime_qkd.errors import ParameterError, SizeCapError
from deadtime_qkd.model import LinkParams


class TestEnumeratePaths:
    def test_single_slot(self):
        d = oracle.enumerate_paths(0.1, 2, 1)
        assert d[0, 2] == pytest.approx(0.2, abs=1e-15)
        assert d[2, 0] == pytest.approx(0.2, abs=1e-15)
        assert d[0, 0] == pytest.approx(0.6, abs=1e-15)
        assert d.total() == pytest.approx(1.0, abs=1e-15)

    def test_two_slots_by_hand(self):
        p2 = 0.2
        d = oracle.enumerate_paths(0.1, 2, 2)
        # (0,2) after slot 1 ticks to (0,1) unless A fires -> (2,1)
        assert d[2, 1] == pytest.approx(p2 * p2, abs=1e-15)
        assert d[0, 1] == pytest.approx(p2 * (1 - p2), abs=1e-15)
        assert d[0, 0] == pytest.approx(0.6 * 0.6, abs=1e-15)
        assert d.total() == pytest.approx(1.0, abs=1e-15)

    def test_never_both_fire_at_once(self):
        d = oracle.enumerate_paths(0.1, 3, 50)
        assert d[3, 3] == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_converges_to_steady_state(self, k):
        long = oracle.enumerate_paths(0.05, k, 3000)
        ss = oracle.steady_state(LinkParams(0.05, k))
        assert np.abs(long.probs - ss.probs).max() < 1e-12

    def test_caps(self):
        with pytest.raises(SizeCapError):
            oracle.enumerate_paths(0.1, 5, 3)
        with pytest.raises(SizeCapError):
            oracle.enumerate_paths(0.1, 2, -1)


class TestTransitionMatrix:
    @pytest.mark.parametrize("convention", ["exact", "additive"])
    @pytest.mark.parametrize("eps", [0.0, 0.01])
    def test_row_stochastic(self, convention, eps):
        P = oracle.transition_matrix(LinkParams(0.02, 6, eps), convention)
        assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-15)
        assert P.min() >= 0

    def test_noiseless_has_no_double_fire(self):
        k = 4
        P = oracle.transition_matrix(LinkParams(0.1, k)).toarray()
        assert P[0, k * (k + 1) + k] == 0.0

    def test_noise_allows_double_fire(self):
        k = 4
        P = oracle.transition_matrix(LinkParams(0.1, k, 0.01)).toarray()
        assert P[0, k * (k + 1) + k] > 0.0

    def test_unknown_convention(self):
        with pytest.raises(ParameterError):
            oracle.transition_matrix(LinkParams(0.1, 2, 0.01), "bogus")


class TestSteadyState:
    def test_no_dead_time(self):
        d = oracle.steady_state(LinkParams(0.1, 0))
        assert d.probs.shape == (1, 1) and d[0, 0] == 1.0

    def test_one_slot_dead_time_by_hand(self):
        # (0,0) leaves with 4p; (1,0) and (0,1) return unless the live one fires
        p = 0.03
        d = oracle.steady_state(LinkParams(p, 1))
        expected = 1.0 / (1.0 + 4 * p / (1 - 2 * p))
        assert d[0, 0] == pytest.approx(expected, abs=1e-14)

    def test_symmetric(self):
        d = oracle.steady_state(LinkParams(0.02, 9, 0.003))
        assert np.abs(d.probs - d.probs.T).max() < 1e-14
        assert d.total() == pytest.approx(1.0, abs=1e-14)

    def test_power_iteration_branch(self):
        k = 110
        assert (k + 1) ** 2 > oracle.LINEAR_SOLVE_MAX_STATES
        d = oracle.steady_state(LinkParams(0.01, k))
        assert abs(d[0, 0] - model.p00(0.01, k)) < 1e-10

    def test_size_cap(self):
        with pytest.raises(SizeCapError):
            oracle.steady_state(LinkParams(0.01, 600))


class TestSeqDP:
    def test_no_dead_time(self):
        d = oracle.seq_dp(0.05, 0, 4)
        assert d.t == (1.0, 0.0, 0.0, 0.0)

    def test_one_slot_geometric(self):
        p = 0.04
        d = oracle.seq_dp(p, 1, 5)
        for n in range(1, 6):
            assert d[n] == pytest.approx((2 * p) ** (n - 1) * (1 - 2 * p), rel=1e-13)

    def test_either_first_detector(self):
        a = oracle.seq_dp(0.03, 7, 6, first="a")
        b = oracle.seq_dp(0.03, 7, 6, first="b")
        assert a.t == pytest.approx(b.t, abs=1e-16)
        with pytest.raises(ParameterError):
            oracle.seq_dp(0.03, 7, first="c")

    def test_mass_accounted(self):
        d = oracle.seq_dp(0.1, 15, 3)
        assert sum(d.t) + d.residual == pytest.approx(1.0, abs=1e-13)
        assert d.residual > 0.1

    def test_two_click_count(self):
        # k partner offsets contribute, not k - 1
        p, k = 0.05, 3
        q = 1 - 2 * p
        full = sum(2 * p * q ** (2 * s + 1) for s in range(k))
        short = sum(2 * p * q ** (2 * s + 1) for s in range(k - 1))
        got = oracle.seq_dp(p, k)[2]
        assert got == pytest.approx(full, rel=1e-13)
        assert abs(got - short) > 1e-3
