import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vblastlab import detector as det
from vblastlab.analytic import BFSK
from vblastlab.channel import (NoiseParams, RngStream, SystemDims, sample_bpsk_symbols,
                               sample_channel, sample_noise)
from vblastlab.linalg import projection_matrix


def random_trial(n, seed, sigma0_sq=0.1):
    stream = RngStream(seed)
    H = sample_channel(SystemDims(n), stream)
    q = sample_bpsk_symbols(2, stream)
    v = sample_noise(n, NoiseParams(sigma0_sq), stream)
    return H, q, v


def batch(n, count, seed, sigma0_sq=0.1):
    stream = RngStream(seed)
    H = sample_channel(SystemDims(n), stream, batch=count)
    q = sample_bpsk_symbols(2, stream, batch=count)
    v = sample_noise(n, NoiseParams(sigma0_sq), stream, batch=count)
    return H, q, v


class TestWeightsAndSnr:
    def test_weight_unit_norm(self):
        w = det.zf_mrc_weight([3.0, 4.0j])
        np.testing.assert_allclose(w, [0.6, 0.8j])

    def test_zero_weight(self):
        with pytest.raises(det.DegenerateChannelError):
            det.zf_mrc_weight([0.0, 0.0])

    def test_after_projection_snr(self):
        params = NoiseParams(0.5)
        assert det.after_projection_snr(np.array([1.0, 1j]), params) == pytest.approx(4.0)

    def test_powerwise_factor(self):
        # n = 3, m = 2: step 1 divides by 2 sigma0^2, step 2 by 3 sigma0^2
        params, dims = NoiseParams(0.5), SystemDims(3)
        h = np.array([1.0, 1.0, 1.0])
        assert det.powerwise_snr(h, params, dims, 1) == pytest.approx(3.0)
        assert det.powerwise_snr(h, params, dims, 2) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            det.powerwise_snr(h, params, dims, 3)

    def test_after_combining_noise(self):
        assert det.after_combining_noise([1j, 0], [2.0, 5.0]) == pytest.approx(-2j)
        with pytest.raises(ValueError):
            det.after_combining_noise([1, 0], [1, 0, 0])


class TestOrdering:
    def test_orthogonal_columns(self):
        H = np.array([[1.0, 0.0], [0.0, 2.0]])
        assert det.order_streams(H) == (1, 0)

    def test_tie_goes_to_lower_index(self):
        H = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert det.order_streams(H) == (0, 1)

    def test_degenerate(self):
        with pytest.raises(det.DegenerateChannelError):
            det.order_streams(np.array([[1.0, 2.0], [1.0, 2.0]]))
        with pytest.raises(det.DegenerateChannelError):
            det.order_streams(np.zeros((3, 2)))

    @pytest.mark.parametrize("seed", range(20))
    def test_brute_force(self, seed):
        H, _, _ = random_trial(3, seed)
        snr = {}
        for k in (0, 1):
            P = projection_matrix(H[:, [1 - k]])
            snr[k] = np.linalg.norm(P @ H[:, k]) ** 2
        best = max(snr, key=lambda k: (snr[k], -k))
        assert det.order_streams(H)[0] == best

    @pytest.mark.parametrize("seed", range(10))
    def test_swap_equivariance(self, seed):
        H, _, _ = random_trial(4, seed)
        a = det.order_streams(H)
        b = det.order_streams(H[:, ::-1])
        assert a == tuple(1 - k for k in b)

    def test_step2_uses_full_column_power(self):
        H, q, v = random_trial(3, 7)
        trace = det.detect(H, H @ q + v, q, NoiseParams(0.1))
        second = trace.steps[1]
        assert second.snr_opt == pytest.approx(np.linalg.norm(H[:, second.stream_index]) ** 2 / 0.1)


class TestDetect:
    @pytest.mark.parametrize("n", [2, 3, 5])
    @pytest.mark.parametrize("mode", det.MODES)
    def test_noiseless_exact(self, n, mode):
        for seed in range(10):
            H, q, _ = random_trial(n, seed)
            trace = det.detect(H, H @ q, q, NoiseParams(1.0), mode=mode)
            np.testing.assert_array_equal(trace.decisions, q)
            for step in trace.steps:
                assert step.after_combining_noise == 0

    def test_trace_structure(self):
        H, q, v = random_trial(3, 1)
        trace = det.detect(H, H @ q + v, q, NoiseParams(0.1))
        assert sorted(trace.order) == [0, 1]
        assert [s.stream_index for s in trace.steps] == list(trace.order)
        w1, w2 = trace.steps[0].weight, trace.steps[1].weight
        second = H[:, trace.order[1]]
        assert abs(np.vdot(w1, second)) < 1e-12
        assert np.linalg.norm(w1) == pytest.approx(1.0)
        assert np.linalg.norm(w2) == pytest.approx(1.0)

    def test_noise_default_from_received(self):
        H, q, v = random_trial(3, 2)
        a = det.detect(H, H @ q + v, q, NoiseParams(0.1))
        b = det.detect(H, H @ q + v, q, NoiseParams(0.1), noise=v)
        for sa, sb in zip(a.steps, b.steps):
            assert sa.after_combining_noise == pytest.approx(sb.after_combining_noise, abs=1e-12)

    def test_fixed_ordering(self):
        H = np.array([[1.0, 0.0], [0.0, 2.0]])
        q = np.array([1.0, -1.0])
        assert det.detect(H, H @ q, q, NoiseParams(1.0), ordering=det.FIXED).order == (0, 1)

    def test_rejects_non_bpsk(self):
        H, q, v = random_trial(2, 0)
        with pytest.raises(ValueError):
            det.detect(H, H @ q + v, q, NoiseParams(0.1), modulation=BFSK)

    def test_rejects_bad_arguments(self):
        H, q, v = random_trial(2, 0)
        with pytest.raises(ValueError):
            det.detect(H, H @ q + v, q, NoiseParams(0.1), mode="oracle")
        with pytest.raises(ValueError):
            det.detect(H, H @ q + v, q, NoiseParams(0.1), ordering="random")
        with pytest.raises(ValueError):
            det.detect(H, (H @ q)[:1], q, NoiseParams(0.1))

    def test_genie_and_propagate_agree_when_first_correct(self):
        agree = 0
        for seed in range(200):
            H, q, v = random_trial(2, seed, sigma0_sq=1.0)
            g = det.detect(H, H @ q + v, q, NoiseParams(1.0), mode=det.GENIE)
            p = det.detect(H, H @ q + v, q, NoiseParams(1.0), mode=det.PROPAGATE)
            if g.steps[0].decision == q[g.order[0]]:
                agree += 1
                assert g.steps[1].decision == p.steps[1].decision
        assert agree > 100


class TestBatch:
    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("mode", det.MODES)
    @pytest.mark.parametrize("ordering", det.ORDERINGS)
    def test_matches_single_trial(self, n, mode, ordering):
        sigma0_sq = 0.5
        H, q, v = batch(n, 300, seed=n, sigma0_sq=sigma0_sq)
        out = det.detect_batch(H, q, v, sigma0_sq, mode, ordering)
        for t in range(H.shape[0]):
            trace = det.detect(H[t], H[t] @ q[t] + v[t], q[t], NoiseParams(sigma0_sq),
                               mode=mode, ordering=ordering, noise=v[t])
            assert out.snrs.first[t] == trace.order[0]
            for i, step in enumerate(trace.steps):
                assert out.decisions[t, i] == step.decision
                assert out.snrs.snr[t, i] == pytest.approx(step.snr_opt, rel=1e-10)
                assert out.snrs.snr_powerwise[t, i] == pytest.approx(step.snr_powerwise, rel=1e-10)
                assert out.noise_out[t, i] == pytest.approx(step.after_combining_noise, abs=1e-10)

    def test_first_step_is_larger(self):
        H, _, _ = batch(3, 1000, seed=5)
        s = det.ordered_snrs(H, 1.0)
        # the other stream's projected power never exceeds the chosen one
        for t in range(0, 1000, 50):
            k = s.first[t]
            P = projection_matrix(H[t][:, [k]])
            assert np.linalg.norm(P @ H[t][:, 1 - k]) ** 2 <= s.snr[t, 0] * (1 + 1e-12)

    def test_weights_orthogonal_to_interferer(self):
        H, _, _ = batch(4, 5000, seed=9)
        s = det.ordered_snrs(H, 1.0)
        w1, w2 = s.weights
        assert np.max(np.abs(np.einsum("bn,bn->b", w1.conj(), s.h_second))) < 1e-12
        np.testing.assert_allclose(np.linalg.norm(w1, axis=1), 1.0, rtol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(w2, axis=1), 1.0, rtol=1e-12)

    def test_powerwise_relation(self):
        H, _, _ = batch(3, 100, seed=2)
        s = det.ordered_snrs(H, 0.25)
        np.testing.assert_allclose(s.snr_powerwise[:, 0] * 2, s.snr[:, 0], rtol=1e-13)
        np.testing.assert_allclose(s.snr_powerwise[:, 1] * 3, s.snr[:, 1], rtol=1e-13)

    def test_degenerate_flag(self):
        H = np.ones((3, 2, 2), dtype=complex)
        H[1] = np.eye(2)
        s = det.ordered_snrs(H, 1.0)
        assert s.degenerate.tolist() == [True, False, True]

    def test_equal_gain_weights(self):
        H, _, _ = batch(3, 200, seed=3)
        s = det.ordered_snrs(H, 1.0)
        e1, e2 = det.equal_gain_weights(s)
        assert np.max(np.abs(np.einsum("bn,bn->b", e1.conj(), s.h_second))) < 1e-12
        np.testing.assert_allclose(np.linalg.norm(e1, axis=1), 1.0)
        np.testing.assert_allclose(e2, 1 / np.sqrt(3))

    def test_noise_power_moments(self):
        sigma0_sq = 0.3
        H, q, v = batch(3, 200_000, seed=11, sigma0_sq=sigma0_sq)
        out = det.detect_batch(H, q, v, sigma0_sq)
        power = np.mean(np.abs(out.noise_out) ** 2, axis=0) / sigma0_sq
        # unit-norm weights independent of the noise: E|xi|^2 = sigma0^2
        np.testing.assert_allclose(power, 1.0, atol=0.01)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            det.ordered_snrs(np.ones((3, 2)), 1.0)
        with pytest.raises(ValueError):
            det.ordered_snrs(np.ones((1, 3, 3)), 1.0)
        with pytest.raises(ValueError):
            det.ordered_snrs(np.ones((1, 3, 2)), 1.0, ordering="best")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 6))
def test_order_invariant_to_common_scaling(seed, n):
    H, _, _ = random_trial(n, seed)
    scale = np.exp(1j * 0.7) * 3.0
    assert det.order_streams(H) == det.order_streams(H * scale)
