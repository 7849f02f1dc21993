import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mimo_outage.channel import draw_channels, estimate_channel, pilot_observations
from mimo_outage.receiver import (
    DegenerateCombinerError,
    Scheme,
    UatfTerms,
    estimate_uatf_terms,
    mr_combiner,
    rzf_combiner,
    sinr_and_se,
    uatf_terms,
)
from mimo_outage.scenario import Category, SystemConfig, UeRecord, make_scenario, spatial_correlation, stream

CFG = SystemConfig()


def inv2(A):
    (a, b), (c, d) = A
    return np.array([[d, -b], [-c, a]]) / (a * d - b * c)


def uatf_loop_oracle(v, h, powers, desired, known, unknown, sigma2):
    # plain Python sums over realizations
    M = v.shape[0]
    g = [[complex(np.vdot(v[m], h[m, i])) for i in range(h.shape[1])] for m in range(M)]
    mean_self = sum(g[m][desired] for m in range(M)) / M
    ds = powers[desired] * abs(mean_self) ** 2
    gain = [powers[i] * sum(abs(g[m][i]) ** 2 for m in range(M)) / M for i in range(h.shape[1])]
    iui = sum(gain[i] for i in unknown)
    iusi = sum(gain[i] for i in known) - ds
    noise = sigma2 * sum(float(np.vdot(v[m], v[m]).real) for m in range(M)) / M
    return ds, iui, iusi, noise


class TestMr:
    def test_unit_vector(self):
        e1 = np.eye(4)[0].astype(complex)
        assert_array_equal(mr_combiner(e1).v, e1)
        assert_allclose(mr_combiner(2 * e1).v, e1 / 2)

    def test_normalized(self):
        h = np.random.default_rng(0).standard_normal((5, 8)) + 1j
        v = mr_combiner(h).v
        assert_allclose(np.sum(v.conj() * h, axis=1), 1.0, atol=1e-10)

    def test_zero_estimate(self):
        with pytest.raises(DegenerateCombinerError):
            mr_combiner(np.zeros(4, dtype=complex))


class TestRzf:
    def test_single_ue_collinear(self):
        rng = np.random.default_rng(1)
        h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        v = rzf_combiner(h[None, :], [0.1], 1e-3).v
        ratio = v / h
        assert_allclose(ratio, ratio[0], rtol=1e-9)
        assert abs(ratio[0].imag) <= 1e-12 * abs(ratio[0]) and ratio[0].real > 0

    def single_ue_sinrs(self, h_hat):
        rng = np.random.default_rng(9)
        m = h_hat.shape[0]
        h = h_hat[:, None, :] + 0.3 * (rng.standard_normal((m, 3, 16)) + 1j * rng.standard_normal((m, 3, 16)))
        p = np.array([0.1, 0.1, 0.1])
        v_rzf = rzf_combiner(h_hat[:, None, :], p[:1], 1e-2).v
        v_mr = mr_combiner(h_hat).v
        s_rzf = sinr_and_se(uatf_terms(v_rzf, h, p, 0, [0], [1, 2], 1e-2), CFG)[0]
        s_mr = sinr_and_se(uatf_terms(v_mr, h, p, 0, [0], [1, 2], 1e-2), CFG)[0]
        # RZF is MR times p|h|^2 / (sigma^2 + p|h|^2) in every realization
        norm_sq = np.sum(np.abs(h_hat) ** 2, axis=1, keepdims=True)
        scaled = v_mr * (0.1 * norm_sq / (1e-2 + 0.1 * norm_sq))
        s_scaled = sinr_and_se(uatf_terms(scaled, h, p, 0, [0], [1, 2], 1e-2), CFG)[0]
        return s_rzf, s_mr, s_scaled

    def test_single_ue_sinr_equal_norm_estimates(self):
        # a common scale across realizations leaves the UatF SINR unchanged
        rng = np.random.default_rng(8)
        h_hat = np.exp(2j * np.pi * rng.uniform(size=(50, 16)))
        s_rzf, s_mr, _ = self.single_ue_sinrs(h_hat)
        assert_allclose(s_rzf, s_mr, rtol=1e-9)

    def test_single_ue_sinr_per_realization_scale(self):
        rng = np.random.default_rng(7)
        h_hat = rng.standard_normal((50, 16)) + 1j * rng.standard_normal((50, 16))
        s_rzf, s_mr, s_scaled = self.single_ue_sinrs(h_hat)
        assert_allclose(s_rzf, s_scaled, rtol=1e-9)
        # with varying |h_hat| the per-realization factor does not cancel in the averages
        assert abs(s_rzf - s_mr) > 1e-9 * s_mr

    def test_large_noise_limit(self):
        rng = np.random.default_rng(2)
        H = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
        p = np.array([0.1, 0.2, 0.05])
        sigma2 = 1e9 * p[0] * np.linalg.norm(H[0]) ** 2
        v = rzf_combiner(H, p, sigma2).v
        ref = p[0] / sigma2 * H[0]
        cos = abs(np.vdot(v, ref)) / (np.linalg.norm(v) * np.linalg.norm(ref))
        assert 1 - cos <= 1e-6
        assert_allclose(v, ref, rtol=1e-6)

    def test_two_by_two_oracle(self):
        H = np.array([[1 + 1j, 0.5], [-0.2j, 2.0 - 1j]])
        p = np.array([0.3, 0.7])
        sigma2 = 0.4
        C = sum(p[i] * np.outer(H[i], H[i].conj()) for i in range(2)) + sigma2 * np.eye(2)
        for target in (0, 1):
            v = rzf_combiner(H, p, sigma2, target=target).v
            assert_allclose(v, inv2(C) @ (p[target] * H[target]), rtol=1e-10)

    def test_batched(self):
        rng = np.random.default_rng(3)
        H = rng.standard_normal((4, 3, 6)) + 1j * rng.standard_normal((4, 3, 6))
        p = np.array([0.1, 0.1, 0.2])
        V = rzf_combiner(H, p, 0.5, target=1).v
        for m in range(4):
            assert_allclose(V[m], rzf_combiner(H[m], p, 0.5, target=1).v, rtol=1e-12)


class TestUatfTerms:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.v = rng.standard_normal((7, 4)) + 1j * rng.standard_normal((7, 4))
        self.h = rng.standard_normal((7, 5, 4)) + 1j * rng.standard_normal((7, 5, 4))
        self.p = np.array([0.1, 0.2, 0.3, 0.05, 0.15])

    def test_loop_oracle(self):
        t = uatf_terms(self.v, self.h, self.p, 1, [1, 0], [2, 3, 4], 0.7)
        ds, iui, iusi, noise = uatf_loop_oracle(self.v, self.h, self.p, 1, [1, 0], [2, 3, 4], 0.7)
        assert_allclose([t.ds_sq, t.iui_u, t.iusi_raw, t.noise_eff], [ds, iui, iusi, noise], rtol=1e-12)
        assert t.n_realizations == 7

    def test_no_unknown(self):
        t = uatf_terms(self.v, self.h, self.p, 0, [0, 1, 2, 3, 4], [], 0.7)
        assert t.iui_u == 0.0

    def test_iusi_nonnegative(self):
        # identical realizations: the desired UE's own variance term vanishes
        v = np.tile(self.v[:1], (5, 1))
        h = np.tile(self.h[:1, :1], (5, 1, 1))
        t = uatf_terms(v, h, self.p[:1], 0, [0], [], 1.0)
        assert t.iusi_n >= 0.0
        assert abs(t.iusi_raw) <= 1e-12 * t.ds_sq

    def test_validation(self):
        with pytest.raises(ValueError):
            UatfTerms(1.0, -1.0, 0.0, 1.0, 1)
        with pytest.raises(ValueError):
            UatfTerms(math.nan, 0.0, 0.0, 1.0, 1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3),
           st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3))
    def test_sinr_invariant_to_rescaling(self, re, im):
        c = complex(re, im)
        t1 = uatf_terms(self.v, self.h, self.p, 1, [1, 0], [2, 3, 4], 0.7)
        t2 = uatf_terms(c * self.v, self.h, self.p, 1, [1, 0], [2, 3, 4], 0.7)
        assert_allclose(sinr_and_se(t2, CFG)[0], sinr_and_se(t1, CFG)[0], rtol=1e-9)


class TestSinrAndSe:
    def test_unit_sinr(self):
        sinr, se = sinr_and_se(UatfTerms(1.0, 0.0, 0.0, 1.0, 1), CFG)
        assert sinr == 1.0
        assert_allclose(se, 0.95, rtol=1e-15)

    def test_zero_signal(self):
        assert sinr_and_se(UatfTerms(0.0, 1.0, 1.0, 1.0, 1), CFG) == (0.0, 0.0)


def contamination_free_mr_gain(m, seed, r=100.0):
    ue = UeRecord(0, Category.DESIRED, (r, 0.0), pilot_index=0)
    beta = 10 ** ((-35.3 - 37.6 * math.log10(r)) / 10)
    stats = spatial_correlation(ue, beta, CFG)
    real = draw_channels([stats], CFG, np.random.default_rng(seed), size=m)
    y = pilot_observations(real, [ue], CFG)[:, 0]
    v = mr_combiner(estimate_channel(y, stats, ue.power_w, CFG).h_hat).v
    return np.sum(v.conj() * real.h[:, 0], axis=1), ue.power_w


class TestEstimateUatf:
    @pytest.mark.parametrize("r", [100.0, 200.0])
    def test_mr_signal_gain(self, r):
        # E{v^H h} = 1 without contamination, so DS -> sqrt(p)
        m = 100_000
        g, p = contamination_free_mr_gain(m, seed=int(r), r=r)
        ds = math.sqrt(p) * g.mean()
        se = math.sqrt(p) * np.std(g) / math.sqrt(m)
        assert abs(ds - math.sqrt(p)) <= 3 * se

    def test_mr_ds_through_pipeline(self):
        cfg = SystemConfig()
        sc = make_scenario(cfg, 100.0, 0, stream(0, 20))
        t = estimate_uatf_terms(sc, cfg, Scheme.MR, 20_000, stream(0, 21))
        g, _ = contamination_free_mr_gain(20_000, seed=5)
        # relative DS^2 error, 2 * (3 sigma of the mean gain), with margin for the different geometry
        assert abs(t.ds_sq / cfg.tx_power_w - 1) <= 6 * 3 * np.std(g) / math.sqrt(20_000)
        assert t.iui_u == 0.0

    def test_rzf_beats_mr_on_in_cell_interference(self):
        sc = make_scenario(CFG, 100.0, 0, stream(0, 22))
        mr = estimate_uatf_terms(sc, CFG, Scheme.MR, 400, stream(0, 23))
        rzf = estimate_uatf_terms(sc, CFG, Scheme.RZF, 400, stream(0, 23))
        assert rzf.iusi_n < mr.iusi_n

    def test_deterministic(self):
        sc = make_scenario(CFG, 200.0, 20, stream(1, 0))
        a = estimate_uatf_terms(sc, CFG, Scheme.RZF, 50, stream(1, 1))
        b = estimate_uatf_terms(sc, CFG, Scheme.RZF, 50, stream(1, 1))
        assert a == b

    def test_needs_two_realizations(self):
        sc = make_scenario(CFG, 200.0, 2, stream(1, 0))
        with pytest.raises(ValueError):
            estimate_uatf_terms(sc, CFG, Scheme.RZF, 1, stream(1, 1))
