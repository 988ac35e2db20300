import math

import numpy as np
import pytest
from scipy import integrate

from fmatchlab.channel import SystemConfig, subchannel_outage_prob, subchannel_rate
from fmatchlab.analysis import SchemeSpec
from fmatchlab.montecarlo import (
    OutageEstimate,
    conditional_experiment,
    estimate_outage,
    run_trial,
    sweep,
    unconditional_experiment,
    wilson_interval,
)


class _StubRng:
    """Feeds preset normals / uniforms so degenerate channels can be forced."""

    def __init__(self, normal_value=0.0):
        self.normal_value = normal_value

    def standard_normal(self, shape):
        return np.full(shape, self.normal_value)

    def random(self, shape=None):
        if shape is None:
            return 0.5
        return np.full(shape, 0.5)


ALL_SCHEMES = [
    SchemeSpec("rb_coded"),
    SchemeSpec("interleaved"),
    SchemeSpec("tdma"),
]


class TestWilson:
    def test_interval_inside_unit_box(self):
        lo, hi = wilson_interval(3, 10)
        assert 0.0 <= lo <= 0.3 <= hi <= 1.0

    def test_zero_count(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and hi > 0.0


class TestRunTrial:
    def test_no_outage_at_enormous_snr(self, cfg_rb):
        cfg = cfg_rb.with_snr(10**6.0)  # 60 dB
        rng = np.random.default_rng(1)
        for scheme in ALL_SCHEMES:
            hits = sum(run_trial(cfg, scheme, rng).outage.sum() for _ in range(2000))
            assert hits == 0, scheme.kind

    def test_all_zero_gains_force_outage(self, cfg_rb):
        for scheme in ALL_SCHEMES:
            out = run_trial(cfg_rb, scheme, _StubRng(0.0))
            assert out.outage.all(), scheme.kind

    def test_fig3_pattern_walkthrough(self, cfg_chunk):
        # inject band gains matching the walkthrough CSI: users 0 and 2 see all
        # chunks, user 1 only chunk 4; saturated users never outage, user 1's
        # bit is the sum rate over {chunk 4, the leftover chunk 2}
        cfg = cfg_chunk.with_snr(10.0)
        spec = SchemeSpec("chunk_coded", chunk_caps=(2, 2, 2))
        tau = (math.exp(0.5) - 1) / cfg.snr  # threshold on |g|^2 at R_s = 0.5
        strong, weak = math.sqrt(2 * 4 * tau), math.sqrt(2 * tau / 4)

        class Fig3Rng(_StubRng):
            def standard_normal(self, shape):
                re = np.full((3, 6), weak)
                re[0, :] = strong
                re[2, :] = strong
                re[1, 4] = strong
                return np.stack([re, np.zeros((3, 6))])[: shape[0]] if shape[0] == 2 else re

        out = run_trial(cfg, spec, Fig3Rng())
        assert out.matched.tolist() == [2, 1, 2]
        assert out.outage[0] == 0 and out.outage[2] == 0
        # user 1: one strong chunk (rate 4*tau*snr-ish) + one weak
        rate = math.log1p(cfg.snr * strong**2 / 2) + math.log1p(cfg.snr * weak**2 / 2)
        assert out.outage[1] == (1 if rate < 1.0 else 0)

    def test_matches_batch_engine(self, cfg_rb):
        # the per-trial object path and the batched kernel agree trial by trial
        cfg = cfg_rb.with_snr(10 ** (4.0 / 10))
        spec = SchemeSpec("rb_coded")
        counts = estimate_outage(cfg, spec, cfg.snr, 3000, seed=2024)
        rng_counts = np.zeros(2, dtype=int)
        # reproduce chunk 0's stream layout by hand
        from fmatchlab.montecarlo import _PURPOSE_AUX, _PURPOSE_GAINS, _SCHEME_IDS, _stream
        from fmatchlab import _kernels

        g_rng = _stream(2024, _PURPOSE_GAINS, _SCHEME_IDS["rb_coded"], cfg.snr, 0)
        a_rng = _stream(2024, _PURPOSE_AUX, _SCHEME_IDS["rb_coded"], cfg.snr, 0)
        normals = g_rng.standard_normal((3000, 2, 2, 6))
        gsq = (normals[:, 0] ** 2 + normals[:, 1] ** 2) / 2
        aux = a_rng.random((3000, _kernels.aux_row_width(12, 12)))
        _, r_c = subchannel_rate(cfg)
        tau = math.expm1(r_c) / cfg.snr
        outage, _ = _kernels.fmatch_trials(
            gsq, aux, np.array([6, 6]), tau, cfg.rates(), cfg.snr, 2, np.inf
        )
        assert [int(c) for c in outage.sum(axis=0)] == [e.outage_count for e in counts]


class TestEstimateOutage:
    def test_worker_count_invariance(self, cfg_rb):
        a = estimate_outage(cfg_rb, ALL_SCHEMES[0], 10.0, 120_000, 9, workers=1)
        b = estimate_outage(cfg_rb, ALL_SCHEMES[0], 10.0, 120_000, 9, workers=5)
        assert [x.outage_count for x in a] == [y.outage_count for y in b]

    def test_deterministic_given_seed(self, cfg_rb):
        a = estimate_outage(cfg_rb, SchemeSpec("interleaved"), 10.0, 50_000, 1)
        b = estimate_outage(cfg_rb, SchemeSpec("interleaved"), 10.0, 50_000, 1)
        assert [x.outage_count for x in a] == [y.outage_count for y in b]

    def test_censoring_floor(self, cfg_rb):
        ests = estimate_outage(cfg_rb.with_snr(10**6.0), ALL_SCHEMES[1], 10**6.0, 10_000, 3)
        assert all(e.censored for e in ests)

    def test_paired_mode_shares_channel_stream(self, cfg_rb):
        # interleaved and tdma rates coincide for this symmetric config, so
        # with shared gains their outage counts must match trial for trial
        il = estimate_outage(cfg_rb, SchemeSpec("interleaved"), 4.0, 50_000, 7, paired=True)
        td = estimate_outage(cfg_rb, SchemeSpec("tdma"), 4.0, 50_000, 7, paired=True)
        assert [x.outage_count for x in il] == [y.outage_count for y in td]
        # without pairing the streams differ and so (almost surely) do counts
        il_u = estimate_outage(cfg_rb, SchemeSpec("interleaved"), 4.0, 50_000, 7)
        td_u = estimate_outage(cfg_rb, SchemeSpec("tdma"), 4.0, 50_000, 7)
        assert [x.outage_count for x in il_u] != [y.outage_count for y in td_u]

    def test_band_outage_frequency_end_to_end(self, cfg_rb):
        # matched counts of the tdma path count non-outage bands per user:
        # their mean over 1e6 trials reproduces the closed-form q_s
        cfg = cfg_rb.with_snr(10.0)
        from fmatchlab.montecarlo import _run_chunk

        _, r_c = subchannel_rate(cfg)
        p_s, q_s = subchannel_outage_prob(r_c, cfg.snr)
        total = 0
        trials = 1_000_000
        done = 0
        chunk = 0
        while done < trials:
            n = min(1 << 16, trials - done)
            _, matched = _run_chunk(cfg, SchemeSpec("tdma"), n, chunk, 5, False, False, 2.0)
            total += int(matched.sum())
            done += n
            chunk += 1
        freq = total / (trials * 2 * 6)
        sigma = math.sqrt(p_s * q_s / (trials * 12))
        assert abs(freq - q_s) < 3 * sigma + 1e-4

    def test_scheme_dominance_at_fixed_rate(self, cfg_rb):
        # multi-user diversity: coded f-matching beats the CSI-free baselines
        gamma = 10 ** (4.0 / 10)
        rb = estimate_outage(cfg_rb, SchemeSpec("rb_coded"), gamma, 400_000, 21, paired=True)
        il = estimate_outage(cfg_rb, SchemeSpec("interleaved"), gamma, 400_000, 21, paired=True)
        for m in range(2):
            assert rb[m].ci_hi < il[m].ci_lo


class TestConditionalExperiment:
    def test_support_argument_zero_outage(self):
        # k = K with target below k * R_s: every channel clears its share
        est = conditional_experiment(4, 4, [10.0], 50_000, 1, rate=1.0)[0]
        assert est.outage_count == 0

    def test_k0_k1_matches_truncated_quadrature(self):
        # K=1, k=0, target R/2 with conditioning threshold R: closed quadrature
        gamma, R = 5.0, 0.8
        tau = (math.exp(R) - 1) / gamma
        p_s = -math.expm1(-tau)
        num, _ = integrate.quad(
            lambda x: math.exp(-x), 0, (math.exp(R / 2) - 1) / gamma
        )
        oracle = num / p_s
        est = conditional_experiment(
            1, 0, [gamma], 400_000, 5, rate=R / 2, threshold_rate=R
        )[0]
        stderr = math.sqrt(oracle * (1 - oracle) / est.trials)
        assert abs(est.p_hat - oracle) < 3 * stderr

    def test_law_of_total_probability_closure(self):
        # binomial mixture of the conditional estimates = unconditional law
        K, r, seed = 4, 1.0, 99
        for g_db in (8.0, 12.0):
            gamma = 10 ** (g_db / 10)
            rate = r * math.log1p(gamma)
            r_s = rate / K
            p_s, q_s = subchannel_outage_prob(r_s, gamma)
            mix, var = 0.0, 0.0
            for k in range(K + 1):
                w = math.comb(K, k) * p_s ** (K - k) * q_s**k
                est = conditional_experiment(K, k, [gamma], 200_000, seed + k, r=r)[0]
                mix += w * est.p_hat
                var += (w**2) * est.p_hat * (1 - est.p_hat) / est.trials
            unc = unconditional_experiment(K, [gamma], 400_000, seed + 50, r=r)[0]
            var += unc.p_hat * (1 - unc.p_hat) / unc.trials
            assert abs(mix - unc.p_hat) < 3 * math.sqrt(var) + 1e-6


class TestSweep:
    def test_rows_cover_schemes_and_sources(self, cfg_rb):
        rows = sweep(
            cfg_rb,
            [SchemeSpec("rb_coded"), SchemeSpec("interleaved")],
            np.array([2.0, 4.0]),
            20_000,
            3,
        )
        kinds = {(r.scheme, r.source) for r in rows}
        assert ("rb_coded", "monte_carlo") in kinds or ("rb_coded", "mc_censored") in kinds
        assert any(src.startswith("formula") for _, src in kinds)
        assert ("rb_coded", "asymptote") in kinds

    def test_interleaved_bound_dominates_estimates(self, cfg_rb):
        rows = sweep(cfg_rb, [SchemeSpec("interleaved")], np.array([4.0, 6.0]), 200_000, 11)
        mc = {(r.gamma_db, r.user): r for r in rows if r.source == "monte_carlo"}
        for r in rows:
            if r.source == "bound" and (r.gamma_db, r.user) in mc:
                est = mc[(r.gamma_db, r.user)]
                stderr = math.sqrt(max(est.p_out, 1e-9) / est.ci_hi / 200_000) if est.ci_hi else 0
                assert r.p_out >= est.p_out - 3 * math.sqrt(
                    max(est.p_out * (1 - est.p_out), 1e-12) / 200_000
                )
