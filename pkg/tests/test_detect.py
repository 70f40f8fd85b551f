"""Receiver math against brute-force enumeration oracles and spec'd arithmetic."""

import numpy as np
import pytest

from mumimo.channel import ToneChannel, ToneObservation, gen_iid_block, gen_pilots, transmit
from mumimo.constellation import (
    ConstellationKind,
    build_constellation,
    hypothesis_set,
)
from mumimo.detect import (
    ClassificationResult,
    combine,
    count_distances,
    cov_weights,
    distance,
    distance_tables,
    irc_llr,
    irc_weights,
    joint_ml_classify,
    llr_frame_from_tables,
    llrs_from_distances,
    max_log_llr,
    min_distance_over_interferer,
    nulling_classify,
    nulling_filter,
)
from oracles import (
    argmin_smallest_alphabet,
    bf_joint_metrics,
    bf_max_log_llrs,
    bf_min_over_pairs,
    bf_nulling_metrics,
    bf_table_entries,
    combo_seed,
)
from conftest import random_observation

ABSENT = ConstellationKind.ABSENT
QAM4 = ConstellationKind.QAM4
QAM16 = ConstellationKind.QAM16
QAM64 = ConstellationKind.QAM64
QAM_KINDS = [QAM4, QAM16, QAM64]


def _obs(y, h1, h2, nv=1.0):
    chan = ToneChannel(h1=np.asarray(h1, complex), h2=np.asarray(h2, complex))
    return ToneObservation(y=np.asarray(y, complex), chan=chan, noise_var=nv)


class TestDistance:
    def test_exact_reconstruction_is_zero(self, rng):
        chan = gen_iid_block(1, rng)[0]
        x1, x2 = 0.3 + 0.1j, -0.5 + 0.9j
        obs = ToneObservation(y=chan.h1 * x1 + chan.h2 * x2, chan=chan, noise_var=0.2)
        # y is reconstructed from the same products, so the residual is at
        # worst a couple of rounding ulps
        assert distance(obs, x1, x2) <= 1e-28

    def test_direct_arithmetic(self):
        obs = _obs([2, 0], [1, 0], [0, 1], nv=1.0)
        assert distance(obs, 1.0, 1.0) == pytest.approx(2.0, abs=1e-14)

    def test_noise_scaling(self):
        obs = _obs([2, 0], [1, 0], [0, 1], nv=0.5)
        assert distance(obs, 1.0, 1.0) == pytest.approx(4.0, abs=1e-14)

    def test_nonnegative_on_random_instances(self, rng):
        for _ in range(100):
            obs = random_observation(rng)
            ms = build_constellation(QAM16)
            assert distance(obs, ms.points[3], ms.points[9], 0.7) >= 0.0


class TestDistanceTables:
    def test_absent_entry_equals_singleton_distance(self, rng):
        obs = random_observation(rng)
        ms = build_constellation(QAM4)
        table = distance_tables(obs, ms)
        k = table.hypothesis_index(ABSENT)
        for i, x1 in enumerate(ms.points):
            assert table.dists[k][i] == pytest.approx(distance(obs, x1, 0.0),
                                                      rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("ms_kind", QAM_KINDS)
    def test_entries_match_pair_enumeration(self, rng, ms_kind):
        ms = build_constellation(ms_kind)
        for trial in range(4):
            obs = random_observation(rng, ms_kind=ms_kind)
            table = distance_tables(obs, ms, sir_scale=0.8)
            for k, mi in enumerate(table.hypotheses):
                dists, idxs = bf_table_entries(obs, ms, mi, sir_scale=0.8)
                np.testing.assert_allclose(table.dists[k], dists, rtol=1e-10)
                np.testing.assert_array_equal(table.x2_indices[k], idxs)

    def test_table_min_is_min_over_pairs(self, rng):
        ms = build_constellation(QAM16)
        obs = random_observation(rng, ms_kind=QAM16)
        table = distance_tables(obs, ms)
        for k, mi in enumerate(table.hypotheses):
            assert table.dists[k].min() == pytest.approx(
                bf_min_over_pairs(obs, ms, mi), rel=1e-10)

    def test_entries_accessor(self, rng):
        ms = build_constellation(QAM4)
        obs = random_observation(rng)
        table = distance_tables(obs, ms)
        entries = table.entries(QAM16)
        assert len(entries) == 4
        assert all(e.dist >= 0 for e in entries)


class TestJointClassify:
    def test_noiseless_absent_chooses_absent(self, rng):
        ms = build_constellation(QAM4)
        tables = []
        for _ in range(8):
            chan = gen_iid_block(1, rng)[0]
            x1 = ms.points[rng.integers(4)]
            obs = ToneObservation(y=chan.h1 * x1, chan=chan, noise_var=1e-9)
            tables.append(distance_tables(obs, ms))
        res = joint_ml_classify(tables)
        assert res.chosen is ABSENT
        assert res.metrics[ABSENT] == pytest.approx(0.0, abs=1e-4)

    def test_empty_input_raises(self):
        with pytest.raises(ValueError, match="at least one"):
            joint_ml_classify([])

    def test_penalty_monotonicity_on_zero_distances(self):
        # all-zero buffers: only the size penalty differentiates hypotheses
        ms = build_constellation(QAM4)
        hyps = hypothesis_set()
        from mumimo.detect import DistanceTable
        zero = tuple(np.zeros(ms.size) for _ in hyps)
        idx = tuple(np.zeros(ms.size, dtype=np.intp) for _ in hyps)
        t = DistanceTable(ms=ms, hypotheses=hyps, dists=zero, x2_indices=idx)
        res = joint_ml_classify([t, t, t])
        assert res.chosen is ABSENT

    @pytest.mark.parametrize("ms_kind", QAM_KINDS)
    @pytest.mark.parametrize("mi_kind", [ABSENT] + QAM_KINDS)
    def test_matches_bruteforce_oracle(self, ms_kind, mi_kind):
        # ~200 instances spread over all alphabet combinations
        ms = build_constellation(ms_kind)
        hyps = hypothesis_set()
        rng = np.random.default_rng(combo_seed(ms_kind, mi_kind))
        for trial in range(17):
            snr_db = rng.uniform(-5, 25)
            obs = [random_observation(rng, ms_kind=ms_kind, mi_kind=mi_kind,
                                      noise_var=10 ** (-snr_db / 10))
                   for _ in range(12)]
            tables = [distance_tables(o, ms) for o in obs]
            res = joint_ml_classify(tables)
            ref = bf_joint_metrics(obs, ms, hyps)
            assert res.chosen is argmin_smallest_alphabet(ref, hyps)
            got = np.array([res.metrics[h.kind] for h in hyps])
            np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-9)

    def test_consistency_at_high_snr(self, rng):
        # classification is asymptotically exact: 40 dB, N=24 window
        from mumimo.harness import ExperimentConfig, run_classification_sweep

        cfg = ExperimentConfig(
            sweep="classify", receivers=("joint-ml",), ms=QAM4,
            mi_true=(QAM16,), window_sizes=(24,), n_trials=10_000,
            snr_db=(40.0,), seed=99)
        (rec,) = run_classification_sweep(cfg)
        assert rec.value >= 0.999


class TestNulling:
    def test_axis_aligned_channel(self):
        g = nulling_filter(np.array([0.0, 1.0 + 0j]))
        np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-15)

    def test_diagonal_example(self):
        h1 = np.array([1.0, 1.0]) / np.sqrt(2)
        g = nulling_filter(h1)
        np.testing.assert_allclose(g, [0.5, -0.5], atol=1e-14)
        assert abs(np.vdot(g, h1)) < 1e-14

    def test_zero_channel_raises(self):
        with pytest.raises(ValueError, match="zero desired channel"):
            nulling_filter(np.zeros(2, complex))

    def test_projector_properties_random(self, rng):
        for _ in range(400):
            h1 = (rng.standard_normal(2) + 1j * rng.standard_normal(2))
            n = np.sum(np.abs(h1) ** 2)
            proj = np.eye(2) - np.outer(h1, h1.conj()) / n
            g = nulling_filter(h1)
            np.testing.assert_allclose(proj @ proj, proj, atol=1e-12)
            np.testing.assert_allclose(proj, proj.conj().T, atol=1e-12)
            assert np.linalg.matrix_rank(proj, tol=1e-9) == 1
            assert abs(np.vdot(g, h1)) <= 1e-12 * np.linalg.norm(g) * np.linalg.norm(h1)

    def test_noiseless_absent_chooses_absent(self, rng):
        ms = build_constellation(QAM4)
        obs = []
        for _ in range(8):
            chan = gen_iid_block(1, rng)[0]
            obs.append(ToneObservation(y=chan.h1 * ms.points[0], chan=chan,
                                       noise_var=1e-9))
        assert nulling_classify(obs).chosen is ABSENT

    @pytest.mark.parametrize("mi_kind", [ABSENT] + QAM_KINDS)
    def test_matches_bruteforce_oracle(self, mi_kind):
        hyps = hypothesis_set()
        rng = np.random.default_rng(combo_seed(mi_kind))
        for trial in range(50):
            snr_db = rng.uniform(-5, 25)
            obs = [random_observation(rng, ms_kind=QAM16, mi_kind=mi_kind,
                                      noise_var=10 ** (-snr_db / 10))
                   for _ in range(12)]
            res = nulling_classify(obs, sir_scale=1.0)
            ref = bf_nulling_metrics(obs, hyps, sir_scale=1.0)
            assert res.chosen is argmin_smallest_alphabet(ref, hyps)
            got = np.array([res.metrics[h.kind] for h in hyps])
            np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-9)


class TestMaxLogLlr:
    def test_noiseless_sign_matches_transmitted_bits(self, rng):
        ms = build_constellation(QAM16)
        mi = build_constellation(QAM4)
        for _ in range(10):
            chan = gen_iid_block(1, rng)[0]
            i1 = rng.integers(ms.size)
            x2 = mi.points[rng.integers(mi.size)]
            obs = ToneObservation(y=chan.h1 * ms.points[i1] + chan.h2 * x2,
                                  chan=chan, noise_var=1e-6)
            table = distance_tables(obs, ms)
            lam = max_log_llr(table, QAM4, ms)
            signs = np.where(ms.labels[i1] == 1, 1.0, -1.0)
            assert np.all(np.sign(lam) == signs)

    @pytest.mark.parametrize("ms_kind", QAM_KINDS)
    def test_matches_exhaustive_oracle(self, rng, ms_kind):
        ms = build_constellation(ms_kind)
        for mi_kind in [ABSENT] + QAM_KINDS:
            obs = random_observation(rng, ms_kind=ms_kind, mi_kind=mi_kind,
                                     noise_var=0.05)
            table = distance_tables(obs, ms)
            lam = max_log_llr(table, mi_kind, ms)
            ref = bf_max_log_llrs(obs, ms, build_constellation(mi_kind))
            np.testing.assert_allclose(lam, ref, rtol=1e-10,
                                       atol=1e-10 * max(1.0, np.abs(ref).max()))

    def test_genie_equivalence_when_chosen_is_true(self, rng):
        # reading the true hypothesis's buffer IS the genie detector
        ms = build_constellation(QAM16)
        obs = [random_observation(rng, ms_kind=QAM16, mi_kind=QAM16)
               for _ in range(6)]
        tables = [distance_tables(o, ms) for o in obs]
        frame = llr_frame_from_tables(tables, QAM16, ms)
        genie = np.stack([max_log_llr(t, QAM16, ms) for t in tables])
        np.testing.assert_array_equal(frame.llrs, genie)

    def test_buffer_reuse_is_bit_identical_to_scratch(self, rng):
        ms = build_constellation(QAM64)
        obs = random_observation(rng, ms_kind=QAM64, mi_kind=QAM4)
        table = distance_tables(obs, ms)
        lam_buffer = max_log_llr(table, QAM4, ms)
        lam_scratch = max_log_llr(distance_tables(obs, ms), QAM4, ms)
        np.testing.assert_array_equal(lam_buffer, lam_scratch)


class TestCovReceiver:
    def test_alternating_basis_pilots(self):
        # u_p alternating e1, e2 gives R_uu = I/2, so w = 2*h1
        h1 = np.array([0.4 + 0.1j, -0.2 + 0.7j])
        chan = ToneChannel(h1=h1, h2=np.zeros(2, complex))
        pilots = []
        for p in range(2):
            e = np.zeros(2, complex)
            e[p] = 1.0
            pilots.append((1.0 + 0j, ToneObservation(y=h1 + e, chan=chan, noise_var=1.0)))
        (weights,) = cov_weights(pilots, [h1])
        np.testing.assert_allclose(weights.w, 2 * h1, atol=1e-12)
        np.testing.assert_allclose(weights.interference_cov, np.eye(2) / 2, atol=1e-12)

    def test_matched_filter_limit_without_interference(self, rng):
        # absent interferer, tiny noise, many pilots: w parallel to h1
        nv = 1e-4
        chan = gen_iid_block(1, rng)[0]
        mi = build_constellation(ABSENT)
        ms = build_constellation(QAM4)
        pilots = gen_pilots([chan], 5000, ms, mi, 1.0, nv, rng)
        (weights,) = cov_weights(pilots, [chan.h1])
        w = weights.w / np.linalg.norm(weights.w)
        h = chan.h1 / np.linalg.norm(chan.h1)
        assert abs(np.vdot(w, h)) == pytest.approx(1.0, abs=1e-3)

    def test_sample_covariance_converges(self, rng):
        sir_scale = 0.7
        nv = 0.2
        chan = gen_iid_block(1, rng)[0]
        ms = build_constellation(QAM4)
        mi = build_constellation(QAM16)
        pilots = gen_pilots([chan], 10_000, ms, mi, sir_scale, nv, rng)
        (weights,) = cov_weights(pilots, [chan.h1])
        h2e = sir_scale * chan.h2
        expected = np.outer(h2e, h2e.conj()) + nv * np.eye(2)
        np.testing.assert_allclose(weights.interference_cov, expected,
                                   atol=0.03 * np.abs(expected).max())

    def test_needs_two_pilots(self, rng):
        obs = random_observation(rng)
        with pytest.raises(ValueError, match="two pilots"):
            cov_weights([(1.0, obs)], [obs.chan.h1])

    def test_singular_after_regularization_raises(self):
        # noiseless pilots reconstructed exactly: u_p = 0, R_uu = 0
        h1 = np.array([1.0 + 0j, 0.5j])
        chan = ToneChannel(h1=h1, h2=np.zeros(2, complex))
        pilots = [(1.0 + 0j, ToneObservation(y=h1, chan=chan, noise_var=1.0))
                  for _ in range(4)]
        with pytest.raises(np.linalg.LinAlgError, match="singular"):
            cov_weights(pilots, [h1])


class TestIrcReceiver:
    def test_no_interference_unit_noise(self):
        chan = ToneChannel(h1=np.array([0.3 - 0.2j, 1.1 + 0j]),
                           h2=np.zeros(2, complex))
        w = irc_weights(chan, 1.0, 1.0)
        np.testing.assert_allclose(w.w, chan.h1, atol=1e-14)

    def test_orthogonal_channels(self):
        chan = ToneChannel(h1=np.array([1.0 + 0j, 0]), h2=np.array([0, 1.0 + 0j]))
        w = irc_weights(chan, 1.0, 1.0)
        np.testing.assert_allclose(w.w, [1.0, 0.0], atol=1e-14)
        assert w.effective_gain == pytest.approx(1.0)

    def test_matches_adjugate_solve(self, rng):
        for _ in range(50):
            chan = gen_iid_block(1, rng)[0]
            s, nv = 0.9, 0.3
            w = irc_weights(chan, s, nv)
            cov = np.outer(s * chan.h2, (s * chan.h2).conj()) + nv * np.eye(2)
            a, b, c, d = cov[0, 0], cov[0, 1], cov[1, 0], cov[1, 1]
            inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
            np.testing.assert_allclose(w.w, inv @ chan.h1, rtol=1e-12, atol=1e-12)
            # for IRC weights the residual variance equals the effective gain
            assert w.residual_var == pytest.approx(w.effective_gain.real, rel=1e-10)

    def test_llr_sign_on_exact_point(self, rng):
        ms = build_constellation(QAM16)
        chan = gen_iid_block(1, rng)[0]
        w = irc_weights(chan, 1.0, 0.1)
        i1 = 7
        z = w.effective_gain * ms.points[i1]
        lam = irc_llr(z, w, ms)
        signs = np.where(ms.labels[i1] == 1, 1.0, -1.0)
        assert np.all(np.sign(lam) == signs)

    def test_qam4_llr_matches_two_point_min(self, rng):
        ms = build_constellation(QAM4)
        chan = gen_iid_block(1, rng)[0]
        w = irc_weights(chan, 1.0, 0.5)
        obs_z = 0.3 - 1.2j
        lam = irc_llr(obs_z, w, ms)
        for j in range(2):
            plus = [abs(obs_z - w.effective_gain * ms.points[i]) ** 2
                    for i in range(4) if ms.labels[i, j] == 1]
            minus = [abs(obs_z - w.effective_gain * ms.points[i]) ** 2
                     for i in range(4) if ms.labels[i, j] == 0]
            assert lam[j] == pytest.approx((min(minus) - min(plus)) / w.residual_var,
                                           rel=1e-12)

    def test_amplitude_scaling_preserves_signs(self, rng):
        ms = build_constellation(QAM16)
        chan = gen_iid_block(1, rng)[0]
        w = irc_weights(chan, 1.0, 0.2)
        z = complex(combine(w, random_observation(rng).y))
        base = irc_llr(z, w, ms)
        from mumimo.detect import LinearWeights
        alpha = 3.7
        scaled = LinearWeights(w=w.w, effective_gain=alpha * w.effective_gain,
                               residual_var=w.residual_var)
        lam = irc_llr(alpha * z, scaled, ms)
        np.testing.assert_array_equal(np.sign(lam), np.sign(base))


class TestDistanceCounts:
    def test_genie_baseline(self):
        for kind in QAM_KINDS:
            rep = count_distances(kind)
            assert rep.genie_entries == 140 * kind.size

    def test_overhead_below_30pct_for_qam64(self):
        rep = count_distances(QAM64)
        assert rep.overhead_pct <= 30.0
        assert rep.reference_overhead_pct == 22.8

    def test_window_reuse_accounting(self):
        rep = count_distances(QAM16, data_tones=140, classification_tones=12)
        assert rep.joint_entries == 12 * 4 * 16 + (140 - 12) * 16
        assert rep.reused_entries == 12 * 16
