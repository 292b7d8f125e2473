import numpy as np
import pytest

from coalesce.crw import simulate_crw
from coalesce.errors import EmptySamples, ParameterOutOfRange
from coalesce.graphs import cycle_graph, path_graph
from coalesce.seeding import derive_rng
from coalesce.stats import ks_distance_two_sample
from coalesce.voter import (
    duality_gap,
    gamma22_cdf,
    gamma_ks,
    normalized_moments,
    sample_nhat_ancestral,
    simulate_voter,
    size_bias_histogram,
)

C6 = cycle_graph(6)


class TestSimulateVoter:
    def test_time_zero(self):
        rec = simulate_voter(C6, [0.0], derive_rng(0, "voter", 0))
        assert rec["nhat"][0] == 1
        assert rec["n_distinct"][0] == 6
        assert rec["survived_0"][0]

    def test_k2_agreement_probability(self):
        rng = derive_rng(1, "voter", 0)
        t = 0.4
        hits = sum(
            simulate_voter(path_graph(2), [t], rng)["nhat"][0] == 2
            for _ in range(20_000)
        )
        p = hits / 20_000
        expected = 1 - np.exp(-2 * t)
        assert abs(p - expected) <= 4 * np.sqrt(expected * (1 - expected) / 20_000)

    def test_distinct_count_nonincreasing(self):
        grid = np.linspace(0.0, 4.0, 17)
        for rep in range(20):
            rec = simulate_voter(cycle_graph(8), grid, derive_rng(2, "voter", rep))
            assert (np.diff(rec["n_distinct"]) <= 0).all()


class TestDualityGap:
    def test_cycle4_within_bands(self):
        res = duality_gap(cycle_graph(4), 1.0, 20_000, derive_rng(3, "dual", 0))
        assert res["ks_nhat_vs_Nt"] <= 0.02
        assert res["abs_gap_survival_vs_density"] <= 4 * res["se_survival_vs_density"]
        assert res["abs_gap_Pt_vs_invNt"] <= 4 * res["se_Pt_vs_invNt"]

    def test_seed_swap(self):
        res = duality_gap(
            cycle_graph(4), 1.0, 20_000, derive_rng(3, "dual", 1), swap_streams=True
        )
        assert res["ks_nhat_vs_Nt"] <= 0.02
        assert res["abs_gap_Pt_vs_invNt"] <= 4 * res["se_Pt_vs_invNt"]

    def test_time_zero_ks(self):
        res = duality_gap(C6, 0.0, 500, derive_rng(4, "dual", 0))
        assert res["ks_nhat_vs_Nt"] == 0.0

    def test_two_path_hand_identity(self):
        # E(1/nhat) = exp(-2t) + (1 - exp(-2t))/2 = (1 + exp(-2t))/2, the density
        rng = derive_rng(5, "dual", 0)
        t = 0.7
        inv = np.array(
            [1.0 / simulate_voter(path_graph(2), [t], rng)["nhat"][0]
             for _ in range(20_000)]
        )
        target = (1 + np.exp(-2 * t)) / 2
        assert abs(inv.mean() - target) <= 4 * inv.std(ddof=1) / np.sqrt(len(inv))


class TestAncestralSampler:
    def test_matches_forward_law(self):
        t = 1.0
        fwd_rng = derive_rng(6, "anc", 0)
        fwd = np.array(
            [simulate_voter(C6, [t], fwd_rng)["nhat"][0] for _ in range(10_000)]
        )
        anc = sample_nhat_ancestral(C6, t, 10_000, derive_rng(6, "anc", 1))
        assert ks_distance_two_sample(fwd, anc) <= 1.63 * np.sqrt(2 / 10_000) + 0.01

    def test_multi_draw_shape(self):
        out = sample_nhat_ancestral(C6, 0.5, 100, derive_rng(7, "anc", 0),
                                    draws_per_trajectory=5)
        assert out.shape == (500,)


class TestSizeBiasIdentity:
    def test_cycle6_bins(self):
        rng = derive_rng(8, "nteq", 0)
        nh = np.empty(20_000, dtype=int)
        ni = np.empty(20_000, dtype=int)
        for r in range(20_000):
            rec = simulate_voter(C6, [1.0], rng)
            nh[r] = rec["nhat"][0]
            ni[r] = rec["n_init"][0]
        for row in size_bias_histogram(nh, ni, 4):
            assert abs(row["diff"]) <= 4.0 * row["se"]

    def test_inverse_cluster_tail_identity(self):
        # mean(1/N 1[N >= M]) = P(n_init >= M) for M in {2, 3}
        rng = derive_rng(9, "tail", 0)
        reps = 20_000
        n_init = np.empty(reps, dtype=int)
        for r in range(reps):
            n_init[r] = simulate_voter(C6, [1.0], rng)["n_init"][0]
        rng2 = derive_rng(9, "tail", 1)
        ncrw = np.array(
            [
                simulate_crw(C6, [1.0], rng2, track="tracked_cluster")["N"][0]
                for _ in range(reps)
            ],
            dtype=float,
        )
        for m in (2, 3):
            lhs_samples = (1.0 / ncrw) * (ncrw >= m)
            rhs_samples = (n_init >= m).astype(float)
            diff = lhs_samples.mean() - rhs_samples.mean()
            se = np.sqrt(
                lhs_samples.var(ddof=1) / reps + rhs_samples.var(ddof=1) / reps
            )
            assert abs(diff) <= 4.0 * se


class TestNormalizedMoments:
    def test_constant_samples(self):
        res = normalized_moments(np.full(100, 3.7), 4)
        assert res["m"] == pytest.approx([1.0, 1.0, 1.0, 1.0], abs=1e-12)

    def test_synthetic_gamma(self):
        rng = derive_rng(10, "gam", 0)
        x = rng.gamma(2.0, 0.5, size=100_000)
        res = normalized_moments(x, 3, rng=rng)
        assert res["m"][1] == pytest.approx(1.5, abs=0.02)
        assert res["m"][2] == pytest.approx(3.0, abs=0.12)
        lo2, hi2 = res["ci95"][1]
        assert lo2 <= 1.5 <= hi2

    def test_empty_rejected(self):
        with pytest.raises(EmptySamples):
            normalized_moments([], 2)

    def test_nonpositive_mean_rejected(self):
        with pytest.raises(ParameterOutOfRange):
            normalized_moments([0.0, 0.0], 2)


class TestGammaKs:
    def test_calibration(self):
        rng = derive_rng(11, "ks", 0)
        x = rng.gamma(2.0, 0.5, size=10_000)
        assert gamma_ks(x) <= 1.63 / np.sqrt(10_000)

    def test_cdf_values(self):
        assert gamma22_cdf(0.0) == 0.0
        assert gamma22_cdf(1.0) == pytest.approx(1 - np.exp(-2) * 3, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptySamples):
            gamma_ks([])
