import numpy as np
import pytest

from coalesce.chains import MarkovChain, build_generator, product_chain, spectrum
from coalesce.errors import BadSubset, NotTransitive, ParameterOutOfRange
from coalesce.graphs import cycle_graph, path_graph
from coalesce.meeting import (
    aldous_brown_check,
    alpha_survival,
    eigentime_residual,
    exit_measure,
    kac_residual,
    mc_pair_meeting,
    mean_meeting_time,
    pairwise_meeting_times,
)
from coalesce.seeding import derive_rng


def cycle_pair_oracle(n):
    """Expected meeting time on the n-cycle at graph distance k: k(n-k)/4."""
    out = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            k = min((x - y) % n, (y - x) % n)
            out[x, y] = k * (n - k) / 4.0
    return out


class TestPairwise:
    def test_k2(self, k2_chain):
        prof = pairwise_meeting_times(k2_chain)
        assert prof.pairwise[0, 1] == pytest.approx(0.5, abs=1e-10)
        assert prof.pairwise[0, 0] == 0.0

    @pytest.mark.parametrize("n", [4, 6, 9])
    def test_cycle_oracle(self, n):
        prof = pairwise_meeting_times(build_generator(cycle_graph(n)))
        assert np.allclose(prof.pairwise, cycle_pair_oracle(n), atol=1e-8)
        assert prof.residual <= 1e-9

    def test_symmetry_zero_diag(self, torus33_chain):
        prof = pairwise_meeting_times(torus33_chain)
        assert np.allclose(prof.pairwise, prof.pairwise.T, atol=1e-9)
        assert np.array_equal(np.diag(prof.pairwise), np.zeros(27))

    def test_sparse_path_matches_dense(self):
        # n > 40 routes through the sparse solver
        c = build_generator(cycle_graph(50))
        prof = pairwise_meeting_times(c)
        assert np.allclose(prof.pairwise, cycle_pair_oracle(50), atol=1e-7)


class TestMeanMeetingTime:
    def test_cycle4(self, cycle4_chain):
        assert mean_meeting_time(cycle4_chain, "pi_pi") == pytest.approx(5 / 8, abs=1e-9)

    def test_complete4(self, complete4_chain):
        assert mean_meeting_time(complete4_chain, "pi_pi") == pytest.approx(3 / 8, abs=1e-9)
        assert mean_meeting_time(complete4_chain, "distinct") == pytest.approx(0.5, abs=1e-9)

    def test_k2(self, k2_chain):
        assert mean_meeting_time(k2_chain, "pi_pi") == pytest.approx(0.25, abs=1e-10)

    def test_pi_distinct_identity(self, torus33_chain):
        prof = pairwise_meeting_times(torus33_chain)
        assert prof.t_meet_pi == pytest.approx(
            (1 - 1 / 27) * prof.t_meet_distinct, abs=1e-10
        )

    def test_unknown_mode(self, k2_chain):
        with pytest.raises(ParameterOutOfRange):
            mean_meeting_time(k2_chain, "nope")


class TestAlphaSurvival:
    def test_zero_time(self, cycle4_chain):
        res = alpha_survival(cycle4_chain, 1, 0.0)
        assert res["value"] == pytest.approx(2.0, abs=1e-10)

    def test_k2_closed_form(self, k2_chain):
        res = alpha_survival(k2_chain, 0, 0.5)
        assert res["value"] == pytest.approx(np.exp(-1), abs=1e-9)

    def test_exact_vs_mc(self, cycle4_chain):
        exact = alpha_survival(cycle4_chain, 0, 0.25)["value"]
        mc = alpha_survival(
            cycle4_chain,
            0,
            0.25,
            mode="mc",
            reps=100_000,
            rng=derive_rng(9, "alpha-mc", 0),
        )
        assert abs(mc["value"] - exact) <= 3.0 * mc["stderr"]
        lo, hi = mc["ci95"]
        assert lo <= mc["value"] <= hi
        assert hi - lo == pytest.approx(2 * 1.96 * mc["stderr"], rel=1e-12)

    def test_nonincreasing(self, cycle4_chain):
        vals = [alpha_survival(cycle4_chain, 0, t)["value"] for t in (0.0, 0.3, 0.8, 1.5)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_accepts_graph_directly(self, cycle4_chain):
        from_chain = alpha_survival(cycle4_chain, 0, 0.5)["value"]
        from_graph = alpha_survival(cycle_graph(4), 0, 0.5)["value"]
        assert from_graph == pytest.approx(from_chain, abs=1e-12)


class TestExitMeasure:
    def test_singleton_is_jump_law(self, cycle4_chain):
        em = exit_measure(cycle4_chain, [2])
        expected = cycle4_chain.rates[2] / cycle4_chain.row_rates[2]
        assert np.allclose(em.weights, expected, atol=1e-12)

    def test_k2(self, k2_chain):
        em = exit_measure(k2_chain, [0])
        assert np.allclose(em.weights, [0.0, 1.0], atol=1e-15)

    def test_random_subsets_normalized(self):
        c = build_generator(cycle_graph(8))
        rng = derive_rng(1, "exit", 0)
        for _ in range(10):
            size = int(rng.integers(1, 8))
            A = rng.choice(8, size=size, replace=False)
            em = exit_measure(c, A)
            assert abs(em.weights.sum() - 1.0) <= 1e-12

    def test_bad_subset(self, cycle4_chain):
        with pytest.raises(BadSubset):
            exit_measure(cycle4_chain, [])
        with pytest.raises(BadSubset):
            exit_measure(cycle4_chain, [0, 1, 2, 3])


class TestKac:
    def test_k2_hand_values(self, k2_chain):
        em = exit_measure(k2_chain, [0])
        assert em.Q_A == pytest.approx(0.5, abs=1e-15)
        assert kac_residual(k2_chain, [0]) <= 1e-12

    def test_random_chains(self):
        rng = derive_rng(2, "kac", 0)
        for _ in range(10):
            n = int(rng.integers(3, 8))
            rates = np.zeros((n, n))
            for v in range(1, n):
                u = int(rng.integers(0, v))
                rates[u, v] = rates[v, u] = float(rng.integers(1, 4))
            c = MarkovChain.from_rates(rates)
            A = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
            assert kac_residual(c, A) <= 1e-9

    def test_full_set_rejected(self, cycle4_chain):
        with pytest.raises(BadSubset):
            kac_residual(cycle4_chain, range(4))


class TestAldousBrown:
    def test_cycle4_product_diagonal(self, cycle4_chain):
        pc = product_chain(cycle4_chain)
        diag = [x * 4 + x for x in range(4)]
        grid = [round(0.1 * i, 10) for i in range(1, 21)]
        for row in aldous_brown_check(pc, diag, grid):
            assert row["margin_tail"] >= -1e-6
            assert row["margin_density_upper"] >= -1e-6
            assert row["margin_density_lower"] >= -1e-6

    def test_zero_time_tail_bound(self, cycle4_chain):
        pc = product_chain(cycle4_chain)
        diag = [x * 4 + x for x in range(4)]
        row = aldous_brown_check(pc, diag, [0.0])[0]
        assert row["margin_tail"] >= 0.0

    def test_random_six_state_chains(self):
        rng = derive_rng(3, "ab", 0)
        for _ in range(5):
            rates = np.triu(rng.random((6, 6)) + 0.2, 1)
            rates = rates + rates.T
            c = MarkovChain.from_rates(rates)
            A = rng.choice(6, size=int(rng.integers(1, 5)), replace=False)
            for row in aldous_brown_check(c, A, [0.2, 0.7, 1.5]):
                assert row["margin_tail"] >= -1e-6


class TestEigentime:
    def test_cycle4(self, cycle4_chain):
        assert eigentime_residual(cycle4_chain) <= 1e-8

    def test_complete4(self, complete4_chain):
        # inverse-eigenvalue sum 3/4 equals twice the mean meeting time 3/8
        assert eigentime_residual(complete4_chain) <= 1e-8

    def test_k2_by_hand(self, k2_chain):
        assert spectrum(k2_chain).eigentime_sum() == pytest.approx(0.5, abs=1e-12)
        assert eigentime_residual(k2_chain, assume_transitive=True) <= 1e-8

    def test_requires_transitivity(self):
        c = build_generator(path_graph(3))
        with pytest.raises(NotTransitive):
            eigentime_residual(c)


class TestMeetingIntegralEnvelope:
    @pytest.mark.parametrize(
        "chain_name", ["cycle4_chain", "complete4_chain", "torus33_chain"]
    )
    def test_envelope(self, chain_name, request):
        from coalesce.chains import _diag_heat

        c = request.getfixturevalue(chain_name)
        m = pairwise_meeting_times(c).t_meet_pi
        t_rel = spectrum(c).t_rel
        _, integral_to = _diag_heat(c)
        for t in (t_rel, 2 * t_rel, 5.0):
            val = float(integral_to(2.0 * t)[0]) / 2.0
            assert m / (2 * c.n) - 1e-9 <= val <= (m + t) / c.n + 1e-9


class TestMcPairMeeting:
    def test_k2_mean(self):
        res = mc_pair_meeting(path_graph(2), 20_000, derive_rng(4, "pairmc", 0))
        assert res["censored"] == 0
        assert abs(res["mean"] - 0.25) <= 4.0 * res["stderr"]

    def test_cycle_mean_matches_solve(self):
        g = cycle_graph(12)
        exact = mean_meeting_time(build_generator(g), "pi_pi")
        res = mc_pair_meeting(g, 20_000, derive_rng(5, "pairmc", 1))
        assert abs(res["mean"] - exact) <= 4.0 * res["stderr"]
