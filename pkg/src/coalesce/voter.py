"""Voter-model simulation and the distributional checks linking opinion
cluster sizes to coalescing-walk quantities.

The forward engine plays every directed-edge ring, so it is exact pathwise
and is what all duality gap checks run on.  For large graphs the opinion
cluster of a uniform vertex can be sampled through the ancestral coalescing
system instead (equal in law, one union-find query per draw), which is the
only practical route at thousands of vertices.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from ._flat import FlatGraph
from .crw import _Run, _simulate_one, flat_graph
from .errors import EmptySamples, ParameterOutOfRange
from .seeding import BufferedDraws
from .stats import ks_distance_two_sample, ks_distance_vs_cdf
from .graphs import Graph

__all__ = [
    "simulate_voter",
    "sample_nhat_ancestral",
    "duality_gap",
    "normalized_moments",
    "gamma_ks",
    "gamma22_cdf",
    "size_bias_histogram",
]


def _voter_once(flat: FlatGraph, draws: BufferedDraws, grid: list) -> dict:
    """Forward voter run; returns per-grid cluster sizes and survival flags.

    Records, at each grid time: the cluster size of the current opinion of
    one uniform vertex, the cluster size of the initial opinion of a second
    independent uniform vertex (0 when extinct), and survival of opinion 0.
    """
    n = flat.n
    opinion = list(range(n))
    counts = [1] * n  # live voters per initial opinion
    cum = []
    acc = 0.0
    for r in flat.rate:
        acc += r
        cum.append(acc)
    total = acc
    u_hat = int(draws.u01() * n)
    u_init = int(draws.u01() * n)
    ngrid = len(grid)
    nhat = np.empty(ngrid, dtype=np.int64)
    n_init = np.empty(ngrid, dtype=np.int64)
    n_distinct = np.empty(ngrid, dtype=np.int64)
    survived = np.empty(ngrid, dtype=bool)
    alive = n
    clock = 0.0
    gi = 0
    while gi < ngrid:
        dt = draws.expo() / total
        t_next = clock + dt
        while gi < ngrid and grid[gi] < t_next:
            nhat[gi] = counts[opinion[u_hat]]
            n_init[gi] = counts[u_init]
            n_distinct[gi] = alive
            survived[gi] = counts[0] > 0
            gi += 1
        if gi == ngrid:
            break
        clock = t_next
        x = bisect_right(cum, draws.u01() * total)
        y = flat.neighbor(x, draws.u01())
        ox, oy = opinion[x], opinion[y]
        if ox != oy:
            counts[oy] -= 1
            if counts[oy] == 0:
                alive -= 1
            counts[ox] += 1
            opinion[y] = ox
    return {
        "nhat": nhat,
        "n_init": n_init,
        "n_distinct": n_distinct,
        "survived_0": survived,
    }


def simulate_voter(
    g: Graph,
    t_grid,
    rng: np.random.Generator,
    convention: str = "per_edge_unit",
) -> dict:
    """One forward voter trajectory on a sorted time grid.

    Every vertex starts with its own opinion; a ring of (x, y) makes y adopt
    the opinion of x.  Returned arrays match the grid: ``nhat`` is the
    cluster size of a uniform vertex's current opinion, ``n_init`` the size
    of a uniform initial opinion's cluster (0 once extinct), ``survived_0``
    the indicator that opinion 0 is still held somewhere.
    """
    grid = [float(t) for t in t_grid]
    if any(b < a for a, b in zip(grid, grid[1:])) or (grid and grid[0] < 0.0):
        raise ParameterOutOfRange("t_grid must be sorted and nonnegative")
    flat = flat_graph(g, convention)
    out = _voter_once(flat, BufferedDraws(rng, block=1024), grid)
    out["t"] = np.array(grid)
    return out


def sample_nhat_ancestral(
    g: Graph,
    t: float,
    trajectories: int,
    rng: np.random.Generator,
    draws_per_trajectory: int = 1,
    convention: str = "per_edge_unit",
) -> np.ndarray:
    """Samples of the uniform vertex's opinion-cluster size at time t.

    Uses the ancestral representation: the cluster size equals, in law, the
    size of the coalescing-walk cluster containing a uniformly chosen
    initial particle.  Each trajectory yields ``draws_per_trajectory``
    draws (correlated within a trajectory, exact in law individually).
    """
    if trajectories < 1 or draws_per_trajectory < 1:
        raise ParameterOutOfRange("need at least one trajectory and draw")
    flat = flat_graph(g, convention)
    draws = BufferedDraws(rng, block=1 << 16)
    out = np.empty(trajectories * draws_per_trajectory, dtype=np.int64)
    i = 0
    n = g.n
    for _ in range(trajectories):
        run = _Run(flat, draws, None, False)
        while True:
            dt = draws.expo() / run.total_rate()
            if run.clock + dt > t:
                break
            run.clock += dt
            run.step()
        for _ in range(draws_per_trajectory):
            out[i] = run.cluster_size(int(draws.u01() * n))
            i += 1
    return out


def duality_gap(
    g: Graph,
    t: float,
    reps: int,
    rng: np.random.Generator,
    convention: str = "per_edge_unit",
    swap_streams: bool = False,
) -> dict:
    """Distributional duality checks at one time, voter side versus
    coalescing side run on independent streams.

    Returns the two-sample KS distance between the voter cluster size and
    the tracked coalescing cluster count, the gap between opinion-0 survival
    frequency and the occupation frequency of vertex 0, and the gap between
    density and mean inverse cluster count, each with a standard error.
    ``swap_streams`` hands the coalescing side the first stream instead;
    gaps must stay within tolerance either way.
    """
    grid = [float(t)]
    flat = flat_graph(g, convention)

    def run_voter():
        draws = BufferedDraws(rng, block=1 << 16)
        nhat = np.empty(reps, dtype=np.int64)
        survived = np.empty(reps, dtype=bool)
        for r in range(reps):
            rec = _voter_once(flat, draws, grid)
            nhat[r] = rec["nhat"][0]
            survived[r] = rec["survived_0"][0]
        return nhat, survived

    def run_crw():
        draws = BufferedDraws(rng, block=1 << 16)
        ncrw = np.empty(reps, dtype=np.int64)
        xi = np.empty(reps, dtype=np.int64)
        for r in range(reps):
            rec = _simulate_one(
                flat, draws, grid, "tracked_cluster", None, None, False
            )
            ncrw[r] = rec["N"][0]
            xi[r] = rec["xi_size"][0]
        return ncrw, xi

    if swap_streams:
        ncrw, xi = run_crw()
        nhat, survived = run_voter()
    else:
        nhat, survived = run_voter()
        ncrw, xi = run_crw()
    occ_draws = BufferedDraws(rng, block=1 << 16)
    occ0 = np.empty(reps, dtype=bool)
    for r in range(reps):
        rec = _simulate_one(flat, occ_draws, grid, "occupancy", [0], None, False)
        occ0[r] = rec["occ"][0, 0]

    ks = ks_distance_two_sample(nhat, ncrw)
    p_surv = survived.mean()
    p_occ = occ0.mean()
    se_sd = _bernoulli_gap_se(p_surv, p_occ, reps)
    p_density = xi.mean() / g.n
    inv_n = (1.0 / ncrw).mean()
    se_pd = np.sqrt(
        xi.std(ddof=1) ** 2 / g.n**2 / reps + (1.0 / ncrw).std(ddof=1) ** 2 / reps
    )
    return {
        "ks_nhat_vs_Nt": ks,
        "abs_gap_survival_vs_density": abs(p_surv - p_occ),
        "se_survival_vs_density": se_sd,
        "abs_gap_Pt_vs_invNt": abs(p_density - inv_n),
        "se_Pt_vs_invNt": float(se_pd),
        "nhat": nhat,
        "N_samples": ncrw,
    }


def _bernoulli_gap_se(p1: float, p2: float, reps: int) -> float:
    return float(np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / reps))


def normalized_moments(samples, kmax: int, rng=None, resamples: int = 500) -> dict:
    """Moments of X / mean(X) for k = 1..kmax with bootstrap intervals."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySamples("no samples")
    if x.mean() <= 0.0:
        raise ParameterOutOfRange("samples need a positive mean")
    norm = x / x.mean()
    moments = [float(np.mean(norm**k)) for k in range(1, kmax + 1)]
    cis = None
    if rng is not None:
        boot = np.empty((resamples, kmax))
        nsz = len(x)
        for b in range(resamples):
            idx = rng.integers(0, nsz, nsz)
            xb = x[idx]
            nb = xb / xb.mean()
            boot[b] = [np.mean(nb**k) for k in range(1, kmax + 1)]
        cis = [
            (float(np.quantile(boot[:, k], 0.025)), float(np.quantile(boot[:, k], 0.975)))
            for k in range(kmax)
        ]
    return {"m": moments, "ci95": cis}


def gamma22_cdf(x):
    """Gamma with shape 2 and rate 2: F(x) = 1 - exp(-2x)(1 + 2x)."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, 1.0 - np.exp(-2.0 * x) * (1.0 + 2.0 * x), 0.0)


def gamma_ks(samples) -> float:
    """One-sample KS distance of mean-normalized samples from Gamma(2, 2)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySamples("no samples")
    return ks_distance_vs_cdf(x / x.mean(), gamma22_cdf)


def size_bias_histogram(nhat_samples, n_init_samples, kmax: int) -> list[dict]:
    """Per-bin comparison of P(nhat = k) with k * P(n_init = k).

    The two laws satisfy this identity exactly; the report carries the
    per-bin difference and its standard error from independent replicates.
    """
    nh = np.asarray(nhat_samples)
    ni = np.asarray(n_init_samples)
    reps = len(nh)
    out = []
    for k in range(1, kmax + 1):
        a = (nh == k).astype(float)
        b = float(k) * (ni == k).astype(float)
        diff = a.mean() - b.mean()
        se = float(np.sqrt((a.var(ddof=1) + b.var(ddof=1)) / reps))
        out.append({"k": k, "diff": float(diff), "se": se})
    return out
