"""Exact continuous-time Markov-chain functionals on small chains.

Rates are symmetric with zero diagonal, so every chain here is reversible
with uniform stationary law.  Transition matrices are computed by
uniformization (Poisson-weighted powers of the jump kernel), which preserves
nonnegativity and has a computable truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .errors import (
    NotConnected,
    ParameterOutOfRange,
    TooLargeForExact,
    TotalUnitOnIrregular,
)
from .graphs import Graph

__all__ = [
    "MarkovChain",
    "Spectrum",
    "ReturnProfile",
    "build_generator",
    "product_chain",
    "transition_matrix",
    "spectrum",
    "return_integrals",
    "poisson_weights",
]

_DENSE_CAP = 4096
_EIG_ZERO = 1e-10


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Dense symmetric rate matrix with zero diagonal.

    convention is "per_edge_unit" (rate = edge multiplicity),
    "total_unit" (each row rescaled to total rate 1; regular graphs only),
    or "custom" for explicitly supplied rates.
    """

    n: int
    rates: np.ndarray
    convention: str = "per_edge_unit"
    family: tuple | None = None
    transitive: bool = False

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.shape != (self.n, self.n):
            raise ParameterOutOfRange("rate matrix shape mismatch")
        if not np.array_equal(r, r.T):
            raise ParameterOutOfRange("rates must be exactly symmetric")
        if np.any(np.diag(r) != 0.0):
            raise ParameterOutOfRange("rates must have zero diagonal")
        if np.any(r < 0.0):
            raise ParameterOutOfRange("rates must be nonnegative")
        object.__setattr__(self, "rates", r)
        if not _rate_graph_connected(r):
            raise NotConnected("rate graph is not irreducible")

    @property
    def row_rates(self) -> np.ndarray:
        """Total jump rate r(x) per state."""
        return self.rates.sum(axis=1)

    @property
    def r_max(self) -> float:
        return float(self.row_rates.max())

    @property
    def r_min(self) -> float:
        return float(self.row_rates.min())

    def generator(self) -> np.ndarray:
        q = self.rates.copy()
        np.fill_diagonal(q, -self.row_rates)
        return q

    @classmethod
    def from_rates(cls, rates, transitive=False) -> "MarkovChain":
        rates = np.asarray(rates, dtype=float)
        return cls(
            n=rates.shape[0], rates=rates, convention="custom", transitive=transitive
        )


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of -Q, sorted ascending; t_rel is the inverse gap."""

    eigenvalues: np.ndarray
    t_rel: float = field(init=False)

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float))
        ev = np.where(ev < _EIG_ZERO, 0.0, ev)
        object.__setattr__(self, "eigenvalues", ev)
        if len(ev) < 2 or ev[1] <= 0.0:
            raise NotConnected("zero spectral gap: chain not irreducible")
        object.__setattr__(self, "t_rel", float(1.0 / ev[1]))

    def eigentime_sum(self) -> float:
        """Sum of inverse nonzero eigenvalues."""
        return float(np.sum(1.0 / self.eigenvalues[1:]))


@dataclass(frozen=True)
class ReturnProfile:
    t: float
    M_t: float
    m_t: float
    H_t: float


def _rate_graph_connected(r: np.ndarray) -> bool:
    n = r.shape[0]
    if n == 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in np.nonzero(r[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def build_generator(g: Graph, convention: str = "per_edge_unit") -> MarkovChain:
    """Walk rates from a graph.

    per_edge_unit sets r_{x,y} to the edge multiplicity; total_unit rescales
    to unit total rate per vertex, which keeps the rates symmetric only on
    regular graphs.
    """
    from .graphs import is_connected

    if not is_connected(g):
        raise NotConnected("graph must be connected")
    rates = g.rate_matrix()
    if convention == "total_unit":
        if not g.is_regular():
            raise TotalUnitOnIrregular(
                "total-unit rates on an irregular graph are not symmetric"
            )
        rates = rates / float(g.degrees[0])
    elif convention != "per_edge_unit":
        raise ParameterOutOfRange(f"unknown rate convention {convention!r}")
    return MarkovChain(
        n=g.n,
        rates=rates,
        convention=convention,
        family=g.family,
        transitive=g.transitive,
    )


def product_chain(c: MarkovChain) -> MarkovChain:
    """Two independent copies as one chain on pairs, state index x*n + y."""
    if c.n * c.n > _DENSE_CAP:
        raise TooLargeForExact("materialized product chain capped at 4096 states")
    eye = np.eye(c.n)
    rates2 = np.kron(c.rates, eye) + np.kron(eye, c.rates)
    return MarkovChain(n=c.n * c.n, rates=rates2, convention="custom")


def poisson_weights(lam_t: float, tol: float) -> np.ndarray:
    """Poisson(lam_t) pmf from 0 through the (1 - tol) quantile."""
    if lam_t <= 0.0:
        return np.array([1.0])
    kmax = int(poisson.ppf(1.0 - tol, lam_t)) + 2
    return poisson.pmf(np.arange(kmax + 1), lam_t)


def transition_matrix(c: MarkovChain, t: float, tol: float = 1e-12) -> np.ndarray:
    """Time-t transition probabilities by uniformization."""
    if c.n > _DENSE_CAP:
        raise TooLargeForExact("dense transition matrix capped at 4096 states")
    if t < 0.0:
        raise ParameterOutOfRange("time must be nonnegative")
    lam = c.r_max
    if t == 0.0 or lam == 0.0:
        return np.eye(c.n)
    kernel = c.rates / lam
    np.fill_diagonal(kernel, 1.0 - c.row_rates / lam)
    weights = poisson_weights(lam * t, tol)
    out = weights[0] * np.eye(c.n)
    power = np.eye(c.n)
    for w in weights[1:]:
        power = power @ kernel
        out += w * power
    return out


def _closed_form_eigenvalues(family: tuple, convention: str) -> np.ndarray | None:
    """Spectra of -Q for the named transitive families, per-edge rates."""
    kind = family[0]
    if kind == "cycle":
        n = family[1]
        ev = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)
        deg = 2
    elif kind == "torus":
        d, L = family[1], family[2]
        line = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(L) / L)
        ev = np.zeros(1)
        for _ in range(d):
            ev = np.add.outer(ev, line).ravel()
        deg = 2 * d
    elif kind == "complete":
        n = family[1]
        ev = np.concatenate([[0.0], np.full(n - 1, float(n))])
        deg = n - 1
    elif kind == "hypercube":
        d = family[1]
        ks = np.arange(d + 1)
        ev = np.repeat(2.0 * ks, [_binom(d, k) for k in ks]).astype(float)
        deg = d
    else:
        return None
    if convention == "total_unit":
        ev = ev / deg
    return np.sort(ev)


def _binom(n, k):
    from math import comb

    return comb(n, k)


def spectrum(c: MarkovChain, family_hint: tuple | None = None) -> Spectrum:
    """Full eigenvalue list of -Q; closed forms for the named families,
    dense symmetric factorization otherwise."""
    family = family_hint if family_hint is not None else c.family
    if family is not None:
        ev = _closed_form_eigenvalues(family, c.convention)
        if ev is not None:
            return Spectrum(eigenvalues=ev)
    if c.n > _DENSE_CAP:
        raise TooLargeForExact(
            "dense eigendecomposition capped at 4096 states; pass a family hint"
        )
    ev = np.linalg.eigvalsh(-c.generator())
    return Spectrum(eigenvalues=ev)


def _diag_heat(c: MarkovChain):
    """Factory returning s -> diag(p_s) via one symmetric eigendecomposition."""
    lam, vecs = np.linalg.eigh(-c.generator())
    lam = np.where(lam < _EIG_ZERO, 0.0, lam)
    v2 = vecs**2

    def diag_at(s: float) -> np.ndarray:
        return v2 @ np.exp(-lam * s)

    def integral_to(s: float) -> np.ndarray:
        # entrywise integral of p_u(x,x) du over [0, s]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(lam > 0.0, (1.0 - np.exp(-lam * s)) / lam, s)
        return v2 @ terms

    return diag_at, integral_to


def _simpson(values: np.ndarray, h: float) -> np.ndarray:
    weights = np.ones(len(values))
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return (h / 3.0) * np.tensordot(weights, values, axes=(0, 0))


def return_integrals(
    c: MarkovChain, t: float, quad_steps: int = 512, refine_tol: float = 1e-9
) -> ReturnProfile:
    """Extremes of the diagonal heat-kernel integral and its ratio profile.

    M_t and m_t are the max / min over states of the integral of p_s(x,x)
    over [0, t], by composite Simpson with step doubling.  H_t is the grid
    maximum over s in (t_rel/2, 2t) of the max/min ratio of the same
    integral up to s.
    """
    if c.n > _DENSE_CAP:
        raise TooLargeForExact("return integrals need the dense path")
    if t <= 0.0:
        raise ParameterOutOfRange("t must be positive")
    diag_at, integral_to = _diag_heat(c)

    def simpson_extremes(steps: int):
        ss = np.linspace(0.0, t, steps + 1)
        vals = np.stack([diag_at(s) for s in ss])
        integ = _simpson(vals, t / steps)
        return float(integ.max()), float(integ.min())

    steps = max(8, quad_steps if quad_steps % 2 == 0 else quad_steps + 1)
    big, small = simpson_extremes(steps)
    while True:
        steps *= 2
        big2, small2 = simpson_extremes(steps)
        if abs(big2 - big) < refine_tol and abs(small2 - small) < refine_tol:
            big, small = big2, small2
            break
        big, small = big2, small2
        if steps > 1 << 16:
            break

    t_rel = spectrum(c).t_rel
    lo, hi = t_rel / 2.0, 2.0 * t
    h_t = 1.0
    if hi > lo:
        for s in np.linspace(lo * 1.0000001, hi, 129):
            integ = integral_to(s)
            h_t = max(h_t, float(integ.max() / integ.min()))
    return ReturnProfile(t=t, M_t=big, m_t=small, H_t=h_t)
