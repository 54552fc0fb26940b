"""Locally dependent collections of non-negative integer variables.

A model holds an index set J = {0, ..., n-1}, neighbourhoods
``i in A[i] ⊆ B[i] ⊆ J`` (zeta_i independent of everything outside A[i], the
block zeta_{A[i]} independent of everything outside B[i]) and one of three
joint laws:

* :class:`ProductLaw`      independent coordinates, forces A[i] = B[i] = {i};
* :class:`TableLaw`        an explicit joint probability table, for exact work;
* :class:`PairwiseBernoulli` Bernoulli marginals plus pair probabilities on
  neighbouring pairs, realised (for sampling and enumeration) by a
  common-shock construction.

Block sums are written ``zeta_A = sum_{j in A} zeta_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dists import DiscreteDist, convolve_all, dtv_unit_shift
from .errors import ConstructionError, ParameterDomainError, StateSpaceError, UnsupportedLawError

__all__ = [
    "MAX_STATES",
    "ProductLaw",
    "TableLaw",
    "PairwiseBernoulli",
    "DependencyModel",
    "MomentSet",
    "SmoothingTerms",
    "EmpiricalDistribution",
    "chain_neighborhoods",
    "exact_sum_distribution",
    "moments",
    "smoothing",
    "dtv_unit_shift",
    "sample",
]

MAX_STATES = 1 << 24


# -- laws ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductLaw:
    dists: tuple

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))

    @property
    def n(self) -> int:
        return len(self.dists)


@dataclass(frozen=True, eq=False)
class TableLaw:
    """Joint pmf ``probs[x_0, ..., x_{n-1}]`` over finite supports ``0..s_i-1``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim == 0:
            raise ParameterDomainError("joint table needs at least one coordinate")
        if probs.size > MAX_STATES:
            raise StateSpaceError(f"joint table has {probs.size} states; limit is {MAX_STATES} (2^24)")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ParameterDomainError("joint probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ParameterDomainError(f"joint probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.probs.ndim

    def marginal(self, i: int) -> DiscreteDist:
        axes = tuple(a for a in range(self.n) if a != i)
        return DiscreteDist(self.probs.sum(axis=axes))


@dataclass(frozen=True, eq=False)
class PairwiseBernoulli:
    """Bernoulli marginals ``p[i]`` and ``pairs[(i, j)] = P(zeta_i = zeta_j = 1)`` for i < j."""

    p: np.ndarray
    pairs: Mapping[tuple, float]

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or np.any(p >= 1):
            raise ParameterDomainError("Bernoulli marginals must lie in [0, 1)")
        pairs = {}
        for (i, j), v in dict(self.pairs).items():
            i, j = sorted((int(i), int(j)))
            if i == j:
                raise ParameterDomainError(f"pair ({i}, {j}) is diagonal; p_ii = p_i is implied")
            lo, hi = max(0.0, p[i] + p[j] - 1.0), min(p[i], p[j])
            if not lo - 1e-15 <= v <= hi + 1e-15:
                raise ParameterDomainError(
                    f"p_{{{i},{j}}}={v} outside the feasible range [{lo}, {hi}]")
            pairs[(i, j)] = float(v)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "pairs", pairs)

    @property
    def n(self) -> int:
        return self.p.size

    def pair(self, i: int, j: int) -> float:
        if i == j:
            return float(self.p[i])
        key = (min(i, j), max(i, j))
        return self.pairs.get(key, float(self.p[i] * self.p[j]))

    def shock_parameters(self) -> tuple[np.ndarray, dict]:
        """Survival probabilities of the idiosyncratic and edge shocks.

        zeta_i = 1 iff its own shock or a shock on an incident edge fires.
        With ``u_i`` and ``e_ij`` the probabilities that these shocks stay
        silent, matching the marginals and pairs gives
        ``e_ij = (1-p_i)(1-p_j) / P(zeta_i = zeta_j = 0)`` and
        ``u_i = (1-p_i) / prod_{edges at i} e``; both must lie in (0, 1].
        """
        p = self.p
        edges = {}
        for (i, j), pij in self.pairs.items():
            both_zero = 1.0 - p[i] - p[j] + pij
            if both_zero <= 0:
                raise ConstructionError(f"pair ({i},{j}): P(both zero) = {both_zero} <= 0")
            e = (1.0 - p[i]) * (1.0 - p[j]) / both_zero
            if e > 1.0 + 1e-12:
                raise ConstructionError(
                    f"pair ({i},{j}) is negatively dependent (p_ij={pij} < p_i p_j); "
                    "the common-shock construction needs p_ij >= p_i p_j")
            edges[(i, j)] = min(e, 1.0)
        log_u = np.log1p(-p)
        for (i, j), e in edges.items():
            log_u[i] -= math.log(e)
            log_u[j] -= math.log(e)
        if np.any(log_u > 1e-12):
            bad = int(np.argmax(log_u))
            raise ConstructionError(
                f"index {bad}: pair probabilities too large for its marginal under the common-shock construction")
        return np.exp(np.minimum(log_u, 0.0)), edges

    def to_table(self) -> TableLaw:
        """Exact joint table of the common-shock realisation (n <= 24).

        P(zeta_i = 0 for all i in S) is a product over S and the edges that
        touch S; a Möbius transform over supersets turns these into point
        probabilities.
        """
        n = self.n
        if (1 << n) > MAX_STATES:
            raise StateSpaceError(f"{n} Bernoulli coordinates exceed the 2^24 state limit")
        u, edges = self.shock_parameters()
        masks = np.arange(1 << n, dtype=np.int64)
        bits = [(masks >> i) & 1 for i in range(n)]
        log_f = np.zeros(masks.size)
        for i in range(n):
            log_f += bits[i] * math.log(u[i]) if u[i] > 0 else np.where(bits[i], -np.inf, 0.0)
        for (i, j), e in edges.items():
            log_f += (bits[i] | bits[j]) * math.log(e)
        # axis i of g <-> bit i of the mask; value 1 on the axis means "zeta_i = 0"
        g = np.exp(log_f).reshape((2,) * n, order="F")
        for ax in range(n):
            lo = [slice(None)] * n
            hi = [slice(None)] * n
            lo[ax], hi[ax] = 0, 1
            g[tuple(lo)] -= g[tuple(hi)]
        # flip so index 1 means zeta_i = 1
        table = np.flip(g, axis=tuple(range(n))).copy()
        # the transform cancels to ~1e-16 absolute; clip the negative noise
        table = np.clip(table, 0.0, None)
        return TableLaw(table / table.sum())


# -- model --------------------------------------------------------------------

def chain_neighborhoods(n: int, radius: int = 1) -> list[frozenset]:
    """``{i-radius, ..., i+radius}`` clipped to ``0..n-1``."""
    return [frozenset(range(max(0, i - radius), min(n, i + radius + 1))) for i in range(n)]


def _second_neighborhoods(A: Sequence[frozenset]) -> list[frozenset]:
    return [frozenset().union(*(A[j] for j in A[i])) for i in range(len(A))]


@dataclass(frozen=True, eq=False)
class DependencyModel:
    A: tuple
    B: tuple
    law: object

    def __post_init__(self):
        A = tuple(frozenset(int(x) for x in a) for a in self.A)
        B = tuple(frozenset(int(x) for x in b) for b in self.B)
        n = self.law.n
        if len(A) != n or len(B) != n:
            raise ParameterDomainError(f"need {n} neighbourhoods, got |A|={len(A)}, |B|={len(B)}")
        J = frozenset(range(n))
        for i in range(n):
            if not (i in A[i] and A[i] <= B[i] <= J):
                raise ParameterDomainError(f"index {i}: need i in A_i ⊆ B_i ⊆ J")
        if isinstance(self.law, ProductLaw) and any(A[i] != {i} or B[i] != {i} for i in range(n)):
            raise ParameterDomainError("independent (product) law forces A_i = B_i = {i}")
        if isinstance(self.law, PairwiseBernoulli):
            for i in range(n):
                for j in A[i]:
                    if i not in A[j]:
                        raise ParameterDomainError(f"neighbourhoods must be symmetric: {j} in A_{i} but not vice versa")
            for (i, j) in self.law.pairs:
                if j not in A[i]:
                    raise ParameterDomainError(f"pair ({i},{j}) given but {j} is not in A_{i}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.law.n

    @classmethod
    def independent(cls, dists: Sequence[DiscreteDist]) -> "DependencyModel":
        single = tuple(frozenset({i}) for i in range(len(dists)))
        return cls(single, single, ProductLaw(tuple(dists)))

    @classmethod
    def from_table(cls, probs, A: Sequence, B: Sequence | None = None) -> "DependencyModel":
        """Table law; B defaults to the union of A_j over j in A_i."""
        A = [frozenset(a) for a in A]
        return cls(tuple(A), tuple(B if B is not None else _second_neighborhoods(A)), TableLaw(probs))

    @classmethod
    def pairwise(cls, p, pairs: Mapping, A: Sequence, B: Sequence | None = None) -> "DependencyModel":
        A = [frozenset(a) for a in A]
        return cls(tuple(A), tuple(B if B is not None else _second_neighborhoods(A)),
                   PairwiseBernoulli(p, pairs))

    def as_table(self) -> "DependencyModel":
        """Same model with the law converted to an explicit table."""
        law = self.law
        if isinstance(law, TableLaw):
            return self
        if isinstance(law, PairwiseBernoulli):
            return DependencyModel(self.A, self.B, law.to_table())
        if any(not d.tail.exact for d in law.dists):
            raise UnsupportedLawError("product law with truncated marginals has no exact table")
        size = math.prod(d.support_size for d in law.dists)
        if size > MAX_STATES:
            raise StateSpaceError(f"product table would have {size} states; limit is 2^24")
        probs = np.ones(())
        for d in law.dists:
            probs = np.multiply.outer(probs, d.pmf)
        return DependencyModel(self.A, self.B, TableLaw(probs))

    def local_dependence_defect(self) -> float:
        """Largest |P(joint) - P(x_i) P(rest)| over the A-neighbourhood splits (table laws)."""
        probs = self._table().probs
        worst = 0.0
        for i in range(self.n):
            outside = [j for j in range(self.n) if j not in self.A[i]]
            if not outside:
                continue
            keep = [i] + outside
            drop = tuple(a for a in range(self.n) if a not in keep)
            joint = probs.sum(axis=drop) if drop else probs
            # after summing, axes are ordered by original index
            order = sorted(keep)
            pos = order.index(i)
            mi = joint.sum(axis=tuple(a for a in range(len(order)) if a != pos))
            rest = joint.sum(axis=pos)
            prod = np.multiply.outer(mi, rest)
            prod = np.moveaxis(prod, 0, pos)
            worst = max(worst, float(np.abs(joint - prod).max()))
        return worst

    def _table(self) -> TableLaw:
        if isinstance(self.law, TableLaw):
            return self.law
        return self.as_table().law


# -- enumeration helpers --------------------------------------------------------

def _coords(shape: tuple, idx) -> np.ndarray:
    """Broadcast sum of the coordinate values over ``idx`` (int32, full shape)."""
    out = np.zeros(shape, dtype=np.int32)
    for i in idx:
        view = [1] * len(shape)
        view[i] = shape[i]
        out = out + np.arange(shape[i], dtype=np.int32).reshape(view)
    return out


def exact_sum_distribution(model: DependencyModel) -> DiscreteDist:
    """Exact law of V = sum_i zeta_i (convolution or table enumeration)."""
    law = model.law
    if isinstance(law, ProductLaw):
        return convolve_all(law.dists)
    table = model._table()
    probs = table.probs
    v = _coords(probs.shape, range(table.n)).ravel()
    return DiscreteDist(np.bincount(v, weights=probs.ravel()))


@dataclass(frozen=True, eq=False)
class MomentSet:
    """Per-index expectations used by the error bounds (arrays of length n)."""

    e1: np.ndarray     # E zeta_i
    e2: np.ndarray     # E zeta_i^2
    e3: np.ndarray     # E zeta_i^3
    eA: np.ndarray     # E zeta_{A_i}
    eiA: np.ndarray    # E zeta_i zeta_{A_i}
    eiA1: np.ndarray   # E zeta_i (zeta_{A_i} - 1)
    mean: float
    var: float


def moments(model: DependencyModel) -> MomentSet:
    law = model.law
    n = model.n
    if isinstance(law, ProductLaw):
        e1 = np.array([d.mean() for d in law.dists])
        e2 = np.array([d.second_moment() for d in law.dists])
        e3 = np.array([d.moment(3) for d in law.dists])
        return MomentSet(e1, e2, e3, e1.copy(), e2.copy(), e2 - e1, float(e1.sum()), float((e2 - e1 ** 2).sum()))
    if isinstance(law, PairwiseBernoulli):
        p = law.p
        eA = np.array([sum(p[j] for j in model.A[i]) for i in range(n)])
        eiA = np.array([sum(law.pair(i, j) for j in model.A[i]) for i in range(n)])
        var = float(sum(law.pair(i, j) - p[i] * p[j] for i in range(n) for j in model.A[i]))
        return MomentSet(p.copy(), p.copy(), p.copy(), eA, eiA, eiA - p, float(p.sum()), var)
    probs = law.probs
    shape = probs.shape
    w = probs.ravel()
    cols = [_coords(shape, [i]).ravel().astype(float) for i in range(n)]
    e1 = np.array([w @ c for c in cols])
    e2 = np.array([w @ c ** 2 for c in cols])
    e3 = np.array([w @ c ** 3 for c in cols])
    eA, eiA = np.empty(n), np.empty(n)
    for i in range(n):
        a = sum(cols[j] for j in model.A[i])
        eA[i] = w @ a
        eiA[i] = w @ (cols[i] * a)
    v = sum(cols)
    mean = float(w @ v)
    var = float(w @ (v - mean) ** 2)
    return MomentSet(e1, e2, e3, eA, eiA, eiA - e1, mean, var)


# -- smoothing terms --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothingTerms:
    """Per-index expectations ``E[weight * D(V | conditioning)]``.

    ``D(W) = 2 d_TV(W, W+1)``; conditioning is on the listed block sums.

    * ``a_b``:   E[zeta_A (2 zeta_B - zeta_A - 1) D(V | zeta_A, zeta_B)]
    * ``i_a_b``: E[zeta_i zeta_A (2 zeta_B - zeta_A - 1) D(V | zeta_i, zeta_A, zeta_B)]
    * ``b``:     E[zeta_B D(V | zeta_B)]
    * ``i_a1_b``: E[zeta_i (zeta_A - 1)(2 zeta_B - zeta_A - 2) D(V | zeta_i, zeta_A, zeta_B)]
    """

    a_b: np.ndarray
    i_a_b: np.ndarray
    b: np.ndarray
    i_a1_b: np.ndarray


def _weighted_conditional_D(w: np.ndarray, keys: list, v: np.ndarray, weight: np.ndarray) -> float:
    """``sum_states P * weight * D(V | keys)`` for weights that are functions of the keys."""
    dims = [int(k.max()) + 1 for k in keys]
    key = np.ravel_multi_index(keys, dims) if len(keys) > 1 else keys[0]
    nk = int(np.prod(dims))
    nv = int(v.max()) + 2
    joint = np.bincount(key * nv + v, weights=w, minlength=nk * nv).reshape(nk, nv)
    pk = joint.sum(axis=1)
    live = pk > 0
    cond = joint[live] / pk[live, None]
    D = np.abs(np.diff(np.concatenate([np.zeros((cond.shape[0], 1)), cond], axis=1), axis=1)).sum(axis=1)
    D = np.minimum(D, 2.0)
    wsum = np.bincount(key, weights=w * weight, minlength=nk)[live]
    return float(wsum @ D)


def smoothing(model: DependencyModel) -> SmoothingTerms:
    """The four conditional-smoothing expectations, by exact enumeration."""
    law = model.law
    n = model.n
    if isinstance(law, PairwiseBernoulli):
        raise UnsupportedLawError(
            "smoothing terms need an explicit joint law; convert with model.as_table() first")
    if isinstance(law, ProductLaw):
        return _product_smoothing(law)
    probs = law.probs
    shape = probs.shape
    w = probs.ravel()
    v = _coords(shape, range(n)).ravel()
    out = {name: np.empty(n) for name in ("a_b", "i_a_b", "b", "i_a1_b")}
    for i in range(n):
        x = _coords(shape, [i]).ravel()
        a = _coords(shape, sorted(model.A[i])).ravel()
        b = _coords(shape, sorted(model.B[i])).ravel()
        xf, af, bf = x.astype(float), a.astype(float), b.astype(float)
        out["a_b"][i] = _weighted_conditional_D(w, [a, b], v, af * (2 * bf - af - 1))
        out["i_a_b"][i] = _weighted_conditional_D(w, [x, a, b], v, xf * af * (2 * bf - af - 1))
        out["b"][i] = _weighted_conditional_D(w, [b], v, bf)
        out["i_a1_b"][i] = _weighted_conditional_D(w, [x, a, b], v, xf * (af - 1) * (2 * bf - af - 2))
    return SmoothingTerms(**out)


def _product_smoothing(law: ProductLaw) -> SmoothingTerms:
    # with A = B = {i}, V given zeta_i is a shift of V_i = V - zeta_i
    n = law.n
    out = {name: np.empty(n) for name in ("a_b", "i_a_b", "b", "i_a1_b")}
    for i, d in enumerate(law.dists):
        rest = convolve_all([law.dists[j] for j in range(n) if j != i])
        D = 2.0 * dtv_unit_shift(rest)
        k = np.arange(d.support_size, dtype=float)
        f = d.pmf
        out["a_b"][i] = D * float(f @ (k * (k - 1)))
        out["i_a_b"][i] = D * float(f @ (k * k * (k - 1)))
        out["b"][i] = D * float(f @ k)
        out["i_a1_b"][i] = D * float(f @ (k * (k - 1) * (k - 2)))
    return SmoothingTerms(**out)


# -- sampling -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    pmf: np.ndarray
    se: np.ndarray
    mean: float
    mean_se: float
    n_paths: int


def _draw_v(model: DependencyModel, rng: np.random.Generator, m: int) -> np.ndarray:
    law = model.law
    if isinstance(law, ProductLaw):
        v = np.zeros(m, dtype=np.int64)
        for d in law.dists:
            cdf = np.cumsum(d.pmf)
            cdf /= cdf[-1]
            v += np.searchsorted(cdf, rng.random(m), side="right")
        return v
    if isinstance(law, TableLaw):
        probs = law.probs.ravel()
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        flat = np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), probs.size - 1)
        idx = np.unravel_index(flat, law.probs.shape)
        return np.sum(idx, axis=0).astype(np.int64)
    u, edges = law.shock_parameters()
    fired = rng.random((m, law.n)) >= u
    for (i, j), e in edges.items():
        s = rng.random(m) >= e
        fired[:, i] |= s
        fired[:, j] |= s
    return fired.sum(axis=1).astype(np.int64)


def sample(model: DependencyModel, n_paths: int, seed: int, workers: int = 1) -> EmpiricalDistribution:
    """Monte Carlo law of V.

    The paths are split evenly over ``workers`` independent streams spawned
    from ``seed``; the output depends only on (seed, n_paths, workers).
    """
    if n_paths < 1 or workers < 1:
        raise ParameterDomainError("n_paths and workers must be positive")
    streams = np.random.SeedSequence(seed).spawn(workers)
    sizes = [n_paths // workers + (1 if w < n_paths % workers else 0) for w in range(workers)]
    draws = [_draw_v(model, np.random.default_rng(s), m) for s, m in zip(streams, sizes) if m]
    v = np.concatenate(draws)
    pmf = np.bincount(v) / n_paths
    se = np.sqrt(pmf * (1 - pmf) / n_paths)
    mean = float(v.mean())
    mean_se = float(v.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
    return EmpiricalDistribution(pmf, se, mean, mean_se, n_paths)
