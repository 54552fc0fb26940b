"""Error bounds for |E[(V - z)^+] - E[(N_{r,p} - z)^+]|.

Every bound has the shape ``prefactor * structural_term``.  The prefactor is
the uniform envelope ``2 p^-(r+1) - p^-1`` (uniform in z) or, for z > 1, the
non-uniform ``ϑ_{r,p,z}``; the structural term depends on the dependence
structure and on how (r, p) were matched to V.

Poisson competitors use ``(2 e^λ - 1)`` times a structural sum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dependency import DependencyModel, PairwiseBernoulli, ProductLaw, moments, smoothing
from .dists import DiscreteDist, dtv_unit_shift
from .errors import InfeasibleMatchingError, ParameterDomainError, SeriesConvergenceError
from .nb import NBParams, match_mean, match_mean_var
from .stein import envelope_lemma1_delta, envelope_remark1

__all__ = [
    "BoundReport",
    "prefactor",
    "theorem1_mean",
    "theorem1_meanvar",
    "corollary2",
    "theorem2_mean",
    "theorem2_meanvar",
    "remark_bernoulli_nb",
    "remark_bernoulli_poisson",
    "remark_geometric_nb",
    "remark_geometric_poisson",
    "poisson_local_bound",
    "geometric_dists",
]

MEAN_GIVEN_R = "mean-given-r"
MEAN_AND_VARIANCE = "mean-and-variance"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    matched_params: NBParams
    matching_mode: str
    prefactor: float
    structural_term: float
    z: float | None = None
    comparison: dict = field(default_factory=dict)
    true_error: float | None = None
    certificate: float = 0.0
    extras: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def uniform(self) -> bool:
        return self.z is None

    @property
    def bound_value(self) -> float:
        if self.structural_term == 0.0:
            return 0.0
        return self.prefactor * self.structural_term

    def with_true_error(self, err: float) -> "BoundReport":
        return replace(self, true_error=float(err))

    def with_comparison(self, **values: float) -> "BoundReport":
        return replace(self, comparison={**self.comparison, **values})

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "matching_mode": self.matching_mode,
            "r": self.matched_params.r,
            "p": self.matched_params.p,
            "prefactor_kind": "uniform" if self.uniform else "theta",
            "z": self.z,
            "prefactor": self.prefactor,
            "structural_term": self.structural_term,
            "bound_value": self.bound_value,
            "certificate": self.certificate,
            "comparison": dict(self.comparison),
            "true_error": self.true_error,
            "extras": dict(self.extras),
            "notes": list(self.notes),
        }


def prefactor(params: NBParams, z: float | None = None) -> float:
    """Uniform envelope when ``z`` is None, otherwise ϑ_{r,p,z} (needs z > 1)."""
    params.require_standing()
    return envelope_lemma1_delta(params) if z is None else envelope_remark1(params, z)


def _resolve_mean(mu: float, n: int, r: float | None, params: NBParams | None):
    if params is not None:
        params.require_standing()
        m = params.r * params.q / params.p
        if not math.isclose(m, mu, rel_tol=1e-9, abs_tol=1e-12):
            raise InfeasibleMatchingError(
                f"explicit NB mean {m} differs from E(V)={mu}; the bounds need mean matching")
        return params, EXPLICIT
    return match_mean(mu, float(n) if r is None else float(r)), MEAN_GIVEN_R


def _finish(name, params, mode, structural, z, **kw) -> BoundReport:
    return BoundReport(name, params, mode, prefactor(params, z), float(structural),
                       None if z is None else float(z), **kw)


# -- locally dependent summands ------------------------------------------------

def theorem1_mean(model: DependencyModel, r: float | None = None, z: float | None = None,
                  params: NBParams | None = None) -> BoundReport:
    """Mean-matched bound for a locally dependent sum; r defaults to n."""
    m = moments(model)
    params, mode = _resolve_mean(m.mean, model.n, r, params)
    p, q = params.p, params.q
    U = float(np.sum(p * m.e1 * m.eA + q * m.eiA + m.eiA1))
    return _finish("theorem1-mean", params, mode, U, z)


def theorem1_meanvar(model: DependencyModel, z: float | None = None) -> BoundReport:
    """Mean- and variance-matched bound; smoothing terms by exact enumeration."""
    m = moments(model)
    params = match_mean_var(m.mean, m.var)
    params.require_standing()
    p, q = params.p, params.q
    s = smoothing(model)
    c = p * m.e1 * m.eA + q * m.eiA - m.eiA1
    U = float(p * np.sum(m.e1 * s.a_b) + q * np.sum(s.i_a_b) + np.sum(np.abs(c) * s.b) + np.sum(s.i_a1_b))
    notes = ()
    J = frozenset(range(model.n))
    if any(b == J for b in model.B):
        msg = "some B_i = J: conditioning on zeta_{B_i} fixes V and the bound degenerates"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
    return _finish("theorem1-meanvar", params, MEAN_AND_VARIANCE, U, z, notes=notes,
                   extras={"a_b": s.a_b.tolist(), "i_a_b": s.i_a_b.tolist(),
                           "b": s.b.tolist(), "i_a1_b": s.i_a1_b.tolist()})


def corollary2(p_i: Sequence[float], p_ij: Mapping, A: Sequence, r: float | None = None,
               z: float | None = None) -> BoundReport:
    """Bound for locally dependent Bernoulli summands.

    ``p_ij`` maps pairs (i, j) with j in A_i, j != i, to P(zeta_i = zeta_j = 1);
    the diagonal p_ii = p_i is implied.  The structural sum is taken as
    written; only a negative total is clamped to 0.
    """
    law = PairwiseBernoulli(p_i, p_ij)
    p_arr = law.p
    n = p_arr.size
    if len(A) != n:
        raise ParameterDomainError(f"need {n} neighbourhoods, got {len(A)}")
    params, mode = _resolve_mean(float(p_arr.sum()), n, r, None)
    p, q = params.p, params.q
    total = 0.0
    for i in range(n):
        pair_sum = sum(law.pair(i, j) for j in A[i])
        marg_sum = sum(p_arr[j] for j in A[i])
        total += (1 + q) * pair_sum + p_arr[i] * (p * marg_sum - 1)
    notes = ()
    if total < 0:
        msg = f"structural sum {total:.3g} < 0 clamped to 0"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        total, notes = 0.0, (msg,)
    return _finish("corollary2", params, mode, total, z, notes=notes)


def corollary2_model(model: DependencyModel, r: float | None = None, z: float | None = None) -> BoundReport:
    law = model.law
    if not isinstance(law, PairwiseBernoulli):
        raise ParameterDomainError("corollary2 needs Bernoulli marginals with pair probabilities")
    return corollary2(law.p, law.pairs, model.A, r=r, z=z)


# -- independent summands -------------------------------------------------------

def _gamma_diffs(d: DiscreteDist, p: float, q: float, mean: float) -> tuple[np.ndarray, np.ndarray]:
    """k and |(p E + q k) γ_k - (k+1) γ_{k+1}| for k = 1..K-2, where both masses are stored."""
    g = d.pmf
    k = np.arange(1, g.size - 1, dtype=float)
    diff = np.abs((p * mean + q * k) * g[1:-1] - (k + 1) * g[2:])
    return k, diff


def _check_tails(dists: Sequence[DiscreteDist], order: str) -> None:
    for i, d in enumerate(dists):
        if not math.isfinite(getattr(d.tail, order)):
            raise SeriesConvergenceError(
                f"summand {i} has no tail certificate; the series cannot be truncated safely",
                partial=math.nan, n_terms=d.support_size)


def _edge(d: DiscreteDist, p: float, q: float, e: float, weight) -> float:
    # the k = K-1 term needs γ_K, which is only bounded: γ_K <= tail.mass
    K = d.support_size
    if K < 2 or d.tail.exact:
        if K >= 2:
            k = K - 1
            return weight(k) * (p * e + q * k) * d.pmf[-1]
        return 0.0
    k = K - 1
    return weight(k) * ((p * e + q * k) * d.pmf[-1] + K * d.tail.mass)


def _structural_mean(dists, p, q):
    U, cert = 0.0, 0.0
    for d in dists:
        e = d.mean()
        k, diff = _gamma_diffs(d, p, q, e)
        U += float(np.dot(k, diff))
        t = d.tail
        edge = _edge(d, p, q, e, lambda k: k)
        if t.exact:
            U += edge
        else:
            cert += edge + p * e * t.m1 + (q + 2.0) * t.m2
            if d.exact_moments is None:
                # stored mean may fall short of the true one by at most m1
                cert += p * t.m1 * (e + t.m1)
    return U, cert


def theorem2_mean(dists: Sequence[DiscreteDist], r: float | None = None, z: float | None = None,
                  params: NBParams | None = None) -> BoundReport:
    """Mean-matched bound for independent summands; r defaults to n.

    ``certificate`` bounds what the truncated supports leave out of the
    structural sum.
    """
    dists = list(dists)
    _check_tails(dists, "m2")
    mu = float(sum(d.mean() for d in dists))
    params, mode = _resolve_mean(mu, len(dists), r, params)
    U, cert = _structural_mean(dists, params.p, params.q)
    return _finish("theorem2-mean", params, mode, U, z, certificate=cert)


def smoothing_factor_theorem2(dists: Sequence[DiscreteDist]) -> float:
    """``sqrt(2/π) (1/4 + Σ δ_j - δ*)^(-1/2)`` with ``δ_j = min(1/2, 1 - d_TV(ζ_j, ζ_j + 1))``."""
    delta = np.array([min(0.5, 1.0 - dtv_unit_shift(d)) for d in dists])
    return math.sqrt(2 / math.pi) / math.sqrt(0.25 + delta.sum() - delta.max())


def theorem2_meanvar(dists: Sequence[DiscreteDist], z: float | None = None) -> BoundReport:
    """Mean- and variance-matched bound for independent summands."""
    dists = list(dists)
    _check_tails(dists, "m3")
    mu = float(sum(d.mean() for d in dists))
    var = float(sum(d.variance() for d in dists))
    params = match_mean_var(mu, var)
    params.require_standing()
    p, q = params.p, params.q
    inner, cert = 0.0, 0.0
    w2 = lambda k: k * (k - 1) / 2
    for d in dists:
        e, e2 = d.mean(), d.second_moment()
        inner += e * abs(p * e * e + q * e2 - (e2 - e))
        k, diff = _gamma_diffs(d, p, q, e)
        inner += float(np.dot(w2(k), diff))
        t = d.tail
        edge = _edge(d, p, q, e, w2)
        if t.exact:
            inner += edge
        else:
            cert += edge + 0.5 * (p * e * t.m2 + (q + 2.0) * t.m3)
    factor = smoothing_factor_theorem2(dists)
    return _finish("theorem2-meanvar", params, MEAN_AND_VARIANCE, factor * inner, z,
                   certificate=factor * cert,
                   extras={"smoothing_factor": factor, "second_moment_sum": inner})


# -- Bernoulli and geometric specialisations --------------------------------------

def _probabilities(values, name: str, lo_open=True) -> np.ndarray:
    a = np.asarray(values, dtype=float).ravel()
    if np.any(a < 0) or np.any(a > 1) or (lo_open and np.any((a == 0) | (a == 1))):
        raise ParameterDomainError(f"{name} must lie in (0, 1)")
    return a


def remark_bernoulli_nb(p_i: Sequence[float], r: float | None = None, z: float | None = None) -> float:
    """NB bound for independent Bernoulli(p_i): prefactor * Σ p_i (1 - p q_i), r defaults to n."""
    p_i = _probabilities(p_i, "p_i")
    params = match_mean(float(p_i.sum()), float(p_i.size) if r is None else float(r))
    return prefactor(params, z) * float(np.sum(p_i * (1.0 - params.p * (1.0 - p_i))))


def _poisson_prefactor(lam: float) -> float:
    return 2.0 * math.exp(lam) - 1.0 if lam < 709 else math.inf


def remark_bernoulli_poisson(p_i: Sequence[float]) -> float:
    """Poisson competitor ``(2 e^λ - 1) Σ p_i^2`` with λ = Σ p_i."""
    p_i = _probabilities(p_i, "p_i", lo_open=False)
    if p_i.size == 0:
        return 0.0
    return _poisson_prefactor(float(p_i.sum())) * float(np.sum(p_i ** 2))


def _geometric_q(q_i, strict: bool) -> np.ndarray:
    q_i = np.asarray(q_i, dtype=float).ravel()
    if np.any(q_i <= 0) or np.any(q_i >= 1):
        raise ParameterDomainError("q_i must lie in (0, 1)")
    if np.any(q_i > 0.5):
        msg = "some q_i > 1/2: the closed form assumes q_i <= 1/2 and may understate the bound"
        if strict:
            raise ParameterDomainError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return q_i


def geometric_moments(q_i: Sequence[float]) -> tuple[float, float]:
    q_i = np.asarray(q_i, dtype=float)
    p_i = 1.0 - q_i
    return float(np.sum(q_i / p_i)), float(np.sum(q_i / p_i ** 2))


def remark_geometric_nb(q_i: Sequence[float], mode: str = "mean", r: float | None = None,
                        strict: bool = False, z: float | None = None) -> float:
    """Closed-form NB bound for independent geometric summands ``P(ζ_i = k) = q_i^k p_i``.

    ``mode="mean"``: r defaults to n and p is mean matched.
    ``mode="meanvar"``: (r, p) match mean and variance; the smoothing constant
    is ``sqrt(2/π) (Σ q_j - 1/4)^(-1/2)`` and needs Σ q_j > 1/4.
    """
    q_i = _geometric_q(q_i, strict)
    p_i = 1.0 - q_i
    mu, var = geometric_moments(q_i)
    if mode == "mean":
        params = match_mean(mu, float(q_i.size) if r is None else float(r))
        s = np.sum(np.abs(params.p - p_i) * q_i / p_i ** 2)
        return 0.0 if s == 0 else prefactor(params, z) * float(s)
    if mode == "meanvar":
        total_q = float(q_i.sum())
        if not total_q > 0.25:
            raise InfeasibleMatchingError(f"meanvar closed form needs Σ q_i > 1/4, got {total_q}")
        params = match_mean_var(mu, var)
        params.require_standing()
        s = np.sum(np.abs(params.p - p_i) * q_i ** 2 / p_i ** 3)
        const = math.sqrt(2 / math.pi) / math.sqrt(total_q - 0.25)
        return 0.0 if s == 0 else 3.0 * prefactor(params, z) * const * float(s)
    raise ValueError(f"mode must be 'mean' or 'meanvar', got {mode!r}")


def remark_geometric_poisson(q_i: Sequence[float]) -> float:
    """Poisson competitor ``(2 e^λ - 1) Σ (8 - 7 p_i) q_i^2 / p_i^3`` with λ = Σ q_i / p_i."""
    q_i = np.asarray(q_i, dtype=float).ravel()
    if np.any(q_i < 0) or np.any(q_i >= 1):
        raise ParameterDomainError("q_i must lie in [0, 1)")
    p_i = 1.0 - q_i
    s = float(np.sum((8 - 7 * p_i) * q_i ** 2 / p_i ** 3))
    return 0.0 if s == 0 else _poisson_prefactor(float(np.sum(q_i / p_i))) * s


def poisson_local_bound(p_star_i: Sequence[float], p_star_ij: Mapping, A: Sequence) -> float:
    """Poisson competitor for locally dependent Bernoulli summands.

    ``(2 e^λ - 1) Σ_i [Σ_{j ∈ A_i \\ {i}} p*_{ij} + Σ_{j ∈ A_i} p*_i p*_j]``, λ = Σ p*_i.
    """
    law = PairwiseBernoulli(p_star_i, p_star_ij)
    p = law.p
    s = 0.0
    for i in range(p.size):
        s += sum(law.pair(i, j) for j in A[i] if j != i)
        s += sum(p[i] * p[j] for j in A[i])
    return 0.0 if s == 0 else _poisson_prefactor(float(p.sum())) * s


def geometric_dists(q_i: Sequence[float], tail_tol: float = 1e-20) -> list[DiscreteDist]:
    # tighter than the oracle default so the truncated series agrees with
    # the closed forms to ~1e-16 relative
    return [DiscreteDist.geometric(1.0 - q, tail_tol=tail_tol) for q in q_i]


def independent_dists(model: DependencyModel) -> list[DiscreteDist]:
    if not isinstance(model.law, ProductLaw):
        raise ParameterDomainError("independent bounds need a product law")
    return list(model.law.dists)
