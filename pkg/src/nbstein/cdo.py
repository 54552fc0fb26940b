"""Expected tranche losses of a synthetic CDO via the call-function reduction.

With N obligors, constant recovery R and default indicators ξ_i, the
percentage loss is ``L = (1-R)/N * V`` with ``V = Σ ξ_i``, so

    E[(L - a)^+] = (1-R)/N * E[(V - z)^+],   z = N a / (1-R).

V is approximated by a negative binomial and the Stein bounds certify the
approximation error at each strike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import bounds as B
from .dependency import DependencyModel, chain_neighborhoods, exact_sum_distribution
from .dists import DiscreteDist
from .errors import ParameterDomainError
from .nb import NBParams, SeriesControl, match_mean, nb_call_expectation, nb_mean_var
from .oracle import exact_call_expectation

__all__ = ["Portfolio", "TrancheReport", "tranche_expected_loss", "compare_bounds", "oracle_tranche_loss"]


@dataclass(frozen=True, eq=False)
class Portfolio:
    """Obligor default probabilities, optional pairwise joint defaults, tranches.

    ``pairs`` maps (i, j), i < j, to P(ξ_i = ξ_j = 1); when given, ``neighborhoods``
    lists A_i (defaults to the chain {i-1, i, i+1}).
    """

    p_star: np.ndarray
    recovery: float = 0.4
    tranches: tuple = ()
    pairs: Mapping | None = None
    neighborhoods: Sequence | None = None

    def __post_init__(self):
        p = np.asarray(self.p_star, dtype=float).ravel()
        if p.size == 0:
            raise ParameterDomainError("portfolio needs at least one obligor")
        if np.any(p < 0) or np.any(p > 1):
            raise ParameterDomainError("default probabilities must lie in [0, 1]")
        if not 0.0 <= self.recovery <= 1.0:
            raise ParameterDomainError(f"recovery must lie in [0, 1], got {self.recovery}")
        tr = []
        for t in self.tranches:
            a, d = float(t[0]), float(t[1])
            if not 0.0 <= a < d <= 1.0:
                raise ParameterDomainError(f"tranche ({a}, {d}) must satisfy 0 <= a < d <= 1")
            tr.append((a, d))
        object.__setattr__(self, "p_star", p)
        object.__setattr__(self, "tranches", tuple(tr))
        if self.pairs is not None:
            pairs = {tuple(sorted((int(i), int(j)))): float(v) for (i, j), v in dict(self.pairs).items()}
            object.__setattr__(self, "pairs", pairs)
            A = self.neighborhoods
            A = chain_neighborhoods(p.size) if A is None else [frozenset(int(j) for j in a) | {i}
                                                             for i, a in enumerate(A)]
            object.__setattr__(self, "neighborhoods", tuple(A))

    @property
    def N(self) -> int:
        return int(self.p_star.size)

    @property
    def dependent(self) -> bool:
        return self.pairs is not None

    def strike(self, a: float) -> float:
        """Count-space strike z = N a / (1-R); ``inf`` when the loss can never reach a."""
        lgd = 1.0 - self.recovery
        if lgd <= 0.0 or a >= lgd:
            return math.inf
        return self.N * a / lgd

    def model(self) -> DependencyModel:
        if self.dependent:
            return DependencyModel.pairwise(self.p_star, self.pairs, self.neighborhoods)
        return DependencyModel.independent([DiscreteDist.bernoulli(x) for x in self.p_star])

    def nb_bound(self, r: float | None = None, z: float | None = None) -> B.BoundReport:
        if self.dependent:
            return B.corollary2(self.p_star, self.pairs, self.neighborhoods, r=r, z=z)
        return B.theorem2_mean([DiscreteDist.bernoulli(x) for x in self.p_star], r=r, z=z)


@dataclass(frozen=True)
class TrancheReport:
    tranche_id: int
    attachment: float
    detachment: float
    z_star: float
    z_detach: float
    call_loss: float            # E[(L - a)^+], NB estimate
    call_loss_err: float
    expected_loss_estimate: float  # E[min(L, d) - min(L, a)]
    error: float
    nb_bound: B.BoundReport | None
    poisson_bound: float
    notes: tuple = ()

    @property
    def interval(self) -> tuple[float, float]:
        return self.expected_loss_estimate - self.error, self.expected_loss_estimate + self.error

    @property
    def call_interval(self) -> tuple[float, float]:
        return self.call_loss - self.call_loss_err, self.call_loss + self.call_loss_err

    def to_dict(self) -> dict:
        return {
            "tranche": self.tranche_id,
            "attachment": self.attachment,
            "detachment": self.detachment,
            "z_star": self.z_star,
            "call_loss": self.call_loss,
            "call_loss_err": self.call_loss_err,
            "expected_loss": self.expected_loss_estimate,
            "error": self.error,
            "nb_bound": None if self.nb_bound is None else self.nb_bound.bound_value,
            "poisson_bound": self.poisson_bound,
            "notes": list(self.notes),
        }


def _poisson(portfolio: Portfolio) -> float:
    if portfolio.dependent:
        return B.poisson_local_bound(portfolio.p_star, portfolio.pairs, portfolio.neighborhoods)
    return B.remark_bernoulli_poisson(portfolio.p_star)


def _leg(portfolio: Portfolio, params: NBParams, z: float, uniform: B.BoundReport,
         ctl) -> tuple[float, float, B.BoundReport | None]:
    """NB call value at count strike z, the certified error on E[(V-z)^+] and
    the bound report that achieved it (the smaller of uniform and ϑ)."""
    if math.isinf(z) or z >= portfolio.N:
        return 0.0, 0.0, None   # V <= N, so the call is exactly 0
    if z == 0.0:
        return nb_mean_var(params)[0], uniform.bound_value, uniform
    res = nb_call_expectation(params, z, ctl)
    rep = uniform
    if z > 1:
        nu = portfolio.nb_bound(r=params.r, z=z)
        if nu.bound_value < rep.bound_value:
            rep = nu
    return res.value, rep.bound_value + res.tail, rep


def tranche_expected_loss(portfolio: Portfolio, tranche, params: NBParams | None = None,
                          tranche_id: int = 0, ctl: SeriesControl | None = None) -> TrancheReport:
    """NB estimate of E[(L-a)^+] and of the tranche loss E[min(L,d) - min(L,a)].

    ``params`` must be mean matched (the bounds assume it); when omitted r = N.
    """
    a, d = float(tranche[0]), float(tranche[1])
    if not 0.0 <= a < d <= 1.0:
        raise ParameterDomainError(f"tranche ({a}, {d}) must satisfy 0 <= a < d <= 1")
    lgd = 1.0 - portfolio.recovery
    za, zd = portfolio.strike(a), portfolio.strike(d)
    poisson = _poisson(portfolio)
    if math.isinf(za):
        note = "R = 1: no loss" if lgd <= 0 else "attachment at or beyond the maximal loss 1-R"
        return TrancheReport(tranche_id, a, d, za, zd, 0.0, 0.0, 0.0, 0.0, None, poisson, (note,))
    mu = float(portfolio.p_star.sum())
    if mu == 0.0:
        return TrancheReport(tranche_id, a, d, za, zd, 0.0, 0.0, 0.0, 0.0, None, poisson,
                             ("no defaults possible",))
    if params is None:
        params = match_mean(mu, float(portfolio.N))
    uniform_rep = portfolio.nb_bound(r=params.r)
    if not math.isclose(uniform_rep.matched_params.p, params.p, rel_tol=1e-9):
        raise ParameterDomainError("params must be mean matched to the portfolio")
    scale = lgd / portfolio.N
    ca, ea, rep_a = _leg(portfolio, params, za, uniform_rep, ctl)
    cd, ed, _ = _leg(portfolio, params, zd, uniform_rep, ctl)
    notes = () if not math.isinf(zd) else ("detachment beyond the maximal loss",)
    return TrancheReport(
        tranche_id, a, d, za, zd,
        scale * ca, scale * ea,
        scale * (ca - cd), scale * (ea + ed),
        rep_a or uniform_rep, poisson, notes,
    )


def oracle_tranche_loss(portfolio: Portfolio, tranche) -> tuple[float, float]:
    """Exact (E[(L-a)^+], tranche loss) by enumeration; feasible for N up to ~20."""
    dist = exact_sum_distribution(portfolio.model())
    scale = (1.0 - portfolio.recovery) / portfolio.N

    def call(z):
        return 0.0 if math.isinf(z) else exact_call_expectation(dist, z).value

    ca = call(portfolio.strike(tranche[0]))
    cd = call(portfolio.strike(tranche[1]))
    return scale * ca, scale * (ca - cd)


def compare_bounds(portfolio: Portfolio, r: float | None = None) -> list[dict]:
    """NB against Poisson bounds for the independent and (if present) dependent setups."""
    p = portfolio.p_star
    rows = [{
        "setup": "independent",
        "nb_bound": B.remark_bernoulli_nb(p, r=r),
        "poisson_bound": B.remark_bernoulli_poisson(p),
    }]
    if portfolio.dependent:
        rows.append({
            "setup": "dependent",
            "nb_bound": B.corollary2(p, portfolio.pairs, portfolio.neighborhoods, r=r).bound_value,
            "poisson_bound": B.poisson_local_bound(p, portfolio.pairs, portfolio.neighborhoods),
        })
    for row in rows:
        row["nb_better"] = bool(row["nb_bound"] < row["poisson_bound"])
    return rows
