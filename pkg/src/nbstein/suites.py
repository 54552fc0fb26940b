"""Seeded randomized verification sweeps shared by the CLI and the test suite.

Each sweep returns a :class:`SuiteResult`; ``failures`` holds one dict per
failing check so callers can emit machine-readable records.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds as B
from .dependency import DependencyModel
from .dists import DiscreteDist
from .nb import NBParams, verify_call_expectation_bounds
from .oracle import true_error_profile
from .stein import SteinSolution, check_envelopes, stein_apply, verify_appendix_series

__all__ = ["SuiteResult", "SUITES", "run_suite", "stein_residual", "sample_rpz"]

K_MAX = 60


@dataclass
class SuiteResult:
    name: str
    n_checks: int = 0
    failures: list = field(default_factory=list)
    worst: float = 0.0          # suite-specific worst statistic (residual, -slack, ...)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {"suite": self.name, "checks": self.n_checks, "failures": len(self.failures),
                "worst": self.worst, "passed": self.passed}


def sample_rpz(rng: np.random.Generator) -> tuple[NBParams, float]:
    """r in (1, 30), p in (0.3, 0.98), z in [0, 3 * mean]."""
    r = rng.uniform(1.0, 30.0)
    while r <= 1.0:
        r = rng.uniform(1.0, 30.0)
    p = rng.uniform(0.3, 0.98)
    params = NBParams(r, p)
    z = rng.uniform(0.0, 3.0 * r * params.q / p)
    return params, z


def stein_residual(sol: SteinSolution, k: int) -> float:
    """|A g(k) - h(k)| relative to the largest term involved."""
    r, q = sol.params.r, sol.params.q
    a = q * (r + k) * sol.value(k + 1)
    b = k * sol.value(k)
    h = float(sol.h(k))
    lhs = stein_apply(sol.params, sol.value, k)
    return abs(lhs - h) / max(1.0, abs(a), abs(b), abs(h))


def residual_suite(seed: int = 1, budget: int = 1000, tol: float = 1e-9) -> SuiteResult:
    rng = np.random.default_rng(seed)
    out = SuiteResult("residual")
    for case in range(budget):
        params, z = sample_rpz(rng)
        sol = SteinSolution(params, z)
        for k in range(K_MAX + 1):
            res = stein_residual(sol, k)
            out.n_checks += 1
            out.worst = max(out.worst, res)
            if not res < tol:
                out.failures.append({"case": case, "r": params.r, "p": params.p, "z": z, "k": k,
                                     "residual": res})
    return out


def envelope_suite(seed: int = 1, budget: int = 1000, tol: float | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed)
    out = SuiteResult("envelopes")
    for case in range(budget):
        params, z = sample_rpz(rng)
        sol = SteinSolution(params, z)
        for k in range(K_MAX + 1):
            for rep in check_envelopes(sol, k):
                out.n_checks += 1
                rel = -rep.slack / max(1.0, rep.envelope) if not rep.overflow else -math.inf
                out.worst = max(out.worst, rel)
                if not rep.passed:
                    out.failures.append({"case": case, "r": params.r, "p": params.p, "z": z,
                                         "k": k, "envelope": rep.envelope_name,
                                         "value": rep.value, "bound": rep.envelope})
    return out


def lemmas_suite(seed: int = 1, budget: int = 1000, tol: float = 1e-9) -> SuiteResult:
    """Stein residual and every envelope on one shared sweep."""
    res = residual_suite(seed, budget, tol)
    env = envelope_suite(seed, budget)
    out = SuiteResult("lemmas", res.n_checks + env.n_checks, res.failures + env.failures,
                      max(res.worst, env.worst))
    return out


def appendix_suite(seed: int = 1, budget: int = 1000, tol: float = 1e-10) -> SuiteResult:
    """Series inequalities (1000-term partial sums) and the two expectation bounds."""
    rng = np.random.default_rng(seed)
    out = SuiteResult("appendix")
    for case in range(budget):
        params, z = sample_rpz(rng)
        k = int(rng.integers(1, K_MAX + 1))
        for chk in verify_appendix_series(params, k, n_terms=1000, rtol=tol):
            out.n_checks += 1
            out.worst = max(out.worst, -chk.slack / max(1.0, abs(chk.rhs)))
            if not chk.passed:
                out.failures.append({"case": case, "r": params.r, "p": params.p, "k": k,
                                     "part": chk.part, "partial": chk.partial_sum, "rhs": chk.rhs})
        cb = verify_call_expectation_bounds(params, z)
        out.n_checks += 1
        if not cb.passed:
            out.failures.append({"case": case, "r": params.r, "p": params.p, "z": z,
                                 "part": "expectation", "value": cb.value})
    return out


def random_portfolio(rng: np.random.Generator, kind: str) -> list[DiscreteDist]:
    n = int(rng.integers(2, 11))
    if kind == "bernoulli":
        return [DiscreteDist.bernoulli(x) for x in rng.uniform(0.01, 0.6, n)]
    return [DiscreteDist.geometric(1.0 - x) for x in rng.uniform(0.02, 0.5, n)]


def dominance_suite(seed: int = 1, budget: int = 50, tol: float = 1e-9) -> SuiteResult:
    """Independent-summand bounds (uniform, and ϑ for z > 1) against the oracle true error."""
    rng = np.random.default_rng(seed)
    out = SuiteResult("dominance")
    for case in range(budget):
        kind = "bernoulli" if case % 2 == 0 else "geometric"
        dists = random_portfolio(rng, kind)
        rep = B.theorem2_mean(dists)
        model = DependencyModel.independent(dists)
        prof = true_error_profile(model, rep.matched_params)
        uniform = rep.bound_value + rep.prefactor * rep.certificate
        for z, err in zip(prof.z, prof.true_error):
            checks = [("uniform", uniform)]
            if z > 1:
                nu = B.theorem2_mean(dists, r=rep.matched_params.r, z=z)
                checks.append(("theta", nu.bound_value + nu.prefactor * nu.certificate))
            for name, bound in checks:
                out.n_checks += 1
                # tightness: how close the true error comes to the bound
                if bound > 0:
                    out.worst = max(out.worst, float(err / bound))
                if not bound >= err - tol:
                    out.failures.append({"case": case, "kind": kind, "n": len(dists), "z": float(z),
                                         "variant": name, "bound": bound, "true_error": float(err)})
    return out


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300) if a != b else 0.0


def identities_suite(seed: int = 1, budget: int = 100, tol: float = 1e-10) -> SuiteResult:
    """theorem2_mean against the closed-form Bernoulli and geometric bounds, and
    corollary2 with singleton neighbourhoods against the Bernoulli bound."""
    rng = np.random.default_rng(seed)
    out = SuiteResult("identities")

    def check(case, name, a, b):
        out.n_checks += 1
        d = _rel(a, b)
        out.worst = max(out.worst, d)
        if not d <= tol:
            out.failures.append({"case": case, "identity": name, "lhs": a, "rhs": b, "rel": d})

    for case in range(budget):
        n = int(rng.integers(2, 40))
        p_i = rng.uniform(0.001, 0.999, n)
        r = float(rng.uniform(1.5, 3 * n))
        t2 = B.theorem2_mean([DiscreteDist.bernoulli(x) for x in p_i], r=r).bound_value
        closed = B.remark_bernoulli_nb(p_i, r=r)
        check(case, "theorem2-bernoulli", t2, closed)
        c2 = B.corollary2(p_i, {}, [[i] for i in range(n)], r=r).bound_value
        check(case, "corollary2-singleton", c2, closed)
        q_i = rng.uniform(0.01, 0.5, n)
        t2g = B.theorem2_mean(B.geometric_dists(q_i), r=r).bound_value
        check(case, "theorem2-geometric", t2g, B.remark_geometric_nb(q_i, r=r))
    return out


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "lemmas": lemmas_suite,
    "residual": residual_suite,
    "envelopes": envelope_suite,
    "appendix": appendix_suite,
    "dominance": dominance_suite,
    "identities": identities_suite,
}

DEFAULT_BUDGET = {"lemmas": 1000, "residual": 1000, "envelopes": 1000, "appendix": 1000,
                  "dominance": 50, "identities": 100}


def run_suite(name: str, seed: int = 1, budget: int | None = None, tol: float | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(name)
    kw = {"seed": seed, "budget": DEFAULT_BUDGET[name] if budget is None else budget}
    if tol is not None:
        kw["tol"] = tol
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return SUITES[name](**kw)
