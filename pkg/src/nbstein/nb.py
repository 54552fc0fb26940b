"""Negative binomial primitives and the call function.

The law NB(r, p) puts mass ``C(r+k-1, k) p^r q^k`` on k = 0, 1, ... with
``q = 1 - p``; its mean is ``rq/p`` and its variance ``rq/p^2``.  Everything
here works in log space and only exponentiates when accumulating.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import InfeasibleMatchingError, ParameterDomainError, SeriesConvergenceError

__all__ = [
    "NBParams",
    "SeriesControl",
    "SeriesResult",
    "CallBoundCheck",
    "call_payoff",
    "nb_logpmf",
    "nb_pmf",
    "nb_mean_var",
    "nb_call_expectation",
    "verify_call_expectation_bounds",
    "match_mean",
    "match_mean_var",
]


@dataclass(frozen=True)
class NBParams:
    """Parameters (r, p) of NB(r, p); ``q`` is derived and stored."""

    r: float
    p: float
    q: float = field(init=False, repr=False)

    def __post_init__(self):
        r, p = float(self.r), float(self.p)
        if not (math.isfinite(r) and r > 0):
            raise ParameterDomainError(f"r must be a positive finite real, got {self.r!r}")
        if not (0.0 < p < 1.0):
            raise ParameterDomainError(f"p must lie in (0, 1), got {self.p!r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", 1.0 - p)

    @property
    def log_p(self) -> float:
        return math.log1p(-self.q) if self.q < 0.5 else math.log(self.p)

    @property
    def log_q(self) -> float:
        return math.log1p(-self.p)

    def require_standing(self) -> "NBParams":
        """Raise unless r > 1, which every error bound assumes."""
        if self.r <= 1.0:
            raise ParameterDomainError(f"error bounds require r > 1, got r={self.r}")
        return self

    def _warn_if_small_r(self) -> None:
        if self.r <= 1.0:
            warnings.warn(f"r={self.r} <= 1: distribution is defined but no bound applies",
                          RuntimeWarning, stacklevel=3)


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for infinite series."""

    rel_tol: float = 1e-12
    max_terms: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ParameterDomainError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 1:
            raise ParameterDomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


class SeriesResult(NamedTuple):
    """Truncated series value with a certified bound on the dropped tail."""

    value: float
    tail: float
    n_terms: int


class CallBoundCheck(NamedTuple):
    value: float
    slack_mean: float
    slack_nonuniform: float | None
    passed: bool


def call_payoff(k, z: float):
    """The call function ``(k - z)^+``."""
    return np.maximum(np.asarray(k, dtype=float) - z, 0.0)


def _check_z(z: float) -> float:
    z = float(z)
    if not (math.isfinite(z) and z >= 0):
        raise ParameterDomainError(f"strike z must be a finite non-negative real, got {z!r}")
    return z


def nb_logpmf(params: NBParams, k):
    """Log pmf of NB(r, p) at integer ``k`` (scalar or array)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or np.any(k != np.floor(k)):
        raise ParameterDomainError("k must be a non-negative integer")
    r = params.r
    return gammaln(r + k) - gammaln(r) - gammaln(k + 1.0) + r * params.log_p + k * params.log_q


def nb_pmf(params: NBParams, k):
    params._warn_if_small_r()
    out = np.exp(nb_logpmf(params, k))
    return float(out) if out.ndim == 0 else out


def nb_mean_var(params: NBParams) -> tuple[float, float]:
    rq = params.r * params.q
    return rq / params.p, rq / (params.p * params.p)


def nb_call_expectation(params: NBParams, z: float, ctl: SeriesControl | None = None) -> SeriesResult:
    """E[(N - z)^+] for N ~ NB(r, p), summed from the first index above z.

    The sum stops at the first index k past which the term ratio is
    certified below 1; the remainder is then bounded by a geometric series.
    Term ratios are non-increasing for r >= 1 and bounded by q (times the
    payoff ratio) for r < 1, so ``max`` of the two is a valid ratio bound.
    """
    ctl = ctl or DEFAULT_CONTROL
    z = _check_z(z)
    params._warn_if_small_r()
    r, q, log_q = params.r, params.q, params.log_q
    const = r * params.log_p - gammaln(r)

    start = math.floor(z) + 1
    total = 0.0
    n = 0
    chunk = 256
    while n < ctl.max_terms:
        m = min(chunk, ctl.max_terms - n)
        k = np.arange(start + n, start + n + m, dtype=float)
        excess = k - z
        terms = np.exp(const + gammaln(r + k) - gammaln(k + 1.0) + k * log_q + np.log(excess))
        partial = total + np.cumsum(terms)
        pay_ratio = (excess + 1.0) / excess
        ratio = np.maximum(q * (r + k) / (k + 1.0) * pay_ratio, q * pay_ratio)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(ratio < 1.0, terms * ratio / (1.0 - ratio), np.inf)
        ok = np.nonzero(tail <= ctl.rel_tol * partial)[0]
        if ok.size:
            i = int(ok[0])
            return SeriesResult(float(partial[i]), float(tail[i]), n + i + 1)
        total = float(partial[-1])
        n += m
        chunk = min(chunk * 2, 1 << 16)
    raise SeriesConvergenceError(
        f"E[(N-z)^+] not certified within {ctl.max_terms} terms (r={r}, p={params.p}, z={z})",
        partial=total, n_terms=n)


def verify_call_expectation_bounds(params: NBParams, z: float, ctl: SeriesControl | None = None) -> CallBoundCheck:
    """Check ``E[(N-z)^+] <= rq/p`` and, for z > 1, ``<= r(r+1)q^2/(z p^2)``.

    Slacks are ``rhs - value``; a check passes when each slack is at least
    ``-1e-12 * max(1, rhs)``.
    """
    z = _check_z(z)
    value = nb_call_expectation(params, z, ctl).value
    r, p, q = params.r, params.p, params.q
    rhs_mean = r * q / p
    slack_mean = rhs_mean - value
    passed = slack_mean >= -1e-12 * max(1.0, rhs_mean)
    slack_nonuniform = None
    if z > 1:
        rhs = r * (r + 1) * q * q / (z * p * p)
        slack_nonuniform = rhs - value
        passed = passed and slack_nonuniform >= -1e-12 * max(1.0, rhs)
    return CallBoundCheck(value, slack_mean, slack_nonuniform, bool(passed))


def match_mean(mu_V: float, r: float) -> NBParams:
    """NB(r, p) with the given r and mean ``mu_V``: ``p = r / (r + mu_V)``."""
    if not (mu_V > 0 and math.isfinite(mu_V)):
        raise ParameterDomainError(f"mean must be positive, got {mu_V!r}")
    if not r > 1:
        raise ParameterDomainError(f"mean matching requires r > 1, got {r!r}")
    return NBParams(r, r / (r + mu_V))


def match_mean_var(mu_V: float, var_V: float) -> NBParams:
    """NB(r, p) whose mean and variance equal ``mu_V`` and ``var_V``.

    Requires ``var_V > mu_V``.  A resulting r <= 1 is returned with a warning
    because the bounds no longer apply.
    """
    if not (mu_V > 0 and math.isfinite(mu_V)):
        raise ParameterDomainError(f"mean must be positive, got {mu_V!r}")
    if not var_V > mu_V:
        raise InfeasibleMatchingError(
            f"mean-variance matching needs E(V) < Var(V); got mean={mu_V}, var={var_V}")
    p = mu_V / var_V
    r = mu_V * mu_V / (var_V - mu_V)
    if r <= 1:
        warnings.warn(f"matched r={r:.6g} <= 1; NB bounds assume r > 1", RuntimeWarning, stacklevel=2)
    return NBParams(r, p)
