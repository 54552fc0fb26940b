"""Truncated probability mass functions on the non-negative integers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterDomainError

__all__ = ["TailCertificate", "DiscreteDist", "dtv_unit_shift", "convolve_all"]

DEFAULT_TAIL_TOL = 1e-14


@dataclass(frozen=True)
class TailCertificate:
    """Upper bounds on the mass beyond the stored support.

    ``mass``, ``m1``, ``m2``, ``m3`` bound ``sum_{k>=K} k^m P(X=k)`` for
    m = 0..3, where K is the stored length.  ``inf`` means "no usable bound".
    """

    mass: float = 0.0
    m1: float = 0.0
    m2: float = 0.0
    m3: float = 0.0

    @property
    def exact(self) -> bool:
        return self.mass == 0.0 and self.m1 == 0.0 and self.m2 == 0.0 and self.m3 == 0.0


def _geometric_tail(g_K: float, K: int, rho: float) -> TailCertificate:
    """Bounds for ``sum_{i>=0} (K+i)^m g_K rho^i``, m = 0..3."""
    if g_K == 0.0:
        return TailCertificate()
    a = 1.0 / (1.0 - rho)
    s0 = a                                  # sum rho^i
    s1 = rho * a ** 2                       # sum i rho^i
    s2 = rho * (1 + rho) * a ** 3           # sum i^2 rho^i
    s3 = rho * (1 + 4 * rho + rho * rho) * a ** 4
    return TailCertificate(
        g_K * s0,
        g_K * (K * s0 + s1),
        g_K * (K * K * s0 + 2 * K * s1 + s2),
        g_K * (K ** 3 * s0 + 3 * K * K * s1 + 3 * K * s2 + s3),
    )


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """pmf on {0, ..., K-1} plus a certificate for the dropped tail.

    ``exact_moments`` optionally holds the untruncated (E X, E X^2) when they
    are known in closed form; ``mean`` and ``variance`` then use them.
    """

    pmf: np.ndarray
    tail: TailCertificate = TailCertificate()
    exact_moments: tuple | None = None

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float).ravel()
        if pmf.size == 0:
            raise ParameterDomainError("pmf must have at least one entry")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ParameterDomainError("pmf entries must be finite and non-negative")
        stored = pmf.sum()
        if stored > 1.0 + 1e-10 or stored + self.tail.mass < 1.0 - 1e-10:
            raise ParameterDomainError(
                f"stored mass {stored!r} with tail bound {self.tail.mass!r} cannot total 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    # -- constructors --------------------------------------------------------

    @classmethod
    def point(cls, k: int) -> "DiscreteDist":
        pmf = np.zeros(int(k) + 1)
        pmf[-1] = 1.0
        return cls(pmf)

    @classmethod
    def bernoulli(cls, p: float) -> "DiscreteDist":
        if not 0.0 <= p <= 1.0:
            raise ParameterDomainError(f"Bernoulli p must lie in [0, 1], got {p}")
        return cls(np.array([1.0 - p, p]))

    @classmethod
    def geometric(cls, p: float, tail_tol: float = DEFAULT_TAIL_TOL) -> "DiscreteDist":
        """Law ``P(X=k) = q^k p`` on k >= 0, cut where the tail mass drops below ``tail_tol``."""
        if not 0.0 < p <= 1.0:
            raise ParameterDomainError(f"geometric p must lie in (0, 1], got {p}")
        q = 1.0 - p
        if q == 0.0:
            return cls.point(0)
        # tail mass from K on is q^K
        K = max(1, math.ceil(math.log(tail_tol) / math.log(q)))
        pmf = p * q ** np.arange(K)
        m = q / p
        return cls(pmf, _geometric_tail(p * q ** K, K, q), (m, m / p + m * m))

    @classmethod
    def from_pmf(cls, values: Iterable[float]) -> "DiscreteDist":
        """Finite-support law; the values must sum to one."""
        return cls(np.asarray(list(values), dtype=float))

    @classmethod
    def from_ratio_tail(cls, pmf: Sequence[float], rho: float) -> "DiscreteDist":
        """Truncated law whose tail satisfies ``P(X=k+1) <= rho P(X=k)`` from the cut on.

        The first dropped value is taken as ``rho * pmf[-1]``.
        """
        pmf = np.asarray(pmf, dtype=float)
        if not 0.0 <= rho < 1.0:
            raise ParameterDomainError("tail ratio must lie in [0, 1)")
        tail = _geometric_tail(rho * pmf[-1], pmf.size, rho)
        return cls(pmf, tail)

    @classmethod
    def negative_binomial(cls, params, tail_tol: float = DEFAULT_TAIL_TOL) -> "DiscreteDist":
        """NB(r, p) cut past the mode once the certified tail mass is below ``tail_tol``."""
        from .nb import nb_logpmf

        r, q = params.r, params.q
        K = 64
        while True:
            k = np.arange(K + 1, dtype=float)
            pmf = np.exp(nb_logpmf(params, k))
            rho = max(q * (r + K) / (K + 1.0), q)
            if rho < 1.0 and pmf[K] / (1.0 - rho) < tail_tol:
                m, v = r * q / params.p, r * q / params.p ** 2
                return cls(pmf[:K], _geometric_tail(pmf[K], K, rho), (m, v + m * m))
            K *= 2

    # -- summaries -----------------------------------------------------------

    @property
    def support_size(self) -> int:
        return self.pmf.size

    def moment(self, order: int) -> float:
        """``E[X^order]`` over the stored support (excludes the tail)."""
        k = np.arange(self.pmf.size, dtype=float)
        return float(np.dot(k ** order, self.pmf))

    def mean(self) -> float:
        if self.exact_moments is not None:
            return float(self.exact_moments[0])
        return self.moment(1)

    def second_moment(self) -> float:
        if self.exact_moments is not None:
            return float(self.exact_moments[1])
        return self.moment(2)

    def variance(self) -> float:
        m = self.mean()
        return self.second_moment() - m * m

    def mean_upper(self) -> float:
        if self.exact_moments is not None:
            return self.mean()
        return self.mean() + self.tail.m1

    def convolve(self, other: "DiscreteDist") -> "DiscreteDist":
        """Law of the independent sum; tail bounds add (first moment includes cross terms)."""
        pmf = np.convolve(self.pmf, other.pmf)
        a, b = self.tail, other.tail
        mass = a.mass + b.mass
        m1 = a.m1 + a.mass * other.mean_upper() + b.m1 + b.mass * self.mean_upper()
        hi = 0.0 if (a.exact and b.exact) else math.inf
        pmf = np.clip(pmf, 0.0, None)
        mom = None
        if self.exact_moments is not None and other.exact_moments is not None:
            (a1, a2), (b1, b2) = self.exact_moments, other.exact_moments
            mom = (a1 + b1, a2 + b2 + 2 * a1 * b1)
        return DiscreteDist(pmf, TailCertificate(min(mass, 1.0), m1, hi, hi), mom)

    def shift_dtv(self) -> float:
        return dtv_unit_shift(self)

    def __repr__(self) -> str:
        return f"DiscreteDist(K={self.pmf.size}, mean={self.mean():.6g}, tail_mass={self.tail.mass:.3g})"


def dtv_unit_shift(dist: DiscreteDist) -> float:
    """``d_TV(X, X+1) = 1/2 sum_k |P(X=k) - P(X=k-1)|``.

    Computed on the stored support; a truncated tail adds at most
    ``dist.tail.mass`` to the error.
    """
    f = np.concatenate(([0.0], dist.pmf, [0.0]))
    return float(min(1.0, 0.5 * np.abs(np.diff(f)).sum()))


def convolve_all(dists: Sequence[DiscreteDist]) -> DiscreteDist:
    """Independent sum of several laws, merged pairwise in a fixed tree order."""
    items = list(dists)
    if not items:
        return DiscreteDist.point(0)
    while len(items) > 1:
        nxt = [items[i].convolve(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]
