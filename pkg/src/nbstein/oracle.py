"""Brute-force ground truth for call expectations and approximation errors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dependency import DependencyModel, exact_sum_distribution
from .dists import DiscreteDist
from .nb import NBParams, SeriesControl, nb_call_expectation, nb_mean_var

__all__ = ["CallValue", "OracleResult", "exact_call_expectation", "true_error_profile", "default_z_grid"]


class CallValue(NamedTuple):
    """``value`` is the sum over the stored support; the true expectation lies in
    ``[value, value + err]``."""

    value: float
    err: float

    @property
    def interval(self) -> tuple[float, float]:
        return self.value, self.value + self.err


def exact_call_expectation(dist: DiscreteDist, z: float) -> CallValue:
    """E[(X - z)^+] over the stored pmf.

    The dropped tail contributes ``sum_{k>=K} (k - z)^+ P(X=k)``, which is at
    most ``tail.m1`` (first tail moment).  This cap is reported as ``err``.
    """
    k = np.arange(dist.support_size, dtype=float)
    value = float(np.dot(np.maximum(k - z, 0.0), dist.pmf))
    err = 0.0 if dist.tail.exact else max(0.0, dist.tail.m1 - z * dist.tail.mass)
    return CallValue(value, err)


def default_z_grid(dist: DiscreteDist) -> np.ndarray:
    """Half-integers from 0 to mean + 6 sd."""
    hi = dist.mean() + 6.0 * math.sqrt(max(dist.variance(), 0.0))
    return np.arange(0.0, math.floor(2 * hi) / 2 + 0.5, 0.5)


@dataclass(frozen=True, eq=False)
class OracleResult:
    dist_V: DiscreteDist
    params: NBParams
    z: np.ndarray
    call_values: np.ndarray
    call_err: np.ndarray
    nb_call_values: np.ndarray
    nb_tail: np.ndarray

    @property
    def true_error(self) -> np.ndarray:
        return np.abs(self.call_values - self.nb_call_values)

    @property
    def error_slack(self) -> np.ndarray:
        """How far |true error| could exceed ``true_error`` given both truncations."""
        return self.call_err + self.nb_tail

    @property
    def true_error_upper(self) -> np.ndarray:
        return self.true_error + self.error_slack

    def as_dict(self) -> dict:
        return {float(z): float(e) for z, e in zip(self.z, self.true_error)}


def true_error_profile(model: DependencyModel | DiscreteDist, params: NBParams,
                       z_grid: Sequence[float] | None = None,
                       ctl: SeriesControl | None = None) -> OracleResult:
    """|E[(V-z)^+] - E[(N_{r,p}-z)^+]| on a grid of strikes."""
    dist = model if isinstance(model, DiscreteDist) else exact_sum_distribution(model)
    z = default_z_grid(dist) if z_grid is None else np.asarray(z_grid, dtype=float)
    cv = [exact_call_expectation(dist, float(t)) for t in z]
    nb = []
    for t in z:
        if t == 0.0:
            # E N exactly; the series would only reproduce it to rel_tol
            nb.append((nb_mean_var(params)[0], 0.0))
        else:
            res = nb_call_expectation(params, float(t), ctl)
            nb.append((res.value, res.tail))
    return OracleResult(
        dist, params, z,
        np.array([c.value for c in cv]), np.array([c.err for c in cv]),
        np.array([v for v, _ in nb]), np.array([e for _, e in nb]),
    )
