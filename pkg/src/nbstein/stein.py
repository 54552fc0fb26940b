"""Stein operator for NB(r, p), the call-function Stein solution and its envelopes.

The Stein operator is ``A g(k) = q (r + k) g(k+1) - k g(k)``.  For the test
function ``h(k) = (k - z)^+ - E[(N - z)^+]`` the solution with ``g(0) = 0`` is

    g(k) = -sum_{j >= k} w(k, j) h(j),
    w(k, j) = q^(j-k) / j * prod_{m=k}^{j-1} (r + m) / m,

and since ``w(k, j) = pmf(j) / (k pmf(k))`` and ``E h(N) = 0`` the same value
is the finite sum ``g(k) = sum_{j < k} w(k, j) h(j)``.  ``h`` changes sign
exactly once, at ``j* = z + E[(N - z)^+]``; below ``j*`` the finite sum has
non-positive terms only, above it the upper series has positive terms only, so
neither route cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import PreconditionError, SeriesConvergenceError
from .nb import DEFAULT_CONTROL, NBParams, SeriesControl, nb_call_expectation

__all__ = [
    "SteinSolution",
    "EnvelopeReport",
    "AppendixCheck",
    "stein_apply",
    "solve",
    "delta",
    "envelope_lemma1_g",
    "envelope_lemma1_delta",
    "envelope_lemma2",
    "envelope_remark1",
    "check_envelopes",
    "appendix_partial_sums",
    "verify_appendix_series",
]

ENVELOPE_RTOL = 1e-9


def stein_apply(params: NBParams, g: Callable[[int], float], k: int) -> float:
    """Evaluate ``q (r + k) g(k+1) - k g(k)``."""
    return params.q * (params.r + k) * g(k + 1) - k * g(k)


@dataclass
class SteinSolution:
    """Lazily evaluated g_z for fixed (params, z).

    Values are cached per k together with the bound on the truncated tail
    (zero for the finite route).  The cache is write-once per key.
    """

    params: NBParams
    z: float
    ctl: SeriesControl = DEFAULT_CONTROL
    memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.params.require_standing()
        self.z = float(self.z)
        if not (math.isfinite(self.z) and self.z >= 0):
            raise PreconditionError(f"z must be finite and >= 0, got {self.z}")
        self.call = nb_call_expectation(self.params, self.z, self.ctl).value
        self.crossing = self.z + self.call

    def h(self, k):
        """Right-hand side ``(k - z)^+ - E[(N - z)^+]`` of the Stein equation."""
        return np.maximum(np.asarray(k, dtype=float) - self.z, 0.0) - self.call

    def __call__(self, k: int) -> float:
        return self.value(k)

    def value(self, k: int) -> float:
        return self.evaluate(k)[0]

    def evaluate(self, k: int) -> tuple[float, float]:
        """Return ``(g_z(k), tail_bound)``."""
        k = int(k)
        if k < 0:
            raise PreconditionError(f"k must be >= 0, got {k}")
        hit = self.memo.get(k)
        if hit is None:
            if k == 0:
                hit = (0.0, 0.0)
            elif k <= self.crossing:
                hit = (self._lower(k), 0.0)
            else:
                hit = self._upper(k)
            self.memo.setdefault(k, hit)
        return hit

    def delta(self, k: int) -> float:
        return self.value(k + 1) - self.value(k)

    def _lower(self, k: int) -> float:
        r, log_q = self.params.r, self.params.log_q
        m = np.arange(k, dtype=float)
        # log pmf(j)/pmf(k) = sum_{m=j}^{k-1} log((m+1) / (q (r+m)))
        steps = np.log1p(m) - np.log(r + m) - log_q
        log_ratio = np.cumsum(steps[::-1])[::-1]
        mag = -self.h(m)  # all >= 0 on this side of the crossing
        with np.errstate(divide="ignore"):
            log_terms = log_ratio + np.log(mag)
        if not np.any(np.isfinite(log_terms)):
            return 0.0
        return -math.exp(logsumexp(log_terms)) / k

    def _upper(self, k: int) -> tuple[float, float]:
        r, q, log_q = self.params.r, self.params.q, self.params.log_q
        shift = self.z + self.call
        rel_tol, max_terms = self.ctl.rel_tol, self.ctl.max_terms
        log_w0 = 0.0  # running log of prod_{m=k}^{j-1} (r+m)/m * q^(j-k)
        total = 0.0
        n = 0
        chunk = 256
        while n < max_terms:
            size = min(chunk, max_terms - n)
            j = np.arange(k + n, k + n + size, dtype=float)
            steps = np.log1p(r / j) + log_q
            log_prod = log_w0 + np.concatenate(([0.0], np.cumsum(steps[:-1])))
            hj = j - shift
            terms = np.exp(log_prod - np.log(j) + np.log(hj))
            partial = total + np.cumsum(terms)
            h_ratio = (hj + 1.0) / hj
            ratio = np.maximum(q * (r + j) / (j + 1.0) * h_ratio, q * h_ratio)
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = np.where(ratio < 1.0, terms * ratio / (1.0 - ratio), np.inf)
            ok = np.nonzero(tail <= rel_tol * partial)[0]
            if ok.size:
                i = int(ok[0])
                return -float(partial[i]), float(tail[i])
            total = float(partial[-1])
            log_w0 = float(log_prod[-1] + steps[-1])
            n += size
            chunk = min(chunk * 2, 1 << 16)
        raise SeriesConvergenceError(
            f"g_z({k}) series not certified within {max_terms} terms", partial=-total, n_terms=n)


def solve(params: NBParams, z: float, k: int, ctl: SeriesControl | None = None) -> float:
    """g_z(k) for NB(r, p)."""
    return SteinSolution(params, z, ctl or DEFAULT_CONTROL).value(k)


def delta(params: NBParams, z: float, k: int, ctl: SeriesControl | None = None) -> float:
    """Forward difference ``g_z(k+1) - g_z(k)``."""
    return SteinSolution(params, z, ctl or DEFAULT_CONTROL).delta(k)


# -- envelopes ---------------------------------------------------------------

def _inv_pow(params: NBParams, a: float) -> float:
    """p^(-a), +inf on overflow."""
    x = -a * params.log_p
    return math.exp(x) if x < 709.0 else math.inf


def envelope_lemma1_g(params: NBParams) -> float:
    """Uniform bound ``p^-(r+1)`` on |g_z(k)|."""
    return _inv_pow(params, params.r + 1)


def envelope_lemma1_delta(params: NBParams) -> float:
    """Uniform bound ``2 p^-(r+1) - p^-1`` on |Δg_z(k)|, valid for all z >= 0."""
    return 2.0 * _inv_pow(params, params.r + 1) - 1.0 / params.p


def _require_z_above_one(z: float) -> None:
    if not z > 1:
        raise PreconditionError(f"non-uniform envelopes need z > 1, got z={z}")


def lemma2_branch(z: float, k: int) -> str:
    if k == 1:
        return "dg-k=1"
    return "dg-k>=z" if k >= z else "dg-2<=k<z"


def envelope_lemma2(params: NBParams, z: float, k: int) -> float:
    """Non-uniform bound on |Δg_z(k)| for k >= 1, z > 1 (three branches)."""
    _require_z_above_one(z)
    if k < 1:
        raise PreconditionError(f"non-uniform envelopes need k >= 1, got k={k}")
    p, q, r = params.p, params.q, params.r
    branch = lemma2_branch(z, k)
    if branch == "dg-k>=z":
        return envelope_lemma1_delta(params) / z
    if branch == "dg-2<=k<z":
        return ((1.0 + 1.0 / q) * _inv_pow(params, r + 2) - p ** -2) / z
    return (r + 1) / z * (2.0 * _inv_pow(params, r + 2) - p ** -2)


def envelope_remark1(params: NBParams, z: float) -> float:
    """The uniform-in-k crude bound ϑ_{r,p,z} on ‖Δg_z‖ for z > 1."""
    _require_z_above_one(z)
    p, q, r = params.p, params.q, params.r
    return (r + 1) / z * ((1.0 + 1.0 / q) * _inv_pow(params, r + 2) - p ** -2)


class EnvelopeReport(NamedTuple):
    k: int
    z: float
    value: float
    envelope: float
    slack: float
    envelope_name: str

    @property
    def overflow(self) -> bool:
        return math.isinf(self.envelope)

    @property
    def passed(self) -> bool:
        return self.slack >= -ENVELOPE_RTOL * max(1.0, self.envelope)


def _report(k, z, value, envelope, name):
    return EnvelopeReport(k, z, value, envelope, envelope - abs(value), name)


def check_envelopes(sol: SteinSolution, k: int) -> list[EnvelopeReport]:
    """Every applicable envelope at (z, k) for the given solution.

    The uniform sup bounds on g and Δg are reported for all k; for z > 1 and
    k >= 1 the non-uniform branch selected by k and the crude ϑ bound are
    added, both applied to Δg_z(k).
    """
    params, z = sol.params, sol.z
    g_k = sol.value(k)
    d_k = sol.delta(k)
    out = [
        _report(k, z, g_k, envelope_lemma1_g(params), "sup-g"),
        _report(k, z, d_k, envelope_lemma1_delta(params), "sup-dg"),
    ]
    if z > 1 and k >= 1:
        out.append(_report(k, z, d_k, envelope_lemma2(params, z, k), lemma2_branch(z, k)))
        out.append(_report(k, z, d_k, envelope_remark1(params, z), "dg-theta"))
    return out


# -- series inequalities used by the envelope proofs -------------------------

class AppendixCheck(NamedTuple):
    part: str
    partial_sum: float
    rhs: float
    slack: float
    passed: bool


_PART_MIN_K = {"i": 1, "ii": 1, "iii": 1, "iv": 2, "v": 2}


def appendix_partial_sums(params: NBParams, k: int, part: str, n_terms: int) -> np.ndarray:
    """Cumulative partial sums of one of the five series, ``n_terms`` terms long."""
    r, log_q = params.r, params.log_q
    if part not in _PART_MIN_K:
        raise ValueError(f"unknown part {part!r}")
    if k < _PART_MIN_K[part]:
        raise PreconditionError(f"part ({part}) needs k >= {_PART_MIN_K[part]}, got {k}")
    m = np.arange(n_terms, dtype=float)
    j = m + 1.0
    if part == "i":
        # prod_{m<j} (r+k+m)/(k+m) q^j
        log_t = np.cumsum(np.log1p(r / (k + m))) + j * log_q
    elif part == "ii":
        log_t = np.cumsum(np.log1p((r - 1.0) / (k + 1.0 + m))) + j * log_q
    elif part == "iii":
        # j from 2: prod_{m=1}^{j-1} (r+k+m)/(k+m) q^j
        mm = m + 1.0
        log_t = np.cumsum(np.log1p(r / (k + mm))) + (mm + 1.0) * log_q
    elif part == "iv":
        log_t = np.cumsum(np.log1p((r + 1.0) / (k + m))) + j * log_q
    else:
        log_t = np.cumsum(np.log1p((r - 1.0) / (k + 1.0 + m))) + j * log_q - math.log(k)
    return np.cumsum(np.exp(log_t))


def _appendix_rhs(params: NBParams, part: str) -> float:
    p, q, r = params.p, params.q, params.r
    pr, pr1, pr2 = _inv_pow(params, r), _inv_pow(params, r + 1), _inv_pow(params, r + 2)
    return {
        "i": pr1 - 1.0,
        "ii": (pr - 1.0) / (r * q) - 1.0,
        "iii": (pr1 - 1.0) / r - q,
        "iv": (pr2 - 1.0) / ((r + 1.0) * q) - 1.0,
        "v": (pr - 1.0) / (r * (r + 1.0) * q * q) - 0.5,
    }[part]


def verify_appendix_series(params: NBParams, k: int, n_terms: int = 1000,
                           rtol: float = 1e-10) -> list[AppendixCheck]:
    """Check the partial sums of the five series against their closed forms.

    Parts outside their k-range are skipped.  Slack is ``rhs - partial``;
    a part passes when slack >= -rtol * max(1, |rhs|).
    """
    out = []
    for part, k_min in _PART_MIN_K.items():
        if k < k_min:
            continue
        s = float(appendix_partial_sums(params, k, part, n_terms)[-1])
        rhs = _appendix_rhs(params, part)
        slack = rhs - s
        out.append(AppendixCheck(part, s, rhs, slack, bool(slack >= -rtol * max(1.0, abs(rhs)))))
    return out
