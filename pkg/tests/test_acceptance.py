"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` (the lines are also printed
without ``-s``) or directly: ``python3 tests/test_acceptance.py``.
"""
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import TABLE1_Q, TABLE2_GEOMETRIC  # noqa: E402

from nbstein import bounds as B  # noqa: E402
from nbstein.cdo import compare_bounds, oracle_tranche_loss, tranche_expected_loss  # noqa: E402
from nbstein.config import load_config, shipped_config  # noqa: E402
from nbstein.dependency import DependencyModel  # noqa: E402
from nbstein.dists import DiscreteDist, convolve_all  # noqa: E402
from nbstein.nb import NBParams, SeriesControl, nb_pmf  # noqa: E402
from nbstein.oracle import true_error_profile  # noqa: E402
from nbstein.suites import run_suite  # noqa: E402


def _report(num, title, ok, detail, elapsed, limit=None):
    tag = "PASS" if ok else "FAIL"
    lim = f" (limit {limit:g} s)" if limit else ""
    return f"[{tag}] criterion {num}: {title} | {detail} | {elapsed:.2f} s{lim}"


# each criterion returns (ok, detail, runtime limit or None)

def crit1():
    worst, ok = 0.0, True
    for n, printed in TABLE2_GEOMETRIC.items():
        qn = TABLE1_Q[:n]
        got = (B.remark_geometric_poisson(qn), B.remark_geometric_nb(qn, "mean"),
               B.remark_geometric_nb(qn, "meanvar"))
        if n == 10:
            ok &= math.isclose(got[0], printed[0], rel_tol=2e-4)
            ok &= got[1] <= 1e-15 and got[2] <= 1e-15
            worst = max(worst, abs(got[0] - printed[0]) / printed[0])
            continue
        for g, p in zip(got, printed):
            rel = abs(g - p) / p
            worst = max(worst, rel)
            ok &= rel <= 2e-4
    return ok, f"worst rel dev {worst:.2e} (tol 2e-4), n=10 NB columns <= 1e-15", 1.0


def crit2():
    res = run_suite("residual", seed=1, budget=1000, tol=1e-9)
    return res.passed, f"{res.n_checks} checks, worst residual {res.worst:.2e} (tol 1e-9)", 30.0


def crit3():
    res = run_suite("envelopes", seed=1, budget=1000)
    return res.passed, f"{res.n_checks} checks, {len(res.failures)} violations, worst rel slack {res.worst:.2e}", None


def crit4():
    res = run_suite("appendix", seed=1, budget=1000, tol=1e-10)
    return res.passed, f"{res.n_checks} checks, worst rel slack {res.worst:.2e} (tol 1e-10)", None


def crit5():
    res = run_suite("dominance", seed=1, budget=50)
    return res.passed, f"{res.n_checks} (portfolio, z, variant) checks, max true/bound {res.worst:.3f}", 120.0


def crit6():
    worst = 0.0
    for n in (2, 5, 10):
        for p in (0.5, 0.9, 0.95):
            s = convolve_all([DiscreteDist.geometric(p)] * n)
            ref = np.array([nb_pmf(NBParams(n, p), k) for k in range(s.support_size)])
            worst = max(worst, float(np.max(np.abs(s.pmf - ref))))
    return worst <= 1e-12, f"max pointwise |diff| {worst:.2e} (tol 1e-12)", None


def crit7():
    res = run_suite("identities", seed=1, budget=100, tol=1e-10)
    return res.passed, f"{res.n_checks} identities, worst rel {res.worst:.2e} (tol 1e-10)", None


def crit8():
    # bound = prefactor * structural; the structural term is a rounding residual
    # (~1 ulp), so the absolute 1e-15 cap is applied to the bound where the
    # prefactor is O(1) and to the structural term everywhere
    ok, parts = True, []
    for n, q in ((10, 0.05), (5, 0.1), (8, 0.3), (20, 0.2)):
        dists = B.geometric_dists([q] * n)
        rep = B.theorem2_mean(dists, r=n)
        prof = true_error_profile(DependencyModel.independent(dists), rep.matched_params,
                                  ctl=SeriesControl(rel_tol=1e-15, max_terms=100_000))
        ok &= rep.structural_term <= 1e-15
        if rep.prefactor <= 10:
            ok &= rep.bound_value <= 1e-15
        rounding = 1e-14 * np.maximum(1.0, prof.call_values)   # summation round-off
        ok &= bool(np.all(prof.true_error <= prof.error_slack + rounding))
        parts.append(f"n={n},q={q}: bound {rep.bound_value:.1e} (U* {rep.structural_term:.1e})")
    return ok, "; ".join(parts) + "; true error within truncation slack + 1e-14 rel round-off", None


def crit9():
    ok, lines = True, []
    for name in ("cdo_independent_10", "cdo_chain_12"):
        pf = load_config(shipped_config(name)).portfolio()
        for t in pf.tranches:
            rep = tranche_expected_loss(pf, t)
            oc, ot = oracle_tranche_loss(pf, t)
            ok &= rep.call_interval[0] <= oc <= rep.call_interval[1]
            ok &= rep.interval[0] <= ot <= rep.interval[1]
        lines.append(f"{name} {len(pf.tranches)} tranches contained")
    for name in ("cdo_large_75_independent", "cdo_large_75_chain"):
        pf = load_config(shipped_config(name)).portfolio()
        rows = compare_bounds(pf)
        ok &= all(r["nb_better"] for r in rows)
        lines.append(name + " " + ", ".join(f"{r['setup']} NB {r['nb_bound']:.3g} < Poisson {r['poisson_bound']:.3g}"
                                            for r in rows))
    return ok, "; ".join(lines), None


CRITERIA = [
    (1, "geometric comparison table", crit1),
    (2, "Stein residual suite", crit2),
    (3, "Envelope suite", crit3),
    (4, "series inequalities suite", crit4),
    (5, "Dominance (oracle) suite", crit5),
    (6, "NB additivity oracle", crit6),
    (7, "Specialization identities", crit7),
    (8, "Zero-error fixed point", crit8),
    (9, "CDO containment and NB-vs-Poisson ordering", crit9),
]


def evaluate(fn):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ok, detail, limit = fn()
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed > limit:
        ok = False
        detail += " [runtime exceeded]"
    return bool(ok), detail, elapsed, limit


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, capsys):
    ok, detail, elapsed, limit = evaluate(fn)
    with capsys.disabled():
        print("\n" + _report(num, title, ok, detail, elapsed, limit))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, title, fn in CRITERIA:
        ok, detail, elapsed, limit = evaluate(fn)
        failed += not ok
        print(_report(num, title, ok, detail, elapsed, limit))
    sys.exit(1 if failed else 0)
