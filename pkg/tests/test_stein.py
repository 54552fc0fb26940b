import math

import mpmath as mp
import numpy as np
import pytest

from nbstein.errors import ParameterDomainError, PreconditionError
from nbstein.nb import NBParams
from nbstein.stein import (SteinSolution, appendix_partial_sums, check_envelopes, delta,
                           envelope_lemma1_delta, envelope_lemma1_g, envelope_lemma2,
                           envelope_remark1, lemma2_branch, solve, stein_apply,
                           verify_appendix_series)
from nbstein.suites import stein_residual


def mp_solution(r, p, z, k, dps=60, n_terms=4000):
    """g_z(k) from the defining upper series, in 60-digit arithmetic."""
    with mp.workdps(dps):
        r, p, z = mp.mpf(r), mp.mpf(p), mp.mpf(z)
        q = 1 - p
        # E (N - z)^+ by direct summation
        pmf = p ** r
        call = mp.mpf(0)
        for j in range(n_terms):
            if j > z:
                call += (j - z) * pmf
            pmf *= q * (r + j) / (j + 1)
        if k == 0:
            return 0.0
        w = mp.mpf(1) / k
        total = mp.mpf(0)
        for j in range(k, k + n_terms):
            h = max(j - z, 0) - call
            total += w * h
            w *= q * (r + j) / (j + 1)
        return float(-total)


class TestSolution:
    @pytest.mark.parametrize("r,p,z", [(2.5, 0.6, 1.7), (27, 0.32, 52.0), (8, 0.9, 0.0), (15, 0.5, 30.5)])
    def test_against_high_precision(self, r, p, z):
        sol = SteinSolution(NBParams(r, p), z)
        for k in (0, 1, 2, 5, 17, 40, 60):
            want = mp_solution(r, p, z, k)
            assert sol(k) == pytest.approx(want, rel=1e-10, abs=1e-14)

    def test_zero_at_origin_and_nonpositive(self):
        sol = SteinSolution(NBParams(4, 0.4), 3.3)
        assert sol(0) == 0.0
        assert all(sol(k) <= 0 for k in range(80))

    @pytest.mark.parametrize("r,p,z", [(1.2, 0.3, 0.0), (29.5, 0.97, 2.2), (5, 0.31, 33.0)])
    def test_stein_equation(self, r, p, z):
        sol = SteinSolution(NBParams(r, p), z)
        for k in range(61):
            assert stein_residual(sol, k) < 1e-10

    def test_apply_matches_definition(self):
        par = NBParams(3, 0.5)
        g = lambda k: float(k * k)
        assert stein_apply(par, g, 2) == pytest.approx(0.5 * 5 * 9 - 2 * 4)

    def test_module_helpers(self):
        par = NBParams(6, 0.7)
        assert solve(par, 2.0, 4) == SteinSolution(par, 2.0)(4)
        assert delta(par, 2.0, 4) == pytest.approx(solve(par, 2.0, 5) - solve(par, 2.0, 4))

    def test_standing_assumption(self):
        with pytest.raises(ParameterDomainError):
            SteinSolution(NBParams(0.9, 0.5), 1.0)

    def test_bad_inputs(self):
        sol = SteinSolution(NBParams(3, 0.5), 1.0)
        with pytest.raises(PreconditionError):
            sol(-1)
        with pytest.raises(PreconditionError):
            SteinSolution(NBParams(3, 0.5), -2.0)

    def test_far_tail_is_finite(self):
        sol = SteinSolution(NBParams(3, 0.5), 2.0)
        g, tail = sol.evaluate(5000)
        assert math.isfinite(g) and tail >= 0


class TestEnvelopes:
    def test_lemma1_values(self):
        par = NBParams(2, 0.5)
        assert envelope_lemma1_g(par) == pytest.approx(8.0)
        assert envelope_lemma1_delta(par) == pytest.approx(14.0)

    def test_lemma2_branches_partition(self):
        assert lemma2_branch(4.5, 1) == "dg-k=1"
        assert lemma2_branch(4.5, 3) == "dg-2<=k<z"
        assert lemma2_branch(4.5, 5) == "dg-k>=z"
        assert lemma2_branch(1.5, 2) == "dg-k>=z"

    def test_need_z_above_one(self):
        par = NBParams(3, 0.5)
        with pytest.raises(PreconditionError):
            envelope_remark1(par, 1.0)
        with pytest.raises(PreconditionError):
            envelope_lemma2(par, 0.5, 2)

    def test_remark1_decays_in_z(self):
        par = NBParams(5, 0.6)
        assert envelope_remark1(par, 20) == pytest.approx(envelope_remark1(par, 10) / 2)

    def test_overflow_reported(self):
        par = NBParams(1500, 0.3)
        assert math.isinf(envelope_lemma1_g(par))

    @pytest.mark.parametrize("r,p,z", [(2, 0.35, 0.4), (10, 0.5, 6.5), (25, 0.9, 3.0), (3.3, 0.97, 1.01)])
    def test_all_hold(self, r, p, z):
        sol = SteinSolution(NBParams(r, p), z)
        names = set()
        for k in range(61):
            for rep in check_envelopes(sol, k):
                assert rep.passed, rep
                names.add(rep.envelope_name)
        if z > 1:
            assert "dg-theta" in names

    def test_remark1_not_tight_but_valid(self):
        # the envelope is crude: the actual sup |Δg| is far below it
        sol = SteinSolution(NBParams(6, 0.55), 8.0)
        sup = max(abs(sol.delta(k)) for k in range(60))
        assert sup < envelope_remark1(sol.params, 8.0)


class TestSeriesInequalities:
    @pytest.mark.parametrize("part", ["i", "ii", "iii", "iv", "v"])
    def test_partial_sums_increase_to_limit(self, part):
        par = NBParams(4.5, 0.6)
        s = appendix_partial_sums(par, 3, part, 400)
        assert np.all(np.diff(s) >= 0) and s[1] > s[0]
        chk = {c.part: c for c in verify_appendix_series(par, 3)}[part]
        assert chk.passed

    def test_equality_at_k1(self):
        # parts (i) and (ii) are equalities at k = 1
        par = NBParams(3.0, 0.55)
        for c in verify_appendix_series(par, 1, n_terms=3000):
            if c.part in ("i", "ii"):
                assert c.partial_sum == pytest.approx(c.rhs, rel=1e-12)

    def test_k_range(self):
        par = NBParams(3.0, 0.55)
        assert {c.part for c in verify_appendix_series(par, 1)} == {"i", "ii", "iii"}
        with pytest.raises(PreconditionError):
            appendix_partial_sums(par, 1, "iv", 10)
        with pytest.raises(ValueError):
            appendix_partial_sums(par, 1, "vi", 10)

    def test_part_i_closed_form_rational(self):
        # sum_j prod_{m<j} (r+1+m)/(1+m) q^j = p^-(r+1) - 1 for integer r (negative binomial series)
        par = NBParams(2, 0.5)
        s = appendix_partial_sums(par, 1, "i", 200)[-1]
        assert s == pytest.approx(2 ** 3 - 1, rel=1e-13)
