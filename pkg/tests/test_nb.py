import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from nbstein.errors import InfeasibleMatchingError, ParameterDomainError, SeriesConvergenceError
from nbstein.nb import (NBParams, SeriesControl, call_payoff, match_mean, match_mean_var,
                        nb_call_expectation, nb_logpmf, nb_mean_var, nb_pmf,
                        verify_call_expectation_bounds)


def exact_pmf(r: int, p: Fraction, k: int) -> Fraction:
    # C(r+k-1, k) p^r q^k in rational arithmetic
    return math.comb(r + k - 1, k) * p ** r * (1 - p) ** k


class TestParams:
    def test_q_derived(self):
        par = NBParams(3, 0.25)
        assert par.q == 0.75
        assert isinstance(par.r, float)

    @pytest.mark.parametrize("r,p", [(0, 0.5), (-1, 0.5), (2, 0.0), (2, 1.0), (math.inf, 0.5), (2, -0.1)])
    def test_domain(self, r, p):
        with pytest.raises(ParameterDomainError):
            NBParams(r, p)

    def test_standing_assumption(self):
        with pytest.raises(ParameterDomainError):
            NBParams(0.5, 0.5).require_standing()
        NBParams(1.01, 0.5).require_standing()

    def test_frozen(self):
        par = NBParams(2, 0.5)
        with pytest.raises(Exception):
            par.r = 3


class TestPmf:
    @pytest.mark.parametrize("r,p", [(1, Fraction(1, 2)), (3, Fraction(1, 4)), (7, Fraction(9, 10)), (25, Fraction(3, 10))])
    def test_against_rationals(self, r, p, quiet):
        par = NBParams(r, float(p))
        k = np.arange(0, 120)
        got = nb_pmf(par, k)
        want = np.array([float(exact_pmf(r, p, int(j))) for j in k])
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-300)

    def test_against_scipy_noninteger_r(self):
        par = NBParams(4.37, 0.62)
        k = np.arange(200)
        np.testing.assert_allclose(nb_logpmf(par, k), stats.nbinom.logpmf(k, 4.37, 0.62), rtol=1e-12)

    def test_extreme_tail_no_underflow_in_log(self):
        par = NBParams(2.0, 0.99)
        assert np.isfinite(nb_logpmf(par, 5000))
        assert nb_pmf(par, 5000) == 0.0

    def test_scalar_return(self):
        assert isinstance(nb_pmf(NBParams(2, 0.5), 3), float)

    def test_rejects_non_integer_k(self):
        with pytest.raises(ParameterDomainError):
            nb_logpmf(NBParams(2, 0.5), 1.5)
        with pytest.raises(ParameterDomainError):
            nb_logpmf(NBParams(2, 0.5), -1)

    def test_small_r_warns(self):
        with pytest.warns(RuntimeWarning):
            nb_pmf(NBParams(0.7, 0.5), 2)

    def test_mean_var(self):
        m, v = nb_mean_var(NBParams(3, 0.4))
        assert m == pytest.approx(4.5)
        assert v == pytest.approx(11.25)


class TestCallExpectation:
    def test_payoff(self):
        np.testing.assert_array_equal(call_payoff([0, 1, 2, 5], 1.5), [0, 0, 0.5, 3.5])

    @pytest.mark.parametrize("r,p,z", [(2, 0.5, 0.0), (5, 0.3, 7.25), (12.5, 0.8, 1.5), (27, 0.32, 52.0), (1.5, 0.95, 0.1)])
    def test_against_brute_force(self, r, p, z):
        k = np.arange(0, 200_000)
        brute = float(np.sum(np.maximum(k - z, 0) * stats.nbinom.pmf(k, r, p)))
        res = nb_call_expectation(NBParams(r, p), z)
        assert res.value == pytest.approx(brute, rel=1e-11)
        assert res.tail <= 1e-12 * res.value

    def test_z_zero_is_mean(self):
        par = NBParams(6, 0.45)
        assert nb_call_expectation(par, 0.0).value == pytest.approx(nb_mean_var(par)[0], rel=1e-12)

    def test_far_strike_tiny(self):
        res = nb_call_expectation(NBParams(3, 0.9), 200)
        assert 0 < res.value < 1e-100

    def test_convex_nonincreasing(self):
        par = NBParams(4, 0.35)
        z = np.linspace(0, 30, 121)
        c = np.array([nb_call_expectation(par, t).value for t in z])
        assert np.all(np.diff(c) <= 1e-14)
        # series truncated at 1e-12 relative, so kinks below that are noise
        assert np.all(np.diff(c, 2) >= -1e-10)

    def test_term_cap(self):
        with pytest.raises(SeriesConvergenceError) as ei:
            nb_call_expectation(NBParams(30, 0.01), 0.5, SeriesControl(max_terms=10))
        assert ei.value.n_terms == 10

    def test_bad_strike(self):
        with pytest.raises(ParameterDomainError):
            nb_call_expectation(NBParams(3, 0.5), -1)

    @pytest.mark.parametrize("r,p,z", [(2, 0.5, 0.5), (3, 0.4, 2), (10, 0.9, 5), (25, 0.35, 100)])
    def test_expectation_bounds(self, r, p, z):
        chk = verify_call_expectation_bounds(NBParams(r, p), z)
        assert chk.passed
        assert chk.slack_mean >= 0
        if z > 1:
            assert chk.slack_nonuniform is not None


class TestMatching:
    def test_mean(self):
        par = match_mean(2.0, 10)
        assert par.p == pytest.approx(10 / 12)
        assert nb_mean_var(par)[0] == pytest.approx(2.0)

    def test_mean_requires_r_above_one(self):
        with pytest.raises(ParameterDomainError):
            match_mean(1.0, 1.0)

    def test_mean_var_roundtrip(self):
        par = match_mean_var(3.0, 7.5)
        m, v = nb_mean_var(par)
        assert (m, v) == (pytest.approx(3.0), pytest.approx(7.5))

    @pytest.mark.parametrize("mu,var", [(2.0, 2.0), (2.0, 1.5)])
    def test_infeasible(self, mu, var):
        with pytest.raises(InfeasibleMatchingError, match="Var"):
            match_mean_var(mu, var)

    def test_small_r_warns(self):
        with pytest.warns(RuntimeWarning):
            par = match_mean_var(1.0, 3.0)
        assert par.r == pytest.approx(0.5)
