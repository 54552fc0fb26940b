import math

import numpy as np
import pytest
from scipy import stats

from nbstein import bounds as B
from nbstein.dependency import DependencyModel
from nbstein.dists import DiscreteDist
from nbstein.nb import NBParams, match_mean
from nbstein.oracle import default_z_grid, exact_call_expectation, true_error_profile


class TestExactCall:
    def test_point_mass(self):
        cv = exact_call_expectation(DiscreteDist.point(5), 3)
        assert cv.value == 2.0 and cv.err == 0.0

    def test_bernoulli(self):
        assert exact_call_expectation(DiscreteDist.bernoulli(0.3), 0.5).value == pytest.approx(0.15)

    def test_geometric_half(self):
        # P(k) = 0.5^(k+1): memorylessness gives P(X>=2) (E X + 0.5) = 0.375
        k = np.arange(200)
        brute = float(np.sum((k[2:] - 1.5) * 0.5 ** (k[2:] + 1.0)))
        assert brute == pytest.approx(0.375, abs=1e-15)
        cv = exact_call_expectation(DiscreteDist.geometric(0.5), 1.5)
        lo, hi = cv.interval
        assert lo <= brute <= hi + 1e-15
        assert cv.value == pytest.approx(brute, abs=1e-12)

    def test_tail_cap_contains_truth(self):
        d = DiscreteDist.from_ratio_tail(0.3 * 0.7 ** np.arange(15), 0.7)
        k = np.arange(400)
        truth = float(np.sum(np.maximum(k - 4.5, 0) * stats.geom.pmf(k + 1, 0.3)))
        lo, hi = exact_call_expectation(d, 4.5).interval
        assert lo <= truth <= hi
        assert hi - lo > 0

    def test_grid(self):
        g = default_z_grid(DiscreteDist.bernoulli(0.5))
        assert g[0] == 0 and np.allclose(np.diff(g), 0.5)
        assert g[-1] <= 0.5 + 6 * 0.5


class TestProfile:
    def test_self_comparison(self):
        par = NBParams(3.5, 0.6)
        prof = true_error_profile(DiscreteDist.negative_binomial(par), par, np.arange(0, 12, 0.5))
        assert np.all(prof.true_error <= prof.error_slack + 1e-12)

    def test_iid_geometric_is_nb(self):
        d = DiscreteDist.geometric(0.95)
        prof = true_error_profile(DependencyModel.independent([d] * 10), match_mean(10 * d.mean(), 10))
        assert prof.params.p == pytest.approx(0.95)
        assert np.all(prof.true_error <= prof.error_slack + 1e-12)

    def test_zero_strike_mean_matched(self, rng):
        dists = [DiscreteDist.from_pmf(rng.dirichlet(np.ones(5))) for _ in range(4)]
        m = DependencyModel.independent(dists)
        par = match_mean(sum(d.mean() for d in dists), 4)
        prof = true_error_profile(m, par, [0.0])
        assert prof.true_error[0] <= 1e-12

    def test_bernoulli_dominance(self):
        dists = [DiscreteDist.bernoulli(0.2)] * 5
        rep = B.theorem2_mean(dists)
        assert rep.matched_params.r == 5
        prof = true_error_profile(DependencyModel.independent(dists), rep.matched_params, np.arange(0, 5.5, 0.5))
        assert np.all(rep.bound_value >= prof.true_error_upper)
        for z, e in zip(prof.z, prof.true_error_upper):
            if z > 1:
                assert B.theorem2_mean(dists, z=z).bound_value >= e

    def test_as_dict(self):
        par = match_mean(1.0, 5)
        prof = true_error_profile(DependencyModel.independent([DiscreteDist.bernoulli(0.2)] * 5), par, [0.5, 1.5])
        assert set(prof.as_dict()) == {0.5, 1.5}
