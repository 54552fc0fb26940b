import math

import numpy as np
import pytest
from scipy import stats

from nbstein.dists import DiscreteDist, TailCertificate, convolve_all, dtv_unit_shift
from nbstein.errors import ParameterDomainError
from nbstein.nb import NBParams, nb_pmf


class TestConstruction:
    def test_point_and_bernoulli(self):
        d = DiscreteDist.point(3)
        assert d.mean() == 3 and d.variance() == 0
        b = DiscreteDist.bernoulli(0.3)
        assert b.mean() == pytest.approx(0.3)
        assert b.variance() == pytest.approx(0.21)

    def test_rejects_bad_mass(self):
        with pytest.raises(ParameterDomainError):
            DiscreteDist(np.array([0.5, 0.4]))
        with pytest.raises(ParameterDomainError):
            DiscreteDist(np.array([0.7, 0.4]))
        with pytest.raises(ParameterDomainError):
            DiscreteDist(np.array([1.2, -0.2]))
        with pytest.raises(ParameterDomainError):
            DiscreteDist.bernoulli(1.5)

    def test_read_only(self):
        d = DiscreteDist.bernoulli(0.2)
        with pytest.raises(ValueError):
            d.pmf[0] = 1.0

    @pytest.mark.parametrize("p", [0.05, 0.5, 0.9, 0.999])
    def test_geometric_tail_certificate(self, p):
        d = DiscreteDist.geometric(p)
        q = 1 - p
        K = d.support_size
        assert q ** K <= 1e-14 * 1.0001
        assert d.tail.mass == pytest.approx(q ** K, rel=1e-9)
        # brute tail moments via scipy (geom on 1.. shifted by one)
        k = np.arange(K, K + 20_000)
        pk = stats.geom.pmf(k + 1, p)
        for m, cert in zip((1, 2, 3), (d.tail.m1, d.tail.m2, d.tail.m3)):
            assert float(np.sum(k ** m * pk)) <= cert * (1 + 1e-9)

    def test_geometric_exact_moments(self):
        d = DiscreteDist.geometric(0.25)
        assert d.mean() == pytest.approx(3.0)
        assert d.variance() == pytest.approx(12.0)
        assert d.moment(1) < 3.0  # stored support only

    def test_from_ratio_tail(self):
        pmf = 0.5 ** np.arange(1, 30)
        d = DiscreteDist.from_ratio_tail(pmf, 0.5)
        assert d.tail.mass == pytest.approx(0.5 ** 29, rel=1e-12)
        with pytest.raises(ParameterDomainError):
            DiscreteDist.from_ratio_tail(pmf, 1.0)

    def test_negative_binomial(self):
        par = NBParams(7.5, 0.4)
        d = DiscreteDist.negative_binomial(par)
        k = np.arange(d.support_size)
        np.testing.assert_allclose(d.pmf, nb_pmf(par, k), rtol=1e-13)
        assert d.tail.mass < 1e-14
        assert d.mean() == pytest.approx(7.5 * 0.6 / 0.4)


class TestConvolution:
    def test_bernoulli_sum_is_poisson_binomial(self):
        ps = [0.1, 0.4, 0.7]
        d = convolve_all([DiscreteDist.bernoulli(x) for x in ps])
        # brute enumeration
        want = np.zeros(4)
        for bits in np.ndindex(2, 2, 2):
            want[sum(bits)] += math.prod(p if b else 1 - p for p, b in zip(ps, bits))
        np.testing.assert_allclose(d.pmf, want, atol=1e-15)
        assert d.tail.exact

    def test_tail_certificates_add(self):
        a, b = DiscreteDist.geometric(0.5), DiscreteDist.geometric(0.7)
        c = a.convolve(b)
        assert c.tail.mass == pytest.approx(a.tail.mass + b.tail.mass)
        assert math.isinf(c.tail.m2)
        assert c.mean() == pytest.approx(1 + 0.3 / 0.7)
        # stored-support mass deficit is covered by the certificate
        assert 1 - c.pmf.sum() <= c.tail.mass

    def test_empty(self):
        assert convolve_all([]).mean() == 0.0

    def test_nb_additivity(self):
        d = convolve_all([DiscreteDist.geometric(0.9)] * 5)
        k = np.arange(d.support_size)
        # near the cut the missing tails of the factors show up at the 1e-14 level
        np.testing.assert_allclose(d.pmf, nb_pmf(NBParams(5, 0.9), k), atol=1e-13)
        # below the single-factor cut nothing is missing: agreement is to rounding
        head = k[: DiscreteDist.geometric(0.9).support_size]
        np.testing.assert_allclose(d.pmf[head], nb_pmf(NBParams(5, 0.9), head), rtol=1e-12)


class TestShiftDistance:
    def test_point_mass(self):
        assert dtv_unit_shift(DiscreteDist.point(4)) == 1.0

    def test_bernoulli(self):
        # |1-p - 0| + |p - (1-p)| + |0 - p| halved
        p = 0.3
        assert dtv_unit_shift(DiscreteDist.bernoulli(p)) == pytest.approx(0.5 * (0.7 + 0.4 + 0.3))

    def test_geometric_equals_p(self):
        # unimodal at 0: d_TV(X, X+1) = max pmf = p
        d = DiscreteDist.geometric(0.35)
        assert dtv_unit_shift(d) == pytest.approx(0.35, abs=1e-13)

    def test_unimodal_identity(self):
        # for unimodal laws d_TV(X, X+1) equals the largest point mass
        d = DiscreteDist.negative_binomial(NBParams(9, 0.5))
        assert d.shift_dtv() == pytest.approx(d.pmf.max(), abs=1e-13)
