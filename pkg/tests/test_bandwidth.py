# -*- coding: utf-8 -*-
# flake8: noqa

from .example.manage import setup

setup()

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bandwidth.models import BandwidthMethod
from bandwidth.services import BandwidthService, BandwidthServiceException
from copula.models import CopulaFamily, Sample
from copula.services import CopulaService
from estimator.models import EstimatorConfig, EstimatorKind, PseudoSample
from estimator.services import EstimatorService


class BandwidthServiceTestCase:
    @classmethod
    def setup_class(cls):
        cls.service = BandwidthService()
        cls.copula_service = CopulaService()
        cls.estimator_service = EstimatorService()

    def setup_method(self, method):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=17))
        spec = self.copula_service.theta_from_tau(family=CopulaFamily.FRANK, tau=0.25)
        sample = self.copula_service.sample(spec=spec, n=150, rng=rng)
        self.ps = self.estimator_service.pseudo_obs(sample=sample)

    def test_independence_components(self):
        spec = self.copula_service.get_spec(family=CopulaFamily.INDEPENDENCE)
        components = self.service.amse_components(spec=spec, u=0.5, v=0.5)
        assert components.abias_factor == 0.0
        assert_allclose(components.avar_h_factor, 9.0 / 70.0, rtol=1e-14)

    @pytest.mark.parametrize(
        'family, theta, u, v',
        [
            (CopulaFamily.INDEPENDENCE, 0.0, 0.3, 0.6),
            (CopulaFamily.FRANK, 5.0, 0.3, 0.6),
            (CopulaFamily.CLAYTON, 2.0, 0.8, 0.1),
            (CopulaFamily.NORMAL, -0.4, 0.5, 0.5),
        ],
    )
    def test_variance_constant(self, family, theta, u, v):
        spec = self.copula_service.get_spec(family=family, theta=theta)
        c = float(self.copula_service.cdf(spec=spec, u=u, v=v))
        cu = float(self.copula_service.partial_u(spec=spec, u=u, v=v))
        cv = float(self.copula_service.partial_v(spec=spec, u=u, v=v))
        # the influence term takes four values, one per quadrant around (u, v)
        probabilities = np.array([c, u - c, v - c, 1.0 - u - v + c])
        values = np.array([1.0 - cu - cv, -cu, -cv, 0.0])
        mean = probabilities @ values
        expected = probabilities @ (values - mean) ** 2
        components = self.service.amse_components(spec=spec, u=u, v=v)
        assert_allclose(components.avar_const, expected, rtol=0, atol=1e-12)

    def test_minimizer(self):
        assert_allclose(self.service.minimizer(c1=4.0, c2=1.0, n=1000), 0.1, rtol=1e-12)
        ratio = self.service.minimizer(c1=4.0, c2=1.0, n=1000) / self.service.minimizer(c1=4.0, c2=1.0, n=2000)
        assert_allclose(ratio, 2.0 ** (1.0 / 3.0), rtol=1e-12)

    def test_minimizer_rejects_flat_bias(self):
        with pytest.raises(ValueError):
            self.service.minimizer(c1=1.0, c2=0.0, n=100)

    def test_reference_rule_matches_grid_search(self):
        selection = self.service.select_h_reference(ps=self.ps)
        assert selection.method == BandwidthMethod.FRANK_REFERENCE
        assert not selection.fallback
        assert 0.0 < selection.h <= 0.25
        spec = self.copula_service.get_spec(family=CopulaFamily.FRANK, theta=selection.reference_theta)
        components = self.service.amse_components(spec=spec, u=self.ps.u, v=self.ps.v)
        grid = np.arange(1, 251) / 1000.0
        amse = [float(np.mean(components.amse(h=h, n=self.ps.n))) for h in grid]
        best = grid[int(np.argmin(amse))]
        assert abs(best - selection.h) <= 0.05 * selection.h

    def test_reference_rule_scaling(self):
        small = self.service.select_h_reference(ps=self.ps, n=150)
        large = self.service.select_h_reference(ps=self.ps, n=1200)
        assert_allclose(small.h_reference / large.h_reference, 2.0, rtol=1e-12)

    def test_reference_rule_is_deterministic(self):
        assert self.service.select_h_reference(ps=self.ps) == self.service.select_h_reference(ps=self.ps)

    def test_shrinking_damps_corner_bias(self):
        spec = self.copula_service.get_spec(family=CopulaFamily.CLAYTON, theta=6.0)
        t = np.array([1e-2, 1e-3, 1e-4])
        plain = self.service.amse_components(spec=spec, u=t, v=t).abias_factor
        shrunk = self.service.amse_components(spec=spec, u=t, v=t, shrink_on=True).abias_factor
        assert np.all(np.isfinite(shrunk))
        assert np.all(np.diff(np.abs(plain)) > 0.0)
        assert_allclose(shrunk / plain, t, rtol=1e-10)

    def test_transform_rule_halves_the_reference(self):
        selection = self.service.select_h_transform(ps=self.ps)
        assert selection.method == BandwidthMethod.NORMAL_REFERENCE_T
        assert selection.h_reference / selection.h == 2.0
        tau_hat = self.copula_service.kendall_tau_empirical(sample=Sample(x=self.ps.u, y=self.ps.v))
        c1, c2 = self.service.transform_constants(rho=math.sin(math.pi * tau_hat / 2.0))
        assert_allclose(selection.h, self.service.minimizer(c1=c1, c2=c2, n=self.ps.n) / 2.0, rtol=1e-14)

    def test_transform_rule_scaling(self):
        small = self.service.select_h_transform(ps=self.ps, n=150)
        large = self.service.select_h_transform(ps=self.ps, n=1200)
        assert_allclose(small.h / large.h, 2.0, rtol=1e-12)

    def test_transform_constants_at_independence(self):
        c1, c2 = self.service.transform_constants(rho=0.0)
        assert c1 > 0.0
        assert c2 > 0.0

    def test_transform_rule_near_singular(self):
        t = np.arange(1, 21) / 21.0
        ps = PseudoSample(u=t, v=t)

        with pytest.raises(BandwidthServiceException) as e:
            self.service.select_h_transform(ps=ps)

        assert e.value.code == 'near_singular_reference'

    def test_fallback_without_frank_reference(self):
        # 33 of 66 pairs discordant, so Kendall's tau is exactly 0
        y = np.array([7, 8, 9, 1, 10, 11, 12, 2, 3, 4, 5, 6], dtype=float)
        sample = Sample(x=np.arange(1.0, 13.0), y=y)
        ps = self.estimator_service.pseudo_obs(sample=sample)
        selection = self.service.select_h_reference(ps=ps)
        assert selection.fallback
        assert selection.h == 0.25
        assert_allclose(selection.h_reference, 12.0 ** (-1.0 / 3.0), rtol=1e-14)

    def test_insufficient_data(self):
        ps = PseudoSample(u=[0.2, 0.4, 0.6, 0.8], v=[0.4, 0.2, 0.8, 0.6])

        with pytest.raises(BandwidthServiceException) as e:
            self.service.select_h_reference(ps=ps)

        assert e.value.code == 'insufficient_data'

    def test_select_h_dispatch(self):
        assert self.service.select_h(ps=self.ps, kind=EstimatorKind.T).method == BandwidthMethod.NORMAL_REFERENCE_T
        assert self.service.select_h(ps=self.ps, kind=EstimatorKind.MRS).method == BandwidthMethod.FRANK_REFERENCE
        shrunk = self.service.select_h(ps=self.ps, kind=EstimatorKind.LLS)
        plain = self.service.select_h(ps=self.ps, kind=EstimatorKind.LL)
        assert shrunk.c2 != plain.c2

        with pytest.raises(ValueError):
            self.service.select_h(ps=self.ps, kind=EstimatorKind.E)

    def test_configure(self):
        config = self.service.configure(ps=self.ps, config=EstimatorConfig(kind=EstimatorKind.MR))
        assert config.h == self.service.select_h(ps=self.ps, kind=EstimatorKind.MR).h
        empirical = EstimatorConfig(kind=EstimatorKind.E)
        assert self.service.configure(ps=self.ps, config=empirical) is empirical

    def test_fixed(self):
        assert self.service.fixed(h=0.1).method == BandwidthMethod.FIXED_H

        with pytest.raises(BandwidthServiceException) as e:
            self.service.fixed(h=0.3)

        assert e.value.code == 'invalid_bandwidth'

    def test_fixed_transform_bandwidth_is_uncapped(self):
        assert self.service.fixed(h=0.6, kind=EstimatorKind.T).h == 0.6

        for h in (0.0, -0.1, float('inf')):
            with pytest.raises(BandwidthServiceException) as e:
                self.service.fixed(h=h, kind=EstimatorKind.T)

            assert e.value.code == 'invalid_bandwidth'

        with pytest.raises(BandwidthServiceException):
            self.service.fixed(h=0.6, kind=EstimatorKind.LL)
