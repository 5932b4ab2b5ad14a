# -*- coding: utf-8 -*-
# flake8: noqa

from .example.manage import setup

setup()

import numpy as np
import pytest

from bandwidth.services import BandwidthService
from copula.models import CopulaFamily
from copula.services import CopulaService
from harness.services import HarnessService

pytestmark = pytest.mark.slow

PARAMETRIC = [family for family in CopulaFamily if family != CopulaFamily.INDEPENDENCE]


class AcceptanceTestCase:
    @classmethod
    def setup_class(cls):
        cls.copula_service = CopulaService()
        cls.bandwidth_service = BandwidthService()
        cls.service = HarnessService()

    @pytest.mark.parametrize('family', PARAMETRIC)
    @pytest.mark.parametrize('tau', [0.25, 0.5, 0.75])
    def test_tau_brute_agrees_with_closed_forms(self, family, tau):
        spec = self.copula_service.theta_from_tau(family=family, tau=tau)
        assert abs(self.copula_service.tau_brute(spec=spec, grid_size=512) - tau) < 5e-3

    def test_variance_constant_by_simulation(self):
        spec = self.copula_service.get_spec(family=CopulaFamily.FRANK, theta=5.0)
        u, v = 0.3, 0.6
        sample = self.copula_service.sample(spec=spec, n=1_000_000, rng=np.random.default_rng(13))
        cu = float(self.copula_service.partial_u(spec=spec, u=u, v=v))
        cv = float(self.copula_service.partial_v(spec=spec, u=u, v=v))
        below_u = sample.x <= u
        below_v = sample.y <= v
        influence = (below_u & below_v) - cu * below_u - cv * below_v
        components = self.bandwidth_service.amse_components(spec=spec, u=u, v=v)
        assert abs(float(np.var(influence)) - float(components.avar_const)) < 1e-3

    def gof_rate(self, true_family, null_family, tau, reps):
        plan = self.service.build_plan(
            payload={
                'kind': 'gof-table',
                'true_family': true_family,
                'null_family': null_family,
                'tau': tau,
                'n': 150,
                'reps': reps,
                'B': 199,
                'estimators': ['e'],
                'stats': ['cm'],
                'seed': 20221115,
            }
        )
        (entry,) = self.service.summarize(rows=self.service.run(plan=plan, threads=0))
        return entry['rejection_rate']

    def test_gof_size(self):
        assert 0.02 <= self.gof_rate('frank', 'frank', 0.5, 200) <= 0.10

    @pytest.mark.parametrize('tau, power', [(0.5, 0.95), (0.25, 0.70)])
    def test_gof_power(self, tau, power):
        assert self.gof_rate('gumbel', 'clayton', tau, 100) >= power

    def compare_medians(self, true_family, tau, reps, estimators):
        plan = self.service.build_plan(
            payload={
                'kind': 'compare',
                'true_family': true_family,
                'tau': tau,
                'n': 150,
                'reps': reps,
                'estimators': estimators,
                'stats': ['cm'],
                'seed': 20221115,
            }
        )
        summary = self.service.summarize(rows=self.service.run(plan=plan, threads=0))
        return {entry['estimator']: entry['median'] for entry in summary}

    def test_shrinking_beats_empirical_copula_under_tail_dependence(self):
        medians = self.compare_medians('clayton', 0.75, 300, ['e', 'lls'])
        assert medians['lls'] < medians['e']

    def test_kernel_estimators_agree_under_weak_dependence(self):
        medians = self.compare_medians('frank', 0.25, 300, ['ll', 'lls', 'mr'])
        values = list(medians.values())
        assert max(values) <= 1.25 * min(values)
