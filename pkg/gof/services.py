import logging
from typing import List, Optional, Sequence, Tuple

import joblib
import jsonschema
import numpy as np
from django.conf import settings

from bandwidth.services import BandwidthService
from copula.models import CopulaFamily, CopulaSpec, Sample
from copula.services import CopulaService
from estimator.models import EstimatorConfig, EstimatorKind, EvalGrid, PseudoSample
from estimator.services import EstimatorService
from project.exceptions import ServiceException

from .models import GOF_REPORT_SCHEMA, GofReport, GofStatus, StatisticKind

logger = logging.getLogger(__name__)


# exception


class GofServiceException(ServiceException):
    pass


# Service


class GofService:
    """Distance statistics between a copula estimate and a fitted parametric
    null, calibrated by a parametric bootstrap."""

    _bandwidth_service = BandwidthService()
    _copula_service = CopulaService()
    _estimator_service = EstimatorService()

    def _grid(self: 'GofService', *, grid: Optional[EvalGrid] = None) -> EvalGrid:
        if grid is None:
            return EvalGrid(m=getattr(settings, 'GRID_SIZE', 101))

        if not isinstance(grid, EvalGrid):
            raise ValueError

        return grid

    def ks_distance(self: 'GofService', *, estimate=None, reference=None) -> float:
        if estimate is None or reference is None:
            raise ValueError

        return float(np.max(np.abs(np.asarray(estimate) - np.asarray(reference))))

    def cm_distance(self: 'GofService', *, estimate=None, reference=None) -> float:
        if estimate is None or reference is None:
            raise ValueError

        return float(np.sum((np.asarray(estimate) - np.asarray(reference)) ** 2))

    def q_distance(self: 'GofService', *, estimate=None, reference=None) -> float:
        # equal-weight double sum times the cell area 1/m²
        if estimate is None or reference is None:
            raise ValueError

        return float(np.mean((np.asarray(estimate) - np.asarray(reference)) ** 2))

    def stat_ks(
        self: 'GofService',
        *,
        est: Optional[EstimatorConfig] = None,
        ps: Optional[PseudoSample] = None,
        null_spec: Optional[CopulaSpec] = None,
        grid: Optional[EvalGrid] = None,
    ) -> float:
        grid = self._grid(grid=grid)
        estimate = self._estimator_service.evaluate_grid(ps=ps, config=est, grid=grid)
        u, v = grid.mesh
        reference = self._copula_service.cdf(spec=null_spec, u=u, v=v)
        return self.ks_distance(estimate=estimate, reference=reference)

    def stat_cm(
        self: 'GofService',
        *,
        est: Optional[EstimatorConfig] = None,
        ps: Optional[PseudoSample] = None,
        null_spec: Optional[CopulaSpec] = None,
    ) -> float:
        if not isinstance(ps, PseudoSample):
            raise ValueError

        estimate = self._estimator_service.estimate(ps=ps, config=est, u=ps.u, v=ps.v)
        reference = self._copula_service.cdf(spec=null_spec, u=ps.u, v=ps.v)
        return self.cm_distance(estimate=estimate, reference=reference)

    def stat_q(
        self: 'GofService',
        *,
        est: Optional[EstimatorConfig] = None,
        ps: Optional[PseudoSample] = None,
        null_spec: Optional[CopulaSpec] = None,
        grid: Optional[EvalGrid] = None,
    ) -> float:
        grid = self._grid(grid=grid)
        estimate = self._estimator_service.evaluate_grid(ps=ps, config=est, grid=grid)
        u, v = grid.mesh
        reference = self._copula_service.cdf(spec=null_spec, u=u, v=v)
        return self.q_distance(estimate=estimate, reference=reference)

    def statistic(
        self: 'GofService',
        *,
        stat_kind: Optional[StatisticKind] = None,
        est: Optional[EstimatorConfig] = None,
        ps: Optional[PseudoSample] = None,
        null_spec: Optional[CopulaSpec] = None,
        grid: Optional[EvalGrid] = None,
    ) -> float:
        if stat_kind is None:
            raise ValueError

        stat_kind = StatisticKind(stat_kind)

        if stat_kind == StatisticKind.KS:
            return self.stat_ks(est=est, ps=ps, null_spec=null_spec, grid=grid)

        if stat_kind == StatisticKind.CM:
            return self.stat_cm(est=est, ps=ps, null_spec=null_spec)

        return self.stat_q(est=est, ps=ps, null_spec=null_spec, grid=grid)

    def p_value(
        self: 'GofService',
        *,
        observed: Optional[float] = None,
        bootstrap_values: Optional[Sequence[float]] = None,
    ) -> float:
        """(1 + #{T*_b ≥ T}) / (B + 1)."""
        if observed is None or bootstrap_values is None or len(bootstrap_values) == 0:
            raise ValueError

        values = np.asarray(bootstrap_values, dtype=float)
        return float((1 + np.count_nonzero(values >= observed)) / (values.size + 1))

    def fit_and_measure(
        self: 'GofService',
        *,
        sample: Optional[Sample] = None,
        family: Optional[CopulaFamily] = None,
        est: Optional[EstimatorConfig] = None,
        stat_kind: Optional[StatisticKind] = None,
        grid: Optional[EvalGrid] = None,
    ) -> Tuple[float, CopulaSpec, EstimatorConfig]:
        """Fit the null by tau inversion, pick the bandwidth and compute the
        statistic. A configured ``est.h`` is kept fixed."""
        if sample is None or family is None or est is None:
            raise ValueError

        ps = self._estimator_service.pseudo_obs(sample=sample, variant=est.variant)
        tau_hat = self._copula_service.kendall_tau_empirical(sample=sample)
        null_spec = self._copula_service.theta_from_tau(family=family, tau=tau_hat)

        if est.h is None:
            est = self._bandwidth_service.configure(ps=ps, config=est)

        value = self.statistic(stat_kind=stat_kind, est=est, ps=ps, null_spec=null_spec, grid=grid)
        return value, null_spec, est

    def bootstrap_gof(
        self: 'GofService',
        *,
        sample: Optional[Sample] = None,
        family: Optional[CopulaFamily] = None,
        est: Optional[EstimatorConfig] = None,
        stat_kind: Optional[StatisticKind] = None,
        B: Optional[int] = None,
        seed: Optional[int] = None,
        grid: Optional[EvalGrid] = None,
        threads: Optional[int] = None,
    ) -> GofReport:
        """Parametric bootstrap test of H0: the copula of ``sample`` is in ``family``.

        Replicate b draws from its own stream ``SeedSequence(seed, spawn_key=(b,))``,
        so the report does not depend on ``threads``.
        """
        if not isinstance(sample, Sample) or family is None or stat_kind is None:
            raise ValueError

        if B is None:
            B = getattr(settings, 'DEFAULT_B', 199)

        if seed is None or int(seed) < 0 or int(B) < 1:
            raise ValueError

        family = CopulaFamily(family)
        est = est or EstimatorConfig(kind=EstimatorKind.E)
        stat_kind = StatisticKind(stat_kind)
        grid = self._grid(grid=grid)
        report = GofReport(
            statistic_kind=stat_kind,
            estimator_kind=EstimatorKind(est.kind).value,
            null_family=family.value,
            B=int(B),
            seed=int(seed),
            n=sample.n,
        )

        try:
            observed, null_spec, fitted = self.fit_and_measure(
                sample=sample,
                family=family,
                est=est,
                stat_kind=stat_kind,
                grid=grid,
            )
            report.observed = observed
            report.theta_hat = null_spec.theta
            report.h = fitted.h
            results = joblib.Parallel(n_jobs=resolve_jobs(threads))(
                joblib.delayed(_bootstrap_replicate)(
                    seed=int(seed),
                    b=b,
                    null_spec=null_spec,
                    n=sample.n,
                    est=est,
                    stat_kind=stat_kind,
                    grid=grid,
                )
                for b in range(int(B))
            )

        except ServiceException as e:
            logger.warning('goodness-of-fit test failed: %s (%s)', e.message, e.code)
            report.status = GofStatus.FAILED
            report.error_code = e.code
            report.error_message = e.message
            return report

        report.bootstrap_values = [value for value, _ in results]
        report.bootstrap_thetas = [theta for _, theta in results]
        report.p_value = self.p_value(observed=observed, bootstrap_values=report.bootstrap_values)
        logger.debug(
            '%s %s vs %s: observed=%.6g p=%.4f',
            stat_kind.label,
            report.estimator_kind,
            family.value,
            observed,
            report.p_value,
        )
        return report

    def validate_report(self: 'GofService', *, report: Optional[GofReport] = None) -> dict:
        if not isinstance(report, GofReport):
            raise ValueError

        payload = report.to_dict()
        jsonschema.validate(instance=payload, schema=GOF_REPORT_SCHEMA)
        return payload


def resolve_jobs(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = getattr(settings, 'THREADS', 0)

    return joblib.cpu_count() if int(threads) <= 0 else int(threads)


def _bootstrap_replicate(
    *,
    seed: int,
    b: int,
    null_spec: CopulaSpec,
    n: int,
    est: EstimatorConfig,
    stat_kind: StatisticKind,
    grid: EvalGrid,
) -> Tuple[float, float]:
    service = GofService()
    retries = getattr(settings, 'REPLICATE_RETRIES', 10)
    errors: List[str] = []

    for attempt in range(retries + 1):
        spawn_key = (b,) if attempt == 0 else (b, attempt)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn_key))
        sample = service._copula_service.sample(spec=null_spec, n=n, rng=rng)

        try:
            value, fitted, _ = service.fit_and_measure(
                sample=sample,
                family=null_spec.family,
                est=est,
                stat_kind=stat_kind,
                grid=grid,
            )

        except ServiceException as e:
            logger.warning('bootstrap replicate %d redrawn: %s', b, e.message)
            errors.append(e.code)
            continue

        return value, fitted.theta

    raise GofServiceException(
        code=errors[-1] if errors else 'inversion_range',
        message=f'bootstrap replicate {b} failed after {retries + 1} draws',
    )
