import logging
from typing import Optional

import numpy as np
import numpy.typing as npt
from django.conf import settings
from scipy import special, stats

from copula.models import Sample
from kernel.services import KernelService
from project.exceptions import ServiceException

from .models import EstimatorConfig, EstimatorKind, EvalGrid, PseudoSample, PseudoVariant

logger = logging.getLogger(__name__)


# exception


class EstimatorServiceException(ServiceException):
    pass


# Service


class EstimatorService:
    """Nonparametric copula estimators.

    Every estimator has the product form ``(1/n) Σ_i A_i(u) B_i(v)``, where
    ``A_i`` only depends on (u, û_i) and ``B_i`` on (v, v̂_i). Grid and
    pointwise evaluation share the same factor matrices and the same row
    reduction, so both give identical values.
    """

    _kernel_service = KernelService()

    def pseudo_obs(
        self: 'EstimatorService',
        *,
        sample: Optional[Sample] = None,
        variant: Optional[PseudoVariant] = None,
    ) -> PseudoSample:
        if not isinstance(sample, Sample):
            raise ValueError

        variant = PseudoVariant(variant or PseudoVariant.SHIFTED_E)
        n = sample.n

        if n < 2:
            raise EstimatorServiceException(
                code='insufficient_data',
                message=f'pseudo-observations need at least 2 observations, got {n}',
            )

        if not (np.all(np.isfinite(sample.x)) and np.all(np.isfinite(sample.y))):
            raise ValueError

        rank_u = stats.rankdata(sample.x, method='average')
        rank_v = stats.rankdata(sample.y, method='average')

        if np.unique(sample.x).size < n or np.unique(sample.y).size < n:
            logger.warning('sample has tied values; ties are broken by average rank')

        if variant == PseudoVariant.SHIFTED_E:
            u = rank_u / (n + 1.0)
            v = rank_v / (n + 1.0)

        else:
            u = (2.0 * rank_u - 1.0) / (2.0 * n)
            v = (2.0 * rank_v - 1.0) / (2.0 * n)

        return PseudoSample(u=u, v=v, variant=variant)

    def _validate_config(
        self: 'EstimatorService',
        *,
        config: Optional[EstimatorConfig] = None,
        ps: Optional[PseudoSample] = None,
    ) -> EstimatorConfig:
        if not isinstance(config, EstimatorConfig) or not isinstance(ps, PseudoSample):
            raise ValueError

        kind = EstimatorKind(config.kind)

        if kind == EstimatorKind.T and (
            config.variant != PseudoVariant.SHIFTED_E or ps.variant != PseudoVariant.SHIFTED_E
        ):
            raise EstimatorServiceException(
                code='invalid_variant',
                message='the transformation estimator is defined on shifted pseudo-observations',
            )

        if kind.is_kernel:
            h = config.h
            h_max = getattr(settings, 'H_MAX', 0.25)

            if h is None or not np.isfinite(h) or h <= 0.0:
                raise EstimatorServiceException(
                    code='invalid_bandwidth',
                    message=f'{kind.label} needs a positive bandwidth, got {h!r}',
                )

            if kind != EstimatorKind.T and h > h_max:
                raise EstimatorServiceException(
                    code='invalid_bandwidth',
                    message=f'{kind.label} bandwidth h={h!r} is outside (0, {h_max}]',
                )

        return config

    def factors(
        self: 'EstimatorService',
        *,
        config: Optional[EstimatorConfig] = None,
        points: Optional[npt.ArrayLike] = None,
        observations: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Matrix F with F[j, i] the i-th observation's weight at ``points[j]``."""
        if config is None or points is None or observations is None:
            raise ValueError

        kind = EstimatorKind(config.kind)
        t = np.asarray(points, dtype=float).reshape(-1)[:, None]
        obs = np.asarray(observations, dtype=float)[None, :]
        h = config.h

        if kind == EstimatorKind.E:
            return (obs <= t).astype(float)

        if kind == EstimatorKind.T:
            return self._kernel_service.K(x=(special.ndtri(t) - special.ndtri(obs)) / h)

        if kind == EstimatorKind.LL:
            return self._kernel_service.K_loc(u=t, h=h, x=(t - obs) / h)

        if kind == EstimatorKind.MR:
            return self._mirror(t=t, obs=obs, bandwidth=np.full_like(t, h))

        b = self._kernel_service.shrink(w=t, alpha=config.shrink_alpha)
        zero = b == 0.0
        bandwidth = np.where(zero, 1.0, b * h)

        if kind == EstimatorKind.LLS:
            smooth = self._kernel_service.K_loc(u=t, h=h, x=(t - obs) / bandwidth)
            return np.where(zero, (obs <= t).astype(float), smooth)

        # zero shrink at u ∈ {0, 1} leaves the mirror indicator limit
        limit = sum(
            (r <= t).astype(float) - (r <= 0.0).astype(float)
            for r in (-obs, obs, 2.0 - obs)
        )
        return np.where(zero, limit, self._mirror(t=t, obs=obs, bandwidth=bandwidth))

    def _mirror(
        self: 'EstimatorService',
        *,
        t: np.ndarray,
        obs: np.ndarray,
        bandwidth: np.ndarray,
    ) -> np.ndarray:
        K = self._kernel_service.K
        total = np.zeros(np.broadcast(t, obs).shape)

        for r in (-obs, obs, 2.0 - obs):
            total = total + (K(x=(t - r) / bandwidth) - K(x=-r / bandwidth))

        return total

    def estimate(
        self: 'EstimatorService',
        *,
        ps: Optional[PseudoSample] = None,
        config: Optional[EstimatorConfig] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
        clamp: bool = False,
    ) -> np.ndarray:
        """Estimate at the paired points (u[j], v[j]); scalars give a 0-d array."""
        config = self._validate_config(config=config, ps=ps)

        if u is None or v is None:
            raise ValueError

        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

        if np.any((u < 0.0) | (u > 1.0) | (v < 0.0) | (v > 1.0)):
            raise EstimatorServiceException(
                code='boundary_domain',
                message='estimates are defined on [0, 1]²',
            )

        a = self.factors(config=config, points=u, observations=ps.u)
        b = self.factors(config=config, points=v, observations=ps.v)
        value = (a * b).sum(-1) / ps.n

        if clamp:
            value = np.clip(value, 0.0, 1.0)

        return value.reshape(u.shape)

    def estimate_e(self: 'EstimatorService', *, ps=None, u=None, v=None) -> np.ndarray:
        return self.estimate(ps=ps, config=EstimatorConfig(kind=EstimatorKind.E), u=u, v=v)

    def estimate_ll(self: 'EstimatorService', *, ps=None, h=None, u=None, v=None) -> np.ndarray:
        config = EstimatorConfig(kind=EstimatorKind.LL, h=h, variant=self._variant(ps=ps))
        return self.estimate(ps=ps, config=config, u=u, v=v)

    def estimate_lls(self: 'EstimatorService', *, ps=None, h=None, u=None, v=None) -> np.ndarray:
        config = EstimatorConfig(kind=EstimatorKind.LLS, h=h, variant=self._variant(ps=ps))
        return self.estimate(ps=ps, config=config, u=u, v=v)

    def estimate_mr(self: 'EstimatorService', *, ps=None, h=None, u=None, v=None) -> np.ndarray:
        config = EstimatorConfig(kind=EstimatorKind.MR, h=h, variant=self._variant(ps=ps))
        return self.estimate(ps=ps, config=config, u=u, v=v)

    def estimate_mrs(self: 'EstimatorService', *, ps=None, h=None, u=None, v=None) -> np.ndarray:
        config = EstimatorConfig(kind=EstimatorKind.MRS, h=h, variant=self._variant(ps=ps))
        return self.estimate(ps=ps, config=config, u=u, v=v)

    def estimate_t(self: 'EstimatorService', *, ps=None, h=None, u=None, v=None) -> np.ndarray:
        config = EstimatorConfig(kind=EstimatorKind.T, h=h, variant=self._variant(ps=ps))
        return self.estimate(ps=ps, config=config, u=u, v=v)

    def _variant(self: 'EstimatorService', *, ps: Optional[PseudoSample] = None) -> PseudoVariant:
        if not isinstance(ps, PseudoSample):
            raise ValueError

        return ps.variant

    def evaluate_grid(
        self: 'EstimatorService',
        *,
        ps: Optional[PseudoSample] = None,
        config: Optional[EstimatorConfig] = None,
        grid: Optional[EvalGrid] = None,
        clamp: bool = False,
    ) -> np.ndarray:
        """Matrix with element [j, k] the estimate at (grid[j], grid[k])."""
        config = self._validate_config(config=config, ps=ps)

        if grid is None:
            grid = EvalGrid(m=getattr(settings, 'GRID_SIZE', 101))

        points = grid.points
        a = self.factors(config=config, points=points, observations=ps.u)
        b = self.factors(config=config, points=points, observations=ps.v)
        values = np.empty((points.size, points.size), dtype=float)

        for j in range(points.size):
            values[j] = (a[j] * b).sum(-1) / ps.n

        if clamp:
            values = np.clip(values, 0.0, 1.0)

        logger.debug('%s h=%s evaluated on a %d x %d grid', config.kind.label, config.h, grid.m, grid.m)
        return values
