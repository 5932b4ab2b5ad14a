import logging
import math
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from django.conf import settings
from scipy import stats

from project.exceptions import ServiceException

from .families import BaseFamily, get_family
from .models import CopulaFamily, CopulaSpec, Sample

logger = logging.getLogger(__name__)


# exception


class CopulaServiceException(ServiceException):
    pass


# Service


class CopulaService:
    def _get_family(self: 'CopulaService', *, spec: Optional[CopulaSpec] = None) -> BaseFamily:
        if not isinstance(spec, CopulaSpec):
            raise ValueError

        return get_family(spec.family)

    def _validate_points(
        self: 'CopulaService',
        *,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        if u is None or v is None:
            raise ValueError

        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

        if np.any(np.isnan(u)) or np.any(np.isnan(v)):
            raise ValueError

        if np.any((u < 0.0) | (u > 1.0) | (v < 0.0) | (v > 1.0)):
            raise CopulaServiceException(
                code='boundary_domain',
                message='copula arguments must lie in [0, 1]',
            )

        return u, v

    def get_spec(
        self: 'CopulaService',
        *,
        family: Optional[CopulaFamily] = None,
        theta: Optional[float] = None,
    ) -> CopulaSpec:
        if family is None:
            raise ValueError

        try:
            family = CopulaFamily(family)

        except ValueError:
            raise CopulaServiceException(
                code='parameter_domain',
                message=f'unknown copula family {family!r}',
            )

        if theta is None:
            theta = 0.0

        theta = float(theta)

        if not get_family(family).is_valid(theta):
            raise CopulaServiceException(
                code='parameter_domain',
                message=f'{family.label} copula is not defined at theta={theta!r}',
            )

        return CopulaSpec(family=family, theta=theta)

    def cdf(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> np.ndarray:
        family = self._get_family(spec=spec)
        u, v = self._validate_points(u=u, v=v)
        interior = (u > 0.0) & (u < 1.0) & (v > 0.0) & (v < 1.0)
        # uniform margins and a grounded copula fix every edge value exactly
        value = np.where(u == 1.0, v, np.where(v == 1.0, u, 0.0))

        if np.any(interior):
            inner = family.cdf(spec.theta, u[interior], v[interior])
            value[interior] = np.clip(
                inner,
                np.maximum(u[interior] + v[interior] - 1.0, 0.0),
                np.minimum(u[interior], v[interior]),
            )

        return value

    def _clamped(
        self: 'CopulaService',
        *,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        u, v = self._validate_points(u=u, v=v)
        eps = getattr(settings, 'BOUNDARY_EPS', 1e-12)
        return np.clip(u, eps, 1.0 - eps), np.clip(v, eps, 1.0 - eps)

    def partial_u(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> np.ndarray:
        family = self._get_family(spec=spec)
        u, v = self._clamped(u=u, v=v)
        return np.clip(family.partial_u(spec.theta, u, v), 0.0, 1.0)

    def partial_v(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> np.ndarray:
        family = self._get_family(spec=spec)
        u, v = self._clamped(u=u, v=v)
        return np.clip(family.partial_v(spec.theta, u, v), 0.0, 1.0)

    def second_partials(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        family = self._get_family(spec=spec)
        u, v = self._validate_points(u=u, v=v)

        if np.any((u <= 0.0) | (u >= 1.0) | (v <= 0.0) | (v >= 1.0)):
            raise CopulaServiceException(
                code='boundary_domain',
                message='second partial derivatives are only defined on (0, 1)²',
            )

        return family.second_partials(spec.theta, u, v)

    def sample(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        n: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Sample:
        family = self._get_family(spec=spec)

        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError

        if not isinstance(rng, np.random.Generator):
            raise ValueError

        u, v = family.sample(spec.theta, int(n), rng)
        return Sample(x=u, y=v)

    def tau_from_theta(self: 'CopulaService', *, spec: Optional[CopulaSpec] = None) -> float:
        family = self._get_family(spec=spec)
        return float(family.tau(spec.theta))

    def theta_from_tau(
        self: 'CopulaService',
        *,
        family: Optional[CopulaFamily] = None,
        tau: Optional[float] = None,
    ) -> CopulaSpec:
        if family is None or tau is None:
            raise ValueError

        family = CopulaFamily(family)
        tau = float(tau)
        implementation = get_family(family)
        lo, hi = implementation.tau_bounds

        if family == CopulaFamily.INDEPENDENCE:
            attainable = tau == 0.0

        else:
            attainable = lo < tau < hi and tau not in implementation.tau_excluded

        if not attainable or not math.isfinite(tau):
            raise CopulaServiceException(
                code='inversion_range',
                message=f'tau={tau!r} is not attainable by the {family.label} copula',
            )

        try:
            theta = implementation.theta(tau)

        except (ValueError, OverflowError, ZeroDivisionError, RuntimeError) as e:
            raise CopulaServiceException(
                code='inversion_range',
                message=f'tau={tau!r} could not be inverted for the {family.label} copula: {e}',
            )

        logger.debug('%s: tau=%.6g -> theta=%.12g', family.label, tau, theta)
        return self.get_spec(family=family, theta=theta)

    def tau_brute(
        self: 'CopulaService',
        *,
        spec: Optional[CopulaSpec] = None,
        grid_size: int = 512,
    ) -> float:
        """Kendall's tau as 4∬C dC − 1 straight from the cdf.

        Cell masses come from finite differences of C on a regular grid and
        the integrand is the mean of C at the four cell corners.
        """
        self._get_family(spec=spec)

        if grid_size < 64:
            raise ValueError

        t = np.linspace(0.0, 1.0, grid_size + 1)
        u, v = np.meshgrid(t, t, indexing='ij')
        c = self.cdf(spec=spec, u=u, v=v)
        mass = c[1:, 1:] - c[:-1, 1:] - c[1:, :-1] + c[:-1, :-1]
        corners = (c[1:, 1:] + c[:-1, 1:] + c[1:, :-1] + c[:-1, :-1]) / 4.0
        return float(4.0 * np.sum(mass * corners) - 1.0)

    def kendall_tau_empirical(self: 'CopulaService', *, sample: Optional[Sample] = None) -> float:
        """(concordant − discordant) / (n(n − 1)/2); tied pairs count as neither."""
        if not isinstance(sample, Sample):
            raise ValueError

        n = sample.n

        if n < 2:
            raise CopulaServiceException(
                code='insufficient_data',
                message=f'Kendall\'s tau needs at least 2 observations, got {n}',
            )

        tau_b, _ = stats.kendalltau(sample.x, sample.y)

        if not np.isfinite(tau_b):
            return 0.0

        pairs = n * (n - 1) / 2.0
        x_ties = self._tied_pairs(values=sample.x)
        y_ties = self._tied_pairs(values=sample.y)
        return float(tau_b * math.sqrt((pairs - x_ties) * (pairs - y_ties)) / pairs)

    def _tied_pairs(self: 'CopulaService', *, values: Optional[np.ndarray] = None) -> float:
        if values is None:
            raise ValueError

        _, counts = np.unique(values, return_counts=True)
        return float(np.sum(counts * (counts - 1)) / 2.0)
