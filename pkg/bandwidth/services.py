import logging
import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from django.conf import settings
from numpy.polynomial.legendre import leggauss

from copula.models import CopulaFamily, CopulaSpec, Sample
from copula.services import CopulaService, CopulaServiceException
from copula.special import normal_cdf, normal_pdf
from estimator.models import EstimatorConfig, EstimatorKind, PseudoSample
from kernel.services import KernelService
from project.exceptions import ServiceException

from .models import AmseComponents, BandwidthMethod, BandwidthSelection

logger = logging.getLogger(__name__)


# exception


class BandwidthServiceException(ServiceException):
    pass


# Service


class BandwidthService:
    _copula_service = CopulaService()
    _kernel_service = KernelService()

    def amse_components(
        self: 'BandwidthService',
        *,
        spec: Optional[CopulaSpec] = None,
        u: Optional[npt.ArrayLike] = None,
        v: Optional[npt.ArrayLike] = None,
        shrink_on: bool = False,
        alpha: Optional[float] = None,
    ) -> AmseComponents:
        if spec is None or u is None or v is None:
            raise ValueError

        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

        try:
            cuu, _, cvv = self._copula_service.second_partials(spec=spec, u=u, v=v)

        except CopulaServiceException as e:
            raise BandwidthServiceException(code=e.code, message=e.message)

        c = self._copula_service.cdf(spec=spec, u=u, v=v)
        cu = self._copula_service.partial_u(spec=spec, u=u, v=v)
        cv = self._copula_service.partial_v(spec=spec, u=u, v=v)

        if shrink_on:
            bu = self._kernel_service.shrink(w=u, alpha=alpha)
            bv = self._kernel_service.shrink(w=v, alpha=alpha)

        else:
            bu = np.ones_like(u)
            bv = np.ones_like(v)

        sigma2 = self._kernel_service.sigma2_K()
        b_k = self._kernel_service.b_K()
        abias = sigma2 / 2.0 * (bu * bu * cuu + bv * bv * cvv)
        avar_h = b_k * (bu * cu * (1.0 - cu) + bv * cv * (1.0 - cv))
        # Var{1(U≤u, V≤v) − C_u 1(U≤u) − C_v 1(V≤v)} from its first two moments
        mean = c - cu * u - cv * v
        second = c + cu * cu * u + cv * cv * v - 2.0 * cu * c - 2.0 * cv * c + 2.0 * cu * cv * c
        return AmseComponents(
            abias_factor=abias,
            avar_const=second - mean * mean,
            avar_h_factor=avar_h,
        )

    def _validate_sample(
        self: 'BandwidthService',
        *,
        ps: Optional[PseudoSample] = None,
        n: Optional[int] = None,
    ) -> int:
        if not isinstance(ps, PseudoSample):
            raise ValueError

        n = ps.n if n is None else int(n)

        if n < 10 or ps.n < 2:
            raise BandwidthServiceException(
                code='insufficient_data',
                message=f'bandwidth selection needs n >= 10, got {n}',
            )

        return n

    def _tau_hat(self: 'BandwidthService', *, ps: PseudoSample) -> float:
        return self._copula_service.kendall_tau_empirical(sample=Sample(x=ps.u, y=ps.v))

    def minimizer(
        self: 'BandwidthService',
        *,
        c1: Optional[float] = None,
        c2: Optional[float] = None,
        n: Optional[int] = None,
    ) -> float:
        """argmin over h > 0 of c2 h⁴ − c1 h / n."""
        if c1 is None or c2 is None or n is None or c2 <= 0.0 or n < 1:
            raise ValueError

        return (c1 / (4.0 * c2 * n)) ** (1.0 / 3.0)

    def select_h_reference(
        self: 'BandwidthService',
        *,
        ps: Optional[PseudoSample] = None,
        n: Optional[int] = None,
        shrink_on: bool = False,
        alpha: Optional[float] = None,
    ) -> BandwidthSelection:
        """Plug-in bandwidth from the AMSE of a Frank reference copula.

        The reference θ is fitted by inverting Kendall's tau and the AMSE is
        averaged over the pseudo-observations.
        """
        n = self._validate_sample(ps=ps, n=n)
        h_max = getattr(settings, 'H_MAX', 0.25)
        tau_hat = self._tau_hat(ps=ps)

        try:
            spec = self._copula_service.theta_from_tau(family=CopulaFamily.FRANK, tau=tau_hat)

        except CopulaServiceException as e:
            logger.warning('Frank reference not available (%s); using h = n^(-1/3)', e.message)
            return self._fallback(n=n, tau_hat=tau_hat, h_max=h_max)

        components = self.amse_components(
            spec=spec,
            u=ps.u,
            v=ps.v,
            shrink_on=shrink_on,
            alpha=alpha,
        )
        c1 = float(np.mean(components.avar_h_factor))
        c2 = float(np.mean(components.abias_factor**2))

        if not c2 > 0.0:
            logger.warning('Frank reference has no bias term; using h = n^(-1/3)')
            return self._fallback(n=n, tau_hat=tau_hat, h_max=h_max, theta=spec.theta, c1=c1, c2=c2)

        h = self.minimizer(c1=c1, c2=c2, n=n)
        logger.debug('Frank reference theta=%.6g c1=%.6g c2=%.6g h=%.6g', spec.theta, c1, c2, h)
        return BandwidthSelection(
            h=min(h, h_max),
            method=BandwidthMethod.FRANK_REFERENCE,
            reference_theta=spec.theta,
            c1=c1,
            c2=c2,
            tau_hat=tau_hat,
            h_reference=h,
        )

    def _fallback(
        self: 'BandwidthService',
        *,
        n: int,
        tau_hat: float,
        h_max: float,
        theta: Optional[float] = None,
        c1: Optional[float] = None,
        c2: Optional[float] = None,
    ) -> BandwidthSelection:
        h = n ** (-1.0 / 3.0)
        return BandwidthSelection(
            h=min(h, h_max),
            method=BandwidthMethod.FRANK_REFERENCE,
            reference_theta=theta,
            c1=c1,
            c2=c2,
            tau_hat=tau_hat,
            h_reference=h,
            fallback=True,
        )

    def transform_constants(self: 'BandwidthService', *, rho: Optional[float] = None) -> Tuple[float, float]:
        """Plug-in constants (c1, c2) of the smoothed normal-scale distribution
        function under a bivariate normal reference with correlation ρ."""
        if rho is None or not -1.0 < rho < 1.0:
            raise ValueError

        return _transform_constants(
            float(rho),
            getattr(settings, 'TRANSFORM_REFERENCE_NODES', 64),
            getattr(settings, 'TRANSFORM_REFERENCE_LIMIT', 8.0),
            self._kernel_service.sigma2_K(),
            self._kernel_service.b_K(),
        )

    def select_h_transform(
        self: 'BandwidthService',
        *,
        ps: Optional[PseudoSample] = None,
        n: Optional[int] = None,
    ) -> BandwidthSelection:
        n = self._validate_sample(ps=ps, n=n)
        tau_hat = self._tau_hat(ps=ps)

        if abs(tau_hat) >= 0.99:
            raise BandwidthServiceException(
                code='near_singular_reference',
                message=f'normal reference is near singular at tau={tau_hat:.6g}',
            )

        rho = math.sin(math.pi * tau_hat / 2.0)
        c1, c2 = self.transform_constants(rho=rho)
        h = self.minimizer(c1=c1, c2=c2, n=n)
        logger.debug('normal reference rho=%.6g c1=%.6g c2=%.6g h=%.6g', rho, c1, c2, h)
        return BandwidthSelection(
            h=h / 2.0,
            method=BandwidthMethod.NORMAL_REFERENCE_T,
            reference_theta=rho,
            c1=c1,
            c2=c2,
            tau_hat=tau_hat,
            h_reference=h,
        )

    def fixed(
        self: 'BandwidthService',
        *,
        h: Optional[float] = None,
        kind: Optional[EstimatorKind] = None,
    ) -> BandwidthSelection:
        """A user-given bandwidth, checked against the domain of ``kind``.

        T smooths on the normal scale and only needs h > 0; the other kernel
        estimators need h in (0, H_MAX].
        """
        if h is None:
            raise ValueError

        h = float(h)
        h_max = getattr(settings, 'H_MAX', 0.25)

        if kind is not None and EstimatorKind(kind) == EstimatorKind.T:
            h_max = math.inf

        if not 0.0 < h <= h_max or not math.isfinite(h):
            raise BandwidthServiceException(
                code='invalid_bandwidth',
                message=f'bandwidth h={h!r} is outside (0, {h_max}]',
            )

        return BandwidthSelection(h=h, method=BandwidthMethod.FIXED_H, h_reference=h)

    def select_h(
        self: 'BandwidthService',
        *,
        ps: Optional[PseudoSample] = None,
        kind: Optional[EstimatorKind] = None,
        n: Optional[int] = None,
        alpha: Optional[float] = None,
    ) -> BandwidthSelection:
        """The reference rule matching an estimator kind."""
        if kind is None:
            raise ValueError

        kind = EstimatorKind(kind)

        if kind == EstimatorKind.E:
            raise ValueError

        if kind == EstimatorKind.T:
            return self.select_h_transform(ps=ps, n=n)

        return self.select_h_reference(ps=ps, n=n, shrink_on=kind.is_shrunk, alpha=alpha)

    def configure(
        self: 'BandwidthService',
        *,
        ps: Optional[PseudoSample] = None,
        config: Optional[EstimatorConfig] = None,
    ) -> EstimatorConfig:
        """``config`` with its bandwidth chosen by the matching reference rule."""
        if config is None:
            raise ValueError

        if not EstimatorKind(config.kind).is_kernel:
            return config

        selection = self.select_h(ps=ps, kind=config.kind, alpha=config.shrink_alpha)
        return config.with_bandwidth(selection.h)


@lru_cache(maxsize=256)
def _transform_constants(
    rho: float,
    nodes: int,
    limit: float,
    sigma2: float,
    b_k: float,
) -> Tuple[float, float]:
    # expectations under the bivariate normal by tensor Gauss–Legendre on [−L, L]²
    t, w = leggauss(nodes)
    t = t * limit
    w = w * limit
    x, y = np.meshgrid(t, t, indexing='ij')
    s = math.sqrt(1.0 - rho * rho)
    density = np.exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s * s)) / (2.0 * math.pi * s)
    weights = np.outer(w, w) * density
    a_x = (y - rho * x) / s
    a_y = (x - rho * y) / s
    h_x = normal_pdf(x) * normal_cdf(a_x)
    h_y = normal_pdf(y) * normal_cdf(a_y)
    h_xx = -x * h_x - rho / s * normal_pdf(x) * normal_pdf(a_x)
    h_yy = -y * h_y - rho / s * normal_pdf(y) * normal_pdf(a_y)
    c1 = float(np.sum(weights * b_k * (h_x + h_y)))
    c2 = float(np.sum(weights * (sigma2 / 2.0 * (h_xx + h_yy)) ** 2))
    return c1, c2
