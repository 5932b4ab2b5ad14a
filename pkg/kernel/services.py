import logging
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from django.conf import settings

from project.exceptions import ServiceException

logger = logging.getLogger(__name__)


# Types

Moments = Tuple[np.ndarray, np.ndarray, np.ndarray]


# Epanechnikov antiderivatives M_l(t) = ∫ t^l k(t) dt, zero at t = 0


def _m0(t: np.ndarray) -> np.ndarray:
    return (3.0 * t - t * t * t) / 4.0


def _m1(t: np.ndarray) -> np.ndarray:
    t2 = t * t
    return 0.75 * (t2 / 2.0 - t2 * t2 / 4.0)


def _m2(t: np.ndarray) -> np.ndarray:
    t3 = t * t * t
    return 0.75 * (t3 / 3.0 - t3 * t * t / 5.0)


# exception


class KernelServiceException(ServiceException):
    pass


# Service


class KernelService:
    """Epanechnikov kernel k(x) = ¾(1 − x²) on [−1, 1] and its local-linear
    boundary version.

    The local-linear kernel at u with bandwidth h is
    ``k(x)(a₂ − a₁x)/(a₀a₂ − a₁²)`` on ``((u − 1)/h, u/h)``, where
    ``a_l = ∫ t^l k(t) dt`` over the same interval. Its running integral
    ``K_loc`` is a piecewise quartic evaluated in closed form.
    """

    def _validate_bandwidth(self: 'KernelService', *, h: Optional[float] = None) -> float:
        if h is None:
            raise ValueError

        h = float(h)

        h_max = getattr(settings, 'H_MAX', 0.25)

        if not 0.0 < h <= h_max:
            raise KernelServiceException(
                code='invalid_bandwidth',
                message=f'bandwidth h={h!r} is outside (0, {h_max}]',
            )

        return h

    def k(self: 'KernelService', *, x: Optional[npt.ArrayLike] = None) -> np.ndarray:
        if x is None:
            raise ValueError

        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)

    def K(self: 'KernelService', *, x: Optional[npt.ArrayLike] = None) -> np.ndarray:
        if x is None:
            raise ValueError

        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        return (2.0 + 3.0 * x - x * x * x) / 4.0

    def _support(
        self: 'KernelService',
        *,
        u: npt.ArrayLike,
        h: float,
    ) -> Tuple[np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        lo = np.maximum(-1.0, (u - 1.0) / h)
        hi = np.minimum(1.0, u / h)
        return lo, hi

    def moments(
        self: 'KernelService',
        *,
        u: Optional[npt.ArrayLike] = None,
        h: Optional[float] = None,
    ) -> Moments:
        if u is None:
            raise ValueError

        h = self._validate_bandwidth(h=h)
        lo, hi = self._support(u=u, h=h)
        return _m0(hi) - _m0(lo), _m1(hi) - _m1(lo), _m2(hi) - _m2(lo)

    def a_l(
        self: 'KernelService',
        *,
        u: Optional[npt.ArrayLike] = None,
        h: Optional[float] = None,
        l: Optional[int] = None,
    ) -> np.ndarray:
        if l not in (0, 1, 2):
            raise ValueError

        return self.moments(u=u, h=h)[l]

    def _denominator(self: 'KernelService', *, a: Moments) -> np.ndarray:
        a0, a1, a2 = a
        denominator = a0 * a2 - a1 * a1

        if np.any(denominator <= 0.0):
            raise KernelServiceException(
                code='degenerate_kernel',
                message='local-linear kernel denominator a0*a2 - a1^2 is not positive',
            )

        return denominator

    def k_loc(
        self: 'KernelService',
        *,
        u: Optional[npt.ArrayLike] = None,
        h: Optional[float] = None,
        x: Optional[npt.ArrayLike] = None,
    ) -> np.ndarray:
        if u is None or x is None:
            raise ValueError

        h = self._validate_bandwidth(h=h)
        u = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
        a = self.moments(u=u, h=h)
        denominator = self._denominator(a=a)
        _, a1, a2 = a
        inside = ((u - 1.0) / h < x) & (x < u / h)
        interior = (h <= u) & (u <= 1.0 - h)
        value = np.where(inside, self.k(x=x) * (a2 - a1 * x) / denominator, 0.0)
        return np.where(interior, self.k(x=x), value)

    def K_loc(
        self: 'KernelService',
        *,
        u: Optional[npt.ArrayLike] = None,
        h: Optional[float] = None,
        x: Optional[npt.ArrayLike] = None,
    ) -> np.ndarray:
        """Running integral of ``k_loc(u, h, ·)`` up to x.

        Exactly 0 below the support, exactly 1 above it and exactly K(x)
        whenever h ≤ u ≤ 1 − h.
        """
        if u is None or x is None:
            raise ValueError

        h = self._validate_bandwidth(h=h)
        u = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
        lo, hi = self._support(u=u, h=h)
        a = (_m0(hi) - _m0(lo), _m1(hi) - _m1(lo), _m2(hi) - _m2(lo))
        denominator = self._denominator(a=a)
        _, a1, a2 = a
        t = np.clip(x, lo, hi)
        value = (a2 * (_m0(t) - _m0(lo)) - a1 * (_m1(t) - _m1(lo))) / denominator
        value = np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, value))
        interior = (h <= u) & (u <= 1.0 - h)
        return np.where(interior, self.K(x=x), value)

    def sigma2_K(self: 'KernelService') -> float:
        # ∫ t² k(t) dt over [−1, 1]
        return float(_m2(1.0) - _m2(-1.0))

    def b_K(self: 'KernelService') -> float:
        # 2 ∫ t k(t) K(t) dt over [−1, 1]
        return 9.0 / 35.0

    def shrink(
        self: 'KernelService',
        *,
        w: Optional[npt.ArrayLike] = None,
        alpha: Optional[float] = None,
    ) -> np.ndarray:
        """b(w) = min(w^α, (1 − w)^α); α = ½ gives min(√w, √(1 − w))."""
        if w is None:
            raise ValueError

        if alpha is None:
            alpha = getattr(settings, 'SHRINK_ALPHA', 0.5)

        if not alpha > 0.0:
            raise ValueError

        w = np.clip(np.asarray(w, dtype=float), 0.0, 1.0)
        return np.minimum(w**alpha, (1.0 - w) ** alpha)
