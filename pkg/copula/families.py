"""Closed forms, conditionals, second partials and samplers per copula family.

All functions work on numpy arrays of interior points ``(u, v) ∈ (0, 1)²``.
Edges of the square, parameter validation and τ-range checks are handled by
``CopulaService``.
"""

import math
from functools import lru_cache
from typing import Dict, Optional, Tuple, Type

import numpy as np
from django.conf import settings
from numpy.polynomial.legendre import leggauss
from scipy import optimize


from . import special
from .models import CopulaFamily

Partials = Tuple[np.ndarray, np.ndarray, np.ndarray]

_UNIT_MAX = 1.0 - 2.0**-53


def _gauss_legendre_unit(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(nodes)
    return (x + 1.0) / 2.0, w / 2.0


def _open_unit(x: np.ndarray) -> np.ndarray:
    return np.clip(x, np.finfo(float).tiny, _UNIT_MAX)


class BaseFamily:
    family: CopulaFamily
    # open interval of attainable Kendall's tau, plus values the family excludes
    tau_bounds: Tuple[float, float] = (-1.0, 1.0)
    tau_excluded: Tuple[float, ...] = ()

    def is_valid(self, theta: float) -> bool:
        raise NotImplementedError

    def cdf(self, theta: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def partial_u(self, theta: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def partial_v(self, theta: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        # every family here is exchangeable
        return self.partial_u(theta, v, u)

    def second_partials(self, theta: float, u: np.ndarray, v: np.ndarray) -> Partials:
        raise NotImplementedError

    def sample(
        self,
        theta: float,
        n: int,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def tau(self, theta: float) -> float:
        raise NotImplementedError

    def theta(self, tau: float) -> float:
        raise NotImplementedError

    def _integrate_partial_u(
        self,
        theta: float,
        u: np.ndarray,
        v: np.ndarray,
    ) -> np.ndarray:
        """C(u, v) as the integral of the conditional ``C_u(s, v)`` over s.

        For u ≤ ½ the integral runs over [0, u]; otherwise C = v − ∫_u^1. Each
        range is cut into dyadic panels shrinking towards the endpoint at
        which ``C_u`` may be non-smooth, with Gauss–Legendre nodes per panel.
        """
        panels = getattr(settings, 'QUADRATURE_PANELS', 40)
        x, w = _gauss_legendre_unit(getattr(settings, 'QUADRATURE_NODES', 10))
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        lower = u <= 0.5
        length = np.where(lower, u, 1.0 - u)[..., None]
        start = np.where(lower, 0.0, 1.0)[..., None]
        direction = np.where(lower, 1.0, -1.0)[..., None]
        total = np.zeros(u.shape, dtype=float)

        for j in range(panels):
            a, b = 2.0 ** -(j + 1), 2.0**-j
            t = a + (b - a) * x
            s = start + direction * length * t
            total += (b - a) * (self.partial_u(theta, s, v[..., None]) @ w)

        integral = length[..., 0] * total
        value = np.where(lower, integral, v - integral)
        return np.clip(value, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))


class IndependenceFamily(BaseFamily):
    family = CopulaFamily.INDEPENDENCE
    tau_bounds = (0.0, 0.0)

    def is_valid(self, theta: float) -> bool:
        return True

    def cdf(self, theta, u, v):
        return u * v

    def partial_u(self, theta, u, v):
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(u, v).shape).copy()

    def second_partials(self, theta, u, v):
        shape = np.broadcast(u, v).shape
        return np.zeros(shape), np.ones(shape), np.zeros(shape)

    def sample(self, theta, n, rng):
        uv = _open_unit(rng.random((n, 2)))
        return uv[:, 0], uv[:, 1]

    def tau(self, theta):
        return 0.0

    def theta(self, tau):
        return 0.0


class ArchimedeanFamily(BaseFamily):
    """C(u, v) = φ⁻¹(φ(u) + φ(v)) differentiated through the generator φ."""

    def generator_d1(self, theta: float, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def generator_d2(self, theta: float, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def partial_u(self, theta, u, v):
        c = self.cdf(theta, u, v)
        return self.generator_d1(theta, u) / self.generator_d1(theta, c)

    def second_partials(self, theta, u, v):
        c = self.cdf(theta, u, v)
        d1c = self.generator_d1(theta, c)
        d2c = self.generator_d2(theta, c)
        d1u = self.generator_d1(theta, u)
        d1v = self.generator_d1(theta, v)
        cube = d1c**3
        cuu = self.generator_d2(theta, u) / d1c - d1u**2 * d2c / cube
        cvv = self.generator_d2(theta, v) / d1c - d1v**2 * d2c / cube
        cuv = -d1u * d1v * d2c / cube
        return cuu, cuv, cvv


class ClaytonFamily(ArchimedeanFamily):
    family = CopulaFamily.CLAYTON
    tau_bounds = (0.0, 1.0)

    def is_valid(self, theta):
        return math.isfinite(theta) and theta >= 0.0

    def cdf(self, theta, u, v):
        if theta == 0.0:
            return u * v

        return (u**-theta + v**-theta - 1.0) ** (-1.0 / theta)

    def generator_d1(self, theta, t):
        return -(t ** (-theta - 1.0))

    def generator_d2(self, theta, t):
        return (theta + 1.0) * t ** (-theta - 2.0)

    def sample(self, theta, n, rng):
        # Marshall–Olkin: gamma frailty with the Clayton Laplace transform
        if theta == 0.0:
            return IndependenceFamily().sample(theta, n, rng)

        frailty = rng.gamma(shape=1.0 / theta, scale=1.0, size=n)
        e = rng.exponential(size=(n, 2))
        uv = _open_unit((1.0 + e / frailty[:, None]) ** (-1.0 / theta))
        return uv[:, 0], uv[:, 1]

    def tau(self, theta):
        return theta / (theta + 2.0)

    def theta(self, tau):
        return 2.0 * tau / (1.0 - tau)


class GumbelFamily(ArchimedeanFamily):
    family = CopulaFamily.GUMBEL
    tau_bounds = (0.0, 1.0)

    def is_valid(self, theta):
        return math.isfinite(theta) and theta >= 1.0

    def cdf(self, theta, u, v):
        s = (-np.log(u)) ** theta + (-np.log(v)) ** theta
        return np.exp(-(s ** (1.0 / theta)))

    def generator_d1(self, theta, t):
        return -theta * (-np.log(t)) ** (theta - 1.0) / t

    def generator_d2(self, theta, t):
        log_t = -np.log(t)
        return (theta * (theta - 1.0) * log_t ** (theta - 2.0) + theta * log_t ** (theta - 1.0)) / t**2

    def sample(self, theta, n, rng):
        # positive-stable frailty via Chambers–Mallows–Stuck (Kanter form)
        if theta == 1.0:
            return IndependenceFamily().sample(theta, n, rng)

        alpha = 1.0 / theta
        angle = rng.uniform(0.0, np.pi, size=n)
        w = rng.exponential(size=n)
        frailty = (np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)) * (
            np.sin((1.0 - alpha) * angle) / w
        ) ** ((1.0 - alpha) / alpha)
        e = rng.exponential(size=(n, 2))
        uv = _open_unit(np.exp(-((e / frailty[:, None]) ** alpha)))
        return uv[:, 0], uv[:, 1]

    def tau(self, theta):
        return 1.0 - 1.0 / theta

    def theta(self, tau):
        return 1.0 / (1.0 - tau)


@lru_cache(maxsize=1024)
def debye1(theta: float) -> float:
    """D₁(θ) = (1/θ)∫₀^θ t/(eᵗ − 1) dt by composite Gauss–Legendre."""
    if theta == 0.0:
        return 1.0

    if theta < 0.0:
        return debye1(-theta) - theta / 2.0

    x, w = _gauss_legendre_unit(getattr(settings, 'DEBYE_NODES', 64))
    # beyond 60 the integrand is below 1e-24
    upper = min(theta, 60.0)
    edges = np.linspace(0.0, upper, max(1, math.ceil(upper / 5.0)) + 1)
    total = 0.0

    for a, b in zip(edges[:-1], edges[1:]):
        t = a + (b - a) * x
        total += (b - a) * float(np.dot(w, t / np.expm1(t)))

    return total / theta


class FrankFamily(ArchimedeanFamily):
    family = CopulaFamily.FRANK
    tau_excluded = (0.0,)

    def is_valid(self, theta):
        return math.isfinite(theta) and theta != 0.0

    def cdf(self, theta, u, v):
        ratio = np.expm1(-theta * u) * np.expm1(-theta * v) / np.expm1(-theta)
        return -np.log1p(ratio) / theta

    def partial_u(self, theta, u, v):
        a = np.expm1(-theta * u)
        b = np.expm1(-theta * v)
        return np.exp(-theta * u) * b / (np.expm1(-theta) + a * b)

    def generator_d1(self, theta, t):
        return theta * np.exp(-theta * t) / np.expm1(-theta * t)

    def generator_d2(self, theta, t):
        g = np.exp(-theta * t)
        return theta**2 * g / np.expm1(-theta * t) ** 2

    def sample(self, theta, n, rng):
        # conditional inversion of C_u(u, ·)
        uw = rng.random((n, 2))
        u, w = uw[:, 0], uw[:, 1]
        v = -np.log1p(w * np.expm1(-theta) / (w + (1.0 - w) * np.exp(-theta * u))) / theta
        return _open_unit(u), _open_unit(v)

    def tau(self, theta):
        return 1.0 + 4.0 * (debye1(float(theta)) - 1.0) / theta

    def theta(self, tau):
        return _invert_tau(self.tau, tau, lower=1e-10, upper=1.0)


class PlackettFamily(BaseFamily):
    family = CopulaFamily.PLACKETT
    tau_excluded = (0.0,)

    def is_valid(self, theta):
        return math.isfinite(theta) and theta > 0.0 and theta != 1.0

    def _terms(self, theta, u, v):
        s = 1.0 + (theta - 1.0) * (u + v)
        r = np.sqrt(s * s - 4.0 * theta * (theta - 1.0) * u * v)
        return s, r

    def cdf(self, theta, u, v):
        s, r = self._terms(theta, u, v)
        return (s - r) / (2.0 * (theta - 1.0))

    def partial_u(self, theta, u, v):
        s, r = self._terms(theta, u, v)
        return 0.5 * (1.0 - (s - 2.0 * theta * v) / r)

    def second_partials(self, theta, u, v):
        s, r = self._terms(theta, u, v)
        cube = r**3
        cuu = -(theta - 1.0) * 2.0 * theta * v * (1.0 - v) / cube
        cvv = -(theta - 1.0) * 2.0 * theta * u * (1.0 - u) / cube
        cuv = ((theta + 1.0) * r * r + (theta - 1.0) * (s - 2.0 * theta * v) * (s - 2.0 * theta * u)) / (
            2.0 * cube
        )
        return cuu, cuv, cvv

    def sample(self, theta, n, rng):
        # closed-form inversion of the conditional distribution
        uw = rng.random((n, 2))
        u, w = uw[:, 0], uw[:, 1]
        a = w * (1.0 - w)
        b = theta + a * (theta - 1.0) ** 2
        c = 2.0 * a * (u * theta**2 + 1.0 - u) + theta * (1.0 - 2.0 * a)
        d = np.sqrt(theta) * np.sqrt(theta + 4.0 * a * u * (1.0 - u) * (1.0 - theta) ** 2)
        v = (c - (1.0 - 2.0 * w) * d) / (2.0 * b)
        return _open_unit(u), _open_unit(v)

    def tau(self, theta):
        return _plackett_tau(float(theta))

    def theta(self, tau):
        log_theta = _invert_tau(lambda t: self.tau(math.exp(t)), tau, lower=1e-9, upper=1.0)
        return math.exp(log_theta)


@lru_cache(maxsize=4096)
def _plackett_tau(theta: float) -> float:
    # τ = 1 − 4 ∬ C_u C_v du dv on a tensor Gauss–Legendre grid
    x, w = _gauss_legendre_unit(getattr(settings, 'PLACKETT_TAU_NODES', 128))
    u, v = np.meshgrid(x, x, indexing='ij')
    family = PlackettFamily()
    integrand = family.partial_u(theta, u, v) * family.partial_v(theta, u, v)
    return float(1.0 - 4.0 * w @ integrand @ w)


class NormalFamily(BaseFamily):
    family = CopulaFamily.NORMAL

    def is_valid(self, theta):
        return math.isfinite(theta) and -1.0 < theta < 1.0

    def _argument(self, rho, u, v):
        scale = np.sqrt(1.0 - rho * rho)
        zu = special.normal_ppf(u)
        zv = special.normal_ppf(v)
        return (zv - rho * zu) / scale, zu, zv, scale

    def cdf(self, theta, u, v):
        return self._integrate_partial_u(theta, u, v)

    def partial_u(self, theta, u, v):
        arg, _, _, _ = self._argument(theta, u, v)
        return special.normal_cdf(arg)

    def second_partials(self, theta, u, v):
        arg_u, zu, zv, scale = self._argument(theta, u, v)
        arg_v = (zu - theta * zv) / scale
        density_u = special.normal_pdf(arg_u)
        cuu = -theta / scale * density_u / special.normal_pdf(zu)
        cvv = -theta / scale * special.normal_pdf(arg_v) / special.normal_pdf(zv)
        cuv = density_u / (scale * special.normal_pdf(zv))
        return cuu, cuv, cvv

    def _correlated_normals(self, rho, n, rng):
        factor = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
        return rng.standard_normal((n, 2)) @ factor.T

    def sample(self, theta, n, rng):
        uv = _open_unit(special.normal_cdf(self._correlated_normals(theta, n, rng)))
        return uv[:, 0], uv[:, 1]

    def tau(self, theta):
        return 2.0 / np.pi * math.asin(theta)

    def theta(self, tau):
        return math.sin(np.pi * tau / 2.0)


class Student4Family(NormalFamily):
    family = CopulaFamily.STUDENT4

    @property
    def df(self) -> float:
        return float(getattr(settings, 'STUDENT_DF', 4))

    def _terms(self, rho, u, v):
        m = self.df
        xu = special.student_ppf(u, m)
        xv = special.student_ppf(v, m)
        s2 = 1.0 - rho * rho
        q = m + xu * xu
        z = (xv - rho * xu) * np.sqrt((m + 1.0) / (q * s2))
        return z, xu, xv, q, s2

    def partial_u(self, theta, u, v):
        z, _, _, _, _ = self._terms(theta, u, v)
        return special.student_cdf(z, self.df + 1.0)

    def second_partials(self, theta, u, v):
        m = self.df
        z_u, xu, xv, qu, s2 = self._terms(theta, u, v)
        z_v, _, _, qv, _ = self._terms(theta, v, u)
        root = np.sqrt((m + 1.0) / s2)
        density_zu = special.student_pdf(z_u, m + 1.0)
        density_xu = special.student_pdf(xu, m)
        density_xv = special.student_pdf(xv, m)
        cuu = density_zu * root * (-theta * m - xu * xv) / qu**1.5 / density_xu
        cvv = (
            special.student_pdf(z_v, m + 1.0)
            * root
            * (-theta * m - xu * xv)
            / qv**1.5
            / density_xv
        )
        cuv = density_zu * root / np.sqrt(qu) / density_xv
        return cuu, cuv, cvv

    def sample(self, theta, n, rng):
        m = self.df
        z = self._correlated_normals(theta, n, rng)
        chi2 = rng.chisquare(m, size=n)
        x = z / np.sqrt(chi2 / m)[:, None]
        uv = _open_unit(special.student_cdf(x, m))
        return uv[:, 0], uv[:, 1]


def _invert_tau(tau_of, tau: float, *, lower: float, upper: float) -> float:
    """Root of ``tau_of(t) = tau`` for an increasing, odd-signed parametrization.

    ``tau_of(0)`` is 0, so the bracket is [lower, upper] on the side of 0
    matching the sign of τ, with ``upper`` doubled until it brackets.
    """
    sign = 1.0 if tau > 0.0 else -1.0
    lo, hi = sign * lower, sign * upper

    while (tau_of(hi) - tau) * sign < 0.0:
        lo, hi = hi, 2.0 * hi

        if abs(hi) > 1e7:
            raise ValueError('tau is not attainable')

    a, b = (lo, hi) if sign > 0 else (hi, lo)
    return optimize.brentq(
        lambda t: tau_of(t) - tau,
        a,
        b,
        xtol=1e-15,
        rtol=4.0 * np.finfo(float).eps,
        maxiter=500,
    )


FAMILY_CLASSES: Dict[CopulaFamily, Type[BaseFamily]] = {
    CopulaFamily.INDEPENDENCE: IndependenceFamily,
    CopulaFamily.CLAYTON: ClaytonFamily,
    CopulaFamily.GUMBEL: GumbelFamily,
    CopulaFamily.FRANK: FrankFamily,
    CopulaFamily.PLACKETT: PlackettFamily,
    CopulaFamily.NORMAL: NormalFamily,
    CopulaFamily.STUDENT4: Student4Family,
}


def get_family(family: Optional[CopulaFamily]) -> BaseFamily:
    if family is None:
        raise ValueError

    return FAMILY_CLASSES[CopulaFamily(family)]()
