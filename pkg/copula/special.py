"""Univariate special functions used by the copula families.

Φ, φ and Φ⁻¹ come from ``scipy.special``. The Student t with four degrees of
freedom has an exact closed-form CDF and quantile, so those are evaluated
directly. Other degrees of freedom go through ``scipy.special.stdtr``.
"""

import numpy as np
import numpy.typing as npt
from scipy import special, stats

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def normal_cdf(x: npt.ArrayLike) -> np.ndarray:
    return special.ndtr(x)


def normal_pdf(x: npt.ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def normal_ppf(p: npt.ArrayLike) -> np.ndarray:
    # ndtri(0) = -inf and ndtri(1) = +inf, which the transformation
    # estimator relies on at the edges of the square.
    return special.ndtri(p)


def t4_cdf(x: npt.ArrayLike) -> np.ndarray:
    # F(x) = 1/2 + (3/4) s - (1/4) s^3 with s = x / sqrt(x^2 + 4)
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid='ignore'):
        s = np.where(np.isinf(x), np.sign(x), x / np.sqrt(x * x + 4.0))

    return 0.5 + 0.75 * s - 0.25 * s**3


def t4_ppf(p: npt.ArrayLike) -> np.ndarray:
    # s solves s^3 - 3 s + (4 p - 2) = 0 on [-1, 1]
    p = np.asarray(p, dtype=float)
    c = np.clip(2.0 - 4.0 * p, -2.0, 2.0)
    s = 2.0 * np.cos(np.arccos(c / 2.0) / 3.0 - 2.0 * np.pi / 3.0)
    s = np.clip(s, -1.0, 1.0)

    with np.errstate(divide='ignore', invalid='ignore'):
        x = 2.0 * s / np.sqrt((1.0 - s) * (1.0 + s))

    x = np.where(p <= 0.0, -np.inf, x)
    x = np.where(p >= 1.0, np.inf, x)
    return _t4_newton(x, p)


def _t4_newton(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    # one refinement step; the trigonometric root loses digits in the tails
    with np.errstate(divide='ignore', invalid='ignore'):
        step = (t4_cdf(x) - p) / t4_pdf(x)

    return np.where(np.isfinite(x) & np.isfinite(step), x - step, x)


def t4_pdf(x: npt.ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 12.0 / (x * x + 4.0) ** 2.5


def student_cdf(x: npt.ArrayLike, df: float) -> np.ndarray:
    if df == 4:
        return t4_cdf(x)

    return special.stdtr(df, x)


def student_ppf(p: npt.ArrayLike, df: float) -> np.ndarray:
    if df == 4:
        return t4_ppf(p)

    return special.stdtrit(df, p)


def student_pdf(x: npt.ArrayLike, df: float) -> np.ndarray:
    if df == 4:
        return t4_pdf(x)

    return stats.t.pdf(x, df)
