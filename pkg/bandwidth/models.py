from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np


class BandwidthMethod(str, Enum):
    FRANK_REFERENCE = 'frank_reference'
    NORMAL_REFERENCE_T = 'normal_reference_t'
    FIXED_H = 'fixed_h'


@dataclass(frozen=True, eq=False)
class AmseComponents:
    """Coefficients of the asymptotic MSE of a local-linear type estimate.

    ``MSE ≈ h⁴ abias_factor² + avar_const / n − h avar_h_factor / n``.
    """

    abias_factor: np.ndarray
    avar_const: np.ndarray
    avar_h_factor: np.ndarray

    def amse(self, *, h: float, n: int) -> np.ndarray:
        return h**4 * self.abias_factor**2 + (self.avar_const - h * self.avar_h_factor) / n


@dataclass(frozen=True)
class BandwidthSelection:
    h: float
    method: BandwidthMethod
    reference_theta: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    tau_hat: Optional[float] = None
    # minimizer before the cap at H_MAX or the halving of the T rule
    h_reference: Optional[float] = None
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            'h': self.h,
            'method': self.method.value,
            'theta_hat': self.reference_theta,
            'c1': self.c1,
            'c2': self.c2,
            'tau_hat': self.tau_hat,
            'h_reference': self.h_reference,
            'fallback': self.fallback,
        }
