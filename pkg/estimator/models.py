from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class PseudoVariant(str, Enum):
    SHIFTED_E = 'shifted'
    CENTERED = 'centered'


class EstimatorKind(str, Enum):
    E = 'e'
    LL = 'll'
    LLS = 'lls'
    MR = 'mr'
    MRS = 'mrs'
    T = 't'

    @property
    def label(self) -> str:
        return self.value.upper()

    @property
    def is_kernel(self) -> bool:
        return self is not EstimatorKind.E

    @property
    def is_shrunk(self) -> bool:
        return self in (EstimatorKind.LLS, EstimatorKind.MRS)


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Rank-based pairs (û_i, v̂_i) in (0, 1)², in input row order."""

    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    variant: PseudoVariant = PseudoVariant.SHIFTED_E

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)

        if u.ndim != 1 or u.shape != v.shape:
            raise ValueError

        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)

    def __len__(self) -> int:
        return self.u.shape[0]

    @property
    def n(self) -> int:
        return len(self)


@dataclass(frozen=True)
class EstimatorConfig:
    kind: EstimatorKind = EstimatorKind.E
    # ignored for E
    h: Optional[float] = None
    variant: PseudoVariant = PseudoVariant.SHIFTED_E
    # exponent of the shrink function used by LLS and MRS
    shrink_alpha: Optional[float] = None

    def with_bandwidth(self, h: float) -> 'EstimatorConfig':
        return EstimatorConfig(
            kind=self.kind,
            h=h,
            variant=self.variant,
            shrink_alpha=self.shrink_alpha,
        )

    def to_dict(self) -> dict:
        return {
            'kind': self.kind.value,
            'h': None if self.h is None else float(self.h),
            'variant': self.variant.value,
        }


@dataclass(frozen=True)
class EvalGrid:
    """Regular m × m lattice over [0, 1]² including both edges."""

    m: int = 101

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m)

    @property
    def mesh(self):
        return np.meshgrid(self.points, self.points, indexing='ij')
