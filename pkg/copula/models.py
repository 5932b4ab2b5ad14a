from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class CopulaFamily(str, Enum):
    INDEPENDENCE = 'independence'
    CLAYTON = 'clayton'
    GUMBEL = 'gumbel'
    FRANK = 'frank'
    PLACKETT = 'plackett'
    NORMAL = 'normal'
    STUDENT4 = 'student4'

    @property
    def label(self) -> str:
        return self.value.capitalize()


@dataclass(frozen=True)
class CopulaSpec:
    """A parametric copula: family tag plus its parameter.

    For the elliptical families ``theta`` is the correlation ρ. Instances are
    built through ``CopulaService.get_spec`` which checks the parameter domain.
    """

    family: CopulaFamily
    theta: float = 0.0

    def __str__(self) -> str:
        return f'{self.family.label}({self.theta:.6g})'

    def to_dict(self) -> dict:
        return {'family': self.family.value, 'theta': float(self.theta)}


@dataclass(frozen=True, eq=False)
class Sample:
    """Paired real observations ``(x_i, y_i)`` in input row order."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, 'x', np.asarray(self.x, dtype=float))
        object.__setattr__(self, 'y', np.asarray(self.y, dtype=float))

        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return len(self)
