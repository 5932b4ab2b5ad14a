from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional


class StatisticKind(str, Enum):
    KS = 'ks'
    CM = 'cm'
    Q = 'q'

    @property
    def label(self) -> str:
        return self.value.upper()


class GofStatus(str, Enum):
    OK = 'ok'
    FAILED = 'failed'


# schema

GOF_REPORT_SCHEMA = {
    'type': 'object',
    'properties': {
        'status': {'enum': [status.value for status in GofStatus]},
        'error': {
            'anyOf': [
                {'type': 'null'},
                {
                    'type': 'object',
                    'properties': {
                        'code': {'type': 'string'},
                        'message': {'type': 'string'},
                    },
                    'required': ['code'],
                },
            ],
        },
        'statistic_kind': {'enum': [kind.value for kind in StatisticKind]},
        'estimator_kind': {'type': 'string'},
        'null_family': {'type': 'string'},
        'n': {'type': 'integer', 'minimum': 0},
        'h': {'type': ['number', 'null'], 'exclusiveMinimum': 0},
        'observed': {'type': ['number', 'null'], 'minimum': 0},
        'bootstrap_values': {'type': 'array', 'items': {'type': 'number'}},
        'bootstrap_thetas': {'type': 'array', 'items': {'type': 'number'}},
        'p_value': {'type': ['number', 'null'], 'exclusiveMinimum': 0, 'maximum': 1},
        'B': {'type': 'integer', 'minimum': 1},
        'theta_hat': {'type': ['number', 'null']},
        'seed': {'type': 'integer'},
    },
    'required': ['status', 'statistic_kind', 'estimator_kind', 'B', 'seed', 'p_value'],
}


@dataclass
class GofReport:
    statistic_kind: StatisticKind
    estimator_kind: str
    null_family: str
    B: int
    seed: int
    n: int = 0
    observed: Optional[float] = None
    bootstrap_values: List[float] = field(default_factory=list)
    bootstrap_thetas: List[float] = field(default_factory=list)
    p_value: Optional[float] = None
    theta_hat: Optional[float] = None
    h: Optional[float] = None
    status: GofStatus = GofStatus.OK
    error_code: str = ''
    error_message: str = ''

    def rejected(self, alpha: float) -> bool:
        return self.p_value is not None and self.p_value <= alpha

    def to_dict(self) -> dict:
        return {
            'status': self.status.value,
            'error': (
                {'code': self.error_code, 'message': self.error_message}
                if self.status == GofStatus.FAILED
                else None
            ),
            'statistic_kind': self.statistic_kind.value,
            'estimator_kind': self.estimator_kind,
            'null_family': self.null_family,
            'n': self.n,
            'h': self.h,
            'observed': self.observed,
            'bootstrap_values': [float(value) for value in self.bootstrap_values],
            'bootstrap_thetas': [float(value) for value in self.bootstrap_thetas],
            'p_value': self.p_value,
            'B': self.B,
            'theta_hat': self.theta_hat,
            'seed': self.seed,
        }
