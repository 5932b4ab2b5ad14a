from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from copula.models import CopulaFamily
from estimator.models import EstimatorKind, PseudoVariant
from gof.models import StatisticKind


class ExperimentKind(str, Enum):
    ESTIMATOR_COMPARE = 'compare'
    FIXED_H_SWEEP = 'sweep'
    GOF_SIZE_POWER = 'gof-table'

    @property
    def stream_id(self) -> int:
        # part of every per-repetition seed, keep stable
        return {
            ExperimentKind.ESTIMATOR_COMPARE: 1,
            ExperimentKind.FIXED_H_SWEEP: 2,
            ExperimentKind.GOF_SIZE_POWER: 3,
        }[self]


# schema

EXPERIMENT_PLAN_SCHEMA = {
    'type': 'object',
    'properties': {
        'kind': {'enum': [kind.value for kind in ExperimentKind]},
        'true_family': {'enum': [family.value for family in CopulaFamily]},
        'tau': {'type': 'number', 'exclusiveMinimum': -1, 'exclusiveMaximum': 1},
        'null_family': {
            'anyOf': [
                {'type': 'null'},
                {'enum': [family.value for family in CopulaFamily]},
            ],
        },
        'n': {'type': 'integer', 'minimum': 10},
        'reps': {'type': 'integer', 'minimum': 1},
        'B': {'type': 'integer', 'minimum': 1},
        'estimators': {
            'type': 'array',
            'items': {'enum': [kind.value for kind in EstimatorKind]},
            'minItems': 1,
        },
        'stats': {
            'type': 'array',
            'items': {'enum': [kind.value for kind in StatisticKind]},
            'minItems': 1,
        },
        'seed': {'type': 'integer', 'minimum': 0},
        'h_grid': {
            'type': 'array',
            'items': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 0.25},
        },
        'alpha': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
        'variant': {'enum': [variant.value for variant in PseudoVariant]},
        'output': {'type': ['string', 'null']},
    },
    'required': ['kind', 'true_family', 'tau', 'seed'],
    'additionalProperties': False,
}


@dataclass
class ExperimentPlan:
    kind: ExperimentKind
    true_family: CopulaFamily
    tau: float
    seed: int
    n: int = 150
    reps: int = 200
    B: int = 199
    null_family: Optional[CopulaFamily] = None
    estimators: List[EstimatorKind] = field(default_factory=list)
    stats: List[StatisticKind] = field(default_factory=list)
    h_grid: List[float] = field(default_factory=list)
    alpha: float = 0.05
    variant: PseudoVariant = PseudoVariant.SHIFTED_E
    output: Optional[str] = None

    def to_dict(self) -> dict:
        payload = asdict(self)

        for name, value in payload.items():
            if isinstance(value, Enum):
                payload[name] = value.value

            elif isinstance(value, list):
                payload[name] = [item.value if isinstance(item, Enum) else item for item in value]

        return payload


# ResultRow column order, fixed for every experiment
RESULT_COLUMNS: Tuple[str, ...] = (
    'experiment',
    'rep',
    'true_family',
    'tau',
    'null_family',
    'estimator',
    'statistic',
    'h',
    'method',
    'value',
    'rejected',
)

SUMMARY_COLUMNS: Tuple[str, ...] = (
    'experiment',
    'true_family',
    'tau',
    'null_family',
    'estimator',
    'statistic',
    'h',
    'method',
    'count',
    'mean',
    'q1',
    'median',
    'q3',
    'rejection_rate',
    'rejection_se',
)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    rep: int
    true_family: str
    tau: float
    estimator: str
    statistic: str
    value: float
    null_family: str = ''
    h: Optional[float] = None
    method: str = ''
    rejected: Optional[int] = None

    def to_dict(self) -> dict:
        return {column: getattr(self, column) for column in RESULT_COLUMNS}
