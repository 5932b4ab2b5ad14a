import json
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import joblib
import jsonschema
import numpy as np
import pandas as pd
from django.conf import settings

from bandwidth.services import BandwidthService
from copula.models import CopulaFamily, CopulaSpec, Sample
from copula.services import CopulaService
from estimator.models import EstimatorConfig, EstimatorKind, EvalGrid, PseudoVariant
from estimator.services import EstimatorService
from gof.models import StatisticKind
from gof.services import GofService, resolve_jobs
from project.exceptions import ServiceException

from .models import (
    EXPERIMENT_PLAN_SCHEMA,
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentKind,
    ExperimentPlan,
    ResultRow,
)

logger = logging.getLogger(__name__)


# exception


class HarnessServiceException(ServiceException):
    pass


# Service


class HarnessService:
    _bandwidth_service = BandwidthService()
    _copula_service = CopulaService()
    _estimator_service = EstimatorService()
    _gof_service = GofService()

    def build_plan(self: 'HarnessService', *, payload: Optional[Dict[str, Any]] = None) -> ExperimentPlan:
        if not isinstance(payload, dict):
            raise ValueError

        payload = {name: value for name, value in payload.items() if value is not None}

        try:
            jsonschema.validate(instance=payload, schema=EXPERIMENT_PLAN_SCHEMA)

        except jsonschema.ValidationError as e:
            raise HarnessServiceException(code='invalid_plan', message=e.message)

        kind = ExperimentKind(payload['kind'])
        true_family = CopulaFamily(payload['true_family'])
        null_family = payload.get('null_family')

        if kind == ExperimentKind.GOF_SIZE_POWER:
            null_family = CopulaFamily(null_family or true_family)

            if null_family == CopulaFamily.INDEPENDENCE:
                raise HarnessServiceException(
                    code='invalid_plan',
                    message='the independence copula has no parameter to fit',
                )

        default_estimators = {
            ExperimentKind.ESTIMATOR_COMPARE: [kind.value for kind in EstimatorKind],
            ExperimentKind.FIXED_H_SWEEP: [EstimatorKind.LL.value],
            ExperimentKind.GOF_SIZE_POWER: [EstimatorKind.E.value],
        }[kind]
        default_stats = {
            ExperimentKind.ESTIMATOR_COMPARE: ['ks', 'cm', 'q'],
            ExperimentKind.FIXED_H_SWEEP: ['ks', 'cm'],
            ExperimentKind.GOF_SIZE_POWER: ['cm'],
        }[kind]
        h_grid = payload.get('h_grid') or self.default_h_grid()
        plan = ExperimentPlan(
            kind=kind,
            true_family=true_family,
            tau=float(payload['tau']),
            seed=int(payload['seed']),
            n=int(payload.get('n', getattr(settings, 'DEFAULT_N', 150))),
            reps=int(payload.get('reps', getattr(settings, 'DEFAULT_REPS', 200))),
            B=int(payload.get('B', getattr(settings, 'DEFAULT_B', 199))),
            null_family=CopulaFamily(null_family) if null_family else None,
            estimators=[EstimatorKind(value) for value in payload.get('estimators', default_estimators)],
            stats=[StatisticKind(value) for value in payload.get('stats', default_stats)],
            h_grid=[float(h) for h in h_grid],
            alpha=float(payload.get('alpha', getattr(settings, 'ALPHA', 0.05))),
            variant=PseudoVariant(payload.get('variant', PseudoVariant.SHIFTED_E.value)),
            output=payload.get('output'),
        )

        if plan.variant == PseudoVariant.CENTERED and EstimatorKind.T in plan.estimators:
            raise HarnessServiceException(
                code='invalid_plan',
                message='the transformation estimator is defined on shifted pseudo-observations',
            )

        return plan

    def default_h_grid(self: 'HarnessService') -> List[float]:
        return list(
            np.geomspace(
                getattr(settings, 'SWEEP_H_MIN', 0.005),
                getattr(settings, 'SWEEP_H_MAX', 0.25),
                getattr(settings, 'SWEEP_H_COUNT', 20),
            )
        )

    def rep_rng(self: 'HarnessService', *, plan: ExperimentPlan, rep: int) -> np.random.Generator:
        """Stream of repetition ``rep``: SeedSequence(seed, spawn_key=(experiment, rep))."""
        sequence = np.random.SeedSequence(
            entropy=plan.seed,
            spawn_key=(plan.kind.stream_id, rep),
        )
        return np.random.default_rng(sequence)

    def rep_bootstrap_seed(self: 'HarnessService', *, plan: ExperimentPlan, rep: int) -> int:
        sequence = np.random.SeedSequence(
            entropy=plan.seed,
            spawn_key=(plan.kind.stream_id, rep, 1),
        )
        return int(sequence.generate_state(1)[0])

    def _true_spec(self: 'HarnessService', *, plan: ExperimentPlan) -> CopulaSpec:
        return self._copula_service.theta_from_tau(family=plan.true_family, tau=plan.tau)

    def _row(self: 'HarnessService', *, plan: ExperimentPlan, rep: int, **values) -> ResultRow:
        return ResultRow(
            experiment=plan.kind.value,
            rep=rep,
            true_family=plan.true_family.value,
            tau=plan.tau,
            null_family=plan.null_family.value if plan.null_family else '',
            **values,
        )

    def _measure(
        self: 'HarnessService',
        *,
        plan: ExperimentPlan,
        rep: int,
        config: EstimatorConfig,
        ps,
        true_spec: CopulaSpec,
        grid: EvalGrid,
        reference: np.ndarray,
        method: str,
    ) -> List[ResultRow]:
        """Performance measures of one estimate against the true copula."""
        rows = []
        values = None

        for stat in plan.stats:
            if stat == StatisticKind.CM:
                value = self._gof_service.stat_cm(est=config, ps=ps, null_spec=true_spec)

            else:
                if values is None:
                    values = self._estimator_service.evaluate_grid(ps=ps, config=config, grid=grid)

                if stat == StatisticKind.KS:
                    value = self._gof_service.ks_distance(estimate=values, reference=reference)

                else:
                    # as a performance measure Q carries the factor n
                    value = ps.n * self._gof_service.q_distance(estimate=values, reference=reference)

            rows.append(
                self._row(
                    plan=plan,
                    rep=rep,
                    estimator=config.kind.value,
                    statistic=stat.value,
                    h=config.h,
                    method=method,
                    value=value,
                )
            )

        return rows

    def _compare_rep(
        self: 'HarnessService',
        *,
        plan: ExperimentPlan,
        rep: int,
        true_spec: CopulaSpec,
    ) -> List[ResultRow]:
        grid = EvalGrid(m=getattr(settings, 'GRID_SIZE', 101))
        reference = _grid_cdf(true_spec, grid.m)
        sample = self._copula_service.sample(spec=true_spec, n=plan.n, rng=self.rep_rng(plan=plan, rep=rep))
        ps = self._estimator_service.pseudo_obs(sample=sample, variant=plan.variant)
        rows: List[ResultRow] = []

        for kind in plan.estimators:
            config = EstimatorConfig(kind=kind, variant=plan.variant)
            method = ''

            if kind.is_kernel:
                selection = self._bandwidth_service.select_h(ps=ps, kind=kind)
                config = config.with_bandwidth(selection.h)
                method = selection.method.value

            rows.extend(
                self._measure(
                    plan=plan,
                    rep=rep,
                    config=config,
                    ps=ps,
                    true_spec=true_spec,
                    grid=grid,
                    reference=reference,
                    method=method,
                )
            )

        return rows

    def _sweep_rep(
        self: 'HarnessService',
        *,
        plan: ExperimentPlan,
        rep: int,
        true_spec: CopulaSpec,
    ) -> List[ResultRow]:
        grid = EvalGrid(m=getattr(settings, 'GRID_SIZE', 101))
        reference = _grid_cdf(true_spec, grid.m)
        sample = self._copula_service.sample(spec=true_spec, n=plan.n, rng=self.rep_rng(plan=plan, rep=rep))
        ps = self._estimator_service.pseudo_obs(sample=sample, variant=plan.variant)
        options = dict(plan=plan, rep=rep, ps=ps, true_spec=true_spec, grid=grid, reference=reference)
        # empirical copula baseline for the left end of the sweep
        baseline = EstimatorConfig(kind=EstimatorKind.E, variant=plan.variant)
        rows = self._measure(config=baseline, method='baseline', **options)

        for kind in plan.estimators:
            if not kind.is_kernel:
                continue

            for h in plan.h_grid:
                fixed = self._bandwidth_service.fixed(h=h, kind=kind)
                config = EstimatorConfig(kind=kind, h=fixed.h, variant=plan.variant)
                rows.extend(self._measure(config=config, method=fixed.method.value, **options))

            selection = self._bandwidth_service.select_h(ps=ps, kind=kind)
            rows.append(
                self._row(
                    plan=plan,
                    rep=rep,
                    estimator=kind.value,
                    statistic='selected_h',
                    h=selection.h,
                    method=selection.method.value,
                    value=selection.h,
                )
            )

        return rows

    def _gof_rep(
        self: 'HarnessService',
        *,
        plan: ExperimentPlan,
        rep: int,
        true_spec: CopulaSpec,
    ) -> List[ResultRow]:
        sample = self._copula_service.sample(spec=true_spec, n=plan.n, rng=self.rep_rng(plan=plan, rep=rep))
        seed = self.rep_bootstrap_seed(plan=plan, rep=rep)
        rows = []

        for kind in plan.estimators:
            for stat in plan.stats:
                report = self._gof_service.bootstrap_gof(
                    sample=sample,
                    family=plan.null_family,
                    est=EstimatorConfig(kind=kind, variant=plan.variant),
                    stat_kind=stat,
                    B=plan.B,
                    seed=seed,
                    threads=1,
                )
                failed = report.p_value is None
                rows.append(
                    self._row(
                        plan=plan,
                        rep=rep,
                        estimator=kind.value,
                        statistic=stat.value,
                        h=report.h,
                        method=report.status.value if failed else '',
                        value=math.nan if failed else report.p_value,
                        rejected=None if failed else int(report.rejected(plan.alpha)),
                    )
                )

        return rows

    def _run(self: 'HarnessService', *, plan: ExperimentPlan, kind: ExperimentKind, threads=None) -> List[ResultRow]:
        if not isinstance(plan, ExperimentPlan):
            raise ValueError

        if plan.kind != kind:
            raise HarnessServiceException(
                code='invalid_plan',
                message=f'plan of kind {plan.kind.value!r} passed to the {kind.value!r} runner',
            )

        true_spec = self._true_spec(plan=plan)
        logger.info('%s: %s, n=%d, reps=%d, seed=%d', kind.value, true_spec, plan.n, plan.reps, plan.seed)
        block_size = max(1, int(getattr(settings, 'REPS_PER_BLOCK', 50)))
        rows: List[ResultRow] = []

        with joblib.Parallel(n_jobs=resolve_jobs(threads)) as parallel:
            for start in range(0, plan.reps, block_size):
                stop = min(start + block_size, plan.reps)
                blocks = parallel(
                    joblib.delayed(_run_rep)(plan=plan, rep=rep, true_spec=true_spec) for rep in range(start, stop)
                )
                rows.extend(row for block in blocks for row in block)
                logger.info('%s: %d/%d repetitions done', kind.value, stop, plan.reps)

        return rows

    def run_estimator_compare(self: 'HarnessService', *, plan=None, threads=None) -> List[ResultRow]:
        return self._run(plan=plan, kind=ExperimentKind.ESTIMATOR_COMPARE, threads=threads)

    def run_fixed_h_sweep(self: 'HarnessService', *, plan=None, threads=None) -> List[ResultRow]:
        if isinstance(plan, ExperimentPlan):
            if not plan.h_grid:
                raise HarnessServiceException(code='invalid_plan', message='the sweep needs at least one bandwidth')

            # fail before any repetition runs
            for kind in plan.estimators:
                if kind.is_kernel:
                    for h in plan.h_grid:
                        self._bandwidth_service.fixed(h=h, kind=kind)

        return self._run(plan=plan, kind=ExperimentKind.FIXED_H_SWEEP, threads=threads)

    def run_gof_size_power(self: 'HarnessService', *, plan=None, threads=None) -> List[ResultRow]:
        if isinstance(plan, ExperimentPlan):
            # both families must be valid at the plan's tau
            self._copula_service.theta_from_tau(family=plan.null_family, tau=plan.tau)

        return self._run(plan=plan, kind=ExperimentKind.GOF_SIZE_POWER, threads=threads)

    def run(self: 'HarnessService', *, plan: Optional[ExperimentPlan] = None, threads=None) -> List[ResultRow]:
        if not isinstance(plan, ExperimentPlan):
            raise ValueError

        runner = {
            ExperimentKind.ESTIMATOR_COMPARE: self.run_estimator_compare,
            ExperimentKind.FIXED_H_SWEEP: self.run_fixed_h_sweep,
            ExperimentKind.GOF_SIZE_POWER: self.run_gof_size_power,
        }[plan.kind]
        return runner(plan=plan, threads=threads)

    def to_frame(self: 'HarnessService', *, rows: Optional[Iterable[ResultRow]] = None) -> pd.DataFrame:
        if rows is None:
            raise ValueError

        return pd.DataFrame([row.to_dict() for row in rows], columns=list(RESULT_COLUMNS))

    def summarize(self: 'HarnessService', *, rows: Optional[Iterable[ResultRow]] = None) -> List[Dict[str, Any]]:
        """Count, mean and quartiles per (estimator, statistic, method) group,
        with the rejection rate and its binomial standard error for GOF rows.

        Fixed-h sweep rows are grouped per bandwidth as well; elsewhere the
        reported h is the mean of the selected bandwidths.
        """
        frame = self.to_frame(rows=rows)
        frame['h_group'] = frame['h'].where(frame['method'] == 'fixed_h')
        keys = ['experiment', 'true_family', 'tau', 'null_family', 'estimator', 'statistic', 'h_group', 'method']
        summary = []

        for group, block in frame.groupby(keys, sort=False, dropna=False):
            values = block['value'].astype(float).dropna().to_numpy()
            rejected = block['rejected'].dropna().astype(float).to_numpy()
            bandwidths = block['h'].astype(float).dropna()
            entry = dict(zip(keys, group))
            entry['h'] = float(bandwidths.mean()) if bandwidths.size else None
            entry['tau'] = float(entry['tau'])

            if values.size:
                q1, median, q3 = np.percentile(values, [25, 50, 75])
                entry.update(
                    count=int(values.size),
                    mean=float(values.mean()),
                    q1=float(q1),
                    median=float(median),
                    q3=float(q3),
                )

            else:
                entry.update(count=0, mean=None, q1=None, median=None, q3=None)

            if rejected.size:
                rate = float(rejected.mean())
                entry['rejection_rate'] = rate
                entry['rejection_se'] = math.sqrt(rate * (1.0 - rate) / rejected.size)

            else:
                entry['rejection_rate'] = None
                entry['rejection_se'] = None

            summary.append({column: entry[column] for column in SUMMARY_COLUMNS})

        return summary

    def write_rows(
        self: 'HarnessService',
        *,
        rows: Optional[Iterable[ResultRow]] = None,
        path: Optional[Union[str, Path]] = None,
    ) -> pd.DataFrame:
        if path is None:
            raise ValueError

        frame = self.to_frame(rows=rows)
        frame.to_csv(path, index=False, float_format='%.17g', encoding='utf-8', lineterminator='\n')
        return frame

    def write_summary(
        self: 'HarnessService',
        *,
        summary: Optional[List[Dict[str, Any]]] = None,
        path: Optional[Union[str, Path]] = None,
    ) -> str:
        if summary is None or path is None:
            raise ValueError

        text = json.dumps(summary, indent=2, allow_nan=False, default=_json_default)
        Path(path).write_text(text + '\n', encoding='utf-8')
        return text

    def ingest_csv(self: 'HarnessService', *, path: Optional[Union[str, Path]] = None) -> Sample:
        """Two numeric columns, optional header, at least 2 rows."""
        if path is None:
            raise ValueError

        try:
            frame = pd.read_csv(
                path,
                header=None,
                dtype=str,
                skip_blank_lines=False,
                skipinitialspace=True,
                keep_default_na=False,
            )

        except pd.errors.EmptyDataError:
            raise HarnessServiceException(code='insufficient_data', message=f'{path} is empty')

        except pd.errors.ParserError as e:
            raise HarnessServiceException(code='parse_error', message=str(e).strip())

        except (OSError, UnicodeDecodeError) as e:
            raise HarnessServiceException(code='parse_error', message=f'{path}: {e}')

        frame = frame.fillna('').apply(lambda column: column.str.strip())
        # index i is file line i + 1
        frame = frame[(frame != '').any(axis=1)]

        if frame.shape[1] < 2:
            raise HarnessServiceException(
                code='parse_error',
                message=f'{path}: expected two numeric columns, found {frame.shape[1]}',
            )

        if frame.shape[1] > 2:
            logger.warning('%s: using the first two of %d columns', path, frame.shape[1])
            frame = frame.iloc[:, :2]

        numbers = frame.apply(pd.to_numeric, errors='coerce')

        if len(frame) and numbers.iloc[0].isna().all():
            # a first row with no numeric cell is a header
            frame = frame.iloc[1:]
            numbers = numbers.iloc[1:]

        bad = numbers.isna().any(axis=1) | ~np.isfinite(numbers.fillna(0.0)).all(axis=1)

        if bad.any():
            line = int(numbers.index[bad.to_numpy()][0]) + 1
            cells = ', '.join(frame.loc[line - 1].fillna('').tolist())
            raise HarnessServiceException(
                code='parse_error',
                message=f'{path}, line {line}: cannot parse {cells!r} as two numbers',
            )

        if len(numbers) < 2:
            raise HarnessServiceException(
                code='insufficient_data',
                message=f'{path}: at least 2 rows are needed, found {len(numbers)}',
            )

        return Sample(x=numbers.iloc[:, 0].to_numpy(dtype=float), y=numbers.iloc[:, 1].to_numpy(dtype=float))


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()

    raise TypeError(f'{type(value).__name__} is not JSON serializable')


@lru_cache(maxsize=16)
def _grid_cdf(spec: CopulaSpec, m: int) -> np.ndarray:
    u, v = EvalGrid(m=m).mesh
    values = CopulaService().cdf(spec=spec, u=u, v=v)
    values.setflags(write=False)
    return values


def _run_rep(*, plan: ExperimentPlan, rep: int, true_spec: CopulaSpec) -> List[ResultRow]:
    service = HarnessService()
    runner = {
        ExperimentKind.ESTIMATOR_COMPARE: service._compare_rep,
        ExperimentKind.FIXED_H_SWEEP: service._sweep_rep,
        ExperimentKind.GOF_SIZE_POWER: service._gof_rep,
    }[plan.kind]
    return runner(plan=plan, rep=rep, true_spec=true_spec)
