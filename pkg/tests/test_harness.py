# -*- coding: utf-8 -*-
# flake8: noqa

from .example.manage import setup

setup()

import json
import logging

import numpy as np
import pandas as pd
import pytest
from django.test import override_settings
from numpy.testing import assert_allclose

from bandwidth.services import BandwidthServiceException
from copula.models import CopulaFamily
from estimator.models import EstimatorKind, PseudoVariant
from gof.models import StatisticKind
from harness.models import RESULT_COLUMNS, SUMMARY_COLUMNS, ExperimentKind
from harness.services import HarnessService, HarnessServiceException


class IngestTestCase:
    @classmethod
    def setup_class(cls):
        cls.service = HarnessService()

    def ingest(self, tmp_path, text):
        path = tmp_path / 'sample.csv'
        path.write_text(text, encoding='utf-8')
        return self.service.ingest_csv(path=path)

    def test_plain_rows(self, tmp_path):
        sample = self.ingest(tmp_path, '1,2\n3,4\n5,6\n')
        assert_allclose(sample.x, [1.0, 3.0, 5.0])
        assert_allclose(sample.y, [2.0, 4.0, 6.0])

    def test_header_is_skipped(self, tmp_path):
        sample = self.ingest(tmp_path, 'x,y\n1,2\n3,4')
        assert sample.n == 2

    def test_whitespace_and_scientific_notation(self, tmp_path):
        sample = self.ingest(tmp_path, ' 1e-3 , 2.5E2\n3,  -4\n')
        assert_allclose(sample.x, [0.001, 3.0])
        assert_allclose(sample.y, [250.0, -4.0])

    def test_extra_columns_are_ignored(self, tmp_path):
        sample = self.ingest(tmp_path, '1,2,9\n3,4,9\n')
        assert_allclose(sample.y, [2.0, 4.0])

    def test_parse_error_reports_line(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.ingest(tmp_path, 'x,y\n1,2\n3,abc\n')

        assert e.value.code == 'parse_error'
        assert 'line 3' in e.value.message

    def test_malformed_first_row_is_not_a_header(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.ingest(tmp_path, '1,abc\n2,3\n4,5\n6,7\n')

        assert e.value.code == 'parse_error'
        assert 'line 1' in e.value.message

    def test_missing_file(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.service.ingest_csv(path=tmp_path / 'missing.csv')

        assert e.value.code == 'parse_error'

    def test_single_column(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.ingest(tmp_path, '1\n2\n3\n')

        assert e.value.code == 'parse_error'

    def test_single_row(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.ingest(tmp_path, 'x,y\n1,2\n')

        assert e.value.code == 'insufficient_data'

    def test_empty_file(self, tmp_path):
        with pytest.raises(HarnessServiceException) as e:
            self.ingest(tmp_path, '')

        assert e.value.code == 'insufficient_data'


class HarnessServiceTestCase:
    @classmethod
    def setup_class(cls):
        cls.service = HarnessService()

    def plan(self, **payload):
        defaults = {'kind': 'compare', 'true_family': 'frank', 'tau': 0.25, 'seed': 11, 'n': 50, 'reps': 2}
        defaults.update(payload)
        return self.service.build_plan(payload=defaults)

    def test_build_plan_defaults(self):
        plan = self.plan()
        assert plan.kind == ExperimentKind.ESTIMATOR_COMPARE
        assert plan.true_family == CopulaFamily.FRANK
        assert plan.estimators == list(EstimatorKind)
        assert plan.stats == [StatisticKind.KS, StatisticKind.CM, StatisticKind.Q]
        assert plan.B == 19
        assert plan.variant == PseudoVariant.SHIFTED_E
        assert len(plan.h_grid) == 20
        assert_allclose([plan.h_grid[0], plan.h_grid[-1]], [0.005, 0.25])
        assert plan.to_dict()['kind'] == 'compare'

    def test_build_plan_gof_defaults_to_true_family(self):
        plan = self.plan(kind='gof-table', true_family='clayton', tau=0.5)
        assert plan.null_family == CopulaFamily.CLAYTON
        assert plan.estimators == [EstimatorKind.E]
        assert plan.stats == [StatisticKind.CM]

    @pytest.mark.parametrize(
        'payload',
        [
            {'n': 5},
            {'tau': 1.0},
            {'kind': 'unknown'},
            {'estimators': ['xx']},
            {'h_grid': [0.3]},
            {'seed': -1},
            {'unexpected': 1},
            {'kind': 'gof-table', 'null_family': 'independence'},
            {'variant': 'centered', 'estimators': ['t']},
        ],
    )
    def test_invalid_plan(self, payload):
        with pytest.raises(HarnessServiceException) as e:
            self.plan(**payload)

        assert e.value.code == 'invalid_plan'

    def test_rep_streams(self):
        plan = self.plan()
        first = self.service.rep_rng(plan=plan, rep=0).random(5)
        again = self.service.rep_rng(plan=plan, rep=0).random(5)
        other = self.service.rep_rng(plan=plan, rep=1).random(5)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)
        assert self.service.rep_bootstrap_seed(plan=plan, rep=0) != self.service.rep_bootstrap_seed(plan=plan, rep=1)

    def test_estimator_compare(self):
        plan = self.plan(estimators=['e', 'll', 't'])
        rows = self.service.run_estimator_compare(plan=plan, threads=1)
        assert len(rows) == 2 * 3 * 3
        assert [row.rep for row in rows[:9]] == [0] * 9
        assert all(row.value >= 0.0 for row in rows)
        kernel = [row for row in rows if row.estimator == 'll']
        assert all(row.method == 'frank_reference' and 0.0 < row.h <= 0.25 for row in kernel)
        transform = [row for row in rows if row.estimator == 't']
        assert all(row.method == 'normal_reference_t' for row in transform)

    def test_estimator_compare_is_deterministic(self):
        plan = self.plan(estimators=['e', 'mrs'], stats=['ks', 'q'], reps=3)
        serial = self.service.run_estimator_compare(plan=plan, threads=1)
        again = self.service.run_estimator_compare(plan=plan, threads=1)
        parallel = self.service.run_estimator_compare(plan=plan, threads=2)
        assert serial == again
        assert serial == parallel

    def test_fixed_h_sweep(self):
        plan = self.plan(kind='sweep', h_grid=[0.05, 0.1], estimators=['ll'], stats=['ks', 'cm'])
        rows = self.service.run_fixed_h_sweep(plan=plan, threads=1)
        assert len(rows) == 2 * (2 + 2 * 2 + 1)
        baseline = [row for row in rows if row.method == 'baseline']
        assert {row.estimator for row in baseline} == {'e'}
        fixed = [row for row in rows if row.method == 'fixed_h']
        assert sorted({row.h for row in fixed}) == [0.05, 0.1]
        selected = [row for row in rows if row.statistic == 'selected_h']
        assert len(selected) == 2
        assert all(row.value == row.h for row in selected)

    def test_fixed_h_sweep_needs_bandwidths(self):
        plan = self.plan(kind='sweep')
        plan.h_grid = []

        with pytest.raises(HarnessServiceException) as e:
            self.service.run_fixed_h_sweep(plan=plan, threads=1)

        assert e.value.code == 'invalid_plan'

    def test_fixed_h_sweep_rejects_bandwidth(self):
        plan = self.plan(kind='sweep')
        plan.h_grid = [0.1, 0.5]

        with pytest.raises(BandwidthServiceException) as e:
            self.service.run_fixed_h_sweep(plan=plan, threads=1)

        assert e.value.code == 'invalid_bandwidth'

    def test_gof_size_power(self):
        plan = self.plan(kind='gof-table', null_family='frank', B=9)
        rows = self.service.run_gof_size_power(plan=plan, threads=1)
        assert len(rows) == 2
        assert all(row.null_family == 'frank' for row in rows)
        assert all(0.1 <= row.value <= 1.0 for row in rows)
        assert all(row.rejected in (0, 1) for row in rows)

    def test_progress_is_logged_per_block(self, caplog):
        caplog.set_level(logging.INFO, logger='harness.services')
        plan = self.plan(estimators=['e'], stats=['ks'], reps=3)

        with override_settings(REPS_PER_BLOCK=2):
            rows = self.service.run(plan=plan, threads=1)

        progress = [record.getMessage() for record in caplog.records if 'repetitions done' in record.getMessage()]
        assert progress == ['compare: 2/3 repetitions done', 'compare: 3/3 repetitions done']
        assert [row.rep for row in rows] == [0, 1, 2]
        assert rows == self.service.run(plan=plan, threads=1)

    def test_runner_checks_kind(self):
        with pytest.raises(HarnessServiceException) as e:
            self.service.run_fixed_h_sweep(plan=self.plan(), threads=1)

        assert e.value.code == 'invalid_plan'

    def test_summary_matches_rows(self):
        plan = self.plan(estimators=['e', 'mr'], stats=['cm'], reps=4)
        rows = self.service.run(plan=plan, threads=1)
        summary = self.service.summarize(rows=rows)
        assert len(summary) == 2
        assert all(list(entry) == list(SUMMARY_COLUMNS) for entry in summary)

        for entry in summary:
            values = [row.value for row in rows if row.estimator == entry['estimator']]
            assert entry['count'] == 4
            assert_allclose(entry['mean'], np.mean(values), rtol=1e-14)
            assert_allclose(entry['median'], np.median(values), rtol=1e-14)
            assert entry['rejection_rate'] is None

    def test_summary_rejection_rate(self):
        plan = self.plan(kind='gof-table', null_family='frank', B=9, reps=3)
        rows = self.service.run(plan=plan, threads=1)
        (entry,) = self.service.summarize(rows=rows)
        rate = np.mean([row.rejected for row in rows])
        assert_allclose(entry['rejection_rate'], rate)
        assert_allclose(entry['rejection_se'], np.sqrt(rate * (1.0 - rate) / 3.0))

    def test_write_rows_round_trip(self, tmp_path):
        plan = self.plan(estimators=['ll'], stats=['ks', 'cm'])
        rows = self.service.run(plan=plan, threads=1)
        path = tmp_path / 'rows.csv'
        self.service.write_rows(rows=rows, path=path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == list(RESULT_COLUMNS)
        assert frame['value'].tolist() == [row.value for row in rows]
        assert frame['h'].tolist() == [row.h for row in rows]

    def test_write_summary(self, tmp_path):
        plan = self.plan(estimators=['e'], stats=['ks'])
        summary = self.service.summarize(rows=self.service.run(plan=plan, threads=1))
        path = tmp_path / 'summary.json'
        self.service.write_summary(summary=summary, path=path)
        assert json.loads(path.read_text(encoding='utf-8')) == json.loads(json.dumps(summary))
