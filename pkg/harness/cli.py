"""Command line interface: ``copula-logics`` / ``python -m harness``."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import django
import pandas as pd
from django.conf import settings

from bandwidth.services import BandwidthService
from copula.models import CopulaFamily
from estimator.models import EstimatorConfig, EstimatorKind, EvalGrid, PseudoVariant
from estimator.services import EstimatorService
from gof.models import StatisticKind
from gof.services import GofService
from project.exceptions import ServiceException

from .models import ExperimentKind
from .services import HarnessService, HarnessServiceException

logger = logging.getLogger(__name__)

NULL_FAMILIES = [family.value for family in CopulaFamily if family != CopulaFamily.INDEPENDENCE]

ESTIMATORS = [kind.value for kind in EstimatorKind]


def _csv_list(value: str) -> List[str]:
    return [item.strip().lower() for item in value.split(',') if item.strip()]


def _float_list(value: str) -> List[float]:
    try:
        return [float(item) for item in _csv_list(value)]

    except ValueError:
        raise argparse.ArgumentTypeError(f'not a comma-separated list of numbers: {value!r}')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--threads', type=int, default=None, help='0 = one per CPU')
    common.add_argument('--verbose', '-v', action='count', default=0)

    parser = argparse.ArgumentParser(
        prog='copula-logics',
        description='Kernel copula estimation, bandwidth selection and goodness-of-fit tests.',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    estimate = commands.add_parser('estimate', parents=[common], help='estimate the copula on a grid')
    estimate.add_argument('--input', required=True, type=Path)
    estimate.add_argument('--estimator', required=True, choices=ESTIMATORS)
    bandwidth = estimate.add_mutually_exclusive_group()
    bandwidth.add_argument('--h', type=float, default=None)
    bandwidth.add_argument('--auto-h', action='store_true')
    estimate.add_argument('--variant', choices=[variant.value for variant in PseudoVariant], default='shifted')
    estimate.add_argument('--grid', type=int, default=None)
    estimate.add_argument('--output', required=True, type=Path)
    estimate.add_argument('--clamp', action='store_true', help='clamp values into [0, 1] for display')

    select = commands.add_parser('bandwidth', parents=[common], help='plug-in bandwidth of an estimator')
    select.add_argument('--input', required=True, type=Path)
    select.add_argument('--estimator', required=True, choices=ESTIMATORS[1:])

    gof = commands.add_parser('gof', parents=[common], help='parametric bootstrap goodness-of-fit test')
    gof.add_argument('--input', required=True, type=Path)
    gof.add_argument('--null', required=True, choices=NULL_FAMILIES)
    gof.add_argument('--estimator', default='e', choices=ESTIMATORS)
    gof.add_argument('--stat', default='cm', choices=[kind.value for kind in StatisticKind])
    gof.add_argument('--B', type=int, default=None)
    gof.add_argument('--variant', choices=[variant.value for variant in PseudoVariant], default='shifted')

    simulate = commands.add_parser('simulate', parents=[common], help='Monte Carlo experiments')
    simulate.add_argument('mode', choices=[kind.value for kind in ExperimentKind])
    simulate.add_argument('--plan', type=Path, default=None, help='JSON experiment plan')
    simulate.add_argument('--true-family', choices=[family.value for family in CopulaFamily])
    simulate.add_argument('--tau', type=float)
    simulate.add_argument('--null-family', choices=NULL_FAMILIES)
    simulate.add_argument('--n', type=int)
    simulate.add_argument('--reps', type=int)
    simulate.add_argument('--B', type=int)
    simulate.add_argument('--estimators', type=_csv_list)
    simulate.add_argument('--stats', type=_csv_list)
    simulate.add_argument('--h-grid', type=_float_list)
    simulate.add_argument('--alpha', type=float)
    simulate.add_argument('--variant', choices=[variant.value for variant in PseudoVariant])
    simulate.add_argument('--output', type=Path, default=None)

    return parser


def _configure(verbose: int) -> None:
    # django.setup() applies settings.LOGGING
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'project.settings')
    django.setup(set_prefix=False)

    if verbose:
        logging.getLogger().setLevel(logging.INFO if verbose == 1 else logging.DEBUG)


def _print_json(payload) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + '\n')


def _estimate(args: argparse.Namespace) -> int:
    harness = HarnessService()
    estimators = EstimatorService()
    sample = harness.ingest_csv(path=args.input)
    ps = estimators.pseudo_obs(sample=sample, variant=args.variant)
    config = EstimatorConfig(kind=EstimatorKind(args.estimator), variant=PseudoVariant(args.variant))

    if config.kind.is_kernel:
        if args.h is None:
            config = BandwidthService().configure(ps=ps, config=config)

        else:
            config = config.with_bandwidth(BandwidthService().fixed(h=args.h, kind=config.kind).h)

    grid = EvalGrid(m=args.grid or getattr(settings, 'GRID_SIZE', 101))
    values = estimators.evaluate_grid(ps=ps, config=config, grid=grid, clamp=args.clamp)
    u, v = grid.mesh
    frame = pd.DataFrame({'u': u.ravel(), 'v': v.ravel(), 'estimate': values.ravel()})
    frame.to_csv(args.output, index=False, float_format='%.17g', encoding='utf-8', lineterminator='\n')
    logger.info('wrote %d x %d %s estimate (h=%s) to %s', grid.m, grid.m, config.kind.label, config.h, args.output)
    return 0


def _bandwidth(args: argparse.Namespace) -> int:
    sample = HarnessService().ingest_csv(path=args.input)
    ps = EstimatorService().pseudo_obs(sample=sample)
    selection = BandwidthService().select_h(ps=ps, kind=EstimatorKind(args.estimator))
    payload = selection.to_dict()
    _print_json({name: payload[name] for name in ('h', 'method', 'theta_hat', 'c1', 'c2')})
    return 0


def _gof(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise HarnessServiceException(code='invalid_plan', message='gof needs --seed')

    service = GofService()
    sample = HarnessService().ingest_csv(path=args.input)
    report = service.bootstrap_gof(
        sample=sample,
        family=CopulaFamily(args.null),
        est=EstimatorConfig(kind=EstimatorKind(args.estimator), variant=PseudoVariant(args.variant)),
        stat_kind=StatisticKind(args.stat),
        B=args.B,
        seed=args.seed,
        threads=args.threads,
    )
    _print_json(service.validate_report(report=report))
    return 0


def _simulate(args: argparse.Namespace) -> int:
    service = HarnessService()
    payload = {}

    if args.plan is not None:
        try:
            payload = json.loads(args.plan.read_text(encoding='utf-8'))

        except (OSError, ValueError) as e:
            raise HarnessServiceException(code='invalid_plan', message=f'{args.plan}: {e}')

        if not isinstance(payload, dict):
            raise HarnessServiceException(code='invalid_plan', message=f'{args.plan}: not a JSON object')

    flags = {
        'kind': args.mode,
        'true_family': args.true_family,
        'tau': args.tau,
        'null_family': args.null_family,
        'n': args.n,
        'reps': args.reps,
        'B': args.B,
        'estimators': args.estimators,
        'stats': args.stats,
        'h_grid': args.h_grid,
        'alpha': args.alpha,
        'variant': args.variant,
        'seed': args.seed,
        'output': str(args.output) if args.output else None,
    }
    payload.update({name: value for name, value in flags.items() if value is not None})

    if 'seed' not in payload:
        raise HarnessServiceException(code='invalid_plan', message='simulate needs --seed')

    plan = service.build_plan(payload=payload)
    rows = service.run(plan=plan, threads=args.threads)
    summary = service.summarize(rows=rows)

    if plan.output:
        output = Path(plan.output)
        service.write_rows(rows=rows, path=output)
        service.write_summary(summary=summary, path=output.with_name(f'{output.stem}.summary.json'))
        logger.info('wrote %d rows to %s', len(rows), output)

    _print_json(summary)
    return 0


COMMANDS = {
    'estimate': _estimate,
    'bandwidth': _bandwidth,
    'gof': _gof,
    'simulate': _simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure(args.verbose)
    logger.info('copula-logics %s', args.command)

    try:
        status = COMMANDS[args.command](args)

    except ServiceException as e:
        sys.stderr.write(json.dumps({'error': e.to_dict()}) + '\n')
        return 2

    logger.info('copula-logics %s done', args.command)
    return status


if __name__ == '__main__':
    sys.exit(main())
