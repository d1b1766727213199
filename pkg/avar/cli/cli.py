"""
avar: ellipticity, polynomial nullspaces, nullspace projections and
Poincare/Sobolev constants of first-order operators A = sum_j A_j d_j

Usage:
  avar check-ellipticity --operator OP [options]
  avar cancelling --operator OP [options]
  avar kernel --operator OP [options]
  avar projection --operator OP --domain DOM [options]
  avar poincare --operator OP --domain DOM [options]
  avar verify --operator OP --domain DOM [options]
  avar sobolev --operator OP [options]
  avar scaling --operator OP [options]
  avar counterexample --operator OP [options]
  avar suite <suite> [options]
  avar catalog [options]
  avar -h | --help
  avar --version

Options:
  --operator OP      operator JSON file or catalog name (gradient2d, symgrad2d.json, ...)
  --domain DOM       domain JSON file or named domain (interval, unit_square, unit_disk, ...)
  --field FIELD      real or complex [default: real]
  --max-degree DEG   degree cap of the nullspace solver [default: 8]
  --mode MODE        subset or trace [default: subset]
  --subset E         omega spec (JSON) selecting E = Omega & omega; default: E = Omega
  --omega OMEGA      omega spec (JSON) of Gamma = d(omega) & closure(Omega)
  --gamma GAMMA      named Gamma: left, right, bottom, top, front, back, boundary
  --side SIDE        trace side: inside, outside or both [default: inside]
  --p P              exponent, 1 <= p < inf [default: 2]
  --h H              grid spacing; default: the domain spec or 1/64 (scaling: h at r=1, 1/32)
  --radii R          comma-separated ball radii of the dilation studies [default: 0.5,1,2]
  --samples N        sample count; the default depends on the command
  --refine R         refinement rounds of the sphere search [default: 3]
  --seed SEED        random seed [default: 42]
  --tol TOL          ellipticity/cancelling tolerance [default: 1e-8]
  --out PATH         write the report to PATH instead of stdout
  --format FMT       json or csv; csv applies to tabular studies [default: json]
  --debug            log debug messages
  --quiet            log errors only
  -h, --help         show this message
  --version          show the version

Exit codes: 0 success, 1 input error, 2 verification failure.
"""
from __future__ import annotations
import sys
from typing import Callable, Optional, Union

import pandas as pd
from docopt import docopt, DocoptExit
from cpylog import SimpleLogger

import avar
from avar.core.errors import AvarError, AvarInputError, VerificationError
from avar.core.catalog import CATALOG
from avar.core.operator import check_ellipticity, check_cancelling, DEFAULT_SAMPLES
from avar.core.polynomial import kernel_basis
from avar.core.projection import build_projection, projection_report, surface_measure
from avar.core.voxel import VoxelDomain, select_hypersurface, named_domain, SIDES
from avar.core.inequality import (
    Constraint, poincare_constant_p2, poincare_lp_lower_bound, verify_inequality, side_study,
    sobolev_trace_verify, scaling_study, counterexample_blowup, DEFAULT_SAMPLE_COUNT,
    DEFAULT_SOBOLEV_SAMPLES, DEFAULT_CELLS_PER_RADIUS)
from avar.cli.specs import load_operator, load_domain, load_omega, load_subset
from avar.cli.suites import run_suite
from avar.utils.json_utils import dumps_report, table_to_csv

FORMATS = ['json', 'csv']
Report = Union[dict, pd.DataFrame]


def _log_func(log_type: str, filename: str, lineno: int, msg: str) -> None:
    """stderr only; stdout carries the report"""
    name = '%-8s' % (log_type + ':')
    filename_n = '%s:%s' % (filename, lineno)
    sys.stderr.write(f'{name} {filename_n:<28s} {msg}\n')


def get_cli_logger(args: dict) -> SimpleLogger:
    level = 'info'
    if args['--debug']:
        level = 'debug'
    elif args['--quiet']:
        level = 'error'
    return SimpleLogger(level=level, encoding='utf-8', log_func=_log_func)


def _int(args: dict, key: str, default: Optional[int]=None) -> int:
    value = args[key]
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise AvarInputError(f'{key} expects an integer; got {value!r}')


def _float(args: dict, key: str, default: Optional[float]=None) -> float:
    value = args[key]
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        raise AvarInputError(f'{key} expects a number; got {value!r}')


def _radii(args: dict) -> tuple[float, ...]:
    try:
        radii = tuple(float(value) for value in args['--radii'].split(','))
    except ValueError:
        raise AvarInputError(f'--radii expects comma-separated numbers; got {args["--radii"]!r}')
    if not radii or min(radii) <= 0.0:
        raise AvarInputError(f'--radii must be positive; got {args["--radii"]!r}')
    return radii


def _domain(args: dict, default: Optional[str]=None) -> VoxelDomain:
    value = args['--domain'] or default
    if value is None:
        raise AvarInputError('--domain is required')
    return load_domain(value, h=_float(args, '--h'))


def _side(args: dict) -> str:
    side = args['--side']
    if side not in SIDES + ['both']:
        raise AvarInputError(f'--side={side!r} not in {SIDES + ["both"]}')
    return side


def _gamma_omega(args: dict) -> Union[dict, str]:
    if args['--gamma'] is not None and args['--omega'] is not None:
        raise AvarInputError('give either --gamma or --omega')
    value = args['--gamma'] or args['--omega'] or 'boundary'
    return load_omega(value)


def _constraint(args: dict, domain: VoxelDomain, side: Optional[str]=None) -> Constraint:
    mode = args['--mode']
    if mode == 'subset':
        return Constraint.subset(domain, omega=load_subset(args['--subset']))
    elif mode == 'trace':
        side = side or _side(args)
        if side == 'both':
            raise AvarInputError('--side both applies to the poincare command')
        gamma = select_hypersurface(domain, _gamma_omega(args), side=side)
        return Constraint.trace(gamma)
    raise AvarInputError(f'--mode={mode!r} not in [subset, trace]')


def _estimate(args: dict, domain: VoxelDomain, constraint: Constraint, log: SimpleLogger):
    op = load_operator(args['--operator'])
    p = _float(args, '--p')
    seed = _int(args, '--seed')
    degree_cap = _int(args, '--max-degree')
    if p == 2.0:
        return poincare_constant_p2(op, domain, constraint, degree_cap=degree_cap, seed=seed, log=log)
    return poincare_lp_lower_bound(op, domain, constraint, p=p, degree_cap=degree_cap,
                                   sample_count=_int(args, '--samples', DEFAULT_SAMPLE_COUNT),
                                   seed=seed, log=log)


def cmd_check_ellipticity(args: dict, log: SimpleLogger) -> dict:
    op = load_operator(args['--operator'])
    cert = check_ellipticity(op, args['--field'], tolerance=_float(args, '--tol'),
                             samples=_int(args, '--samples', DEFAULT_SAMPLES),
                             refine_rounds=_int(args, '--refine'), seed=_int(args, '--seed'),
                             log=log)
    return cert.to_dict()


def cmd_cancelling(args: dict, log: SimpleLogger) -> dict:
    op = load_operator(args['--operator'])
    kwargs = {}
    if args['--samples'] is not None:
        kwargs['samples'] = _int(args, '--samples')
    cert = check_cancelling(op, tolerance=_float(args, '--tol'), seed=_int(args, '--seed'),
                            log=log, **kwargs)
    return cert.to_dict()


def cmd_kernel(args: dict, log: SimpleLogger) -> dict:
    op = load_operator(args['--operator'])
    return kernel_basis(op, degree_cap=_int(args, '--max-degree'), log=log).to_dict()


def cmd_projection(args: dict, log: SimpleLogger) -> dict:
    """Pi on E (volume measure) or on Gamma (facet measure)"""
    op = load_operator(args['--operator'])
    domain = _domain(args)
    constraint = _constraint(args, domain)
    kernel = kernel_basis(op, degree_cap=_int(args, '--max-degree'), log=log)
    if constraint.mode == 'subset':
        measure = constraint.measure()
    else:
        measure = surface_measure(constraint.gamma)
    kwargs = {}
    if args['--samples'] is not None:
        kwargs['linf_samples'] = _int(args, '--samples')
    pi = build_projection(kernel, measure, seed=_int(args, '--seed'), log=log, **kwargs)
    report = projection_report(pi)
    report['constraint'] = constraint.to_dict()
    report['domain_hash'] = domain.spec_hash
    report['h'] = domain.h
    return report


def cmd_poincare(args: dict, log: SimpleLogger) -> dict:
    domain = _domain(args)
    if args['--mode'] == 'trace' and _side(args) == 'both':
        op = load_operator(args['--operator'])
        estimates = side_study(op, domain, _gamma_omega(args), seed=_int(args, '--seed'), log=log)
        return {side: estimate.to_dict() for side, estimate in estimates.items()}
    return _estimate(args, domain, _constraint(args, domain), log).to_dict()


def cmd_verify(args: dict, log: SimpleLogger) -> dict:
    domain = _domain(args)
    estimate = _estimate(args, domain, _constraint(args, domain), log)
    report = verify_inequality(estimate, fresh_samples=_int(args, '--samples', DEFAULT_SAMPLE_COUNT),
                               log=log)
    data = report.to_dict()
    if not report.passed:
        raise VerificationError(f'{report.violations} violations of C={estimate.value:.6g}', data)
    return data


def cmd_sobolev(args: dict, log: SimpleLogger) -> Report:
    op = load_operator(args['--operator'])
    default = 'unit_disk' if op.dim_space == 2 else 'unit_ball'
    domain = _domain(args, default=default)
    report = sobolev_trace_verify(op, domain,
                                  sample_count=_int(args, '--samples', DEFAULT_SOBOLEV_SAMPLES),
                                  radii=_radii(args),
                                  seed=_int(args, '--seed'), log=log)
    if args['--format'] == 'csv':
        return report.dilation
    data = report.to_dict()
    if not report.passed:
        raise VerificationError('the Sobolev ratio is unbounded or not dilation invariant', data)
    return data


def cmd_scaling(args: dict, log: SimpleLogger) -> Report:
    op = load_operator(args['--operator'])
    h = _float(args, '--h', 1. / DEFAULT_CELLS_PER_RADIUS)
    if not 0.0 < h <= 0.5:
        raise AvarInputError(f'--h must be in (0, 1/2] for the scaling study; h={h}')
    report = scaling_study(op, radii=_radii(args), cells_per_radius=int(round(1. / h)),
                           seed=_int(args, '--seed'), log=log)
    if args['--format'] == 'csv':
        return report.table
    data = report.to_dict()
    if not report.passed:
        raise VerificationError(f'C(r)/r deviates by {report.max_deviation:.3%}', data)
    return data


def cmd_counterexample(args: dict, log: SimpleLogger) -> Report:
    op = load_operator(args['--operator'])
    if args['--domain'] is None:
        domain = named_domain('unit_square', _float(args, '--h', 1. / 32))
    else:
        domain = _domain(args)
    report = counterexample_blowup(op, domain, degree_cap=min(_int(args, '--max-degree'), 2),
                                   seed=_int(args, '--seed'), log=log)
    if args['--format'] == 'csv':
        return report.table
    return report.to_dict()


def cmd_suite(args: dict, log: SimpleLogger) -> dict:
    summary = run_suite(args['<suite>'], seed=_int(args, '--seed'), log=log)
    if not summary['passed']:
        raise VerificationError(f'{summary["ncriteria"] - summary["npassed"]} failed criteria',
                                summary)
    return summary


def cmd_catalog(args: dict, log: SimpleLogger) -> dict:
    return {'operators': [entry.to_dict() for entry in CATALOG.values()]}


COMMANDS: dict[str, Callable[[dict, SimpleLogger], Report]] = {
    'check-ellipticity': cmd_check_ellipticity,
    'cancelling': cmd_cancelling,
    'kernel': cmd_kernel,
    'projection': cmd_projection,
    'poincare': cmd_poincare,
    'verify': cmd_verify,
    'sobolev': cmd_sobolev,
    'scaling': cmd_scaling,
    'counterexample': cmd_counterexample,
    'suite': cmd_suite,
    'catalog': cmd_catalog,
}
TABULAR_COMMANDS = ['sobolev', 'scaling', 'counterexample']


def write_report(report: Report, out: Optional[str]=None) -> None:
    text = table_to_csv(report) if isinstance(report, pd.DataFrame) else dumps_report(report)
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, 'w', newline='\n') as out_file:
        out_file.write(text)


def main(argv: Optional[list[str]]=None) -> int:
    """runs one subcommand; returns the exit code"""
    try:
        args = docopt(__doc__, argv=argv, version=avar.__version__)
    except DocoptExit as error:
        sys.stderr.write(f'{error}\n')
        return 1

    log = get_cli_logger(args)
    command = next(name for name in COMMANDS if args[name])
    try:
        if args['--format'] not in FORMATS:
            raise AvarInputError(f'--format={args["--format"]!r} not in {FORMATS}')
        if args['--format'] == 'csv' and command not in TABULAR_COMMANDS:
            raise AvarInputError(f'--format csv applies to {TABULAR_COMMANDS}; not {command!r}')
        report = COMMANDS[command](args, log)
    except VerificationError as error:
        log.error(str(error.args[0]))
        if len(error.args) > 1:
            write_report(error.args[1], args['--out'])
        return 2
    except AvarError as error:
        # input and precondition errors
        log.error(str(error))
        return 1
    except OSError as error:
        log.error(f'{command}: {error}')
        return 1
    write_report(report, args['--out'])
    return 0


def cmd_line() -> None:
    sys.exit(main())


if __name__ == '__main__':  # pragma: no cover
    cmd_line()
