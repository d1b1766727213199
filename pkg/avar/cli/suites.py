"""
Acceptance batteries behind `avar suite NAME`.  Each suite returns a summary
dictionary with one entry per criterion (measured value, expected value,
pass/fail); the command exits with 2 if any criterion fails.
"""
from __future__ import annotations
from typing import Any, Callable, Optional

import numpy as np
from cpylog import SimpleLogger, get_logger

from avar.core.errors import AvarInputError, PreconditionError
from avar.core.catalog import CATALOG, ELLIPTIC_NAMES, catalog_operator
from avar.core.operator import check_ellipticity, check_cancelling, DEFAULT_SEED
from avar.core.polynomial import kernel_basis, apply_operator_to_polynomial
from avar.core.projection import build_projection, project, volume_measure
from avar.core.voxel import (
    GridFunction, named_domain, build_ball, extend_by_zero, select_hypersurface)
from avar.core.samples import random_smooth_fields
from avar.core.inequality import (
    Constraint, poincare_constant_p2, poincare_l1_lower_bound, verify_inequality, scaling_study,
    sobolev_trace_verify, sobolev_ratio, counterexample_blowup, convergence_study, ANALYTIC_CASES)
from avar.utils.json_utils import to_jsonable

SUITES = ['catalog', 'convergence', 'scaling', 'sobolev', 'projection', 'extension',
          'counterexample', 'verify', 'all']
PROPERTY_TOL = 1e-10
CONVERGENCE_TOL = 0.01
EXTENSION_TOL = 0.05
PERIMETER_TOL = 0.02
COUNTEREXAMPLE_MIN_L1 = 0.4
DISK_RATIO_H = 1. / 128
DISK_RATIO_TOL = 0.03
L1_UPPER_TOL = 0.05


def _criterion(name: str, passed: bool, measured: Any, expected: Any=None) -> dict:
    return {'name': name, 'passed': bool(passed), 'measured': measured, 'expected': expected}


def catalog_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """ellipticity verdicts, kernel dimensions and the cancelling check"""
    criteria = []
    for name, entry in CATALOG.items():
        op = entry.operator
        for field in ('real', 'complex'):
            cert = check_ellipticity(op, field, seed=seed, log=log)
            expected = entry.expected_value(field)
            criteria.append(_criterion(f'{name}.{field}', cert.verdict == expected,
                                       {'verdict': cert.verdict,
                                        'min_singular': cert.min_singular}, expected))
            if name == 'cauchy_riemann' and field == 'complex':
                # xi ~ (1, i) or its conjugate
                xi = cert.witness_xi / np.linalg.norm(cert.witness_xi)
                distance = min(abs(xi[1] - 1j * xi[0]), abs(xi[1] + 1j * xi[0]))
                criteria.append(_criterion(f'{name}.witness', distance <= 1e-4, distance, 0.0))

        expected_dim = entry.expected_value('kernel_dimension')
        if expected_dim is not None:
            kernel = kernel_basis(op, log=log)
            residual = max(apply_operator_to_polynomial(op, p).coefficient_norm()
                           for p in kernel.elements)
            criteria.append(_criterion(
                f'{name}.kernel', kernel.dimension == expected_dim and kernel.stabilized and
                kernel.stable_degree <= 3 and residual <= PROPERTY_TOL,
                {'dimension': kernel.dimension, 'stable_degree': kernel.stable_degree,
                 'residual': residual}, expected_dim))

        expected_cancelling = entry.expected_value('cancelling')
        if expected_cancelling is not None:
            cert = check_cancelling(op, seed=seed, log=log)
            criteria.append(_criterion(f'{name}.cancelling',
                                       cert.is_cancelling == expected_cancelling,
                                       {'verdict': cert.verdict,
                                        'residual_dim': cert.residual_dim}, expected_cancelling))
    return criteria


def convergence_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """C(h) within 1% of the analytic constant at h = 2^-7 with a decreasing error"""
    criteria = []
    for case in ANALYTIC_CASES:
        table = convergence_study(case, log=log)
        errors = table['relative_error'].to_numpy()
        criteria.append(_criterion(f'{case}.error', errors[-1] <= CONVERGENCE_TOL,
                                   table.to_dict(orient='records'), table['C_exact'].iloc[0]))
        criteria.append(_criterion(f'{case}.monotone', bool(np.all(np.diff(errors) < 0.0)),
                                   errors))
    return criteria


def scaling_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """C(B_r, dB_r) / r constant within 2% over r in {1/2, 1, 2}"""
    criteria = []
    for name in ELLIPTIC_NAMES:
        report = scaling_study(catalog_operator(name), seed=seed, log=log)
        criteria.append(_criterion(f'{name}.scaling', report.passed, report.to_dict()))
    return criteria


def sobolev_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    criteria = []
    for name in ELLIPTIC_NAMES:
        op = catalog_operator(name)
        domain = named_domain('unit_disk', 1. / 32)
        report = sobolev_trace_verify(op, domain, seed=seed, log=log)
        criteria.append(_criterion(f'{name}.bounded', report.bounded, report.max_ratio))
        criteria.append(_criterion(f'{name}.dilation', report.dilation_deviation <= 0.02,
                                   report.dilation_deviation, 0.0))
        criteria.append(_criterion(f'{name}.cancelling', report.cancelling['verdict'] == 'cancelling',
                                   report.cancelling['verdict'], 'cancelling'))

    for name, entry in CATALOG.items():
        if entry.operator.dim_space != 1:
            continue
        cert = check_cancelling(entry.operator, seed=seed, log=log)
        criteria.append(_criterion(f'{name}.not_cancelling', not cert.is_cancelling,
                                   cert.verdict, 'not_cancelling'))

    for name, entry in CATALOG.items():
        expected = entry.expected_value('sobolev_disk_constant_ratio')
        if expected is None:
            continue
        domain = build_ball(np.zeros(2), 1.0, DISK_RATIO_H, surface='geometric')
        ratio = sobolev_ratio(entry.operator, domain)
        criteria.append(_criterion(f'{name}.disk_ratio',
                                   abs(ratio - expected) <= DISK_RATIO_TOL * expected,
                                   ratio, expected))
    return criteria


def _projection_properties(pi, fields: list[np.ndarray], scale: float=-2.5) -> dict[str, float]:
    """worst deviations over the sample fields"""
    weights = pi.measure.weights
    points = pi.measure.points

    def inner(u: np.ndarray, v: np.ndarray) -> float:
        return float(np.einsum('q,qn,qn->', weights, u, v))

    errors = {'idempotence': 0.0, 'self_adjointness': 0.0, 'contraction': 0.0,
              'kernel_reproduction': 0.0, 'homogeneity': 0.0}
    rng = np.random.default_rng(0)
    for u, v in zip(fields, fields[1:] + fields[:1]):
        pu = project(pi, u).values
        pv = project(pi, v).values
        errors['idempotence'] = max(errors['idempotence'], np.abs(project(pi, pu).values - pu).max())
        errors['self_adjointness'] = max(errors['self_adjointness'],
                                         abs(inner(pu, v) - inner(u, pv)) / max(1., abs(inner(u, v))))
        errors['contraction'] = max(errors['contraction'], inner(pu, pu) - inner(u, u))
        errors['homogeneity'] = max(errors['homogeneity'],
                                    np.abs(project(pi, scale * u).values - scale * pu).max())
        q = pi.kernel.combine(rng.standard_normal(pi.kernel.dimension)).evaluate(points)
        errors['kernel_reproduction'] = max(errors['kernel_reproduction'],
                                            np.abs(project(pi, q).values - q).max())
    return errors


def projection_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """Pi on the unit square: 100 seeded fields per elliptic operator"""
    criteria = []
    domain = named_domain('unit_square', 1. / 32)
    for name in ELLIPTIC_NAMES:
        op = catalog_operator(name)
        pi = build_projection(kernel_basis(op, log=log), volume_measure(domain), seed=seed, log=log)
        fields = random_smooth_fields(domain, op.dim_from, 100, seed)
        for key, error in _projection_properties(pi, fields).items():
            criteria.append(_criterion(f'{name}.{key}', error <= PROPERTY_TOL, error, 0.0))
    return criteria


def extension_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """|total - (interior + boundary)| <= 5% and the perimeter of the unit square"""
    criteria = []
    domain = named_domain('unit_square', 2. ** -6)
    for name in ELLIPTIC_NAMES:
        op = catalog_operator(name)
        fields = random_smooth_fields(domain, op.dim_from, 20, seed)
        gaps = [extend_by_zero(op, GridFunction(domain, values), log=log)[1].relative_gap
                for values in fields]
        criteria.append(_criterion(f'{name}.extension', max(gaps) <= EXTENSION_TOL,
                                   max(gaps), 0.0))

    op = catalog_operator('gradient2d')
    unused_u, report = extend_by_zero(op, GridFunction(domain, np.ones((domain.ncells, 1))), log=log)
    error = abs(report.boundary - 4.0) / 4.0
    criteria.append(_criterion('gradient2d.perimeter', error <= PERIMETER_TOL, report.boundary, 4.0))
    return criteria


def counterexample_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """f = x_2 e_1 for the d_1-only operator on the unit square"""
    op = catalog_operator('dx_only')
    report = counterexample_blowup(op, named_domain('unit_square', 1. / 32), refinements=1,
                                   seed=seed, log=log)
    table = report.table
    interior = float(table['interior_variation'].abs().max())
    l1 = table['l1_norm'].to_numpy()
    criteria = [
        _criterion('dx_only.interior_variation', interior <= 1e-12, interior, 0.0),
        _criterion('dx_only.l1_norm', bool(np.all(l1 >= COUNTEREXAMPLE_MIN_L1)), l1,
                   CATALOG['dx_only'].expected_value('counterexample_l1')),
        _criterion('dx_only.refinement', report.relative_change <= 0.01, report.relative_change),
    ]
    try:
        counterexample_blowup(catalog_operator('gradient2d'), named_domain('unit_square', 1. / 8),
                              seed=seed, log=log)
        criteria.append(_criterion('gradient2d.precondition', False, 'no error', 'PreconditionError'))
    except PreconditionError:
        criteria.append(_criterion('gradient2d.precondition', True, 'PreconditionError',
                                   'PreconditionError'))
    return criteria


def verify_suite(seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> list[dict]:
    """p = 2 constants give no violations on 200 fresh samples"""
    criteria = []
    domain = named_domain('unit_square', 1. / 16)
    for name in ELLIPTIC_NAMES:
        op = catalog_operator(name)
        constraints = {
            'subset': Constraint.subset(domain),
            'trace': Constraint.trace(select_hypersurface(domain, 'left')),
        }
        for mode, constraint in constraints.items():
            estimate = poincare_constant_p2(op, domain, constraint, seed=seed, log=log)
            report = verify_inequality(estimate, fresh_samples=200, log=log)
            criteria.append(_criterion(f'{name}.{mode}', report.passed,
                                       {'C': estimate.value, 'violations': report.violations,
                                        'worst_ratio': report.worst_ratio}, 0))

    for name, entry in CATALOG.items():
        expected = entry.expected_value('l1_poincare_upper')
        if expected is None:
            continue
        domain = named_domain('interval', 1. / 64)
        estimate = poincare_l1_lower_bound(entry.operator, domain, Constraint.subset(domain),
                                           sample_count=50, seed=seed, log=log)
        passed = estimate.value <= expected * (1. + L1_UPPER_TOL)
        criteria.append(_criterion(f'{name}.l1_upper', passed, estimate.value, expected))
    return criteria


SUITE_FUNCTIONS: dict[str, Callable[..., list[dict]]] = {
    'catalog': catalog_suite,
    'convergence': convergence_suite,
    'scaling': scaling_suite,
    'sobolev': sobolev_suite,
    'projection': projection_suite,
    'extension': extension_suite,
    'counterexample': counterexample_suite,
    'verify': verify_suite,
}


def run_suite(suite: str, seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> dict:
    """summary report: criteria, npassed, passed"""
    log = get_logger(log, level='warning')
    if suite not in SUITES:
        raise AvarInputError(f'suite={suite!r} not in {SUITES}')
    names = list(SUITE_FUNCTIONS) if suite == 'all' else [suite]
    criteria = []
    for name in names:
        log.info(f'running suite {name!r} (seed={seed})')
        for criterion in SUITE_FUNCTIONS[name](seed=seed, log=log):
            criterion['suite'] = name
            criteria.append(criterion)
            if not criterion['passed']:
                log.warning(f'{name}: criterion {criterion["name"]!r} failed; '
                            f'measured={criterion["measured"]}')
    npassed = sum(criterion['passed'] for criterion in criteria)
    return to_jsonable({
        'suite': suite,
        'seed': seed,
        'criteria': criteria,
        'ncriteria': len(criteria),
        'npassed': npassed,
        'passed': npassed == len(criteria),
    })
