"""
Poincare (subset and trace), L^p and trace-style Sobolev inequalities on
voxel domains: constants from the constrained discrete eigenproblem
(p = 2), sample-max lower bounds (1 <= p < inf), verification against
fresh samples, the dilation/scaling studies and the blow-up of the trace
inequality for operators that are not R-elliptic.

For p = 2 the discrete problem is

    min { |A_h u|^2 / |u|^2 : u in V },   V = {u : B u = 0}

with B the l projection functionals of the constraint; the cell volume
h^d cancels from the pencil (L, M) = (h^d A_h^T A_h, h^d I).
"""
from __future__ import annotations
from typing import Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu
from cpylog import SimpleLogger, get_logger

from avar.typing import Side
from avar.core.errors import AvarInputError, PreconditionError, DegenerateConstraintError
from avar.core.operator import Operator, check_ellipticity, check_cancelling
from avar.core.catalog import catalog_entry
from avar.core.polynomial import kernel_basis, hyperplane_counterexample, DEFAULT_DEGREE_CAP
from avar.core.projection import (
    DiscreteMeasure, ProjectionOperator, build_projection, project, volume_measure,
    surface_measure)
from avar.core.voxel import (
    VoxelDomain, Hypersurface, GridFunction, select_hypersurface, omega_indicator,
    total_A_variation, trace_restrict, boundary_term, build_ball, named_domain, _check_operator)
from avar.core.samples import (
    random_smooth_fields, random_mollified_indicators, mollified_indicator)
from avar.utils.json_utils import to_jsonable

DEFAULT_SEED = 42
DEFAULT_SAMPLE_COUNT = 200
DEFAULT_SOBOLEV_SAMPLES = 100
DEFAULT_CELLS_PER_RADIUS = 32
DENSE_MAX_UNKNOWNS = 1500
RESIDUAL_TOL = 1e-8
ZERO_RTOL = 1e-12
SCALING_TOL = 0.02
DILATION_TOL = 0.02
REFINEMENT_TOL = 0.01
POLISH_ITERATIONS = 10
MODES = ['subset', 'trace']
INEQUALITIES = ['subset_poincare', 'trace_poincare', 'sobolev_trace']


class Constraint:
    def __init__(self, mode: str, domain: VoxelDomain, cells: Optional[np.ndarray]=None,
                 gamma: Optional[Hypersurface]=None, description: Optional[dict]=None):
        """
        Parameters
        ----------
        mode : str
            'subset': Pi_E u = 0 with E the given cells
            'trace': Pi_Gamma tr u = 0
        cells : (ncells,) bool array or int array of cell ids; default=all cells
        gamma : Hypersurface
            required for mode='trace'; traces come from gamma's declared side
        """
        if mode not in MODES:
            raise AvarInputError(f'mode={mode!r} not in {MODES}')
        self.mode = mode
        self.domain = domain
        self.gamma = gamma
        self.description = {} if description is None else description
        if mode == 'subset':
            if cells is None:
                cells = np.arange(domain.ncells)
            cells = np.asarray(cells)
            if cells.dtype == bool:
                cells = np.flatnonzero(cells)
            if len(cells) == 0:
                raise AvarInputError('the subset E has no cells')
            self.cells = cells.astype('int64')
        else:
            if gamma is None:
                raise AvarInputError("mode='trace' requires a hypersurface")
            if gamma.domain is not domain:
                raise AvarInputError('the hypersurface belongs to another domain')
            cells = gamma.trace_cells
            if np.any(cells < 0):
                raise AvarInputError(f'gamma has facets without a domain cell on side={gamma.side!r}')
            self.cells = cells

    @classmethod
    def subset(cls, domain: VoxelDomain, cells: Optional[np.ndarray]=None,
               omega: Optional[dict]=None) -> Constraint:
        """E = the given cells, the cells with centers in omega, or all of Omega"""
        description = {'E': 'domain'}
        if omega is not None:
            cells = omega_indicator(omega, domain)(domain.centers)
            description = {'E': omega}
        elif cells is not None:
            description = {'E': 'cells'}
        return cls('subset', domain, cells=cells, description=description)

    @classmethod
    def trace(cls, gamma: Hypersurface) -> Constraint:
        return cls('trace', gamma.domain, gamma=gamma,
                   description={'omega': gamma.source, 'side': gamma.side})

    @property
    def inequality(self) -> str:
        return 'subset_poincare' if self.mode == 'subset' else 'trace_poincare'

    def measure(self) -> DiscreteMeasure:
        """
        volume measure on E, or the facet areas of gamma placed at the
        trace cells.

        The discrete trace is the piecewise-constant value of the adjacent
        cell, so the surface points sit at those cell centers rather than at
        the facet centers; this keeps Pi_Gamma(tr q) = q exact for every q in
        N(A) and leaves an O(h) quadrature offset of h/2 along the normal,
        which is the first-order error seen in the trace constants.
        """
        if self.mode == 'subset':
            return volume_measure(self.domain, self.cells)
        return DiscreteMeasure(self.domain.centers[self.cells], self.gamma.areas, kind='surface')

    def to_dict(self) -> dict:
        data = {'mode': self.mode, 'npoints': len(self.cells)}
        data.update(self.description)
        return to_jsonable(data)


def constraint_projection(op: Operator, constraint: Constraint,
                          degree_cap: int=DEFAULT_DEGREE_CAP,
                          log: Optional[SimpleLogger]=None) -> ProjectionOperator:
    """Pi_E or Pi_Gamma; a rank-deficient Gram matrix is a DegenerateConstraintError"""
    log = get_logger(log, level='warning')
    kernel = kernel_basis(op, degree_cap=degree_cap, log=log)
    pi = build_projection(kernel, constraint.measure(), log=log)
    if pi.gram_rank < kernel.dimension:
        name = 'Pi_E' if constraint.mode == 'subset' else 'Pi_Gamma'
        raise DegenerateConstraintError(
            f'{name} does not separate N(A): Gram rank {pi.gram_rank} < dim N(A)={kernel.dimension} '
            f'for the {constraint.mode} constraint {constraint.description}')
    return pi


def constraint_matrix(pi: ProjectionOperator, constraint: Constraint) -> np.ndarray:
    """(l, ncells*N) matrix B with B u.ravel() = the coefficients of Pi u"""
    domain = constraint.domain
    nbasis = pi.l
    nvalues = pi.dim_values
    bmatrix = np.zeros((nbasis, domain.ncells, nvalues))
    weighted = pi.measure.weights[:, np.newaxis, np.newaxis] * pi.basis_values
    for j in range(nbasis):
        np.add.at(bmatrix[j], constraint.cells, weighted[:, j, :])
    return bmatrix.reshape(nbasis, domain.ncells * nvalues)


def projection_residual(pi: ProjectionOperator, constraint: Constraint,
                        values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Pi u evaluated on the cells, coefficients of Pi u) for cell values u"""
    projected = project(pi, values[constraint.cells])
    return projected.evaluate(constraint.domain.centers), projected.coefficients


class ConstantEstimate:
    def __init__(self, inequality: str, p: float, value: float, method: str, h: float,
                 seed: int=DEFAULT_SEED, sample_count: int=0, violations: int=0,
                 eigenvalue: Optional[float]=None, residual: Optional[float]=None,
                 operator: Optional[Operator]=None, domain: Optional[VoxelDomain]=None,
                 constraint: Optional[Constraint]=None,
                 projection: Optional[ProjectionOperator]=None):
        assert inequality in INEQUALITIES, inequality
        assert method in {'eigenproblem', 'sample_max'}, method
        assert p >= 1.0, p
        self.inequality = inequality
        self.p = p
        self.value = value
        self.method = method
        self.h = h
        self.seed = seed
        self.sample_count = sample_count
        self.violations = violations
        self.eigenvalue = eigenvalue
        self.residual = residual
        self.operator = operator
        self.domain = domain
        self.constraint = constraint
        self.projection = projection

        # filled in by the estimators
        self.eigenvector = None
        self.constraint_residual = None
        self.solver = None
        self.skipped = 0
        self.blowups = []
        self.ratios = None

    def to_dict(self) -> dict:
        eigenvalue = None
        if self.eigenvalue is not None:
            eigenvalue = {'lambda_min': self.eigenvalue, 'residual': self.residual}
        return to_jsonable({
            'inequality': self.inequality,
            'p': self.p,
            'value': self.value,
            'method': self.method,
            'eigenvalue': eigenvalue,
            'h': self.h,
            'seed': self.seed,
            'sample_count': self.sample_count,
            'violations': self.violations,
            'operator': None if self.operator is None else self.operator.name,
            'domain_hash': None if self.domain is None else self.domain.spec_hash,
            'constraint': None if self.constraint is None else self.constraint.to_dict(),
            'l': None if self.projection is None else self.projection.l,
            'solver': self.solver,
            'constraint_residual': self.constraint_residual,
            'skipped': self.skipped,
            'blowups': self.blowups,
            'tolerances': {'residual': RESIDUAL_TOL, 'zero_rtol': ZERO_RTOL},
        })

    def __repr__(self) -> str:
        return (f'ConstantEstimate(inequality={self.inequality!r}, p={self.p}, '
                f'value={self.value:.6g}, method={self.method!r}, h={self.h:g})')


def _dense_constrained_min(lap: sp.csr_matrix, bmatrix: np.ndarray) -> tuple[float, np.ndarray]:
    """lowest eigenpair of Z^T L Z with Z an orthonormal basis of ker B"""
    zbasis = scipy.linalg.null_space(bmatrix)
    reduced = zbasis.T @ (lap @ zbasis)
    reduced = 0.5 * (reduced + reduced.T)
    eigenvalues, eigenvectors = scipy.linalg.eigh(reduced, subset_by_index=[0, 0])
    return float(eigenvalues[0]), zbasis @ eigenvectors[:, 0]


def _sparse_constrained_min(lap: sp.csr_matrix, qbasis: np.ndarray, seed: int,
                            log: SimpleLogger) -> tuple[float, np.ndarray]:
    """
    Lowest eigenpair of K = P L P + mu Q Q^T (P = I - Q Q^T) by shift-invert
    at sigma = -1.  K = L + U S U^T with U = [Q, L Q], so (K + I)^-1 follows
    from a sparse LU of L + I and the Woodbury identity.
    """
    nunknowns, nconstraints = qbasis.shape
    identity = np.eye(nconstraints)
    g = np.asarray(lap @ qbasis)
    x = qbasis.T @ g + 2.0 * abs(lap).sum(axis=1).max() * identity
    umatrix = np.hstack([qbasis, g])
    smatrix = np.block([[x, -identity], [-identity, np.zeros_like(identity)]])
    sinv = np.block([[np.zeros_like(identity), -identity], [-identity, -x]])

    lu = splu((lap + sp.identity(nunknowns, format='csr')).tocsc())
    y = lu.solve(umatrix)
    capacitance = scipy.linalg.lu_factor(sinv + umatrix.T @ y)

    def matvec(v: np.ndarray) -> np.ndarray:
        v = np.ravel(v)
        return lap @ v + umatrix @ (smatrix @ (umatrix.T @ v))

    def solve(v: np.ndarray) -> np.ndarray:
        z = lu.solve(np.ravel(v))
        return z - y @ scipy.linalg.lu_solve(capacitance, umatrix.T @ z)

    kmatrix = LinearOperator((nunknowns, nunknowns), matvec=matvec, dtype='float64')
    opinv = LinearOperator((nunknowns, nunknowns), matvec=solve, dtype='float64')
    v0 = np.random.default_rng(seed).standard_normal(nunknowns)
    v0 -= qbasis @ (qbasis.T @ v0)
    eigenvalues, eigenvectors = eigsh(kmatrix, k=1, sigma=-1.0, which='LM',
                                      OPinv=opinv, v0=v0, tol=0)
    lam = float(eigenvalues[0])
    u = eigenvectors[:, 0]

    # inverse iteration polish
    for iteration in range(POLISH_ITERATIONS):
        u -= qbasis @ (qbasis.T @ u)
        u /= np.linalg.norm(u)
        lam = float(u @ matvec(u))
        residual = _projected_residual(lap, qbasis, lam, u)
        log.debug(f'eigenpair polish {iteration}: lambda={lam:.12g} residual={residual:.3e}')
        if residual <= 0.01 * RESIDUAL_TOL:
            break
        u = solve(u)
    return lam, u


def _projected_residual(lap: sp.csr_matrix, qbasis: np.ndarray, lam: float,
                        u: np.ndarray) -> float:
    """|P (L u - lam u)| / |u|"""
    r = lap @ u - lam * u
    r -= qbasis @ (qbasis.T @ r)
    return float(np.linalg.norm(r) / np.linalg.norm(u))


def poincare_constant_p2(op: Operator, domain: VoxelDomain, constraint: Constraint,
                         degree_cap: int=DEFAULT_DEGREE_CAP, seed: int=DEFAULT_SEED,
                         solver: str='auto',
                         log: Optional[SimpleLogger]=None) -> ConstantEstimate:
    """
    C = lambda_min^(-1/2) for |u - Pi u|_2 <= C |A_h u|_2

    solver : str; default='auto'
        'dense' (orthogonal complement + eigh), 'sparse' (shift-invert),
        'auto' picks dense up to DENSE_MAX_UNKNOWNS unknowns
    """
    log = get_logger(log, level='warning')
    _check_operator(op, domain)
    if constraint.domain is not domain:
        raise AvarInputError('the constraint belongs to another domain')
    if solver not in {'auto', 'dense', 'sparse'}:
        raise AvarInputError(f'solver={solver!r} not in [auto, dense, sparse]')
    if not domain.connected:
        raise AvarInputError('Poincare constants need a connected domain')
    cert = check_ellipticity(op, 'complex', samples=1024, seed=seed, log=log)
    if not cert.is_elliptic:
        if constraint.mode == 'trace' and not check_ellipticity(op, 'real', samples=1024,
                                                                  seed=seed, log=log).is_elliptic:
            log.warning(f'{op.name} is not R-elliptic: a trace-Poincare constant may not exist '
                        '(the restriction to a hyperplane is not injective on N(A))')
        raise PreconditionError(f'{op.name} is not C-elliptic (min_singular={cert.min_singular:.3e}); '
                                'N(A) is infinite-dimensional and Pi is not defined')

    pi = constraint_projection(op, constraint, degree_cap=degree_cap, log=log)
    a_h = domain.discrete_operator(op)
    lap = (a_h.T @ a_h).tocsr()
    bmatrix = constraint_matrix(pi, constraint)
    qbasis = scipy.linalg.orth(bmatrix.T)
    if qbasis.shape[1] < pi.l:
        raise DegenerateConstraintError(
            f'the {constraint.mode} constraint has rank {qbasis.shape[1]} < l={pi.l} on the grid')

    nunknowns = lap.shape[0]
    if solver == 'dense' or (solver == 'auto' and nunknowns <= DENSE_MAX_UNKNOWNS):
        solver = 'dense'
        lam, u = _dense_constrained_min(lap, bmatrix)
    else:
        solver = 'sparse'
        lam, u = _sparse_constrained_min(lap, qbasis, seed, log)
    u -= qbasis @ (qbasis.T @ u)
    residual = _projected_residual(lap, qbasis, lam, u)
    if not lam > ZERO_RTOL * abs(lap).sum(axis=1).max():
        raise AvarInputError(f'{op.name}: lambda_min={lam:.3e} vanishes on the constrained space; '
                             'the discrete operator has a kernel outside N(A)')
    if residual > RESIDUAL_TOL:
        log.warning(f'{op.name}: eigen residual {residual:.3e} exceeds {RESIDUAL_TOL:g}')

    # unit L^2 norm: sum h^d |u|^2 = 1
    u = u / np.sqrt(domain.cell_volume * (u @ u))
    values = u.reshape(domain.ncells, op.dim_from)
    unused_field, coefficients = projection_residual(pi, constraint, values)

    estimate = ConstantEstimate(
        constraint.inequality, 2.0, lam ** -0.5, 'eigenproblem',
        domain.h, seed=seed, eigenvalue=lam, residual=residual, operator=op, domain=domain,
        constraint=constraint, projection=pi)
    estimate.eigenvector = values
    estimate.constraint_residual = float(np.linalg.norm(coefficients))
    estimate.solver = solver
    log.info(f'{op.name}: p=2 {constraint.mode} constant {estimate.value:.8g} '
             f'(lambda={lam:.10g}, residual={residual:.2e}, {solver}, n={nunknowns})')
    return estimate


def _lp_norm(domain: VoxelDomain, values: np.ndarray, p: float) -> float:
    pointwise = np.linalg.norm(values, axis=1)
    return float((domain.cell_volume * np.sum(pointwise ** p)) ** (1. / p))


def _ratio_terms(domain: VoxelDomain, a_h: sp.csr_matrix, pi: ProjectionOperator,
                 constraint: Constraint, values: np.ndarray, p: float) -> tuple[float, float, float]:
    """(|u - Pi u|_p, |A_h u|_p, |u|_p)"""
    projected, unused_coefficients = projection_residual(pi, constraint, values)
    au = (a_h @ values.ravel()).reshape(domain.ncells, -1)
    return (_lp_norm(domain, values - projected, p), _lp_norm(domain, au, p),
            _lp_norm(domain, values, p))


def _sample_ratios(domain: VoxelDomain, a_h: sp.csr_matrix, pi: ProjectionOperator,
                   constraint: Constraint, fields: list[np.ndarray], p: float,
                   log: SimpleLogger) -> tuple[np.ndarray, int, list[int]]:
    """ratios of the usable samples, the number of 0/0 skips and the blow-up indices"""
    ratios = []
    skipped = 0
    blowups = []
    for isample, values in enumerate(fields):
        numerator, denominator, scale = _ratio_terms(domain, a_h, pi, constraint, values, p)
        zero = ZERO_RTOL * max(scale, 1e-300)
        if denominator <= zero:
            if numerator <= zero:
                skipped += 1
                log.info(f'sample {isample} lies in N(A) (0/0); skipped')
            else:
                blowups.append(isample)
                log.warning(f'sample {isample}: |A_h u|={denominator:.3e} with '
                            f'|u - Pi u|={numerator:.3e}; blow-up witness')
            continue
        ratios.append(numerator / denominator)
    return np.array(ratios), skipped, blowups


def poincare_lp_lower_bound(op: Operator, domain: VoxelDomain, constraint: Constraint,
                            p: float=1.0, sample_count: int=DEFAULT_SAMPLE_COUNT,
                            seed: int=DEFAULT_SEED, fields: Optional[list[np.ndarray]]=None,
                            degree_cap: int=DEFAULT_DEGREE_CAP,
                            log: Optional[SimpleLogger]=None) -> ConstantEstimate:
    """
    max over seeded smooth samples of |u - Pi u|_p / |A_h u|_p; a lower
    bound for the L^p constant

    fields : list of (ncells, N) arrays; default=random_smooth_fields
    """
    log = get_logger(log, level='warning')
    _check_operator(op, domain)
    if not 1.0 <= p < np.inf:
        raise AvarInputError(f'p must be in [1, inf); p={p}')
    pi = constraint_projection(op, constraint, degree_cap=degree_cap, log=log)
    a_h = domain.discrete_operator(op)
    if fields is None:
        fields = random_smooth_fields(domain, op.dim_from, sample_count, seed)
    ratios, skipped, blowups = _sample_ratios(domain, a_h, pi, constraint, fields, p, log)
    value = float(ratios.max()) if len(ratios) else 0.0

    estimate = ConstantEstimate(
        constraint.inequality, float(p), value, 'sample_max', domain.h, seed=seed,
        sample_count=len(ratios), operator=op, domain=domain, constraint=constraint,
        projection=pi)
    estimate.skipped = skipped
    estimate.blowups = blowups
    estimate.ratios = ratios
    log.info(f'{op.name}: p={p:g} {constraint.mode} lower bound {value:.6g} from '
             f'{len(ratios)} samples ({skipped} skipped, {len(blowups)} blow-ups)')
    return estimate


def poincare_l1_lower_bound(op: Operator, domain: VoxelDomain, constraint: Constraint,
                            sample_count: int=DEFAULT_SAMPLE_COUNT, seed: int=DEFAULT_SEED,
                            fields: Optional[list[np.ndarray]]=None,
                            degree_cap: int=DEFAULT_DEGREE_CAP,
                            log: Optional[SimpleLogger]=None) -> ConstantEstimate:
    """|u - Pi u|_1 / |A u|(Omega) maximized over the sample family"""
    return poincare_lp_lower_bound(op, domain, constraint, p=1.0, sample_count=sample_count,
                                   seed=seed, fields=fields, degree_cap=degree_cap, log=log)


class VerificationReport:
    def __init__(self, estimate: ConstantEstimate, samples: int, seed: int, tol_rel: float,
                 violations: int, worst_ratio: float, skipped: int=0):
        self.estimate = estimate
        self.samples = samples
        self.seed = seed
        self.tol_rel = tol_rel
        self.violations = violations
        self.worst_ratio = worst_ratio
        self.skipped = skipped

    @property
    def passed(self) -> bool:
        return self.violations == 0

    @property
    def new_lower_bound(self) -> Optional[float]:
        """a sample-max constant is raised to the worst fresh ratio"""
        if self.estimate.method != 'sample_max':
            return None
        return max(self.estimate.value, self.worst_ratio)

    def to_dict(self) -> dict:
        return to_jsonable({
            'estimate': self.estimate.to_dict(),
            'samples': self.samples,
            'seed': self.seed,
            'tol_rel': self.tol_rel,
            'violations': self.violations,
            'worst_ratio': self.worst_ratio,
            'skipped': self.skipped,
            'new_lower_bound': self.new_lower_bound,
            'passed': self.passed,
        })


def verify_inequality(estimate: ConstantEstimate, fresh_samples: int=DEFAULT_SAMPLE_COUNT,
                      seed: Optional[int]=None,
                      log: Optional[SimpleLogger]=None) -> VerificationReport:
    """
    counts fresh samples with ratio > (1 + 10 h) C; the default seed is
    estimate.seed + 1
    """
    log = get_logger(log, level='warning')
    if estimate.operator is None or estimate.domain is None:
        raise AvarInputError('the estimate does not carry its operator and domain')
    seed = estimate.seed + 1 if seed is None else seed
    op = estimate.operator
    domain = estimate.domain
    tol_rel = 10.0 * domain.h

    if estimate.inequality == 'sobolev_trace':
        fields = random_smooth_fields(domain, op.dim_from, fresh_samples, seed)
        ratios, skipped = _sobolev_ratios(op, domain, fields)
    else:
        a_h = domain.discrete_operator(op)
        fields = random_smooth_fields(domain, op.dim_from, fresh_samples, seed)
        ratios, skipped, blowups = _sample_ratios(
            domain, a_h, estimate.projection, estimate.constraint, fields, estimate.p, log)
        if blowups:
            ratios = np.hstack([ratios, np.full(len(blowups), np.inf)])

    worst = float(ratios.max()) if len(ratios) else 0.0
    violations = int(np.sum(ratios > (1.0 + tol_rel) * estimate.value))
    estimate.violations = violations
    report = VerificationReport(estimate, fresh_samples, seed, tol_rel, violations, worst,
                                skipped=skipped)
    log.info(f'{op.name}: {violations} violations of C={estimate.value:.6g} over '
             f'{fresh_samples} samples; worst ratio {worst:.6g}')
    return report


def sobolev_terms(op: Operator, domain: VoxelDomain,
                  values: np.ndarray) -> tuple[float, float, float]:
    """
    (|u|_{d/(d-1)}, |A_h u|(Omega), sum_facets area |A[nu] tr u|) for
    cell values u; the last two are the extension-by-zero terms
    """
    ndim = domain.ndim
    q = ndim / (ndim - 1.)
    lhs = _lp_norm(domain, values, q)
    u = GridFunction(domain, values)
    interior = total_A_variation(op, u)
    boundary = boundary_term(op, trace_restrict(u, domain.boundary_hypersurface()))
    return lhs, interior, boundary


def sobolev_ratio(op: Operator, domain: VoxelDomain, values: Optional[np.ndarray]=None) -> float:
    """
    |u|_{d/(d-1)} / (|A_h u|(Omega) + sum area |A[nu] tr u|); u = 1 by default.
    For the gradient on the unit disk with surface='geometric' this tends
    to sqrt(pi) / (2 pi).
    """
    if domain.ndim < 2:
        raise AvarInputError(f'the Sobolev inequality needs d >= 2; d={domain.ndim}')
    if values is None:
        values = np.ones((domain.ncells, op.dim_from))
    lhs, interior, boundary = sobolev_terms(op, domain, values)
    rhs = interior + boundary
    if not rhs > 0.0:
        raise AvarInputError(f'{op.name}: the Sobolev right-hand side vanishes')
    return lhs / rhs


def _sobolev_ratios(op: Operator, domain: VoxelDomain,
                    fields: list[np.ndarray]) -> tuple[np.ndarray, int]:
    ratios = []
    skipped = 0
    for values in fields:
        lhs, interior, boundary = sobolev_terms(op, domain, values)
        rhs = interior + boundary
        if lhs == 0.0 and rhs == 0.0:
            skipped += 1
            continue
        ratios.append(lhs / rhs if rhs > 0.0 else np.inf)
    return np.array(ratios), skipped


def _require_sobolev(op: Operator, seed: int, log: SimpleLogger) -> dict:
    if op.dim_space < 2:
        raise PreconditionError(
            f'{op.name}: the trace-style Sobolev inequality needs d >= 2 and a cancelling '
            'operator; for d = 1 no operator is cancelling')
    cert = check_cancelling(op, seed=seed, log=log)
    if not cert.is_cancelling:
        raise PreconditionError(
            f'{op.name} is not cancelling (residual_dim={cert.residual_dim}); the Sobolev '
            'inequality needs an R-elliptic and cancelling operator')
    return cert.to_dict()


def sobolev_dilation_study(op: Operator, radii: tuple[float, ...]=(0.5, 1.0, 2.0),
                           cells_per_radius: int=128, profile_radius: float=0.5,
                           profile_width: float=0.1, surface: str='staircase',
                           log: Optional[SimpleLogger]=None) -> pd.DataFrame:
    """
    u_r(x) = u(x / r) on B_r with h = r / cells_per_radius for a mollified
    indicator u; both sides scale like r^(d-1)
    """
    log = get_logger(log, level='warning')
    ndim = op.dim_space
    direction = np.ones(op.dim_from) / np.sqrt(op.dim_from)
    rows = []
    for radius in radii:
        domain = build_ball(np.zeros(ndim), radius, radius / cells_per_radius, surface=surface)
        values = mollified_indicator(domain.centers / radius, np.zeros(ndim), profile_radius,
                                     profile_width, direction)
        lhs, interior, boundary = sobolev_terms(op, domain, values)
        rows.append({'r': radius, 'h': domain.h, 'lhs': lhs, 'interior': interior,
                     'boundary': boundary, 'ratio': lhs / (interior + boundary)})
        log.debug(f'{op.name}: dilation r={radius:g}: ratio={rows[-1]["ratio"]:.10g}')
    table = pd.DataFrame(rows)
    mean = table['ratio'].mean()
    table['deviation'] = (table['ratio'] - mean).abs() / mean
    return table


class SobolevReport:
    def __init__(self, operator: Operator, domain: VoxelDomain, ratios: np.ndarray,
                 skipped: int, seed: int, cancelling: dict,
                 dilation: Optional[pd.DataFrame]=None):
        self.operator = operator
        self.domain = domain
        self.ratios = ratios
        self.skipped = skipped
        self.seed = seed
        self.cancelling = cancelling
        self.dilation = dilation

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if len(self.ratios) else 0.0

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))

    @property
    def dilation_deviation(self) -> Optional[float]:
        if self.dilation is None:
            return None
        return float(self.dilation['deviation'].max())

    @property
    def passed(self) -> bool:
        deviation = self.dilation_deviation
        return self.bounded and (deviation is None or deviation <= DILATION_TOL)

    def estimate(self) -> ConstantEstimate:
        return ConstantEstimate('sobolev_trace', self.domain.ndim / (self.domain.ndim - 1.),
                                self.max_ratio, 'sample_max', self.domain.h, seed=self.seed,
                                sample_count=len(self.ratios), operator=self.operator,
                                domain=self.domain)

    def to_dict(self) -> dict:
        return to_jsonable({
            'operator': self.operator.name,
            'domain_hash': self.domain.spec_hash,
            'h': self.domain.h,
            'seed': self.seed,
            'samples': len(self.ratios) + self.skipped,
            'skipped': self.skipped,
            'max_ratio': self.max_ratio,
            'bounded': self.bounded,
            'cancelling': self.cancelling,
            'dilation': None if self.dilation is None else self.dilation.to_dict(orient='records'),
            'dilation_deviation': self.dilation_deviation,
            'tolerances': {'dilation': DILATION_TOL},
            'passed': self.passed,
        })


def sobolev_trace_verify(op: Operator, domain: VoxelDomain,
                         sample_count: int=DEFAULT_SOBOLEV_SAMPLES, seed: int=DEFAULT_SEED,
                         radii: Optional[tuple[float, ...]]=(0.5, 1.0, 2.0),
                         cells_per_radius: int=128,
                         log: Optional[SimpleLogger]=None) -> SobolevReport:
    """
    max |u|_{d/(d-1)} / (|A_h u|(Omega) + |tr u (x)_A nu|_{L^1(dOmega)}) over
    smooth samples and mollified indicators, plus the dilation study
    (radii=None skips it)
    """
    log = get_logger(log, level='warning')
    _check_operator(op, domain)
    cancelling = _require_sobolev(op, seed, log)
    nsmooth = sample_count // 2
    fields = (random_smooth_fields(domain, op.dim_from, nsmooth, seed) +
              random_mollified_indicators(domain, op.dim_from, sample_count - nsmooth, seed + 1))
    ratios, skipped = _sobolev_ratios(op, domain, fields)
    dilation = None
    if radii is not None:
        dilation = sobolev_dilation_study(op, radii, cells_per_radius=cells_per_radius, log=log)
    report = SobolevReport(op, domain, ratios, skipped, seed, cancelling, dilation)
    if not report.bounded:
        log.warning(f'{op.name}: unbounded Sobolev ratio (a sample with zero right-hand side)')
    log.info(f'{op.name}: Sobolev max ratio {report.max_ratio:.6g} over {len(ratios)} samples')
    return report


class ScalingReport:
    def __init__(self, operator: Operator, table: pd.DataFrame, cells_per_radius: int):
        self.operator = operator
        self.table = table
        self.cells_per_radius = cells_per_radius

    @property
    def mean(self) -> float:
        return float(self.table['C_over_r'].mean())

    @property
    def max_deviation(self) -> float:
        return float(((self.table['C_over_r'] - self.mean).abs() / self.mean).max())

    @property
    def passed(self) -> bool:
        return self.max_deviation <= SCALING_TOL

    def to_dict(self) -> dict:
        return to_jsonable({
            'operator': self.operator.name,
            'cells_per_radius': self.cells_per_radius,
            'rows': self.table.to_dict(orient='records'),
            'mean_C_over_r': self.mean,
            'max_deviation': self.max_deviation,
            'tolerance': SCALING_TOL,
            'passed': self.passed,
        })


def scaling_study(op: Operator, radii: tuple[float, ...]=(0.5, 1.0, 2.0),
                  cells_per_radius: int=DEFAULT_CELLS_PER_RADIUS, surface: str='staircase',
                  seed: int=DEFAULT_SEED,
                  log: Optional[SimpleLogger]=None) -> ScalingReport:
    """C(B_r, dB_r) / r with h = r / cells_per_radius"""
    log = get_logger(log, level='warning')
    ndim = op.dim_space
    rows = []
    for radius in radii:
        domain = build_ball(np.zeros(ndim), radius, radius / cells_per_radius, surface=surface)
        constraint = Constraint.trace(domain.boundary_hypersurface())
        estimate = poincare_constant_p2(op, domain, constraint, seed=seed, log=log)
        rows.append({'r': radius, 'h': domain.h, 'C': estimate.value,
                     'C_over_r': estimate.value / radius})
    report = ScalingReport(op, pd.DataFrame(rows), cells_per_radius)
    log.info(f'{op.name}: C(r)/r max deviation {report.max_deviation:.3e}')
    return report


def side_study(op: Operator, domain: VoxelDomain, omega: Union[dict, str],
               seed: int=DEFAULT_SEED, log: Optional[SimpleLogger]=None) -> dict[str, ConstantEstimate]:
    """p = 2 trace constants of an interior slice for both trace sides"""
    estimates = {}
    for side in ('inside', 'outside'):
        gamma = select_hypersurface(domain, omega, side=side)
        estimates[side] = poincare_constant_p2(op, domain, Constraint.trace(gamma),
                                               seed=seed, log=log)
    return estimates


class CounterexampleReport:
    def __init__(self, operator: Operator, hyperplane_normal: np.ndarray, field: dict,
                 side: Side, gram_rank: int, kernel_dimension: int, table: pd.DataFrame):
        self.operator = operator
        self.hyperplane_normal = hyperplane_normal
        self.field = field
        self.side = side
        self.gram_rank = gram_rank
        self.kernel_dimension = kernel_dimension
        self.table = table

    @property
    def relative_change(self) -> float:
        l1 = self.table['l1_norm'].to_numpy()
        if len(l1) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(l1))) / l1[0])

    @property
    def passed(self) -> bool:
        variation_ok = bool(np.all(self.table['variation'] <= 10.0 * self.table['h']))
        return (variation_ok and bool(np.all(self.table['l1_norm'] > 0.0)) and
                self.relative_change <= REFINEMENT_TOL)

    def to_dict(self) -> dict:
        return to_jsonable({
            'operator': self.operator.name,
            'hyperplane': {'normal': self.hyperplane_normal, 'offset': 0.0},
            'f': self.field,
            'side': self.side,
            'gram_rank': self.gram_rank,
            'kernel_dimension': self.kernel_dimension,
            'rows': self.table.to_dict(orient='records'),
            'relative_change': self.relative_change,
            'passed': self.passed,
        })


def _hyperplane_gamma(domain: VoxelDomain, normal: np.ndarray) -> Hypersurface:
    """Gamma = voxelized {<xi, x> = 0} with omega = {<xi, x> > 0}"""
    omega = {'shape': 'halfspace', 'normal': (-normal).tolist(), 'offset': 0.0}
    for side in ('inside', 'outside'):
        gamma = select_hypersurface(domain, omega, side=side)
        if np.all(gamma.trace_cells >= 0):
            return gamma
    return select_hypersurface(domain, omega, side='inside')


def counterexample_blowup(op: Operator, domain: VoxelDomain, refinements: int=1,
                          degree_cap: int=2, seed: int=DEFAULT_SEED,
                          log: Optional[SimpleLogger]=None) -> CounterexampleReport:
    """
    f(x) = <xi, x> v with A[xi] v = 0 has A f = 0 and Pi_Gamma tr f = 0 on
    Gamma = {<xi, x> = 0}, while |f - Pi_Gamma tr f|_1 stays positive under
    refinement: no trace-Poincare constant exists
    """
    log = get_logger(log, level='warning')
    _check_operator(op, domain)
    cert = check_ellipticity(op, 'real', seed=seed, log=log)
    if cert.is_elliptic:
        raise PreconditionError(f'{op.name} is R-elliptic (min_singular={cert.min_singular:.3e}); '
                                'no hyperplane counterexample exists')
    hyperplane, f = hyperplane_counterexample(op, cert, log=log)
    kernel = kernel_basis(op, degree_cap=degree_cap, log=log)

    domains = [domain]
    if domain.spec.get('shape') != 'mask':
        for irefine in range(refinements):
            domains.append(VoxelDomain.from_dict(domain.spec, h=domain.h / 2 ** (irefine + 1)))

    rows = []
    gram_rank = None
    side = 'inside'
    for domain_h in domains:
        gamma = _hyperplane_gamma(domain_h, hyperplane.normal)
        side = gamma.side
        pi = build_projection(kernel, surface_measure(gamma), log=log)
        gram_rank = pi.gram_rank
        # the trace of f is its value on Gamma
        trace_projection = project(pi, f.evaluate(gamma.centers))
        values = f.evaluate(domain_h.centers)
        u = GridFunction(domain_h, values)
        au = np.linalg.norm(
            (domain_h.discrete_operator(op) @ values.ravel()).reshape(domain_h.ncells, -1), axis=1)
        residual = values - trace_projection.evaluate(domain_h.centers)
        rows.append({
            'h': domain_h.h,
            'variation': total_A_variation(op, u),
            'interior_variation': float(domain_h.cell_volume * au[domain_h.interior_cells].sum()),
            'l1_norm': _lp_norm(domain_h, residual, 1.0),
            'trace_projection_norm': float(np.linalg.norm(trace_projection.coefficients)),
            'nfacets': gamma.nfacets,
        })
        log.debug(f'{op.name}: counterexample h={domain_h.h:g}: {rows[-1]}')

    report = CounterexampleReport(op, hyperplane.normal, f.to_dict(), side, gram_rank,
                                  kernel.dimension, pd.DataFrame(rows))
    log.info(f'{op.name}: |f - Pi tr f|_1 = {rows[-1]["l1_norm"]:.6g} with |A f| = '
             f'{rows[-1]["variation"]:.3e}; no trace-Poincare constant')
    return report


# (operator, domain, mode, gamma, catalog expectation of the constant)
ANALYTIC_CASES = {
    'interval_subset': ('gradient1d', 'interval', 'subset', None, 'poincare_subset_interval'),
    'interval_trace': ('gradient1d', 'interval', 'trace', 'left', 'poincare_trace_interval_left'),
    'square_subset': ('gradient2d', 'unit_square', 'subset', None, 'poincare_subset_square'),
}


def convergence_study(case: str, hs: tuple[float, ...]=(2. ** -5, 2. ** -6, 2. ** -7),
                      log: Optional[SimpleLogger]=None) -> pd.DataFrame:
    """(h, C(h), C_exact, relative error) for one of ANALYTIC_CASES"""
    if case not in ANALYTIC_CASES:
        raise AvarInputError(f'case={case!r} not in {list(ANALYTIC_CASES)}')
    op_name, domain_name, mode, gamma_name, key = ANALYTIC_CASES[case]
    entry = catalog_entry(op_name)
    op = entry.operator
    exact = entry.expected_value(key)
    rows = []
    for h in hs:
        domain = named_domain(domain_name, h)
        if mode == 'subset':
            constraint = Constraint.subset(domain)
        else:
            constraint = Constraint.trace(select_hypersurface(domain, gamma_name))
        estimate = poincare_constant_p2(op, domain, constraint, log=log)
        rows.append({'case': case, 'h': h, 'C': estimate.value, 'C_exact': exact,
                     'relative_error': abs(estimate.value - exact) / exact})
    return pd.DataFrame(rows)
