"""
The L^2(mu) orthogonal projection onto N(A) for a discrete volume or
surface measure mu, its L^1 extension and the norm equivalence constant
||q||_inf <= C ||q||_{L^1(mu)} on span N(A).
"""
from __future__ import annotations
from typing import Optional, Union

import numpy as np
import scipy.linalg
from cpylog import SimpleLogger, get_logger

from avar.core.errors import AvarInputError
from avar.core.load_utils import _values_2d, _as_points
from avar.core.polynomial import KernelBasis, PolynomialVectorField, RANK_RTOL
from avar.core.voxel import VoxelDomain, Hypersurface, GridFunction
from avar.utils.json_utils import to_jsonable

DEFAULT_LINF_SAMPLES = 10_000
DEFAULT_LINF_REFINE_ROUNDS = 3
DEFAULT_SEED = 42
MEASURE_KINDS = ['volume', 'surface']
# floats per chunk of sampled fields
CHUNK_FLOATS = 4_000_000


class DiscreteMeasure:
    def __init__(self, points: np.ndarray, weights: np.ndarray, kind: str='volume'):
        points = np.atleast_2d(np.asarray(points, dtype='float64'))
        weights = np.asarray(weights, dtype='float64').ravel()
        if kind not in MEASURE_KINDS:
            raise AvarInputError(f'kind={kind!r} not in {MEASURE_KINDS}')
        if len(weights) == 0 or points.shape[0] == 0:
            raise AvarInputError('the measure has no points (zero measure)')
        if points.shape[0] != len(weights):
            raise AvarInputError(f'{points.shape[0]} points but {len(weights)} weights')
        if not np.all(weights > 0.0) or not np.all(np.isfinite(weights)):
            raise AvarInputError('measure weights must be positive and finite')
        self.points = points
        self.weights = weights
        self.kind = kind

    @property
    def npoints(self) -> int:
        return len(self.weights)

    @property
    def dim_space(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)

    def to_dict(self) -> dict:
        return to_jsonable({
            'kind': self.kind,
            'npoints': self.npoints,
            'total_mass': self.total_mass,
            'points': self.points,
            'weights': self.weights,
        })

    def __repr__(self) -> str:
        return f'DiscreteMeasure(kind={self.kind!r}, npoints={self.npoints}, total_mass={self.total_mass:g})'


def volume_measure(domain: VoxelDomain, cells: Optional[np.ndarray]=None) -> DiscreteMeasure:
    """
    midpoint rule on the cells of Omega & E

    cells : (ncells,) bool array or int array of cell ids; default=all cells
    """
    if cells is None:
        cells = np.arange(domain.ncells)
    cells = np.asarray(cells)
    if cells.dtype == bool:
        if len(cells) != domain.ncells:
            raise AvarInputError(f'the cell mask needs {domain.ncells} entries; got {len(cells)}')
        cells = np.flatnonzero(cells)
    if len(cells) == 0:
        raise AvarInputError('the subset E has no cells (zero measure)')
    weights = np.full(len(cells), domain.cell_volume)
    return DiscreteMeasure(domain.centers[cells], weights, kind='volume')


def surface_measure(gamma: Hypersurface) -> DiscreteMeasure:
    """midpoint rule on the facets of gamma"""
    return DiscreteMeasure(gamma.centers, gamma.areas, kind='surface')


class ProjectionOperator:
    def __init__(self, kernel: KernelBasis, measure: DiscreteMeasure, onb: np.ndarray,
                 gram: np.ndarray, gram_eigenvalues: np.ndarray,
                 linf_samples: int=DEFAULT_LINF_SAMPLES, seed: int=DEFAULT_SEED):
        """
        Parameters
        ----------
        onb : (dim, l) float array
            e_j = sum_i onb[i, j] p_i with p_i the kernel basis
        gram : (dim, dim) float array
            G_ij = sum_q w_q <p_i(x_q), p_j(x_q)>
        """
        assert onb.shape[0] == kernel.dimension, (onb.shape, kernel.dimension)
        self.kernel = kernel
        self.measure = measure
        self.onb = onb
        self.gram = gram
        self.gram_eigenvalues = gram_eigenvalues
        self.linf_samples = linf_samples
        self.seed = seed
        values = kernel.evaluate(measure.points)
        self.basis_values = np.einsum('qin,il->qln', values, onb)
        self._linf_l1_constant = None

    @property
    def gram_rank(self) -> int:
        return self.onb.shape[1]

    @property
    def l(self) -> int:
        return self.onb.shape[1]

    @property
    def dim_values(self) -> int:
        return self.kernel.operator.dim_from

    @property
    def linf_l1_constant(self) -> float:
        if self._linf_l1_constant is None:
            self._linf_l1_constant = linf_l1_constant(self, samples=self.linf_samples, seed=self.seed)
        return self._linf_l1_constant

    def onb_gram(self) -> np.ndarray:
        """Gram matrix of e_1..e_l under mu; the identity up to rounding"""
        return np.einsum('q,qin,qjn->ij', self.measure.weights,
                         self.basis_values, self.basis_values)

    def basis_polynomials(self) -> list[PolynomialVectorField]:
        return [self.kernel.combine(self.onb[:, j]) for j in range(self.l)]

    def __repr__(self) -> str:
        return f'ProjectionOperator(l={self.l}, measure={self.measure!r})'


class ProjectedField:
    """Pi u = sum_j c_j e_j; a polynomial defined on all of R^d"""
    def __init__(self, projection: ProjectionOperator, coefficients: np.ndarray):
        self.projection = projection
        self.coefficients = coefficients

    @property
    def values(self) -> np.ndarray:
        """(npoints, N) values at the measure points"""
        return np.einsum('qln,l->qn', self.projection.basis_values, self.coefficients)

    @property
    def kernel_coefficients(self) -> np.ndarray:
        return self.projection.onb @ self.coefficients

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """(npoints, N) values at arbitrary points"""
        points = _as_points(x, self.projection.measure.dim_space)
        values = self.projection.kernel.evaluate(points)
        return np.einsum('pin,i->pn', values, self.kernel_coefficients)

    def as_polynomial(self) -> PolynomialVectorField:
        return self.projection.kernel.combine(self.kernel_coefficients)

    def __repr__(self) -> str:
        return f'ProjectedField(coefficients={self.coefficients.tolist()})'


def build_projection(kernel: KernelBasis, mu: DiscreteMeasure,
                     linf_samples: int=DEFAULT_LINF_SAMPLES, seed: int=DEFAULT_SEED,
                     log: Optional[SimpleLogger]=None) -> ProjectionOperator:
    """
    orthonormalizes the kernel basis in L^2(mu) from the eigen-decomposition
    of its Gram matrix; eigenvalues below RANK_RTOL * max are dropped
    """
    log = get_logger(log, level='warning')
    if kernel.dimension == 0:
        raise AvarInputError('the kernel basis is empty')
    if mu.dim_space != kernel.operator.dim_space:
        raise AvarInputError(f'the measure lives in d={mu.dim_space}; '
                             f'the operator in d={kernel.operator.dim_space}')
    values = kernel.evaluate(mu.points)
    gram = np.einsum('q,qin,qjn->ij', mu.weights, values, values)
    eigenvalues, eigenvectors = scipy.linalg.eigh(gram)
    if not eigenvalues[-1] > 0.0:
        raise AvarInputError('the kernel vanishes on the support of the measure')

    keep = eigenvalues > RANK_RTOL * eigenvalues[-1]
    lam = eigenvalues[keep][::-1]
    vecs = eigenvectors[:, keep][:, ::-1]
    onb = vecs / np.sqrt(lam)[np.newaxis, :]
    for j in range(onb.shape[1]):
        imax = np.argmax(np.abs(onb[:, j]))
        if onb[imax, j] < 0:
            onb[:, j] *= -1

    pi = ProjectionOperator(kernel, mu, onb, gram, eigenvalues,
                            linf_samples=linf_samples, seed=seed)
    if pi.gram_rank < kernel.dimension:
        log.warning(f'{kernel.operator.name}: rank-deficient Gram matrix on the {mu.kind} '
                    f'measure; l={pi.gram_rank} < dim N(A)={kernel.dimension}')
    log.debug(f'{kernel.operator.name}: Gram eigenvalues {eigenvalues.tolist()}')
    return pi


def _samples_to_values(pi: ProjectionOperator, u: Union[np.ndarray, GridFunction]) -> np.ndarray:
    if isinstance(u, GridFunction):
        u = u.values
    values = _values_2d(np.asarray(u, dtype='float64'))
    if values.shape[0] != pi.measure.npoints:
        raise AvarInputError(f'u has {values.shape[0]} samples; the measure has {pi.measure.npoints}')
    if values.shape[1] != pi.dim_values:
        raise AvarInputError(f'u has {values.shape[1]} components; N={pi.dim_values}')
    return values


def project(pi: ProjectionOperator, u: Union[np.ndarray, GridFunction]) -> ProjectedField:
    """c_j = sum_q w_q <u(x_q), e_j(x_q)>"""
    values = _samples_to_values(pi, u)
    coefficients = np.einsum('q,qn,qln->l', pi.measure.weights, values, pi.basis_values)
    return ProjectedField(pi, coefficients)


def l1_project(pi: ProjectionOperator, u: Union[np.ndarray, GridFunction]) -> ProjectedField:
    """the extension of project to L^1(mu); the same bilinear form"""
    return project(pi, u)


def _linf_l1_ratios(pi: ProjectionOperator, coefficients: np.ndarray) -> np.ndarray:
    """max_q |q(x_q)| / sum_q w_q |q(x_q)| for each row of coefficients"""
    npoints, nbasis, nvalues = pi.basis_values.shape
    basis = pi.basis_values.transpose(1, 0, 2).reshape(nbasis, npoints * nvalues)
    chunk = max(1, CHUNK_FLOATS // (npoints * nvalues))
    ratios = []
    for i0 in range(0, len(coefficients), chunk):
        values = (coefficients[i0:i0+chunk] @ basis).reshape(-1, npoints, nvalues)
        pointwise = np.linalg.norm(values, axis=2)
        ratios.append(pointwise.max(axis=1) / (pointwise @ pi.measure.weights))
    return np.hstack(ratios)


def linf_l1_constant(pi: ProjectionOperator, samples: int=DEFAULT_LINF_SAMPLES,
                     seed: int=DEFAULT_SEED, refine_rounds: int=DEFAULT_LINF_REFINE_ROUNDS,
                     log: Optional[SimpleLogger]=None) -> float:
    """
    Empirical max of ||q||_inf / ||q||_{L^1(mu)} over q in span(e_1..e_l).
    The candidates include every e_j, which is what the L^1 bound
    ||Pi u||_1 <= l * C * |mu| * ||u||_1 needs.
    """
    log = get_logger(log, level='warning')
    nbasis = pi.l
    rng = np.random.default_rng(seed)
    candidates = np.vstack([np.eye(nbasis), rng.standard_normal((samples, nbasis))])
    candidates /= np.linalg.norm(candidates, axis=1)[:, np.newaxis]
    ratios = _linf_l1_ratios(pi, candidates)
    ibest = int(np.argmax(ratios))
    best = candidates[ibest]
    value = float(ratios[ibest])

    if nbasis > 1:
        for iround in range(refine_rounds):
            step = 0.5 ** (iround + 1)
            trial = best + step * rng.standard_normal((4 * nbasis, nbasis))
            trial /= np.linalg.norm(trial, axis=1)[:, np.newaxis]
            trial_ratios = _linf_l1_ratios(pi, trial)
            itrial = int(np.argmax(trial_ratios))
            if trial_ratios[itrial] > value:
                value = float(trial_ratios[itrial])
                best = trial[itrial]
    assert value >= (1. - 1e-12) / pi.measure.total_mass, (value, pi.measure.total_mass)
    log.info(f'linf/l1 constant {value:.6g} from {len(candidates)} samples (seed={seed})')
    return value


def projection_report(pi: ProjectionOperator) -> dict:
    return to_jsonable({
        'operator': pi.kernel.operator.name,
        'measure': pi.measure.kind,
        'npoints': pi.measure.npoints,
        'total_mass': pi.measure.total_mass,
        'kernel_dimension': pi.kernel.dimension,
        'l': pi.l,
        'gram_rank': pi.gram_rank,
        'gram_eigenvalues': pi.gram_eigenvalues,
        'onb_gram_error': float(np.abs(pi.onb_gram() - np.eye(pi.l)).max()),
        'linf_l1_constant': pi.linf_l1_constant,
        'linf_samples': pi.linf_samples,
        'seed': pi.seed,
        'basis': [p.to_dict() for p in pi.basis_polynomials()],
    })
