"""
Polynomial vector fields and the polynomial nullspace N(A) of a
constant-coefficient first order operator.

Monomials are scaled as x^alpha / alpha! inside the linear algebra, so the
differentiation matrices carry the entries of A_j unchanged.
"""
from __future__ import annotations
from math import factorial
from typing import Optional, Iterator

import numpy as np
import scipy.linalg
from cpylog import SimpleLogger, get_logger

from avar.core.errors import AvarInputError, PreconditionError
from avar.core.load_utils import _as_points, _as_vector
from avar.core.operator import Operator, EllipticityCertificate
from avar.utils.json_utils import to_jsonable

DEFAULT_DEGREE_CAP = 8
RANK_RTOL = 1e-10
CHOP_RTOL = 1e-12

MultiIndex = tuple[int, ...]
TermKey = tuple[MultiIndex, int]


def _indices_of_degree(ndim: int, degree: int) -> Iterator[MultiIndex]:
    """multi-indices with |alpha| = degree, x_1 powers descending"""
    if ndim == 1:
        yield (degree, )
        return
    for first in range(degree, -1, -1):
        for rest in _indices_of_degree(ndim - 1, degree - first):
            yield (first, ) + rest


def monomials(ndim: int, max_degree: int) -> list[MultiIndex]:
    """graded multi-indices |alpha| <= max_degree"""
    alphas = []
    for degree in range(max_degree + 1):
        alphas.extend(_indices_of_degree(ndim, degree))
    return alphas


def _alpha_factorial(alpha: MultiIndex) -> int:
    value = 1
    for a in alpha:
        value *= factorial(a)
    return value


def _monomial_values(x: np.ndarray, alphas: list[MultiIndex]) -> np.ndarray:
    """(npoints, nmonomials) values of x^alpha"""
    if len(alphas) == 0:
        return np.zeros((x.shape[0], 0))
    powers = np.array(alphas, dtype='int64')
    return np.prod(x[:, np.newaxis, :] ** powers[np.newaxis, :, :], axis=2)


def _sort_key(key: TermKey) -> tuple:
    alpha, component = key
    return (sum(alpha), tuple(-a for a in alpha), component)


class PolynomialVectorField:
    def __init__(self, dim_space: int, dim_values: int,
                 coefficients: Optional[dict[TermKey, float]]=None):
        """
        Parameters
        ----------
        dim_space : int
            d, the number of variables
        dim_values : int
            N, the number of components
        coefficients : dict[(alpha, component), float]
            alpha is a d-tuple of powers; component is 0-based;
            zero coefficients are dropped
        """
        if dim_space < 1 or dim_values < 1:
            raise AvarInputError(f'dim_space={dim_space} and dim_values={dim_values} must be >= 1')
        self.dim_space = dim_space
        self.dim_values = dim_values
        coefficients = {} if coefficients is None else coefficients

        terms = {}
        for (alpha, component), coeff in coefficients.items():
            alpha = tuple(int(a) for a in alpha)
            component = int(component)
            if len(alpha) != dim_space or min(alpha) < 0:
                raise AvarInputError(f'invalid multi-index {alpha} for d={dim_space}')
            if not 0 <= component < dim_values:
                raise AvarInputError(f'component={component} is out of range for N={dim_values}')
            coeff = float(coeff)
            if coeff != 0.0:
                terms[(alpha, component)] = coeff
        self.coefficients = {key: terms[key] for key in sorted(terms, key=_sort_key)}

    @classmethod
    def constant(cls, values: np.ndarray, dim_space: int) -> PolynomialVectorField:
        values = np.asarray(values, dtype='float64').ravel()
        zero = (0, ) * dim_space
        coefficients = {(zero, i): value for i, value in enumerate(values)}
        return cls(dim_space, len(values), coefficients)

    @classmethod
    def linear(cls, matrix: np.ndarray, offset: Optional[np.ndarray]=None) -> PolynomialVectorField:
        """p(x) = matrix @ x + offset for an (N, d) matrix"""
        matrix = np.atleast_2d(np.asarray(matrix, dtype='float64'))
        nvalues, ndim = matrix.shape
        coefficients = {}
        if offset is not None:
            offset = _as_vector(offset, nvalues, name='offset')
            for i in range(nvalues):
                coefficients[((0, ) * ndim, i)] = offset[i]
        for i in range(nvalues):
            for j in range(ndim):
                alpha = tuple(int(jj == j) for jj in range(ndim))
                coefficients[(alpha, i)] = matrix[i, j]
        return cls(ndim, nvalues, coefficients)

    @property
    def degree(self) -> int:
        """max |alpha| over the stored terms; 0 for the zero field"""
        if len(self.coefficients) == 0:
            return 0
        return max(sum(alpha) for alpha, unused_component in self.coefficients)

    @property
    def is_zero(self) -> bool:
        return len(self.coefficients) == 0

    def coefficient_norm(self) -> float:
        """Euclidean norm of the coefficient vector"""
        values = np.array(list(self.coefficients.values()), dtype='float64')
        return float(np.linalg.norm(values))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        Parameters
        ----------
        x : (d,) or (npoints, d) float array

        Returns
        -------
        values : (N,) or (npoints, N) float array
        """
        is_point = np.ndim(x) == 1
        points = _as_points(x, self.dim_space)
        values = np.zeros((points.shape[0], self.dim_values))
        if self.coefficients:
            keys = list(self.coefficients)
            alphas = [alpha for alpha, unused_component in keys]
            components = np.array([component for unused_alpha, component in keys])
            coeffs = np.array([self.coefficients[key] for key in keys])
            monomial_values = _monomial_values(points, alphas)
            for iterm in range(len(keys)):
                values[:, components[iterm]] += coeffs[iterm] * monomial_values[:, iterm]
        if is_point:
            return values[0, :]
        return values

    def restrict(self, hyperplane: Hyperplane, points: np.ndarray) -> np.ndarray:
        """values at points projected onto the hyperplane"""
        return self.evaluate(hyperplane.project(points))

    def _check_same_space(self, other: PolynomialVectorField) -> None:
        if (self.dim_space, self.dim_values) != (other.dim_space, other.dim_values):
            raise AvarInputError(f'incompatible fields: (d, N)=({self.dim_space}, {self.dim_values}) '
                                 f'and ({other.dim_space}, {other.dim_values})')

    def __add__(self, other: PolynomialVectorField) -> PolynomialVectorField:
        self._check_same_space(other)
        coefficients = dict(self.coefficients)
        for key, value in other.coefficients.items():
            coefficients[key] = coefficients.get(key, 0.0) + value
        return PolynomialVectorField(self.dim_space, self.dim_values, coefficients)

    def __mul__(self, scale: float) -> PolynomialVectorField:
        coefficients = {key: scale * value for key, value in self.coefficients.items()}
        return PolynomialVectorField(self.dim_space, self.dim_values, coefficients)

    __rmul__ = __mul__

    def __neg__(self) -> PolynomialVectorField:
        return self * -1.0

    def __sub__(self, other: PolynomialVectorField) -> PolynomialVectorField:
        return self + (-other)

    def to_dict(self) -> dict:
        terms = [{'alpha': list(alpha), 'component': component, 'coeff': coeff}
                 for (alpha, component), coeff in self.coefficients.items()]
        return to_jsonable({'d': self.dim_space, 'N': self.dim_values, 'terms': terms})

    @classmethod
    def from_dict(cls, data: dict) -> PolynomialVectorField:
        try:
            coefficients = {(tuple(term['alpha']), term['component']): term['coeff']
                            for term in data['terms']}
            return cls(int(data['d']), int(data['N']), coefficients)
        except (KeyError, TypeError) as error:
            raise AvarInputError(f'invalid polynomial JSON: {error}')

    def __repr__(self) -> str:
        return (f'PolynomialVectorField(d={self.dim_space}, N={self.dim_values}, '
                f'degree={self.degree}, nterms={len(self.coefficients)})')


class Hyperplane:
    """{x : <normal, x> = offset}"""
    def __init__(self, normal: np.ndarray, offset: float=0.0):
        normal = np.asarray(normal, dtype='float64').ravel()
        norm = np.linalg.norm(normal)
        if not norm > 0.0:
            raise AvarInputError('hyperplane normal must be nonzero')
        self.normal = normal / norm
        self.offset = float(offset) / norm

    @property
    def dim_space(self) -> int:
        return len(self.normal)

    def distance(self, x: np.ndarray) -> np.ndarray:
        points = _as_points(x, self.dim_space)
        return points @ self.normal - self.offset

    def project(self, x: np.ndarray) -> np.ndarray:
        points = _as_points(x, self.dim_space)
        return points - np.outer(self.distance(points), self.normal)

    def sample_points(self, nsamples: int, seed: int=0, scale: float=1.0) -> np.ndarray:
        """points on the plane near its foot point offset*normal"""
        rng = np.random.default_rng(seed)
        points = scale * rng.standard_normal((nsamples, self.dim_space))
        return self.project(points)

    def to_dict(self) -> dict:
        return to_jsonable({'normal': self.normal, 'offset': self.offset})


def apply_operator_to_polynomial(op: Operator, p: PolynomialVectorField) -> PolynomialVectorField:
    """exact A p = sum_j A_j d_j p; values in R^k"""
    if p.dim_space != op.dim_space or p.dim_values != op.dim_from:
        raise AvarInputError(f'polynomial (d, N)=({p.dim_space}, {p.dim_values}) does not match '
                             f'{op!r}')
    coefficients = {}
    for (alpha, i), coeff in p.coefficients.items():
        for j in range(op.dim_space):
            if alpha[j] == 0:
                continue
            beta = alpha[:j] + (alpha[j] - 1, ) + alpha[j+1:]
            column = op.matrices[j, :, i] * (alpha[j] * coeff)
            for r in np.flatnonzero(column):
                key = (beta, int(r))
                coefficients[key] = coefficients.get(key, 0.0) + column[r]
    return PolynomialVectorField(op.dim_space, op.dim_to, coefficients)


def differentiation_matrix(op: Operator, degree: int) -> np.ndarray:
    """
    Matrix of p -> A p from P_degree(R^N) to P_{degree-1}(R^k) in the
    scaled monomial basis; column (alpha, i) is at a*N + i, row (beta, r)
    at b*k + r.
    """
    ndim, nto, nfrom = op.matrices.shape
    alphas = monomials(ndim, degree)
    betas = monomials(ndim, degree - 1) if degree > 0 else []
    beta_index = {beta: b for b, beta in enumerate(betas)}
    dmatrix = np.zeros((len(betas) * nto, len(alphas) * nfrom))
    for a, alpha in enumerate(alphas):
        for j in range(ndim):
            if alpha[j] == 0:
                continue
            beta = alpha[:j] + (alpha[j] - 1, ) + alpha[j+1:]
            b = beta_index[beta]
            dmatrix[b*nto:(b+1)*nto, a*nfrom:(a+1)*nfrom] += op.matrices[j]
    return dmatrix


def _null_space(dmatrix: np.ndarray) -> np.ndarray:
    if dmatrix.shape[0] == 0:
        return np.eye(dmatrix.shape[1])
    return scipy.linalg.null_space(dmatrix, rcond=RANK_RTOL)


def _canonical_basis(zbasis: np.ndarray) -> np.ndarray:
    """
    orthonormal basis of span(zbasis) that only depends on the span:
    pivoted QR of the orthogonal projector, signs fixed so the largest
    entry of each vector is positive
    """
    dim = zbasis.shape[1]
    if dim == 0:
        return zbasis
    projector = zbasis @ zbasis.T
    q, unused_r, unused_piv = scipy.linalg.qr(projector, pivoting=True)
    basis = q[:, :dim]
    for i in range(dim):
        imax = np.argmax(np.abs(basis[:, i]))
        if basis[imax, i] < 0:
            basis[:, i] *= -1
    basis[np.abs(basis) < CHOP_RTOL] = 0.0
    return basis


class KernelBasis:
    def __init__(self, op: Operator, degree_cap: int, coefficient_matrix: np.ndarray,
                 dimensions: list[int], warnings: Optional[list[str]]=None):
        """
        Parameters
        ----------
        coefficient_matrix : (nmonomials * N, dim) float array
            orthonormal columns in the scaled monomial basis of P_degree_cap
        dimensions : list[int]
            dim N(A) & P_m for m = 0..degree_cap
        """
        ndim = op.dim_space
        self.operator = op
        self.degree_cap = degree_cap
        self.monomials = monomials(ndim, degree_cap)
        assert coefficient_matrix.shape[0] == len(self.monomials) * op.dim_from, coefficient_matrix.shape
        assert len(dimensions) == degree_cap + 1, dimensions
        self.coefficient_matrix = coefficient_matrix
        self.dimensions = dimensions
        self.warnings = [] if warnings is None else warnings

        scale = np.array([1. / _alpha_factorial(alpha) for alpha in self.monomials])
        self._scaled = coefficient_matrix.reshape(len(self.monomials), op.dim_from, -1)
        self.elements = []
        for icol in range(coefficient_matrix.shape[1]):
            coefficients = {}
            for a, alpha in enumerate(self.monomials):
                for i in range(op.dim_from):
                    coefficients[(alpha, i)] = self._scaled[a, i, icol] * scale[a]
            self.elements.append(PolynomialVectorField(ndim, op.dim_from, coefficients))

    @property
    def dimension(self) -> int:
        return self.coefficient_matrix.shape[1]

    @property
    def stabilized(self) -> bool:
        """dimension unchanged over the last two degree increments"""
        dims = self.dimensions
        return len(dims) >= 3 and dims[-1] == dims[-2] == dims[-3]

    @property
    def stable_degree(self) -> int:
        """first degree after which the dimension no longer changes"""
        dims = self.dimensions
        degree = len(dims) - 1
        while degree > 0 and dims[degree - 1] == dims[-1]:
            degree -= 1
        return degree

    @property
    def max_degree(self) -> int:
        return max([element.degree for element in self.elements], default=0)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """(npoints, dim, N) values of the basis elements"""
        points = _as_points(x, self.operator.dim_space)
        scale = np.array([1. / _alpha_factorial(alpha) for alpha in self.monomials])
        monomial_values = _monomial_values(points, self.monomials) * scale[np.newaxis, :]
        return np.einsum('pm,mnl->pln', monomial_values, self._scaled)

    def combine(self, coefficients: np.ndarray) -> PolynomialVectorField:
        """sum_i c_i p_i"""
        coefficients = _as_vector(coefficients, self.dimension, name='coefficients')
        field = PolynomialVectorField(self.operator.dim_space, self.operator.dim_from)
        for coeff, element in zip(coefficients, self.elements):
            field = field + coeff * element
        return field

    def to_dict(self) -> dict:
        return to_jsonable({
            'operator': self.operator.name,
            'dimension': self.dimension,
            'degree_cap': self.degree_cap,
            'dimensions': self.dimensions,
            'stabilized': self.stabilized,
            'stable_degree': self.stable_degree,
            'warnings': self.warnings,
            'elements': [element.to_dict() for element in self.elements],
        })

    def __repr__(self) -> str:
        return (f'KernelBasis(operator={self.operator.name!r}, dimension={self.dimension}, '
                f'stabilized={self.stabilized})')


def kernel_basis(op: Operator, degree_cap: int=DEFAULT_DEGREE_CAP,
                 log: Optional[SimpleLogger]=None) -> KernelBasis:
    """
    Solves A p = 0 on P_m(R^N) for m = 0..degree_cap and returns the basis at
    degree_cap, orthonormal in the scaled-monomial coefficient inner product.
    """
    log = get_logger(log, level='warning')
    if degree_cap < 0:
        raise AvarInputError(f'degree_cap must be >= 0; degree_cap={degree_cap}')

    dimensions = []
    zbasis = None
    for degree in range(degree_cap + 1):
        zbasis = _null_space(differentiation_matrix(op, degree))
        dimensions.append(zbasis.shape[1])
        log.debug(f'{op.name}: dim N(A) & P_{degree} = {zbasis.shape[1]}')

    warnings = []
    kernel = KernelBasis(op, degree_cap, _canonical_basis(zbasis), dimensions, warnings)
    if not kernel.stabilized:
        msg = (f'{op.name}: the kernel dimension is not stabilized at degree_cap={degree_cap} '
               f'(dimensions={dimensions}); the operator is likely not C-elliptic')
        warnings.append(msg)
        log.warning(msg)
    log.info(f'{op.name}: kernel dimension {kernel.dimension}; dimensions={dimensions}')
    return kernel


def restriction_gram(kernel: KernelBasis, points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """G_ij = sum_q w_q <p_i(x_q), p_j(x_q)> for a surface (or volume) quadrature"""
    weights = np.asarray(weights, dtype='float64').ravel()
    values = kernel.evaluate(points)
    if values.shape[0] != len(weights):
        raise AvarInputError(f'{values.shape[0]} points but {len(weights)} weights')
    return np.einsum('q,qin,qjn->ij', weights, values, values)


def hyperplane_counterexample(op: Operator, cert: EllipticityCertificate,
                              log: Optional[SimpleLogger]=None,
                              ) -> tuple[Hyperplane, PolynomialVectorField]:
    """
    For a real witness A[xi] v = 0, f(x) = <xi, x> v solves A f = A[xi] v = 0
    and vanishes on {<xi, x> = 0}.
    """
    log = get_logger(log, level='warning')
    if cert.field != 'real' or cert.verdict != 'not_elliptic' or cert.witness_xi is None:
        raise PreconditionError(
            f'hyperplane_counterexample needs a real not_elliptic certificate; '
            f'got field={cert.field!r} verdict={cert.verdict!r}')
    xi = np.real(np.asarray(cert.witness_xi))
    v = np.real(np.asarray(cert.witness_v))
    if len(xi) != op.dim_space or len(v) != op.dim_from:
        raise AvarInputError('the certificate witness does not match the operator dimensions')

    ndim = op.dim_space
    coefficients = {}
    for j in range(ndim):
        alpha = tuple(int(jj == j) for jj in range(ndim))
        for i in range(op.dim_from):
            coefficients[(alpha, i)] = xi[j] * v[i]
    f = PolynomialVectorField(ndim, op.dim_from, coefficients)
    assert not f.is_zero, (xi, v)

    residual = apply_operator_to_polynomial(op, f).coefficient_norm()
    assert residual <= cert.tolerance, (residual, cert.tolerance)
    if residual > RANK_RTOL:
        log.warning(f'{op.name}: |A f| = {residual:.3e} (the witness is only approximate)')
    return Hyperplane(xi, 0.0), f

