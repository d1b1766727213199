"""
The constant-coefficient first order operator

    A = sum_j A_j d_j,   A_j : R^N -> R^k

its symbol map A[xi] = sum_j xi_j A_j and numerical certificates for
R-/C-ellipticity (injectivity of A[xi] for xi != 0) and the cancelling
property (the images of A[xi] over all xi != 0 intersect trivially).

The cancelling definition (intersection of images) is the standard one of
the L^1 Sobolev embedding literature; it is used as-is here.
"""
from __future__ import annotations
from typing import Optional, Union

import numpy as np
from cpylog import SimpleLogger, get_logger

from avar.typing import FieldName
from avar.core.errors import AvarInputError
from avar.core.load_utils import _as_vector, _update_name
from avar.utils.json_utils import to_jsonable

DEFAULT_TOLERANCE = 1e-8
DEFAULT_SAMPLES = 4096
DEFAULT_REFINE_ROUNDS = 3
DEFAULT_SEED = 42
FIELDS = ['real', 'complex']
DEFAULT_CANCEL_SAMPLES = 64
CANCEL_STABLE_COUNT = 10
GOLDEN_SECTION_ITERATIONS = 40
POLISH_ITERATIONS = 20
GOLDEN = (np.sqrt(5.) - 1.) / 2.


class Operator:
    def __init__(self, matrices: Union[np.ndarray, list], name: Optional[str]=None):
        """
        Parameters
        ----------
        matrices : (d, k, N) float array or list of d (k, N) matrices
            A_1, ..., A_d
        name : str; default=None
            label used in reports
        """
        try:
            matrices = np.array(matrices, dtype='float64')
        except ValueError:
            raise AvarInputError('the operator matrices must all have the same shape (k, N)')
        if matrices.ndim != 3:
            raise AvarInputError(f'expected d matrices of shape (k, N); shape={matrices.shape}')
        if min(matrices.shape) < 1:
            raise AvarInputError(f'd, k, N must be >= 1; shape={matrices.shape}')
        if not np.all(np.isfinite(matrices)):
            raise AvarInputError('operator matrices must be finite')
        matrices.setflags(write=False)
        self.matrices = matrices
        self.name = _update_name(name)

    @property
    def dim_space(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim_to(self) -> int:
        return self.matrices.shape[1]

    @property
    def dim_from(self) -> int:
        return self.matrices.shape[2]

    @property
    def adjoint_matrices(self) -> np.ndarray:
        """A_j^T, the matrices of A* = sum_j A_j^T d_j"""
        return np.transpose(self.matrices, axes=(0, 2, 1))

    def symbol(self, xi: np.ndarray) -> np.ndarray:
        """A[xi] = sum_j xi_j A_j; complex xi gives a complex matrix"""
        xi = _as_vector(xi, self.dim_space, name='xi')
        return np.tensordot(xi, self.matrices, axes=(0, 0))

    def symbols(self, xis: np.ndarray) -> np.ndarray:
        """stacked symbols for xis of shape (nsamples, d) -> (nsamples, k, N)"""
        xis = np.asarray(xis)
        assert xis.ndim == 2 and xis.shape[1] == self.dim_space, xis.shape
        return np.einsum('sj,jkn->skn', xis, self.matrices)

    def tensor_apply(self, v: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """v (x)_A xi := A[xi] v"""
        v = _as_vector(v, self.dim_from, name='v')
        return self.symbol(xi) @ v

    def scaled(self, scale: float) -> Operator:
        return Operator(self.matrices * scale, name=self.name)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'd': self.dim_space,
            'N': self.dim_from,
            'k': self.dim_to,
            'matrices': self.matrices.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Operator:
        try:
            matrices = data['matrices']
        except KeyError:
            raise AvarInputError('operator JSON requires "matrices"')
        op = cls(matrices, name=data.get('name', ''))
        for key, value in [('d', op.dim_space), ('N', op.dim_from), ('k', op.dim_to)]:
            if key in data and int(data[key]) != value:
                raise AvarInputError(f'operator JSON: {key}={data[key]} but matrices give {value}')
        return op

    def __repr__(self) -> str:
        return f'Operator(name={self.name!r}, d={self.dim_space}, N={self.dim_from}, k={self.dim_to})'


class EllipticityCertificate:
    def __init__(self, field: FieldName, verdict: str, min_singular: float,
                 witness_xi: Optional[np.ndarray], witness_v: Optional[np.ndarray],
                 samples: int, refine_rounds: int, tolerance: float,
                 seed: int=DEFAULT_SEED, inconclusive: bool=False,
                 operator_name: str=''):
        assert field in {'real', 'complex'}, field
        assert verdict in {'elliptic', 'not_elliptic'}, verdict
        assert min_singular >= 0.0, min_singular
        assert tolerance > 0.0, tolerance
        if verdict == 'not_elliptic':
            assert witness_xi is not None and witness_v is not None
        else:
            assert min_singular > tolerance, (min_singular, tolerance)
        self.field = field
        self.verdict = verdict
        self.min_singular = float(min_singular)
        self.witness_xi = witness_xi
        self.witness_v = witness_v
        self.samples = samples
        self.refine_rounds = refine_rounds
        self.tolerance = tolerance
        self.seed = seed
        self.inconclusive = inconclusive
        self.operator_name = operator_name

    @property
    def is_elliptic(self) -> bool:
        return self.verdict == 'elliptic'

    def to_dict(self) -> dict:
        witness = None
        if self.witness_xi is not None:
            witness = {'xi': self.witness_xi, 'v': self.witness_v}
        return to_jsonable({
            'operator': self.operator_name,
            'field': self.field,
            'verdict': self.verdict,
            'min_singular': self.min_singular,
            'witness': witness,
            'samples': self.samples,
            'refine_rounds': self.refine_rounds,
            'tolerance': self.tolerance,
            'seed': self.seed,
            'inconclusive': self.inconclusive,
        })

    def __repr__(self) -> str:
        return (f'EllipticityCertificate(field={self.field!r}, verdict={self.verdict!r}, '
                f'min_singular={self.min_singular:g})')


class CancellingCertificate:
    def __init__(self, verdict: str, residual_dim: int,
                 witness_directions: list[np.ndarray], tolerance: float,
                 seed: int=DEFAULT_SEED, operator_name: str=''):
        assert verdict in {'cancelling', 'not_cancelling'}, verdict
        assert (verdict == 'cancelling') == (residual_dim == 0), (verdict, residual_dim)
        self.verdict = verdict
        self.residual_dim = residual_dim
        self.witness_directions = witness_directions
        self.tolerance = tolerance
        self.seed = seed
        self.operator_name = operator_name

    @property
    def is_cancelling(self) -> bool:
        return self.verdict == 'cancelling'

    def to_dict(self) -> dict:
        return to_jsonable({
            'operator': self.operator_name,
            'verdict': self.verdict,
            'residual_dim': self.residual_dim,
            'witness_directions': self.witness_directions,
            'tolerance': self.tolerance,
            'seed': self.seed,
        })


def symbol(op: Operator, xi: np.ndarray) -> np.ndarray:
    return op.symbol(xi)


def tensor_apply(op: Operator, v: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return op.tensor_apply(v, xi)


def _sigma_min(matrix: np.ndarray) -> float:
    k, n = matrix.shape
    if k < n:
        return 0.0
    return float(np.linalg.svd(matrix, compute_uv=False)[-1])


def _smallest_pair(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """smallest singular value and its right-singular vector (a kernel vector if k < N)"""
    k, n = matrix.shape
    unused_u, s, vh = np.linalg.svd(matrix, full_matrices=True)
    v = vh[-1].conj()
    sigma = float(s[-1]) if k >= n else 0.0
    return sigma, _canonical_phase(v)


def _canonical_phase(x: np.ndarray) -> np.ndarray:
    """unit vector with its largest entry real and positive"""
    x = x / np.linalg.norm(x)
    imax = int(np.argmax(np.abs(x)))
    phase = x[imax] / abs(x[imax])
    x = x / phase
    if not np.iscomplexobj(x):
        return x
    x[imax] = x[imax].real
    return x


def _sample_sphere(rng: np.random.Generator, ndim: int, nsamples: int,
                   field: FieldName) -> np.ndarray:
    """uniform samples on the unit sphere of R^d, or of C^d seen as R^2d"""
    if field == 'real':
        x = rng.standard_normal((nsamples, ndim))
    else:
        x = rng.standard_normal((nsamples, ndim)) + 1j * rng.standard_normal((nsamples, ndim))
    norms = np.linalg.norm(x, axis=1)
    return x / norms[:, np.newaxis]


def _golden_section(func, a: float, b: float,
                    niterations: int=GOLDEN_SECTION_ITERATIONS) -> tuple[float, float]:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = func(c)
    fd = func(d)
    for unused_i in range(niterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = func(d)
    if fc < fd:
        return c, fc
    return d, fd


class _SphereSearch:
    """tracks the best visited xi; every evaluation goes through here"""
    def __init__(self, op: Operator):
        self.op = op
        self.value = np.inf
        self.xi = None
        self.nevaluations = 0

    def __call__(self, xi: np.ndarray) -> float:
        xi = xi / np.linalg.norm(xi)
        value = _sigma_min(self.op.symbol(xi))
        self.nevaluations += 1
        if value < self.value:
            self.value = value
            self.xi = xi
        return value


def _tangent(rng: np.random.Generator, xi: np.ndarray, field: FieldName) -> np.ndarray:
    tau = _sample_sphere(rng, len(xi), 1, field)[0]
    # real inner product of R^d or R^2d
    tau = tau - np.real(np.vdot(xi, tau)) * xi
    return tau / np.linalg.norm(tau)


def _polish(op: Operator, search: _SphereSearch, field: FieldName) -> None:
    """
    alternating minimisation of |A[xi] v|^2 over (xi, v): for fixed v the
    map xi -> |A[xi] v|^2 is the Hermitian form of G_ij = <A_i v, A_j v>
    """
    for unused_i in range(POLISH_ITERATIONS):
        current = search.value
        unused_sigma, v = _smallest_pair(op.symbol(search.xi))
        columns = np.einsum('jkn,n->kj', op.matrices, v)
        gram = columns.conj().T @ columns
        if field == 'real':
            gram = gram.real
        unused_eigenvalues, eigenvectors = np.linalg.eigh(gram)
        search(eigenvectors[:, 0])
        if not search.value < current:
            break


def _sphere_minimum(op: Operator, field: FieldName, samples: int, refine_rounds: int,
                    seed: int, log: SimpleLogger) -> tuple[float, np.ndarray, int]:
    if samples < 1:
        raise AvarInputError(f'samples must be >= 1; samples={samples}')
    if field not in FIELDS:
        raise AvarInputError(f'field must be real or complex; field={field!r}')
    if refine_rounds < 0:
        raise AvarInputError(f'refine_rounds must be >= 0; refine_rounds={refine_rounds}')
    ndim = op.dim_space
    rng = np.random.default_rng(seed)
    xis = np.vstack([np.eye(ndim), _sample_sphere(rng, ndim, samples, field)])
    search = _SphereSearch(op)
    if op.dim_to < op.dim_from:
        # the symbol is never injective
        search(xis[0])
        return search.value, _canonical_phase(search.xi), search.nevaluations

    sigmas = np.linalg.svd(op.symbols(xis), compute_uv=False)[:, -1]
    search.nevaluations += len(xis)
    isample = int(np.argmin(sigmas))
    search.value = float(sigmas[isample])
    search.xi = xis[isample]
    log.debug(f'{op.name}: sampled minimum {search.value:.6e} over {len(xis)} directions')
    if field == 'real' and ndim == 1:
        # the sphere is {+e1, -e1}; there is no tangent direction to refine along
        search(-np.eye(1)[0])
        return search.value, _canonical_phase(search.xi), search.nevaluations

    ndirections = 2 * ndim if field == 'real' else 4 * ndim
    for iround in range(refine_rounds):
        step = 0.5 ** (iround + 1)
        for unused_j in range(ndirections):
            xi0 = search.xi
            tau = _tangent(rng, xi0, field)
            _golden_section(lambda t: search(xi0 + t * tau), -step, step)
        _polish(op, search, field)
        log.debug(f'{op.name}: refine round {iround}: {search.value:.6e}')
    return search.value, _canonical_phase(search.xi), search.nevaluations


def min_singular_over_sphere(op: Operator, field: FieldName='real',
                             samples: int=DEFAULT_SAMPLES,
                             refine_rounds: int=DEFAULT_REFINE_ROUNDS,
                             seed: int=DEFAULT_SEED,
                             log: Optional[SimpleLogger]=None) -> tuple[float, np.ndarray]:
    """
    Upper bound for min_{|xi|=1} sigma_min(A[xi]) by seeded sphere sampling
    followed by local refinement.

    Returns
    -------
    value : float
        the smallest sigma_min over all visited unit xi
    argmin_xi : (d,) float/complex array
        the unit xi where it was attained
    """
    log = get_logger(log, level='warning')
    value, xi, unused_nevaluations = _sphere_minimum(op, field, samples, refine_rounds, seed, log)
    return value, xi


def check_ellipticity(op: Operator, field: FieldName='real',
                      tolerance: float=DEFAULT_TOLERANCE,
                      samples: int=DEFAULT_SAMPLES,
                      refine_rounds: int=DEFAULT_REFINE_ROUNDS,
                      seed: int=DEFAULT_SEED,
                      log: Optional[SimpleLogger]=None) -> EllipticityCertificate:
    """elliptic iff the refined sphere minimum of sigma_min(A[xi]) exceeds tolerance"""
    log = get_logger(log, level='warning')
    if not tolerance > 0.0:
        raise AvarInputError(f'tolerance must be positive; tolerance={tolerance}')
    value, xi, nevaluations = _sphere_minimum(op, field, samples, refine_rounds, seed, log)
    inconclusive = bool(tolerance / 10. < value <= 10. * tolerance)
    if inconclusive:
        log.warning(f'{op.name}: {field} sphere minimum {value:.3e} is within a factor 10 '
                    f'of the tolerance {tolerance:.1e}; verdict is inconclusive')

    if value > tolerance:
        cert = EllipticityCertificate(
            field, 'elliptic', value, None, None, samples, refine_rounds, tolerance,
            seed=seed, inconclusive=inconclusive, operator_name=op.name)
    else:
        sigma, v = _smallest_pair(op.symbol(xi))
        assert sigma <= tolerance, (sigma, tolerance)
        cert = EllipticityCertificate(
            field, 'not_elliptic', value, xi, v, samples, refine_rounds, tolerance,
            seed=seed, inconclusive=inconclusive, operator_name=op.name)
    log.info(f'{op.name}: {field} {cert.verdict}; min_singular={value:.6e} '
             f'({nevaluations} evaluations)')
    return cert


def _column_space(matrix: np.ndarray, tolerance: float) -> np.ndarray:
    u, s, unused_vh = np.linalg.svd(matrix, full_matrices=False)
    rank = int(np.sum(s > tolerance))
    return u[:, :rank]


def _intersect(basis1: np.ndarray, basis2: np.ndarray, tolerance: float) -> np.ndarray:
    """orthonormal basis of span(basis1) & span(basis2); both orthonormal"""
    if basis1.shape[1] == 0 or basis2.shape[1] == 0:
        return basis1[:, :0]
    residual = basis1 - basis2 @ (basis2.T @ basis1)
    unused_u, s, vh = np.linalg.svd(residual, full_matrices=True)
    ncols = basis1.shape[1]
    s_all = np.zeros(ncols)
    s_all[:len(s)] = s
    coefficients = vh[s_all <= tolerance].T
    return basis1 @ coefficients


def check_cancelling(op: Operator, samples: int=DEFAULT_CANCEL_SAMPLES,
                     tolerance: float=DEFAULT_TOLERANCE,
                     seed: int=DEFAULT_SEED,
                     log: Optional[SimpleLogger]=None) -> CancellingCertificate:
    """
    Intersects im A[xi] over the coordinate axes and then seeded random
    directions until the dimension is unchanged for CANCEL_STABLE_COUNT
    consecutive directions.
    """
    log = get_logger(log, level='warning')
    ndim = op.dim_space
    if ndim == 1:
        # the image of A[xi] = xi A_1 does not depend on xi
        xi = np.ones(1)
        rank = _column_space(op.matrices[0], tolerance).shape[1]
        log.info(f'{op.name}: d=1 is never cancelling; rank(A_1)={rank}')
        return CancellingCertificate('not_cancelling', rank, [xi], tolerance,
                                     seed=seed, operator_name=op.name)

    cert = check_ellipticity(op, 'real', tolerance=tolerance, samples=256,
                             refine_rounds=1, seed=seed, log=log)
    if not cert.is_elliptic:
        log.warning(f'{op.name}: cancelling check on an operator that is not R-elliptic')

    rng = np.random.default_rng(seed)
    xis = np.vstack([np.eye(ndim), _sample_sphere(rng, ndim, samples, 'real')])
    basis = _column_space(op.symbol(xis[0]), tolerance)
    used = [xis[0]]
    nunchanged = 0
    for xi in xis[1:]:
        if basis.shape[1] == 0:
            break
        image = _column_space(op.symbol(xi), tolerance)
        new_basis = _intersect(basis, image, tolerance)
        used.append(xi)
        if new_basis.shape[1] == basis.shape[1]:
            nunchanged += 1
        else:
            nunchanged = 0
        basis = new_basis
        if nunchanged >= CANCEL_STABLE_COUNT:
            break

    residual_dim = basis.shape[1]
    verdict = 'cancelling' if residual_dim == 0 else 'not_cancelling'
    log.info(f'{op.name}: {verdict}; residual_dim={residual_dim} after {len(used)} directions')
    return CancellingCertificate(verdict, residual_dim, used, tolerance,
                                 seed=seed, operator_name=op.name)
