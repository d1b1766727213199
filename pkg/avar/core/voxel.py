"""
Cell-centred voxel discretization of a domain Omega with boundary facets,
hypersurfaces Gamma = d(omega) & closure(Omega), cell/facet grid functions,
the discrete operator A_h, total A-variation, traces and extension by zero.
"""
from __future__ import annotations
from math import ceil, floor
from typing import Callable, Optional, Union

import numpy as np
import scipy.ndimage
import scipy.sparse as sp
from cpylog import SimpleLogger, get_logger

from avar.typing import Side
from avar.core.errors import AvarInputError
from avar.core.load_utils import _values_2d, _as_vector
from avar.core.operator import Operator
from avar.utils.json_utils import to_jsonable, spec_hash

SURFACES = ['staircase', 'geometric']
SIDES = ['inside', 'outside']
NAMED_DOMAINS = ['interval', 'unit_square', 'unit_disk', 'unit_cube', 'unit_ball']
NAMED_GAMMAS = ['left', 'right', 'bottom', 'top', 'front', 'back', 'boundary']
SHAPES = ['box', 'ball', 'mask', 'named']
OMEGA_SHAPES = ['halfspace', 'box', 'ball', 'domain']
DEFAULT_H = 1. / 64


class VoxelDomain:
    def __init__(self, mask: np.ndarray, h: float, origin: np.ndarray,
                 spec: Optional[dict]=None, surface: str='staircase',
                 ball: Optional[tuple[np.ndarray, float]]=None,
                 require_connected: bool=True):
        """
        Parameters
        ----------
        mask : (n_1, ..., n_d) bool array
            lattice cells that belong to Omega
        h : float
            the cell width
        origin : (d,) float array
            the lower corner of lattice cell (0, ..., 0)
        spec : dict; default=None
            the domain spec this was built from (hashed into reports)
        surface : str; default='staircase'
            'geometric' weights the boundary facets of a ball by |n.nu|
            and reports the true normal n
        ball : (center, radius); default=None
            required for surface='geometric'
        require_connected : bool; default=True
            raise if the cells are not face-connected
        """
        mask = np.asarray(mask, dtype='bool')
        if not h > 0.0:
            raise AvarInputError(f'h must be positive; h={h}')
        if mask.ndim < 1:
            raise AvarInputError('the mask must have at least one axis')
        if not mask.any():
            raise AvarInputError('the domain has no cells at this resolution')
        if surface not in SURFACES:
            raise AvarInputError(f'surface={surface!r} not in {SURFACES}')
        if surface == 'geometric' and ball is None:
            raise AvarInputError("surface='geometric' is only defined for balls")

        self.mask = mask
        self.h = float(h)
        self.origin = _as_vector(origin, mask.ndim, name='origin')
        self.surface = surface
        self.ball = ball

        structure = scipy.ndimage.generate_binary_structure(mask.ndim, 1)
        unused_labels, ncomponents = scipy.ndimage.label(mask, structure=structure)
        self.ncomponents = ncomponents
        self.connected = ncomponents == 1
        if require_connected and not self.connected:
            raise AvarInputError(f'the domain is not face-connected ({ncomponents} components)')

        self.cell_index = np.argwhere(mask)
        self.cell_id = np.full(mask.shape, -1, dtype='int64')
        self.cell_id[tuple(self.cell_index.T)] = np.arange(len(self.cell_index))
        self.centers = self.origin + (self.cell_index + 0.5) * self.h
        self._build_neighbors()
        self._build_boundary_facets()
        self.spec = spec if spec is not None else self._mask_spec()
        self._difference_matrices = None

    @property
    def ndim(self) -> int:
        return self.mask.ndim

    @property
    def ncells(self) -> int:
        return len(self.cell_index)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.ndim

    @property
    def facet_area(self) -> float:
        return self.h ** (self.ndim - 1)

    @property
    def total_volume(self) -> float:
        return self.ncells * self.cell_volume

    @property
    def perimeter(self) -> float:
        return float(self.facet_areas.sum())

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """lower/upper corners of the bounding box of the cells"""
        lo = self.origin + self.cell_index.min(axis=0) * self.h
        hi = self.origin + (self.cell_index.max(axis=0) + 1) * self.h
        return lo, hi

    @property
    def interior_cells(self) -> np.ndarray:
        """cells with all 2d face neighbours in the domain"""
        return (self.nb_plus >= 0).all(axis=1) & (self.nb_minus >= 0).all(axis=1)

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    def _mask_spec(self) -> dict:
        return {'shape': 'mask', 'mask': self.mask.astype('int64').tolist(),
                'origin': self.origin.tolist(), 'h': self.h}

    def _build_neighbors(self) -> None:
        ndim = self.ndim
        padded = np.pad(self.cell_id, 1, mode='constant', constant_values=-1)
        index = self.cell_index + 1
        self.nb_plus = np.zeros((self.ncells, ndim), dtype='int64')
        self.nb_minus = np.zeros((self.ncells, ndim), dtype='int64')
        for j in range(ndim):
            shift = np.zeros(ndim, dtype='int64')
            shift[j] = 1
            self.nb_plus[:, j] = padded[tuple((index + shift).T)]
            self.nb_minus[:, j] = padded[tuple((index - shift).T)]

    def _build_boundary_facets(self) -> None:
        """boundary facets ordered by axis, then sign (-1, +1), then cell"""
        cells = []
        axes = []
        signs = []
        for j in range(self.ndim):
            for sign, neighbors in [(-1, self.nb_minus), (1, self.nb_plus)]:
                icells = np.flatnonzero(neighbors[:, j] < 0)
                cells.append(icells)
                axes.append(np.full(len(icells), j, dtype='int64'))
                signs.append(np.full(len(icells), sign, dtype='int64'))
        self.facet_cell = np.hstack(cells)
        self.facet_axis = np.hstack(axes)
        self.facet_sign = np.hstack(signs)

        nfacets = len(self.facet_cell)
        unit = np.zeros((nfacets, self.ndim))
        unit[np.arange(nfacets), self.facet_axis] = self.facet_sign
        self.facet_centers = self.centers[self.facet_cell] + 0.5 * self.h * unit
        if self.surface == 'staircase':
            self.facet_normals = unit
            self.facet_areas = np.full(nfacets, self.facet_area)
        else:
            center, unused_radius = self.ball
            normals = self.facet_centers - center
            normals /= np.linalg.norm(normals, axis=1)[:, np.newaxis]
            self.facet_normals = normals
            self.facet_areas = self.facet_area * np.abs(np.sum(normals * unit, axis=1))

    @property
    def nfacets(self) -> int:
        return len(self.facet_cell)

    def difference_matrices(self) -> list[sp.csr_matrix]:
        """
        D_j: central differences where both neighbours exist, one-sided
        where one does, 0 for cells isolated along axis j
        """
        if self._difference_matrices is not None:
            return self._difference_matrices
        ncells = self.ncells
        h = self.h
        matrices = []
        for j in range(self.ndim):
            plus = self.nb_plus[:, j]
            minus = self.nb_minus[:, j]
            has_plus = plus >= 0
            has_minus = minus >= 0
            both = has_plus & has_minus
            only_plus = has_plus & ~has_minus
            only_minus = has_minus & ~has_plus

            cells = np.arange(ncells)
            rows = [cells[both], cells[both],
                    cells[only_plus], cells[only_plus],
                    cells[only_minus], cells[only_minus]]
            cols = [plus[both], minus[both],
                    plus[only_plus], cells[only_plus],
                    cells[only_minus], minus[only_minus]]
            vals = [np.full(both.sum(), 0.5 / h), np.full(both.sum(), -0.5 / h),
                    np.full(only_plus.sum(), 1. / h), np.full(only_plus.sum(), -1. / h),
                    np.full(only_minus.sum(), 1. / h), np.full(only_minus.sum(), -1. / h)]
            dmatrix = sp.coo_matrix(
                (np.hstack(vals), (np.hstack(rows), np.hstack(cols))),
                shape=(ncells, ncells)).tocsr()
            matrices.append(dmatrix)
        self._difference_matrices = matrices
        return matrices

    def discrete_operator(self, op: Operator) -> sp.csr_matrix:
        """A_h = sum_j D_j (x) A_j acting on u.ravel() with u of shape (ncells, N)"""
        _check_operator(op, self)
        a_h = None
        for dmatrix, amatrix in zip(self.difference_matrices(), op.matrices):
            term = sp.kron(dmatrix, sp.csr_matrix(amatrix), format='csr')
            a_h = term if a_h is None else a_h + term
        return a_h.tocsr()

    def boundary_hypersurface(self, side: Side='inside') -> Hypersurface:
        """Gamma = dOmega (omega = Omega) with outward normals"""
        return Hypersurface(
            self, self.facet_centers, self.facet_normals, self.facet_areas,
            self.facet_cell, np.full(self.nfacets, -1, dtype='int64'),
            side=side, source={'shape': 'domain'})

    def to_dict(self) -> dict:
        return to_jsonable(self.spec)

    @classmethod
    def from_dict(cls, spec: dict, h: Optional[float]=None) -> VoxelDomain:
        """
        {"shape": "box", "lo": [...], "hi": [...], "h": float}
        {"shape": "ball", "center": [...], "radius": float, "h": float, "surface": str}
        {"shape": "mask", "mask": nested 0/1 lists, "origin": [...], "h": float}
        {"shape": "named", "name": str, "h": float}
        An explicit h overrides the h in the domain spec.
        """
        try:
            shape = spec['shape']
        except (KeyError, TypeError):
            raise AvarInputError(f'domain spec requires "shape" in {SHAPES}')
        if h is None:
            if 'h' not in spec:
                raise AvarInputError('domain spec requires "h" (or pass --h)')
            h = float(spec['h'])
        try:
            if shape == 'box':
                return build_box(spec['lo'], spec['hi'], h)
            elif shape == 'ball':
                return build_ball(spec['center'], float(spec['radius']), h,
                                  surface=spec.get('surface', 'staircase'))
            elif shape == 'mask':
                mask = np.array(spec['mask'], dtype='bool')
                origin = spec.get('origin', np.zeros(mask.ndim))
                return build_from_mask(mask, h, origin=origin,
                                       require_connected=spec.get('connected', True))
            elif shape == 'named':
                return named_domain(spec['name'], h)
        except KeyError as error:
            raise AvarInputError(f'domain spec {shape!r} is missing {error}')
        raise AvarInputError(f'domain shape={shape!r} not in {SHAPES}')

    def __repr__(self) -> str:
        return (f'VoxelDomain(ndim={self.ndim}, h={self.h:g}, ncells={self.ncells}, '
                f'nfacets={self.nfacets}, surface={self.surface!r})')


def build_box(lo: np.ndarray, hi: np.ndarray, h: float) -> VoxelDomain:
    lo = np.atleast_1d(np.asarray(lo, dtype='float64'))
    hi = np.atleast_1d(np.asarray(hi, dtype='float64'))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise AvarInputError(f'lo={lo} and hi={hi} must be points of the same dimension')
    if not np.all(hi > lo):
        raise AvarInputError(f'degenerate box lo={lo} hi={hi}')
    if not h > 0.0:
        raise AvarInputError(f'h must be positive; h={h}')
    shape = tuple(int(floor((b - a) / h + 1e-9)) for a, b in zip(lo, hi))
    if min(shape) < 1:
        raise AvarInputError(f'the box lo={lo} hi={hi} has no cells at h={h}')
    spec = {'shape': 'box', 'lo': lo.tolist(), 'hi': hi.tolist(), 'h': float(h)}
    return VoxelDomain(np.ones(shape, dtype='bool'), h, lo, spec=spec)


def build_ball(center: np.ndarray, radius: float, h: float,
               surface: str='staircase') -> VoxelDomain:
    """cells whose centers are strictly inside the ball; the center sits on a lattice vertex"""
    center = np.atleast_1d(np.asarray(center, dtype='float64'))
    if not radius > 0.0:
        raise AvarInputError(f'radius must be positive; radius={radius}')
    if not h > 0.0:
        raise AvarInputError(f'h must be positive; h={h}')
    ndim = len(center)
    ncells_radius = int(ceil(radius / h)) + 1
    origin = center - ncells_radius * h
    shape = (2 * ncells_radius, ) * ndim
    index = np.indices(shape).reshape(ndim, -1).T
    centers = origin + (index + 0.5) * h
    inside = np.linalg.norm(centers - center, axis=1) < radius
    mask = inside.reshape(shape)
    spec = {'shape': 'ball', 'center': center.tolist(), 'radius': float(radius),
            'h': float(h), 'surface': surface}
    return VoxelDomain(mask, h, origin, spec=spec, surface=surface, ball=(center, float(radius)))


def build_from_mask(mask: np.ndarray, h: float, origin: Optional[np.ndarray]=None,
                    require_connected: bool=True) -> VoxelDomain:
    mask = np.asarray(mask, dtype='bool')
    if origin is None:
        origin = np.zeros(mask.ndim)
    return VoxelDomain(mask, h, origin, require_connected=require_connected)


def named_domain(name: str, h: float, surface: str='staircase') -> VoxelDomain:
    if name == 'interval':
        domain = build_box([0.], [1.], h)
    elif name == 'unit_square':
        domain = build_box([0., 0.], [1., 1.], h)
    elif name == 'unit_cube':
        domain = build_box([0., 0., 0.], [1., 1., 1.], h)
    elif name == 'unit_disk':
        domain = build_ball([0., 0.], 1.0, h, surface=surface)
    elif name == 'unit_ball':
        domain = build_ball([0., 0., 0.], 1.0, h, surface=surface)
    else:
        raise AvarInputError(f'domain name={name!r} not in {NAMED_DOMAINS}')
    return domain


def _check_operator(op: Operator, domain: VoxelDomain) -> None:
    if op.dim_space != domain.ndim:
        raise AvarInputError(f'{op!r} acts in d={op.dim_space} but the domain has d={domain.ndim}')


class Hypersurface:
    def __init__(self, domain: VoxelDomain, centers: np.ndarray, normals: np.ndarray,
                 areas: np.ndarray, cell_minus: np.ndarray, cell_plus: np.ndarray,
                 side: Side='inside', source: Optional[dict]=None):
        """
        Parameters
        ----------
        centers, normals : (nfacets, d) float arrays
            normals are unit and point out of omega
        areas : (nfacets,) float array
        cell_minus / cell_plus : (nfacets,) int array
            the adjacent domain cell on the omega side / the other side; -1 if none
        side : str
            'inside' takes traces from the omega side, 'outside' from the other
        """
        if side not in SIDES:
            raise AvarInputError(f'side={side!r} not in {SIDES}')
        nfacets = len(areas)
        if nfacets == 0:
            raise AvarInputError('the hypersurface is empty at this resolution')
        assert centers.shape == (nfacets, domain.ndim), centers.shape
        assert normals.shape == (nfacets, domain.ndim), normals.shape
        assert np.allclose(np.linalg.norm(normals, axis=1), 1.0), normals
        self.domain = domain
        self.centers = centers
        self.normals = normals
        self.areas = areas
        self.cell_minus = cell_minus
        self.cell_plus = cell_plus
        self.side = side
        self.source = {} if source is None else source

    @property
    def nfacets(self) -> int:
        return len(self.areas)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def trace_cells(self) -> np.ndarray:
        """the adjacent cell on the declared side; -1 where there is none"""
        if self.side == 'inside':
            return self.cell_minus
        return self.cell_plus

    def with_side(self, side: Side) -> Hypersurface:
        return Hypersurface(self.domain, self.centers, self.normals, self.areas,
                            self.cell_minus, self.cell_plus, side=side, source=self.source)

    def to_dict(self) -> dict:
        return to_jsonable({
            'omega': self.source,
            'side': self.side,
            'nfacets': self.nfacets,
            'total_area': self.total_area,
        })

    def __repr__(self) -> str:
        return f'Hypersurface(nfacets={self.nfacets}, side={self.side!r}, omega={self.source})'


def omega_indicator(omega: dict, domain: VoxelDomain) -> Callable[[np.ndarray], np.ndarray]:
    """x -> bool array for an omega shape spec"""
    try:
        shape = omega['shape']
        if shape == 'halfspace':
            normal = _as_vector(omega['normal'], domain.ndim, name='normal')
            offset = float(omega.get('offset', 0.0))
            return lambda x: x @ normal < offset
        elif shape == 'box':
            lo = _as_vector(omega['lo'], domain.ndim, name='lo')
            hi = _as_vector(omega['hi'], domain.ndim, name='hi')
            return lambda x: np.all((x > lo) & (x < hi), axis=1)
        elif shape == 'ball':
            center = _as_vector(omega['center'], domain.ndim, name='center')
            radius = float(omega['radius'])
            return lambda x: np.linalg.norm(x - center, axis=1) < radius
        elif shape == 'domain':
            return lambda x: np.ones(len(x), dtype='bool')
    except (KeyError, TypeError) as error:
        raise AvarInputError(f'invalid omega spec {omega}: {error}')
    raise AvarInputError(f'omega shape={omega.get("shape")!r} not in {OMEGA_SHAPES}')


def select_hypersurface(domain: VoxelDomain, omega: Union[dict, str],
                        side: Side='inside') -> Hypersurface:
    """
    Facets of the voxelized d(omega) with at least one adjacent cell in
    Omega; normals point out of omega.

    omega is a shape spec ({"shape": "halfspace", "normal", "offset"} for
    {x.n < offset}, "box", "ball", "domain" for omega = Omega) or one of the
    named boundary pieces of a box (left, right, bottom, top, front, back, boundary).
    """
    if isinstance(omega, str):
        omega = named_gamma(domain, omega)
    if not isinstance(omega, dict) or 'shape' not in omega:
        raise AvarInputError(f'invalid omega spec {omega}')
    if omega['shape'] == 'domain':
        return domain.boundary_hypersurface(side=side)

    ndim = domain.ndim
    h = domain.h
    shape = tuple(n + 2 for n in domain.mask.shape)
    origin = domain.origin - h
    index = np.indices(shape).reshape(ndim, -1).T
    in_omega = omega_indicator(omega, domain)(origin + (index + 0.5) * h).reshape(shape)
    cell_id = np.pad(domain.cell_id, 1, mode='constant', constant_values=-1)

    centers = []
    normals = []
    cell_minus = []
    cell_plus = []
    for j in range(ndim):
        lower = [slice(None)] * ndim
        upper = [slice(None)] * ndim
        lower[j] = slice(0, -1)
        upper[j] = slice(1, None)
        omega_a = in_omega[tuple(lower)]
        omega_b = in_omega[tuple(upper)]
        id_a = cell_id[tuple(lower)]
        id_b = cell_id[tuple(upper)]
        keep = (omega_a != omega_b) & ((id_a >= 0) | (id_b >= 0))
        ia = np.argwhere(keep)
        a_in_omega = omega_a[keep]
        ida = id_a[keep]
        idb = id_b[keep]

        shift = np.zeros(ndim)
        shift[j] = 1.0
        centers.append(origin + (ia + 0.5) * h + 0.5 * h * shift)
        sign = np.where(a_in_omega, 1.0, -1.0)
        normals.append(sign[:, np.newaxis] * shift[np.newaxis, :])
        cell_minus.append(np.where(a_in_omega, ida, idb))
        cell_plus.append(np.where(a_in_omega, idb, ida))

    areas = np.full(sum(len(c) for c in centers), domain.facet_area)
    if len(areas) == 0:
        raise AvarInputError(f'd(omega) does not meet the closure of the domain; omega={omega}')
    return Hypersurface(domain, np.vstack(centers), np.vstack(normals), areas,
                        np.hstack(cell_minus).astype('int64'),
                        np.hstack(cell_plus).astype('int64'),
                        side=side, source=omega)


def named_gamma(domain: VoxelDomain, name: str) -> dict:
    """omega spec whose boundary is one face of the bounding box"""
    if name == 'boundary':
        return {'shape': 'domain'}
    faces = {'left': (0, 1.0), 'right': (0, -1.0),
             'bottom': (1, 1.0), 'top': (1, -1.0),
             'front': (2, 1.0), 'back': (2, -1.0)}
    if name not in faces:
        raise AvarInputError(f'gamma name={name!r} not in {NAMED_GAMMAS}')
    axis, direction = faces[name]
    if axis >= domain.ndim:
        raise AvarInputError(f'gamma={name!r} needs d > {axis}; d={domain.ndim}')
    lo, hi = domain.bounds
    normal = np.zeros(domain.ndim)
    # omega = {x_axis > lo} is {-x_axis < -lo}; omega = {x_axis < hi}
    normal[axis] = -direction
    offset = -lo[axis] if direction > 0 else hi[axis]
    return {'shape': 'halfspace', 'normal': normal.tolist(), 'offset': float(offset),
            'name': name}


class GridFunction:
    def __init__(self, domain: VoxelDomain, values: np.ndarray, kind: str='cell',
                 hypersurface: Optional[Hypersurface]=None):
        """
        Parameters
        ----------
        values : (count, ncomponents) or (count,) float array
            count = domain.ncells for kind='cell', hypersurface.nfacets for kind='facet'
        """
        assert kind in {'cell', 'facet'}, kind
        values = _values_2d(np.asarray(values, dtype='float64'))
        if kind == 'cell':
            count = domain.ncells
        else:
            if hypersurface is None:
                raise AvarInputError('a facet GridFunction needs its hypersurface')
            count = hypersurface.nfacets
        if values.shape[0] != count:
            raise AvarInputError(f'{kind} GridFunction needs {count} values; got {values.shape[0]}')
        self.domain = domain
        self.values = values
        self.kind = kind
        self.hypersurface = hypersurface

    @property
    def ncomponents(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        if self.kind == 'cell':
            return self.domain.centers
        return self.hypersurface.centers

    @property
    def weights(self) -> np.ndarray:
        if self.kind == 'cell':
            return np.full(self.domain.ncells, self.domain.cell_volume)
        return self.hypersurface.areas

    @classmethod
    def from_function(cls, domain: VoxelDomain, func: Callable[[np.ndarray], np.ndarray],
                      kind: str='cell', hypersurface: Optional[Hypersurface]=None) -> GridFunction:
        """samples func((npoints, d)) -> (npoints,) or (npoints, N) at cell or facet centers"""
        if kind == 'cell':
            points = domain.centers
        else:
            if hypersurface is None:
                raise AvarInputError('a facet GridFunction needs its hypersurface')
            points = hypersurface.centers
        return cls(domain, func(points), kind=kind, hypersurface=hypersurface)

    def __add__(self, other: GridFunction) -> GridFunction:
        assert other.domain is self.domain and other.kind == self.kind
        return GridFunction(self.domain, self.values + other.values, self.kind, self.hypersurface)

    def __mul__(self, scale: float) -> GridFunction:
        return GridFunction(self.domain, scale * self.values, self.kind, self.hypersurface)

    __rmul__ = __mul__

    def lp_norm(self, p: float=1.0) -> float:
        """(sum_q w_q |u_q|^p)^(1/p) with the Euclidean norm on components"""
        pointwise = np.linalg.norm(self.values, axis=1)
        return float(np.sum(self.weights * pointwise ** p) ** (1. / p))

    def __repr__(self) -> str:
        return f'GridFunction(kind={self.kind!r}, count={self.values.shape[0]}, ncomponents={self.ncomponents})'


def _check_cell_function(op: Operator, u: GridFunction) -> None:
    if u.kind != 'cell':
        raise AvarInputError(f'expected a cell GridFunction; kind={u.kind!r}')
    _check_operator(op, u.domain)
    if u.ncomponents != op.dim_from:
        raise AvarInputError(f'u has {u.ncomponents} components; {op!r} needs N={op.dim_from}')


def apply_discrete(op: Operator, u: GridFunction) -> GridFunction:
    """(A_h u)(x) = sum_j A_j D_j u(x) at every cell"""
    _check_cell_function(op, u)
    domain = u.domain
    a_h = domain.discrete_operator(op)
    values = (a_h @ u.values.ravel()).reshape(domain.ncells, op.dim_to)
    return GridFunction(domain, values, kind='cell')


def total_A_variation(op: Operator, u: GridFunction) -> float:
    """sum_cells h^d |A_h u|"""
    au = apply_discrete(op, u)
    return float(au.domain.cell_volume * np.linalg.norm(au.values, axis=1).sum())


def trace_restrict(u: GridFunction, gamma: Hypersurface) -> GridFunction:
    """facet value = value of the adjacent cell on gamma's declared side"""
    if u.kind != 'cell':
        raise AvarInputError(f'expected a cell GridFunction; kind={u.kind!r}')
    if gamma.domain is not u.domain:
        raise AvarInputError('the hypersurface belongs to another domain')
    cells = gamma.trace_cells
    missing = np.flatnonzero(cells < 0)
    if len(missing):
        raise AvarInputError(
            f'{len(missing)} facets of gamma have no domain cell on side={gamma.side!r} '
            f'(first at {gamma.centers[missing[0]].tolist()})')
    return GridFunction(u.domain, u.values[cells], kind='facet', hypersurface=gamma)


def boundary_term(op: Operator, trace: GridFunction) -> float:
    """sum_facets area |A[nu] tr u|"""
    gamma = trace.hypersurface
    # A[nu_f] tr_f for every facet
    symbol_values = np.einsum('fj,jkn,fn->fk', gamma.normals, op.matrices, trace.values)
    return float(np.sum(gamma.areas * np.linalg.norm(symbol_values, axis=1)))


class ExtensionReport:
    def __init__(self, interior: float, boundary: float, total: float,
                 margin: int, h: float):
        self.interior = interior
        self.boundary = boundary
        self.total = total
        self.margin = margin
        self.h = h

    @property
    def gap(self) -> float:
        return abs(self.total - (self.interior + self.boundary))

    @property
    def relative_gap(self) -> float:
        scale = self.interior + self.boundary
        if scale == 0.0:
            return 0.0 if self.total == 0.0 else np.inf
        return self.gap / scale

    def to_dict(self) -> dict:
        return to_jsonable({
            'interior': self.interior,
            'boundary': self.boundary,
            'total': self.total,
            'gap': self.gap,
            'relative_gap': self.relative_gap,
            'margin': self.margin,
            'h': self.h,
        })


def extend_by_zero(op: Operator, u: GridFunction, margin: int=1,
                   log: Optional[SimpleLogger]=None) -> tuple[GridFunction, ExtensionReport]:
    """
    u~ = u in Omega, 0 on the rest of the enlarged box.  The total variation
    of u~ uses forward differences on the box (so the jump across dOmega is
    one-sided) and is compared with interior + boundary terms.
    """
    log = get_logger(log, level='warning')
    _check_cell_function(op, u)
    if margin < 1:
        raise AvarInputError(f'margin must be >= 1; margin={margin}')
    domain = u.domain
    h = domain.h
    ndim = domain.ndim
    nfrom = op.dim_from

    shape = tuple(n + 2 * margin for n in domain.mask.shape)
    box = VoxelDomain(np.ones(shape, dtype='bool'), h, domain.origin - margin * h,
                      require_connected=False)
    extended = np.zeros(shape + (nfrom, ))
    extended[tuple((domain.cell_index + margin).T)] = u.values

    au = np.zeros(shape + (op.dim_to, ))
    for j in range(ndim):
        forward = np.zeros_like(extended)
        lower = [slice(None)] * ndim
        upper = [slice(None)] * ndim
        lower[j] = slice(0, -1)
        upper[j] = slice(1, None)
        forward[tuple(lower)] = extended[tuple(upper)] - extended[tuple(lower)]
        # past the last lattice cell u~ = 0
        last = [slice(None)] * ndim
        last[j] = -1
        forward[tuple(last)] = -extended[tuple(last)]
        au += (forward / h) @ op.matrices[j].T
    total = float(domain.cell_volume * np.linalg.norm(au, axis=-1).sum())

    interior = total_A_variation(op, u)
    trace = trace_restrict(u, domain.boundary_hypersurface())
    boundary = boundary_term(op, trace)
    report = ExtensionReport(interior, boundary, total, margin, h)
    log.info(f'{op.name}: extension by zero: interior={interior:.6g} boundary={boundary:.6g} '
             f'total={total:.6g} (relative gap {report.relative_gap:.3g})')
    u_extended = GridFunction(box, extended.reshape(-1, nfrom), kind='cell')
    return u_extended, report
