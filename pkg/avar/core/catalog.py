"""
The operator catalog with the known truths used by the acceptance suites.
Every expected value carries a provenance tag:

    LITERATURE - stated in the source literature
    DERIVED - computed by hand / an independent oracle
    TRIVIAL - forced by linearity, counting or normalization
"""
from __future__ import annotations
from typing import Any, Optional

import numpy as np

from avar.core.errors import AvarInputError
from avar.core.operator import Operator
from avar.utils.json_utils import to_jsonable

PROVENANCES = ['LITERATURE', 'DERIVED', 'TRIVIAL']


def _expect(value: Any, provenance: str, note: str='') -> dict:
    assert provenance in PROVENANCES, provenance
    return {'value': value, 'provenance': provenance, 'note': note}


class CatalogEntry:
    def __init__(self, name: str, operator: Operator, expected: dict[str, dict],
                 description: str=''):
        for key, expectation in expected.items():
            assert expectation['provenance'] in PROVENANCES, (key, expectation)
        self.name = name
        self.operator = operator
        self.expected = expected
        self.description = description

    def expected_value(self, key: str) -> Optional[Any]:
        if key not in self.expected:
            return None
        return self.expected[key]['value']

    def to_dict(self) -> dict:
        return to_jsonable({
            'name': self.name,
            'description': self.description,
            'operator': self.operator.to_dict(),
            'expected': self.expected,
        })


def gradient(ndim: int, nvalues: int=1) -> Operator:
    """A u = grad u for u: R^d -> R^N; k = d*N with row j*N + i = d_j u_i"""
    matrices = np.zeros((ndim, ndim * nvalues, nvalues))
    for j in range(ndim):
        matrices[j, j*nvalues:(j+1)*nvalues, :] = np.eye(nvalues)
    return Operator(matrices, name=f'gradient{ndim}d' if nvalues == 1 else f'gradient{ndim}d_n{nvalues}')


def symmetric_gradient(ndim: int) -> Operator:
    """
    upper triangle of (du + du^T)/2 in row-major order:
    d=2: (d1u1, (d1u2 + d2u1)/2, d2u2)
    d=3: (11, 12, 13, 22, 23, 33)
    """
    pairs = [(a, b) for a in range(ndim) for b in range(a, ndim)]
    matrices = np.zeros((ndim, len(pairs), ndim))
    for row, (a, b) in enumerate(pairs):
        if a == b:
            matrices[a, row, a] = 1.0
        else:
            matrices[a, row, b] = 0.5
            matrices[b, row, a] = 0.5
    return Operator(matrices, name=f'symgrad{ndim}d')


def cauchy_riemann() -> Operator:
    return Operator([[[1., 0.], [0., 1.]],
                     [[0., -1.], [1., 0.]]], name='cauchy_riemann')


def dx_only() -> Operator:
    """A u = d_1 u on R^2 -> R^2; the symbol vanishes at xi = (0, 1)"""
    return Operator([np.eye(2), np.zeros((2, 2))], name='dx_only')


def divergence(ndim: int=2) -> Operator:
    matrices = np.zeros((ndim, 1, ndim))
    for j in range(ndim):
        matrices[j, 0, j] = 1.0
    return Operator(matrices, name=f'divergence{ndim}d')


def _build_catalog() -> dict[str, CatalogEntry]:
    entries = [
        CatalogEntry('gradient1d', gradient(1), {
            'real': _expect('elliptic', 'TRIVIAL', 'A[xi] = xi'),
            'complex': _expect('elliptic', 'TRIVIAL', 'A[xi] = xi'),
            'kernel_dimension': _expect(1, 'LITERATURE', 'constants'),
            'cancelling': _expect(False, 'LITERATURE', 'd = 1 is excluded from the cancelling route'),
            'poincare_subset_interval': _expect(1. / np.pi, 'DERIVED', 'first Neumann eigenvalue pi^2'),
            'poincare_trace_interval_left': _expect(2. / np.pi, 'DERIVED', 'u(0) = 0, u\'(1) = 0: (pi/2)^2'),
            'l1_poincare_upper': _expect(0.5, 'DERIVED', 'sharp mean-zero L^1 constant on (0, 1)'),
        }, 'u\' on the real line'),
        CatalogEntry('gradient2d', gradient(2), {
            'real': _expect('elliptic', 'LITERATURE'),
            'complex': _expect('elliptic', 'LITERATURE'),
            'kernel_dimension': _expect(1, 'LITERATURE', 'spanned by the constant function'),
            'cancelling': _expect(True, 'DERIVED', 'im A[xi] = span(xi)'),
            'poincare_subset_square': _expect(1. / np.pi, 'DERIVED', 'separable Neumann eigenfunction'),
            'sobolev_disk_constant_ratio': _expect(np.sqrt(np.pi) / (2. * np.pi), 'DERIVED',
                                                   'u = 1 on the unit disk; geometric surface'),
        }, 'grad u for scalar u on R^2'),
        CatalogEntry('symgrad2d', symmetric_gradient(2), {
            'real': _expect('elliptic', 'LITERATURE'),
            'complex': _expect('elliptic', 'LITERATURE'),
            'kernel_dimension': _expect(3, 'DERIVED', 'two translations and one rotation'),
            'cancelling': _expect(True, 'DERIVED', 'images at (1,0), (0,1), (1,1) intersect to 0'),
        }, 'symmetric gradient on R^2'),
        CatalogEntry('symgrad3d', symmetric_gradient(3), {
            'real': _expect('elliptic', 'LITERATURE'),
            'complex': _expect('elliptic', 'LITERATURE'),
            'kernel_dimension': _expect(6, 'DERIVED', 'three translations and three rotations'),
            'cancelling': _expect(True, 'LITERATURE', 'C-elliptic implies cancelling'),
        }, 'symmetric gradient on R^3'),
        CatalogEntry('cauchy_riemann', cauchy_riemann(), {
            'real': _expect('elliptic', 'DERIVED', 'det A[xi] = xi_1^2 + xi_2^2'),
            'complex': _expect('not_elliptic', 'DERIVED', 'witness xi ~ (1, i)'),
            'cancelling': _expect(False, 'DERIVED', 'A[xi] is onto for every real xi != 0'),
        }, 'Cauchy-Riemann operator'),
        CatalogEntry('dx_only', dx_only(), {
            'real': _expect('not_elliptic', 'TRIVIAL', 'symbol vanishes at xi = (0, 1)'),
            'complex': _expect('not_elliptic', 'TRIVIAL', 'symbol vanishes at xi = (0, 1)'),
            'counterexample_l1': _expect(0.5, 'DERIVED', 'f = x_2 e_1 on the unit square'),
        }, 'd_1 only on R^2 -> R^2'),
        CatalogEntry('divergence2d', divergence(2), {
            'real': _expect('not_elliptic', 'DERIVED', 'A[xi] v = <xi, v> has a kernel for N >= 2'),
            'complex': _expect('not_elliptic', 'DERIVED', 'A[xi] v = <xi, v> has a kernel for N >= 2'),
        }, 'divergence of u: R^2 -> R^2'),
    ]
    return {entry.name: entry for entry in entries}


CATALOG = _build_catalog()
ELLIPTIC_NAMES = ['gradient2d', 'symgrad2d']


def catalog_entry(name: str) -> CatalogEntry:
    """'gradient2d', 'gradient2d.json' and 'symgrad2d' style names"""
    stem = name[:-5] if name.endswith('.json') else name
    try:
        return CATALOG[stem]
    except KeyError:
        raise AvarInputError(f'unknown catalog operator {name!r}; choose from {list(CATALOG)}')


def catalog_operator(name: str) -> Operator:
    return catalog_entry(name).operator
