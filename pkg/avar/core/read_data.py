"""
GridFunction binary format (little-endian):

    b'AVGF'
    int64 kind (0=cell, 1=facet), int64 count, int64 ncomponents
    float64 values[count * ncomponents] (row-major)
"""
import os
from struct import pack, unpack
from typing import BinaryIO, Optional

import numpy as np

from avar.core.errors import AvarInputError
from avar.core.voxel import GridFunction, Hypersurface, VoxelDomain

MAGIC = b'AVGF'
KINDS = ['cell', 'facet']
HEADER_SIZE = 4 + 3 * 8


def write_grid_function(filename: str, u: GridFunction) -> None:
    with open(filename, 'wb') as f:
        f.write(grid_function_to_bytes(u))


def grid_function_to_bytes(u: GridFunction) -> bytes:
    count, ncomponents = u.values.shape
    header = MAGIC + pack('<3q', KINDS.index(u.kind), count, ncomponents)
    return header + np.ascontiguousarray(u.values, dtype='<f8').tobytes()


def read_grid_function(filename: str, domain: VoxelDomain,
                       hypersurface: Optional[Hypersurface]=None) -> GridFunction:
    if not os.path.exists(filename):
        raise AvarInputError(f'missing GridFunction file {filename!r}')
    with open(filename, 'rb') as f:
        return _read_grid_function(f, domain, hypersurface)


def _read_grid_function(f: BinaryIO, domain: VoxelDomain,
                        hypersurface: Optional[Hypersurface]=None) -> GridFunction:
    data = f.read(HEADER_SIZE)
    if len(data) != HEADER_SIZE or data[:4] != MAGIC:
        raise AvarInputError(f'not a GridFunction file; header={data[:4]!r}')
    ikind, count, ncomponents = unpack('<3q', data[4:])
    if not 0 <= ikind < len(KINDS) or count < 0 or ncomponents < 1:
        raise AvarInputError(f'invalid GridFunction header kind={ikind} count={count} '
                             f'ncomponents={ncomponents}')
    data = f.read(8 * count * ncomponents)
    if len(data) != 8 * count * ncomponents:
        raise AvarInputError(f'truncated GridFunction: expected {count}x{ncomponents} float64 values')
    values = np.frombuffer(data, dtype='<f8').reshape(count, ncomponents).astype('float64')
    return GridFunction(domain, values, kind=KINDS[ikind], hypersurface=hypersurface)

