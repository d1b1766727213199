from typing import Optional, Union
import numpy as np

from avar.core.errors import AvarInputError


def _values_2d(values: np.ndarray, ncomponents: Optional[int]=None) -> np.ndarray:
    """reshapes (n,) to (n, 1) so every field is (npoints, ncomponents)"""
    values = np.asarray(values)
    if values.ndim == 1:
        values = values.reshape(len(values), 1)
    if values.ndim != 2:
        raise AvarInputError(f'expected a (npoints, ncomponents) array; shape={values.shape}')
    if ncomponents is not None and values.shape[1] != ncomponents:
        raise AvarInputError(f'expected {ncomponents} components; shape={values.shape}')
    return values


def _as_vector(x: Union[np.ndarray, list[float]], n: int, name: str='x') -> np.ndarray:
    """validates a length-n vector; keeps complex input complex"""
    x = np.asarray(x)
    if x.ndim != 1 or len(x) != n:
        raise AvarInputError(f'{name} must have length {n}; shape={x.shape}')
    if not np.iscomplexobj(x):
        x = x.astype('float64')
    return x


def _as_points(x: np.ndarray, ndim: int) -> np.ndarray:
    """(ndim,) or (npoints, ndim) -> (npoints, ndim)"""
    x = np.asarray(x, dtype='float64')
    if x.ndim == 1:
        x = x.reshape(1, len(x))
    if x.ndim != 2 or x.shape[1] != ndim:
        raise AvarInputError(f'points must be (npoints, {ndim}); shape={x.shape}')
    return x


def _update_name(name: Optional[str], default: str='') -> str:
    if name is None:
        return default
    if not isinstance(name, str):
        raise NotImplementedError(name)
    return name

