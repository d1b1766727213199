"""
Seeded families of test fields on a VoxelDomain:

- smooth fields: damped trigonometric sums cos/sin(pi kappa.x') with
  |kappa|_inf <= 4 plus polynomials of degree <= 3, x' the coordinates
  scaled to the bounding box, standard normal coefficients
- mollified indicators 0.5 * (1 - tanh((|x - c| - rho) / eps)) v
"""
from __future__ import annotations
import itertools
from typing import Optional

import numpy as np

from avar.core.polynomial import monomials, _monomial_values
from avar.core.voxel import VoxelDomain

MAX_WAVENUMBER = 4
MAX_POLYNOMIAL_DEGREE = 3


def _scaled_points(domain: VoxelDomain, points: np.ndarray) -> np.ndarray:
    lo, hi = domain.bounds
    return (points - lo) / (hi - lo)


def smooth_basis(domain: VoxelDomain, points: np.ndarray,
                 max_wavenumber: int=MAX_WAVENUMBER,
                 max_degree: int=MAX_POLYNOMIAL_DEGREE) -> np.ndarray:
    """(npoints, nbasis) values of the damped trig/polynomial family"""
    x = _scaled_points(domain, points)
    ndim = domain.ndim
    wavenumbers = np.array(list(itertools.product(range(max_wavenumber + 1), repeat=ndim)),
                           dtype='float64')
    damping = 1. / (1. + np.sum(wavenumbers ** 2, axis=1))
    phase = np.pi * (x @ wavenumbers.T)
    nonzero = np.any(wavenumbers > 0, axis=1)
    columns = [
        np.cos(phase) * damping,
        # sin(0) = 0
        np.sin(phase[:, nonzero]) * damping[nonzero],
        _monomial_values(x, monomials(ndim, max_degree)),
    ]
    return np.hstack(columns)


def random_smooth_fields(domain: VoxelDomain, ncomponents: int, count: int, seed: int,
                         points: Optional[np.ndarray]=None) -> list[np.ndarray]:
    """count (npoints, ncomponents) arrays sampled at points (default: the cell centers)"""
    if points is None:
        points = domain.centers
    basis = smooth_basis(domain, points)
    rng = np.random.default_rng(seed)
    coefficients = rng.standard_normal((count, basis.shape[1], ncomponents))
    return [basis @ coefficients[i] for i in range(count)]


def mollified_indicator(points: np.ndarray, center: np.ndarray, radius: float,
                        width: float, direction: np.ndarray) -> np.ndarray:
    distance = np.linalg.norm(points - center, axis=1)
    profile = 0.5 * (1. - np.tanh((distance - radius) / width))
    return profile[:, np.newaxis] * direction[np.newaxis, :]


def random_mollified_indicators(domain: VoxelDomain, ncomponents: int, count: int,
                                seed: int) -> list[np.ndarray]:
    """smoothed indicators of random balls with widths of a few cells"""
    lo, hi = domain.bounds
    diameter = float(np.linalg.norm(hi - lo))
    rng = np.random.default_rng(seed)
    fields = []
    for unused_i in range(count):
        center = lo + (hi - lo) * rng.uniform(0.25, 0.75, size=domain.ndim)
        radius = diameter * rng.uniform(0.1, 0.3)
        width = max(diameter * rng.uniform(0.02, 0.08), 2.0 * domain.h)
        direction = rng.standard_normal(ncomponents)
        direction /= np.linalg.norm(direction)
        fields.append(mollified_indicator(domain.centers, center, radius, width, direction))
    return fields
