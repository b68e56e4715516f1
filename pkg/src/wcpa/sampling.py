"""Deterministic point sets on balls, spheres and annuli."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def _sobol(m: int, dim: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    # random_base2 needs a power of two; draw the next one up and truncate
    k = max(0, int(np.ceil(np.log2(max(m, 1)))))
    return sampler.random_base2(k)[:m]


def _unit_dims(d: int) -> int:
    """Number of uniform coordinates :func:`_directions_from_unit` consumes."""
    return d - 1 if d <= 3 else d


def _directions_from_unit(u: np.ndarray, d: int) -> np.ndarray:
    """Map ``[0,1]^k`` onto the unit sphere in R^d.

    Area preserving for d <= 3 (``k = d - 1``); above that, ``k = d``
    coordinates go through the normal quantile and get normalized.
    """
    if d == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    if d == 2:
        ang = 2 * np.pi * u[:, 0]
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if d == 3:
        z = 2 * u[:, 0] - 1
        phi = 2 * np.pi * u[:, 1]
        s = np.sqrt(np.clip(1 - z * z, 0, None))
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    from scipy.special import ndtri
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_points(d: int, r: float, m: int, seed: int = 0, *, rmin: float = 0.0) -> np.ndarray:
    """``m`` low-discrepancy points uniform on the shell ``rmin <= |x| <= r``.

    ``d = 1`` uses an evenly spaced grid on both sides of the origin.
    """
    if d == 1:
        if rmin == 0.0:
            return np.linspace(-r, r, m).reshape(-1, 1)
        half = np.linspace(rmin, r, max(m // 2, 1))
        return np.concatenate([-half[::-1], half]).reshape(-1, 1)
    u = _sobol(m, 1 + _unit_dims(d), seed)
    # radius by inverse CDF of the shell volume
    rad = (rmin ** d + u[:, 0] * (r ** d - rmin ** d)) ** (1.0 / d)
    return rad[:, None] * _directions_from_unit(u[:, 1:], d)


def sphere_points(d: int, m: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points on the unit sphere in R^d."""
    if d == 1:
        return np.array([[-1.0], [1.0]])
    return _directions_from_unit(_sobol(m, _unit_dims(d), seed), d)


def random_directions(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((m, d))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return g / nrm


def hessian_sample(d: int, r: float, m: int, seed: int = 0) -> np.ndarray:
    """Sample of the closed ball used for Hessian checks.

    Contains the origin, a layer on the bounding sphere and quasi-uniform
    interior points; minima of Hessian eigenvalues often sit on the boundary.
    """
    if d == 1:
        return np.linspace(-r, r, 2 * (m // 2) + 1).reshape(-1, 1)
    n_bd = max(m // 5, 8)
    inner = ball_points(d, r, m - n_bd - 1, seed)
    bd = r * sphere_points(d, n_bd, seed + 1)
    return np.vstack([np.zeros((1, d)), bd, inner])
