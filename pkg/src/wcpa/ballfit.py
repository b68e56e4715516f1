"""Convex polynomial fits on a ball.

Two fitting routes share one convexity safety net:

* ``lsq``: discrete least squares in the scaled monomial basis;
* ``minimax``: discrete (optionally weighted) Chebyshev fit by a sum of
  univariate ridge polynomials, each convex on the projection of the ball,
  solved as one linear program.

Either result is passed through :func:`convexify_on_ball`, which adds the
smallest isotropic ``mu |x|^2`` that makes the sampled Hessian PSD on B(r).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations
from math import comb, factorial
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import sparse
from scipy.optimize import linprog

from .oracles import PiecewiseLinearConvex, pl_lipschitz
from .poly import MultiPoly, eval_poly, hessian_at
from .sampling import ball_points, hessian_sample, sphere_points

MU_SAFETY = 1.05
MU_RETRIES = 3
CHOP = 1e-13


class RankDeficientError(np.linalg.LinAlgError):
    """Design matrix lost rank; retry with a lower degree."""


class LSFit(NamedTuple):
    poly: MultiPoly
    residual: float
    n_points: int


def monomial_exponents(d: int, n: int) -> np.ndarray:
    """All exponents of total degree <= n in graded lexicographic order."""
    exps = []
    for k in range(n + 1):
        # stars and bars: bar positions among k + d - 1 slots give a composition of k
        for bars in combinations(range(k + d - 1), d - 1):
            edges = (-1,) + bars + (k + d - 1,)
            exps.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(d)))
    exps.sort(key=lambda e: (sum(e), e))
    return np.array(exps, dtype=np.int64).reshape(-1, d)


def design_matrix(pts: np.ndarray, exps: np.ndarray) -> np.ndarray:
    maxdeg = int(exps.max()) if exps.size else 0
    powers = np.ones((maxdeg + 1,) + pts.shape)
    for k in range(1, maxdeg + 1):
        powers[k] = powers[k - 1] * pts
    cols = np.arange(pts.shape[1])
    return np.prod(powers[exps, :, cols], axis=1).T


def _evaluator(h) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(h, MultiPoly):
        return lambda pts: np.atleast_1d(eval_poly(h, pts))
    return lambda pts: np.asarray(h(pts), dtype=float).reshape(-1)


def fit_points(d: int, r: float, n_min: int, seed: int = 0) -> np.ndarray:
    if d == 1:
        return np.linspace(-r, r, max(n_min, 2001)).reshape(-1, 1)
    n_bd = n_min // 8
    return np.vstack([ball_points(d, r, n_min, seed), r * sphere_points(d, n_bd, seed + 5)])


def fit_least_squares(h, r: float, n: int, *, oversample: int = 4, min_points: int = 4000,
                      seed: int = 0) -> LSFit:
    """Least-squares polynomial of total degree <= n fitting ``h`` on B(r).

    Uses at least ``oversample`` times as many quasi-uniform points as the
    dimension of the polynomial space.  The solve works on the design
    matrix in the variable ``x / r`` (SVD, no normal equations).
    """
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    d = h.dim
    exps = monomial_exponents(d, n)
    pts = fit_points(d, r, max(oversample * len(exps), min_points), seed)
    y = _evaluator(h)(pts)
    V = design_matrix(pts / r, exps)
    coef, _, rank, _ = np.linalg.lstsq(V, y, rcond=None)
    if rank < len(exps):
        raise RankDeficientError(f"design matrix rank {rank} < {len(exps)} at degree {n}")
    # scaled coefficients measure each term's size on the ball; rounding-level
    # ones would only fake curvature (an affine h gets tiny quadratic terms)
    coef[np.abs(coef) < CHOP * max(float(np.max(np.abs(y))), 1e-300)] = 0.0
    resid = float(np.sqrt(np.mean((V @ coef - y) ** 2)))
    coef = coef / float(r) ** exps.sum(axis=1)
    return LSFit(MultiPoly.from_arrays(exps, coef), resid, pts.shape[0])


def min_hessian_eig_sampled(P: MultiPoly, r: float, m: int = 10000, seed: int = 0) -> float:
    """Smallest Hessian eigenvalue of ``P`` over a deterministic sample of B(r)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if P.degree < 2:
        return 0.0
    pts = hessian_sample(P.dim, r, m, seed)
    H = hessian_at(P, pts)
    return float(np.linalg.eigvalsh(H)[:, 0].min())


def convexify_on_ball(P: MultiPoly, r: float, *, m: int = 10000,
                      seed: int = 0) -> tuple[MultiPoly, float]:
    """Add ``mu |x|^2`` so the sampled Hessian of ``P`` is PSD on B(r)."""
    lam = min_hessian_eig_sampled(P, r, m, seed)
    if lam >= 0:
        return P, 0.0
    sq = MultiPoly(P.dim, {tuple(2 if j == i else 0 for j in range(P.dim)): 1.0
                           for i in range(P.dim)})
    mu = MU_SAFETY * (-lam) / 2
    for _ in range(MU_RETRIES + 1):
        Q = P + sq.scale(mu)
        if min_hessian_eig_sampled(Q, r, m, seed) >= 0:
            return Q, mu
        mu *= 2
    raise ArithmeticError("sampled Hessian margin stayed negative after convexification")


# -- weighted minimax fit over sums of convex ridge functions ----------------


def ridge_directions(d: int, n: int) -> np.ndarray:
    """Unit directions ``u_j`` whose ridge powers ``(u_j . x)^k`` span degree-``n`` polynomials.

    The count is the dimension of the degree-``n`` homogeneous polynomials in
    ``d`` variables.  Directions are in general position on a hemisphere
    (for d >= 3 they start with the coordinate axes).
    """
    if d == 1:
        return np.ones((1, 1))
    count = comb(n + d - 1, d - 1)
    if d == 2:
        th = np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    # the axes first so that separable targets are in reach of the convex cone
    u = sphere_points(d, 2 * count + 16, seed=d * 7919 + n)
    u = np.vstack([np.eye(d), u[u[:, -1] > 1e-3]])[:count]
    if u.shape[0] < count:  # pragma: no cover - sobol hemisphere always has enough
        raise ValueError("not enough ridge directions")
    return u


def _unit_shell(d: int, m: int, seed: int) -> np.ndarray:
    """Points of the unit ball, denser towards the sphere, plus the origin."""
    if d == 1:
        y = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        return np.concatenate([y, [-1.0, 0.0, 1.0]]).reshape(-1, 1)
    u = ball_points(d, 1.0, m, seed)
    rad = np.linalg.norm(u, axis=1, keepdims=True)
    dirs = u / np.where(rad > 0, rad, 1.0)
    return np.vstack([np.zeros((1, d)), dirs * np.sin(0.5 * np.pi * rad),
                      sphere_points(d, max(m // 4, 8), seed + 1)])


def _cheb_columns(t: np.ndarray, n: int, der: int = 0) -> np.ndarray:
    """``out[..., k] = T_k^(der)(t)``."""
    eye = np.eye(n + 1)
    cols = [cheb.chebval(t, cheb.chebder(eye[k], der) if der else eye[k]) for k in range(n + 1)]
    return np.stack(cols, axis=-1)


def _min_on_interval(c: np.ndarray) -> float:
    """Exact minimum of the Chebyshev series ``c`` over [-1, 1]."""
    if c.size == 0:
        return 0.0
    cand = [-1.0, 1.0]
    if c.size > 2:
        roots = cheb.chebroots(cheb.chebder(c))
        cand += [z.real for z in roots if abs(z.imag) < 1e-9 and -1 < z.real < 1]
    return float(np.min(cheb.chebval(np.array(cand), c)))


def ridge_to_monomial(coef: np.ndarray, dirs: np.ndarray, r: float) -> MultiPoly:
    """``sum_j p_j(u_j . x / r)`` as a MultiPoly, ``coef[j]`` the Chebyshev series of ``p_j``."""
    nd, n1 = coef.shape
    d = dirs.shape[1]
    n = n1 - 1
    exps = monomial_exponents(d, n)
    k = exps.sum(axis=1)
    mono = np.zeros((nd, n1))
    for j, c in enumerate(coef):
        m = cheb.cheb2poly(c)
        mono[j, :m.size] = m
    multinom = np.array([factorial(int(s)) / np.prod([factorial(int(e)) for e in row])
                         for row, s in zip(exps, k)])
    upow = np.prod(dirs[:, None, :] ** exps[None, :, :], axis=2)  # nd x T
    vals = multinom * np.einsum("jt,jt->t", mono[:, k], upow) / float(r) ** k
    return MultiPoly.from_arrays(exps, vals)


class MinimaxFit(NamedTuple):
    poly: MultiPoly
    level: float
    n_directions: int
    repair: float


def convex_ridge_lp(Y: np.ndarray, y: np.ndarray, n: int, w: np.ndarray | None = None
                    ) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Weighted minimax fit of values ``y`` at unit-ball points ``Y`` by convex ridges.

    Returns ``(coef, dirs, level, repair)``: Chebyshev coefficients of each
    ridge profile (one row per direction), the directions, the optimal
    weighted level and the largest ``t^2`` coefficient added afterwards.
    """
    d = Y.shape[1]
    dirs = ridge_directions(d, n)
    nd = dirs.shape[0]
    M = nd * (n + 1)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    V = _cheb_columns(np.clip(Y @ dirs.T, -1.0, 1.0), n).reshape(len(Y), M)
    n_grid = max(2 * n * n, 64)
    tk = np.cos(np.pi * np.arange(n_grid + 1) / n_grid)
    D2 = sparse.csr_matrix(_cheb_columns(tk, n, der=2))
    curv = sparse.kron(sparse.identity(nd), D2, format="csr")
    ones = np.ones((len(y), 1))
    A = sparse.vstack([
        sparse.csr_matrix(np.hstack([w[:, None] * V, -ones])),
        sparse.csr_matrix(np.hstack([-w[:, None] * V, -ones])),
        sparse.hstack([-curv, sparse.csr_matrix((curv.shape[0], 1))]),
    ], format="csr")
    b = np.concatenate([w * y, -w * y, np.zeros(curv.shape[0])])
    cost = np.zeros(M + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * M + [(0, None)],
                  method="highs-ipm")
    if res.status != 0:
        raise ArithmeticError(f"minimax LP failed: {res.message}")
    coef = res.x[:M].reshape(nd, n + 1).copy()
    repair = 0.0
    for j in range(nd if n >= 2 else 0):
        low = _min_on_interval(cheb.chebder(coef[j], 2))
        if low < 0:
            a = -low / 2 * (1 + 1e-9) + 1e-15
            coef[j, 0] += a / 2       # a t^2 = a (T_0 + T_2) / 2
            coef[j, 2] += a / 2
            repair = max(repair, a)
    return coef, dirs, float(res.x[-1]), repair


def fit_minimax_convex(h, r: float, n: int, *, weight: Callable | None = None,
                       fit_factor: int = 3, seed: int = 0) -> MinimaxFit:
    """Weighted discrete Chebyshev fit of ``h`` on B(r) by a sum of convex ridges.

    The model is ``P(x) = sum_j p_j(u_j . x / r)`` with univariate ``p_j`` of
    degree ``<= n`` and ``p_j'' >= 0`` on [-1, 1]; each term is convex on
    B(r), hence so is ``P``.  The directions span the degree-``n``
    polynomials.  The LP minimizes ``max_i w(x_i) |h(x_i) - P(x_i)|`` with
    the curvature constraints imposed on a dense Chebyshev grid; any residual
    negativity of ``p_j''`` (found exactly through its critical points) is
    removed by adding a multiple of ``t^2`` to ``p_j``.
    """
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    d = h.dim
    M = comb(n + d - 1, d - 1) * (n + 1)
    Y = _unit_shell(d, max(fit_factor * M, 2000 if d == 1 else 3000), seed)
    x = Y * r
    w = None if weight is None else weight(x)
    coef, dirs, level, repair = convex_ridge_lp(Y, _evaluator(h)(x), n, w)
    return MinimaxFit(ridge_to_monomial(coef, dirs, r), level, dirs.shape[0], repair)


@dataclass
class BallFitReport:
    poly: MultiPoly
    r: float
    n: int
    sup_error: float
    min_eig_before: float
    mu_added: float
    convex_margin: float
    fit_residual: float
    jackson_ratio: float | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["poly"] = self.poly.to_json()
        return out


def sup_error_on_ball(h, P: MultiPoly, r: float, m: int = 20000, seed: int = 0) -> float:
    pts = hessian_sample(h.dim, r, m, seed + 13)
    return float(np.max(np.abs(_evaluator(h)(pts) - np.atleast_1d(eval_poly(P, pts)))))


def fit_convex(h, r: float, n: int, *, method: str = "minimax", weight: Callable | None = None,
               m_hessian: int = 10000, m_error: int = 20000, seed: int = 0) -> BallFitReport:
    """Polynomial of degree <= n, convex on the sample of B(r), close to ``h``.

    ``method="lsq"`` is the plain least-squares route; ``"minimax"`` uses the
    convexity-constrained Chebyshev fit, optionally weighted by ``weight``.
    """
    if method == "lsq":
        raw = fit_least_squares(h, r, n, seed=seed)
        P0, resid = raw.poly, raw.residual
    elif method == "minimax":
        raw = fit_minimax_convex(h, r, n, weight=weight, seed=seed)
        P0, resid = raw.poly, raw.level
    else:
        raise ValueError(f"unknown fit method {method!r}")
    lam = min_hessian_eig_sampled(P0, r, m_hessian, seed)
    P, mu = convexify_on_ball(P0, r, m=m_hessian, seed=seed)
    margin = min_hessian_eig_sampled(P, r, m_hessian, seed) if mu else lam
    err = sup_error_on_ball(h, P, r, m_error, seed)
    ratio = None
    if isinstance(h, PiecewiseLinearConvex):
        L = pl_lipschitz(h)
        if L > 0:
            ratio = err / (L * r / (n + 1))
    return BallFitReport(P, float(r), int(n), err, lam, mu, margin, resid, ratio)
