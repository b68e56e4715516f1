"""Freud weights ``exp(-|x|^alpha)`` and weighted norms over balls and R^d.

Integrals use spherical factorization: adaptive Gauss-Legendre panels in the
radius and a fixed angular rule (trapezoid in the angle for d = 2, Gauss in
``cos(polar)`` times trapezoid in azimuth for d = 3).  Suprema (``p = inf``)
are sampled on a polar grid and locally refined, so they are lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaincc, gammaln

from .poly import MultiPoly, eval_poly, growth as poly_growth

INF = math.inf
NORM_FLOOR = 1e-13


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach the requested tolerance."""


@dataclass(frozen=True)
class FreudParams:
    """Weight exponent ``alpha``, norm index ``p`` (``math.inf`` allowed) and dimension ``d``.

    ``alpha = 1`` (or any ``alpha <= 1``) is rejected unless
    ``experimental=True``; convergence is only known for ``alpha > 1``.
    """

    alpha: float
    p: float
    d: int
    experimental: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.alpha <= 1 and not self.experimental:
            raise ValueError(
                f"alpha={self.alpha} needs experimental=True: "
                "convex weighted density is an open problem for alpha <= 1")
        if not (self.p >= 1):
            raise ValueError(f"p must be >= 1 or inf, got {self.p}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")

    @property
    def is_sup(self) -> bool:
        return math.isinf(self.p)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "p": "inf" if self.is_sup else self.p, "d": self.d}


def parse_p(text: str | float) -> float:
    if isinstance(text, str) and text.strip().lower() in {"inf", "infinity", "oo"}:
        return INF
    value = float(text)
    if not value >= 1:
        raise ValueError(f"p must be >= 1 or 'inf', got {text!r}")
    return value


@dataclass(frozen=True)
class Region:
    kind: str  # "ball", "complement" or "full"
    r: float | None = None

    def __post_init__(self):
        if self.kind not in {"ball", "complement", "full"}:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind != "full" and not (self.r is not None and self.r > 0):
            raise ValueError("ball and complement regions need r > 0")

    @property
    def bounded(self) -> bool:
        return self.kind == "ball"


def Ball(r: float) -> Region:
    return Region("ball", float(r))


def Complement(r: float) -> Region:
    return Region("complement", float(r))


FullSpace = Region("full")


def weight(fp: FreudParams, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1 and (fp.d > 1 or x.ndim == 0):
        return float(np.exp(-np.linalg.norm(x) ** fp.alpha))
    pts = x.reshape(-1, fp.d)
    return np.exp(-np.linalg.norm(pts, axis=1) ** fp.alpha)


def freud_number(fp: FreudParams, n: float) -> float:
    return (n / fp.alpha) ** (1.0 / fp.alpha)


def mrs_number(fp: FreudParams, n: float) -> float:
    a = fp.alpha
    log_const = (a - 2) * math.log(2) + 2 * gammaln(a / 2) - gammaln(a)
    return math.exp(log_const / a) * n ** (1.0 / a)


def unit_ball_volume(d: int) -> float:
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(d / 2 + 1))


def log_tau(fp: FreudParams, n: int) -> float:
    """Log of ``1 / || |x|^(2n) W_alpha ||_{L_p(R^d)}`` in closed form."""
    a, d = fp.alpha, fp.d
    if fp.is_sup:
        if n < 1:
            raise ValueError("the sup-norm closed form needs n >= 1")
        s = 2 * n / a
        return s - s * math.log(s)
    if n < 0:
        raise ValueError("n must be >= 0")
    p = fp.p
    m = (2 * n * p + d) / a
    log_surface = math.log(d * unit_ball_volume(d))
    return (math.log(a) + m * math.log(p) - log_surface - gammaln(m)) / p


def tau(fp: FreudParams, n: int) -> float:
    lt = log_tau(fp, n)
    if lt > 709.0:
        raise OverflowError(f"tau_{n} overflows double precision (log tau = {lt:.1f})")
    return math.exp(lt)


# -- truncation ---------------------------------------------------------------


def _log_tail_integral(C: float, n: float, fp: FreudParams, R: float) -> float:
    """Log of an upper bound on the L_p^p tail of ``C (1+|x|)^n W`` outside B(R), R >= 1."""
    p, a, d = fp.p, fp.alpha, fp.d
    k = n * p + d - 1  # (1+rho)^(np) rho^(d-1) <= 2^(np) rho^k for rho >= 1
    s = (k + 1) / a
    q = gammaincc(s, p * R ** a)
    if q <= 0:
        return -math.inf
    return (p * math.log(C) + n * p * math.log(2) + math.log(d * unit_ball_volume(d))
            - math.log(a) - s * math.log(p) + gammaln(s) + math.log(q))


def truncation_radius(growth: tuple[float, float], fp: FreudParams, tol: float) -> float:
    """Radius beyond which ``C (1+|x|)^n W_alpha(x)`` is negligible.

    Guarantees ``C (1+R)^n exp(-R^alpha) < tol`` and the decay persists for
    larger radii; for ``p < inf`` also bounds the L_p tail integral by
    ``tol^p``.  Never returns less than 1.
    """
    C, n = growth
    if C <= 0 or tol <= 0:
        raise ValueError("need C > 0 and tol > 0")
    a = fp.alpha
    log_tol = math.log(tol)

    def bad(R: float) -> bool:
        point = math.log(C) + n * math.log1p(R) - R ** a - log_tol
        slope = n / (1 + R) - a * R ** (a - 1)
        if point >= 0 or slope > 0:
            return True
        if not fp.is_sup and R >= 1:
            return _log_tail_integral(C, n, fp, R) >= fp.p * log_tol
        return False

    lo = 0.0
    if not bad(1.0):
        hi = 1.0
        # degenerate input: function already below tol; still confirm monotone region
        return hi
    hi = 2.0
    while bad(hi):
        lo, hi = hi, 2 * hi
        if hi > 1e8:
            raise QuadratureError("truncation radius search diverged")
    lo = max(lo, 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bad(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    return hi


# -- evaluation plumbing ------------------------------------------------------


def _as_callable(g) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(g, MultiPoly):
        return lambda pts: np.atleast_1d(eval_poly(g, pts))
    return lambda pts: np.asarray(g(pts), dtype=float).reshape(-1)


def _resolve_growth(g, growth):
    if growth is not None:
        return growth
    if isinstance(g, MultiPoly):
        C, n = poly_growth(g)
        return (max(C, 1e-300), n)
    descriptor = getattr(g, "growth", None)
    if descriptor is not None:
        return descriptor() if callable(descriptor) else descriptor
    return None


@lru_cache(maxsize=64)
def _angular_rule(d: int, n_angle: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights integrating over the unit sphere S^(d-1)."""
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if d == 2:
        ang = 2 * np.pi * (np.arange(n_angle) + 0.5) / n_angle
        return np.column_stack([np.cos(ang), np.sin(ang)]), np.full(n_angle, 2 * np.pi / n_angle)
    if d == 3:
        nz = max(n_angle // 2, 4)
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = 2 * np.pi * (np.arange(n_angle) + 0.5) / n_angle
        Z, PHI = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1 - Z ** 2)
        dirs = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), Z.ravel()])
        wts = (wz[:, None] * np.full(n_angle, 2 * np.pi / n_angle)[None, :]).ravel()
        return dirs, wts
    raise ValueError("quadrature supports d <= 3")


@lru_cache(maxsize=8)
def _gl(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def adaptive_gauss_legendre(F: Callable[[np.ndarray], np.ndarray], a: float, b: float, *,
                            rtol: float = 1e-10, atol: float = 1e-300, order: int = 16,
                            init_panels: int = 8, max_depth: int = 40,
                            breakpoints: tuple[float, ...] = ()) -> float:
    """Integrate a vectorized scalar function over ``[a, b]``.

    Each panel is compared against its two halves; panels whose difference
    exceeds their share of the tolerance are bisected.  All pending panels
    are evaluated in one batched call to ``F``.
    """
    if b <= a:
        return 0.0
    x, w = _gl(order)
    cuts = np.unique(np.concatenate([np.linspace(a, b, init_panels + 1),
                                     [c for c in breakpoints if a < c < b]]))
    pending = np.column_stack([cuts[:-1], cuts[1:]])

    def panel_sums(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * x[None, :]
        vals = F(nodes.ravel()).reshape(nodes.shape)
        return half * (vals @ w)

    whole = panel_sums(pending[:, 0], pending[:, 1])
    accepted = []
    for _ in range(max_depth):
        lo, hi = pending[:, 0], pending[:, 1]
        mid = 0.5 * (lo + hi)
        left = panel_sums(lo, mid)
        right = panel_sums(mid, hi)
        halves = left + right
        err = np.abs(halves - whole)
        estimate = sum(accepted) + halves.sum()
        budget = max(atol, rtol * abs(estimate)) * (hi - lo) / (b - a)
        ok = err <= budget
        # pairwise summation keeps accumulation order fixed
        accepted.extend(halves[ok].tolist())
        if ok.all():
            return float(math.fsum(accepted))
        keep = ~ok
        pending = np.concatenate([np.column_stack([lo[keep], mid[keep]]),
                                  np.column_stack([mid[keep], hi[keep]])])
        whole = np.concatenate([left[keep], right[keep]])
        if pending.shape[0] > 200000:
            break
    raise QuadratureError(f"adaptive quadrature did not converge on [{a}, {b}]")


def _radial_bounds(region: Region, R_trunc: float | None) -> tuple[float, float]:
    if region.kind == "ball":
        return 0.0, region.r
    if region.kind == "complement":
        return region.r, max(R_trunc, 2 * region.r)
    return 0.0, R_trunc


def _trunc_for(g, fp: FreudParams, region: Region, growth, trunc_tol: float) -> float | None:
    if region.bounded:
        return None
    desc = _resolve_growth(g, growth)
    if desc is None:
        raise ValueError("unbounded region requires a growth descriptor (C, n)")
    C, n = desc
    return truncation_radius((max(C, 1e-300), n), fp, trunc_tol)


def weighted_lp_power(g, fp: FreudParams, region: Region, *, growth=None, rtol: float = 1e-10,
                      atol: float | None = None, n_angle: int = 64, trunc_tol: float = 1e-16,
                      breakpoints: tuple[float, ...] = ()) -> float:
    """``int_region |g W_alpha|^p dx`` (finite ``p`` only).

    ``atol`` defaults to ``NORM_FLOOR ** p``: norms below ``NORM_FLOOR`` are
    resolved absolutely only, so rounding-level integrands still converge.
    """
    if fp.is_sup:
        raise ValueError("use weighted_sup for p = inf")
    f = _as_callable(g)
    R_trunc = _trunc_for(g, fp, region, growth, trunc_tol)
    lo, hi = _radial_bounds(region, R_trunc)
    dirs, wts = _angular_rule(fp.d, n_angle)
    d, a, p = fp.d, fp.alpha, fp.p

    def radial(rho: np.ndarray) -> np.ndarray:
        pts = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        vals = np.abs(f(pts)).reshape(rho.size, -1) ** p
        ang = vals @ wts
        return ang * rho ** (d - 1) * np.exp(-p * rho ** a)

    # the integrand peaks near rho ~ (scale)^(1/alpha); a few extra cuts help
    if atol is None:
        atol = NORM_FLOOR ** p
    return adaptive_gauss_legendre(radial, lo, hi, rtol=rtol, atol=atol, breakpoints=breakpoints)


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: np.ndarray
    resolution: float


def weighted_sup(g, fp: FreudParams, region: Region, *, growth=None, n_radial: int = 2000,
                 n_angle: int = 256, refine: int = 3, trunc_tol: float = 1e-16,
                 seed: int = 0) -> SupResult:
    """Sampled supremum of ``|g W_alpha|`` over ``region`` (a lower bound)."""
    f = _as_callable(g)
    d, a = fp.d, fp.alpha
    R_trunc = _trunc_for(g, fp, region, growth, trunc_tol)
    lo, hi = _radial_bounds(region, R_trunc)
    if d == 1:
        dirs = np.array([[-1.0], [1.0]])
    elif d == 2:
        ang = 2 * np.pi * np.arange(n_angle) / n_angle
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        from .sampling import sphere_points
        dirs = sphere_points(d, n_angle * 4, seed)
    rho = np.linspace(lo, hi, n_radial)

    def evaluate(rh: np.ndarray, dr: np.ndarray) -> tuple[float, np.ndarray]:
        pts = (rh[:, None, None] * dr[None, :, :]).reshape(-1, d)
        vals = np.abs(f(pts)) * np.exp(-np.linalg.norm(pts, axis=1) ** a)
        vals = np.nan_to_num(vals, nan=0.0)
        k = int(np.argmax(vals))
        return float(vals[k]), pts[k]

    best, arg = evaluate(rho, dirs)
    step_r = (hi - lo) / max(n_radial - 1, 1)
    step_a = 2 * np.pi / n_angle
    for _ in range(refine):
        r0 = float(np.linalg.norm(arg))
        rr = np.clip(np.linspace(r0 - step_r, r0 + step_r, 41), lo, hi)
        if d == 1:
            dr = dirs
        elif d == 2:
            a0 = math.atan2(arg[1], arg[0]) if r0 > 0 else 0.0
            aa = a0 + np.linspace(-step_a, step_a, 41)
            dr = np.column_stack([np.cos(aa), np.sin(aa)])
        else:
            u0 = arg / r0 if r0 > 0 else dirs[0]
            jitter = np.random.default_rng(seed).standard_normal((200, d)) * step_a
            dr = u0 + jitter
            dr = np.vstack([u0, dr / np.linalg.norm(dr, axis=1, keepdims=True)])
        val, cand = evaluate(rr, dr)
        if val > best:
            best, arg = val, cand
        step_r /= 20
        step_a /= 20
    return SupResult(best, np.asarray(arg), step_r * 20)


def weighted_norm(g, fp: FreudParams, region: Region = FullSpace, *, growth=None,
                  **kwargs) -> float:
    """Weighted norm ``|| g W_alpha ||_{L_p(region)}``.

    ``g`` is a :class:`MultiPoly` or a vectorized callable on ``(N, d)``
    arrays.  Unbounded regions need a growth descriptor ``(C, n)`` with
    ``|g(x)| <= C (1+|x|)^n``; polynomials supply their own.
    """
    if fp.is_sup:
        keys = {"n_radial", "n_angle", "refine", "trunc_tol", "seed"}
        return weighted_sup(g, fp, region, growth=growth,
                            **{k: v for k, v in kwargs.items() if k in keys}).value
    keys = {"rtol", "atol", "n_angle", "trunc_tol", "breakpoints"}
    power = weighted_lp_power(g, fp, region, growth=growth,
                              **{k: v for k, v in kwargs.items() if k in keys})
    return power ** (1.0 / fp.p)
