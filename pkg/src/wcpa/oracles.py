"""Convex function oracles and piecewise linear convex minorants.

A convex ``f`` is approximated from below by maxima of supporting planes.
``build_g_delta`` takes planes at the nodes of a grid on a ball;
``build_h`` adds the supporting plane at the origin so the minorant stays
close to ``f`` in the weighted norm on all of R^d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .freud import Ball, Complement, FreudParams, weighted_norm
from .sampling import ball_points, sphere_points

NODE_CAP = 1_000_000
_CHUNK = 2048


class GridTooLargeError(ValueError):
    pass


class TailTargetError(RuntimeError):
    pass


def _points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if dim == 1 and arr.size > 1:
            return arr.reshape(-1, 1), False
        return arr.reshape(1, dim), True
    if arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    return arr, False


@dataclass(frozen=True)
class AffineFn:
    slope: np.ndarray
    intercept: float

    def __post_init__(self):
        object.__setattr__(self, "slope", np.asarray(self.slope, dtype=float).reshape(-1))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def dim(self) -> int:
        return self.slope.size

    def __call__(self, x):
        pts, single = _points(x, self.dim)
        vals = pts @ self.slope + self.intercept
        return float(vals[0]) if single else vals

    def to_json(self) -> dict:
        return {"slope": self.slope.tolist(), "intercept": self.intercept}


class PiecewiseLinearConvex:
    """Pointwise maximum of finitely many affine functions."""

    def __init__(self, pieces: Sequence[AffineFn] | None = None, *,
                 slopes: np.ndarray | None = None, intercepts: np.ndarray | None = None):
        if pieces is not None:
            if not pieces:
                raise ValueError("need at least one affine piece")
            slopes = np.array([p.slope for p in pieces], dtype=float)
            intercepts = np.array([p.intercept for p in pieces], dtype=float)
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        intercepts = np.asarray(intercepts, dtype=float).reshape(-1)
        if slopes.shape[0] == 0 or slopes.shape[0] != intercepts.size:
            raise ValueError("slopes and intercepts must be nonempty and aligned")
        self.slopes = slopes
        self.intercepts = intercepts
        self.slopes.setflags(write=False)
        self.intercepts.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def pieces(self) -> list[AffineFn]:
        return [AffineFn(a, b) for a, b in zip(self.slopes, self.intercepts)]

    def __len__(self) -> int:
        return self.intercepts.size

    def __call__(self, x):
        pts, single = _points(x, self.dim)
        out = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], _CHUNK):
            out[s:s + _CHUNK] = (pts[s:s + _CHUNK] @ self.slopes.T + self.intercepts).max(axis=1)
        return float(out[0]) if single else out

    def argmax(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty(pts.shape[0], dtype=np.int64)
        for s in range(0, pts.shape[0], _CHUNK):
            out[s:s + _CHUNK] = (pts[s:s + _CHUNK] @ self.slopes.T + self.intercepts).argmax(axis=1)
        return out

    def subgrad(self, x):
        pts, single = _points(x, self.dim)
        g = self.slopes[self.argmax(pts)]
        return g[0] if single else g

    def growth(self) -> tuple[float, int]:
        return (pl_lipschitz(self) + float(np.max(np.abs(self.intercepts))), 1)

    def union(self, other: "PiecewiseLinearConvex") -> "PiecewiseLinearConvex":
        return PiecewiseLinearConvex(slopes=np.vstack([self.slopes, other.slopes]),
                                     intercepts=np.concatenate([self.intercepts, other.intercepts]))

    def to_json(self) -> list[dict]:
        return [{"slope": a.tolist(), "intercept": float(b)}
                for a, b in zip(self.slopes, self.intercepts)]

    @classmethod
    def from_json(cls, data: list[dict]) -> "PiecewiseLinearConvex":
        return cls([AffineFn(d["slope"], d["intercept"]) for d in data])


def pl_lipschitz(h: PiecewiseLinearConvex) -> float:
    return float(np.max(np.linalg.norm(h.slopes, axis=1)))


@dataclass
class ConvexOracle:
    """Convex function on R^dim given by a vectorized callable.

    ``func`` maps an ``(N, dim)`` array to ``N`` values.  ``subgrad_func``
    (same calling convention, returning ``(N, dim)``) is optional; without
    it central differences are used.  ``growth`` is ``(C, n)`` with
    ``|f(x)| <= C (1+|x|)^n`` and is needed for norms over unbounded sets.
    """

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    subgrad_func: Callable[[np.ndarray], np.ndarray] | None = None
    tag: str = "custom"
    growth: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        pts, single = _points(x, self.dim)
        vals = np.asarray(self.func(pts), dtype=float).reshape(-1)
        return float(vals[0]) if single else vals

    def subgrad(self, x):
        pts, single = _points(x, self.dim)
        if self.subgrad_func is not None:
            g = np.asarray(self.subgrad_func(pts), dtype=float).reshape(pts.shape)
        else:
            g = fd_subgradient(self, pts)
        return g[0] if single else g


def fd_subgradient(f: ConvexOracle, pts: np.ndarray) -> np.ndarray:
    """Central-difference gradient with step ``1e-6 (1+|x|)``.

    The central quotient is the mean of the two one-sided quotients; at a
    kink both are subgradient slopes along that axis, so the mean is too.
    """
    h = 1e-6 * (1 + np.linalg.norm(pts, axis=1))
    g = np.empty_like(pts)
    for i in range(f.dim):
        e = np.zeros(f.dim)
        e[i] = 1.0
        step = h[:, None] * e
        g[:, i] = (f.func(pts + step) - f.func(pts - step)) / (2 * h)
    return g


def validate_convexity(f: ConvexOracle, r: float = 2.0, m: int = 1000, seed: int = 0) -> bool:
    """Sampled midpoint-convexity and supporting-plane checks on B(r)."""
    rng = np.random.default_rng(seed)
    x = ball_points(f.dim, r, m, seed)
    y = x[rng.permutation(x.shape[0])]
    fx, fy, fm = f(x), f(y), f(0.5 * (x + y))
    if np.any(fm > 0.5 * (fx + fy) + 1e-9 * (1 + np.abs(fx) + np.abs(fy))):
        return False
    g = f.subgrad(x)
    return not np.any(fy < fx + np.sum(g * (y - x), axis=1) - 1e-9 * (1 + np.abs(fy)))


def supporting_plane(f: ConvexOracle, x0, *, validate: bool = False, r: float = 2.0,
                     seed: int = 0) -> AffineFn:
    """Affine minorant of ``f`` touching it at ``x0``."""
    x0 = np.asarray(x0, dtype=float).reshape(1, f.dim)
    g = np.asarray(f.subgrad(x0), dtype=float).reshape(-1)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"subgradient evaluation failed at {x0.ravel()}")
    plane = AffineFn(g, f(x0[0]) - float(g @ x0[0]))
    if validate:
        pts = ball_points(f.dim, r + float(np.linalg.norm(x0)), 1000, seed)
        fv = f(pts)
        if np.any(plane(pts) > fv + 1e-9 * (1 + np.abs(fv))):
            raise ValueError("supporting plane is not a minorant on the validation sample")
    return plane


def grid_nodes(d: int, r: float, delta: float) -> np.ndarray:
    """Tensor grid with spacing <= r*delta on [-r, r]^d, restricted to B(r)."""
    k = int(math.ceil(2.0 / delta - 1e-12))
    count = (k + 1) ** d
    if count > NODE_CAP:
        raise GridTooLargeError(f"grid would have {count} nodes (cap {NODE_CAP})")
    axis = np.linspace(-r, r, k + 1)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    inside = np.linalg.norm(mesh, axis=1) <= r * (1 + 1e-12)
    return mesh[inside]


def _can_win(slopes: np.ndarray, intercepts: np.ndarray, j: int) -> bool:
    """Whether piece ``j`` strictly exceeds every other piece somewhere in R^d.

    Solves ``max t`` subject to ``l_i(x) + t <= l_j(x)`` for ``i != j``; an
    unbounded problem means piece ``j`` wins far away.
    """
    others = np.arange(len(intercepts)) != j
    da = slopes[others] - slopes[j]
    db = intercepts[j] - intercepts[others]
    A = np.hstack([da, np.ones((da.shape[0], 1))])
    cost = np.zeros(slopes.shape[1] + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A, b_ub=db, bounds=[(None, None)] * (slopes.shape[1] + 1),
                  method="highs")
    if res.status == 3:
        return True
    if res.status != 0:  # pragma: no cover - feasible by construction (t very negative)
        return True
    scale = 1.0 + np.abs(intercepts).max()
    return -res.fun > 1e-12 * scale


def prune_pieces(h: PiecewiseLinearConvex, r: float, m: int = 4000,
                 seed: int = 0) -> PiecewiseLinearConvex:
    """Drop pieces that are nowhere strictly maximal.

    Candidates come from the argmax over a sample of B(2r) and a far sphere;
    every piece the sample rejects is confirmed by a small LP, so the
    maximum is unchanged on all of R^d.
    """
    rows = np.column_stack([h.slopes, h.intercepts])
    _, first = np.unique(rows, axis=0, return_index=True)
    first = np.sort(first)
    h = PiecewiseLinearConvex(slopes=h.slopes[first], intercepts=h.intercepts[first])
    if len(h) == 1:
        return h
    d = h.dim
    if d == 1:
        sample = np.linspace(-2 * r, 2 * r, 20001).reshape(-1, 1)
    else:
        sample = ball_points(d, 2 * r, m, seed)
    far = 100 * r * sphere_points(d, 4096 if d > 1 else 2, seed + 7)
    keep = np.zeros(len(h), dtype=bool)
    keep[np.concatenate([h.argmax(sample), h.argmax(far)])] = True
    for j in np.nonzero(~keep)[0]:
        keep[j] = _can_win(h.slopes, h.intercepts, int(j))
    return PiecewiseLinearConvex(slopes=h.slopes[keep], intercepts=h.intercepts[keep])


def build_g_delta(f: ConvexOracle, r: float, delta: float, *, prune: bool = True,
                  seed: int = 0) -> PiecewiseLinearConvex:
    """Max of supporting planes at grid nodes of spacing ``<= r*delta`` covering B(r)."""
    if not r > 0 or not 0 < delta <= 1:
        raise ValueError("need r > 0 and 0 < delta <= 1")
    nodes = grid_nodes(f.dim, r, delta)
    g = np.asarray(f.subgrad(nodes), dtype=float).reshape(nodes.shape)
    b = f(nodes) - np.sum(g * nodes, axis=1)
    out = PiecewiseLinearConvex(slopes=g, intercepts=b)
    return prune_pieces(out, r, seed=seed) if prune else out


def modulus_estimate(f, t: float, r: float, m: int = 4000, seed: int = 0) -> float:
    """Lower estimate of the modulus of continuity of ``f`` on B(r) at scale ``t``.

    Pairs ``(x, x + s v)`` are sampled for a ladder of distances ``s < t``
    (the modulus is a sup over all distances below ``t``, and for some
    functions the largest distance is not the worst one once it exceeds r).
    """
    if not (t > 0 and r > 0):
        raise ValueError("need t > 0 and r > 0")
    d = f.dim
    ladder = t * (1 - 1e-9) * np.arange(1, 33) / 32
    if d == 1:
        base = np.linspace(-r, r, m).reshape(-1, 1)
        steps = np.concatenate([ladder, -ladder])[:, None, None]
        xs = np.broadcast_to(base, (steps.shape[0],) + base.shape)
        ys = xs + steps
    else:
        rng = np.random.default_rng(seed)
        base = np.vstack([ball_points(d, r, m, seed), r * sphere_points(d, m // 4, seed + 1)])
        dirs = rng.standard_normal(base.shape)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        nb = np.linalg.norm(base, axis=1, keepdims=True)
        radial = np.where(nb > 0, -base / np.where(nb > 0, nb, 1), dirs)
        both = np.vstack([base, base])
        v = np.vstack([dirs, radial])
        xs = np.broadcast_to(both, (ladder.size,) + both.shape)
        ys = xs + ladder[:, None, None] * v[None]
    x = xs.reshape(-1, d)
    y = ys.reshape(-1, d)
    ok = np.linalg.norm(y, axis=1) <= r
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(f(x[ok]) - f(y[ok]))))


@dataclass
class MinorantConstruction:
    """Everything ``build_h`` produces, for reporting."""

    h: PiecewiseLinearConvex
    g_delta: PiecewiseLinearConvex
    plane: AffineFn
    r: float
    delta: float
    tail_f: float
    tail_plane: float
    interior_error: float
    interior_target: float
    g_constant: float


def _check_chain(f: ConvexOracle, h: PiecewiseLinearConvex, g: PiecewiseLinearConvex,
                 plane: AffineFn, r: float, m: int, seed: int) -> None:
    pts = ball_points(f.dim, 2 * r, m, seed + 11)
    fv, hv = f(pts), h(pts)
    tol = 1e-9 * (1 + np.abs(fv))
    if np.any(hv > fv + tol) or np.any(g(pts) > hv + tol) or np.any(plane(pts) > hv + tol):
        raise ArithmeticError("minorant chain g_delta <= h <= f violated on samples")


def construct_h(f: ConvexOracle, eps: float, fp: FreudParams, *, r_start: float = 1.0,
                r_cap: float = 64.0, delta_min: float = 1e-4, n_check: int = 10000,
                seed: int = 0) -> MinorantConstruction:
    """Globally Lipschitz piecewise linear minorant ``h`` with small weighted error."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.dim != fp.d:
        raise ValueError("oracle and weight dimensions differ")
    if f.growth is None:
        raise ValueError("oracle needs a growth descriptor to measure weighted tails")
    plane = supporting_plane(f, np.zeros(f.dim))
    plane_pl = PiecewiseLinearConvex([plane])
    r = r_start
    prev = math.inf
    while True:
        tail_f = weighted_norm(f, fp, Complement(r), growth=f.growth)
        tail_l = weighted_norm(plane_pl, fp, Complement(r), growth=plane_pl.growth())
        if max(tail_f, tail_l) < eps / 4:
            break
        if tail_f > prev * (1 + 1e-9) and r > 4:
            raise TailTargetError("weighted tail of f is not decaying; f W not in the weighted class")
        prev = tail_f
        r *= 2
        if r > r_cap:
            raise TailTargetError(f"tail target eps/4 not reached within radius {r_cap}")
    w_ball = 1.0 if fp.is_sup else weighted_norm(lambda x: np.ones(x.shape[0]), fp, Ball(r))
    target = eps / (2 * w_ball)
    sample = ball_points(f.dim, r, 20001 if f.dim == 1 else 8000, seed + 3)
    fs = f(sample)
    delta = 1.0
    while True:
        g = build_g_delta(f, r, delta, seed=seed)
        err = float(np.max(fs - g(sample)))
        # sampled error under-reads the true sup, keep a safety margin
        if err < 0.8 * target:
            break
        delta /= 2
        if delta < delta_min:
            raise GridTooLargeError("could not reach the interior target before delta_min")
    h = prune_pieces(g.union(plane_pl), r, seed=seed)
    _check_chain(f, h, g, plane, r, n_check, seed)
    omega = modulus_estimate(f, r * delta, r, seed=seed)
    return MinorantConstruction(h, g, plane, r, delta, tail_f, tail_l, err, target,
                                err / omega if omega > 0 else 0.0)


def build_h(f: ConvexOracle, eps: float, fp: FreudParams, **kwargs) -> PiecewiseLinearConvex:
    return construct_h(f, eps, fp, **kwargs).h


# -- built-in oracles ---------------------------------------------------------


def _norm_oracle(d: int) -> ConvexOracle:
    def grad(x):
        n = np.linalg.norm(x, axis=1, keepdims=True)
        return np.where(n > 0, x / np.where(n > 0, n, 1), 0.0)
    return ConvexOracle(d, lambda x: np.linalg.norm(x, axis=1), grad, "norm", (1.0, 1))


def _abs_oracle(d: int) -> ConvexOracle:
    return ConvexOracle(d, lambda x: np.abs(x).sum(axis=1), np.sign, "abs", (math.sqrt(d), 1))


def _sq_oracle(d: int) -> ConvexOracle:
    return ConvexOracle(d, lambda x: np.sum(x * x, axis=1), lambda x: 2 * x, "sq", (1.0, 2))


def _softplus_oracle(d: int) -> ConvexOracle:
    return ConvexOracle(d, lambda x: np.logaddexp(0, x).sum(axis=1),
                        lambda x: 0.5 * (1 + np.tanh(0.5 * x)),
                        "softplus", (d * math.log(2) + math.sqrt(d), 1))


def _huber_oracle(d: int) -> ConvexOracle:
    def f(x):
        a = np.abs(x)
        return np.where(a <= 1, 0.5 * x * x, a - 0.5).sum(axis=1)
    return ConvexOracle(d, f, lambda x: np.clip(x, -1, 1), "huber", (math.sqrt(d), 1))


def _maxlin_oracle(d: int, k: int, seed: int) -> ConvexOracle:
    rng = np.random.default_rng(seed)
    pl = PiecewiseLinearConvex(slopes=rng.standard_normal((k, d)),
                               intercepts=rng.standard_normal(k))
    return ConvexOracle(d, pl, pl.subgrad, f"maxlin:{k}:{seed}", pl.growth(), {"pl": pl})


ORACLES: dict[str, str] = {
    "abs": "sum_i |x_i| (equals |x| for d = 1)",
    "norm": "Euclidean norm |x|",
    "sq": "squared norm |x|^2",
    "softplus": "sum_i log(1 + exp(x_i))",
    "huber": "sum_i Huber(x_i) with unit threshold",
    "maxlin:k:seed": "max of k random affine functions drawn with the given seed",
}


def get_oracle(name: str, d: int = 1) -> ConvexOracle:
    """Look up a built-in oracle by its command-line name."""
    if name.startswith("maxlin"):
        parts = name.split(":")
        if len(parts) != 3:
            raise KeyError(f"maxlin oracle needs the form maxlin:k:seed, got {name!r}")
        return _maxlin_oracle(d, int(parts[1]), int(parts[2]))
    table = {"abs": _abs_oracle, "norm": _norm_oracle, "sq": _sq_oracle,
             "softplus": _softplus_oracle, "huber": _huber_oracle}
    if name not in table:
        raise KeyError(f"unknown oracle {name!r}; known: {', '.join(ORACLES)}")
    return table[name](d)
