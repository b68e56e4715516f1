"""Sparse multivariate polynomials in the monomial basis.

A :class:`MultiPoly` maps exponent multi-indices to real coefficients.  It is
immutable; every operation returns a new object.  Evaluation is vectorized
over batches of points, which is what the quadrature and sampling code needs.
"""

from __future__ import annotations

import json
import math
from itertools import combinations_with_replacement
from typing import Iterable, Mapping

import numpy as np
from numpy.polynomial import Polynomial

# Univariate restrictions are plain numpy polynomials (ascending coefficients).
UniPoly = Polynomial

_EVAL_CHUNK = 4096
_UNIT_TOL = 1e-12


def _grlex_key(exp: tuple[int, ...]) -> tuple:
    return (sum(exp), exp)


class MultiPoly:
    """Polynomial in ``dim`` variables stored as ``{exponent tuple: coef}``.

    Zero coefficients are never stored and terms are kept in graded
    lexicographic order, so equal polynomials serialize identically.
    """

    __slots__ = ("dim", "_terms", "degree", "_exps", "_coefs")

    def __init__(self, dim: int, terms: Mapping[Iterable[int], float] | None = None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        clean: dict[tuple[int, ...], float] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != dim:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {dim}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = clean.get(exp, 0.0) + float(coef)
            clean[exp] = c
        ordered = sorted((e for e, c in clean.items() if c != 0.0), key=_grlex_key)
        self.dim = dim
        self._terms = {e: clean[e] for e in ordered}
        self.degree = max((sum(e) for e in ordered), default=0)
        if ordered:
            self._exps = np.array(ordered, dtype=np.int64)
            self._coefs = np.array([self._terms[e] for e in ordered], dtype=float)
        else:
            self._exps = np.zeros((0, dim), dtype=np.int64)
            self._coefs = np.zeros(0)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "MultiPoly":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, value: float) -> "MultiPoly":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def variable(cls, dim: int, i: int) -> "MultiPoly":
        exp = [0] * dim
        exp[i] = 1
        return cls(dim, {tuple(exp): 1.0})

    @classmethod
    def affine(cls, slope: Iterable[float], intercept: float) -> "MultiPoly":
        slope = [float(s) for s in slope]
        dim = len(slope)
        terms = {(0,) * dim: intercept}
        for i, s in enumerate(slope):
            exp = [0] * dim
            exp[i] = 1
            terms[tuple(exp)] = s
        return cls(dim, terms)

    @classmethod
    def from_arrays(cls, exps: np.ndarray, coefs: np.ndarray) -> "MultiPoly":
        exps = np.asarray(exps, dtype=np.int64)
        return cls(exps.shape[1], {tuple(e): c for e, c in zip(exps.tolist(), coefs)})

    # -- accessors ------------------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return dict(self._terms)

    @property
    def exponents(self) -> np.ndarray:
        return self._exps.copy()

    @property
    def coefficients(self) -> np.ndarray:
        return self._coefs.copy()

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.dim, tuple(self._terms.items())))

    def __repr__(self) -> str:
        if not self._terms:
            return f"MultiPoly(dim={self.dim}, 0)"
        parts = []
        for exp, c in self._terms.items():
            mono = "*".join(f"x{i}^{e}" if e > 1 else f"x{i}" for i, e in enumerate(exp) if e)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"MultiPoly(dim={self.dim}, {' + '.join(parts)})"

    # -- arithmetic -----------------------------------------------------------

    def _check_dim(self, other: "MultiPoly") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "MultiPoly | float") -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.dim, other)
        return add_scaled(self, other, 1.0)

    __radd__ = __add__

    def __sub__(self, other: "MultiPoly | float") -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.dim, other)
        return add_scaled(self, other, -1.0)

    def __neg__(self) -> "MultiPoly":
        return self.scale(-1.0)

    def scale(self, c: float) -> "MultiPoly":
        return MultiPoly(self.dim, {e: c * v for e, v in self._terms.items()})

    def __mul__(self, other: "MultiPoly | float") -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            return self.scale(float(other))
        self._check_dim(other)
        out: dict[tuple[int, ...], float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return MultiPoly(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiPoly":
        result = MultiPoly.constant(self.dim, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def partial(self, i: int) -> "MultiPoly":
        """Symbolic derivative with respect to variable ``i``."""
        out = {}
        for exp, c in self._terms.items():
            if exp[i]:
                e = list(exp)
                e[i] -= 1
                out[tuple(e)] = c * exp[i]
        return MultiPoly(self.dim, out)

    def hessian_polys(self) -> list[list["MultiPoly"]]:
        grads = [self.partial(i) for i in range(self.dim)]
        H = [[None] * self.dim for _ in range(self.dim)]
        for i in range(self.dim):
            for j in range(i, self.dim):
                H[i][j] = H[j][i] = grads[i].partial(j)
        return H

    # -- evaluation -----------------------------------------------------------

    def __call__(self, x) -> float | np.ndarray:
        return eval_poly(self, x)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "terms": [{"exp": list(e), "coef": c} for e, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "MultiPoly":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["dim"], {tuple(t["exp"]): t["coef"] for t in obj["terms"]})


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if dim > 1 or arr.size == 1 else arr.reshape(-1, 1)
        if dim == 1 and arr.shape[0] > 1:
            single = False
    if arr.shape[-1] != dim:
        raise ValueError(f"point dimension {arr.shape[-1]} does not match polynomial dim {dim}")
    return arr, single


def eval_poly(p: MultiPoly, x) -> float | np.ndarray:
    """Evaluate ``p`` at one point (shape ``(d,)``) or a batch (shape ``(N, d)``).

    For ``d = 1`` a flat array is read as a batch of scalars.
    """
    pts, single = _as_points(x, p.dim)
    n = pts.shape[0]
    out = np.zeros(n)
    if p._coefs.size:
        maxdeg = int(p._exps.max())
        cols = np.arange(p.dim)
        for start in range(0, n, _EVAL_CHUNK):
            chunk = pts[start:start + _EVAL_CHUNK]
            # powers[k, point, var] = x_var ** k
            powers = np.ones((maxdeg + 1,) + chunk.shape)
            for k in range(1, maxdeg + 1):
                powers[k] = powers[k - 1] * chunk
            mono = np.prod(powers[p._exps, :, cols], axis=1)  # (terms, points)
            out[start:start + _EVAL_CHUNK] = p._coefs @ mono
    return float(out[0]) if single else out


def _check_unit(mu: np.ndarray) -> None:
    norms = np.linalg.norm(np.atleast_2d(mu), axis=1)
    bad = np.abs(norms - 1.0) > _UNIT_TOL
    if bad.any():
        raise ValueError(f"direction must be a unit vector, |mu| = {norms[bad][0]!r}")


def hessian_at(p: MultiPoly, x) -> np.ndarray:
    """Symbolic Hessian evaluated at a batch of points, shape ``(N, d, d)``."""
    pts, single = _as_points(x, p.dim)
    H = p.hessian_polys()
    out = np.empty((pts.shape[0], p.dim, p.dim))
    for i in range(p.dim):
        for j in range(i, p.dim):
            v = np.atleast_1d(eval_poly(H[i][j], pts))
            out[:, i, j] = v
            out[:, j, i] = v
    return out[0] if single else out


def dir_deriv2(p: MultiPoly, x, mu) -> float | np.ndarray:
    """Second directional derivative of ``p`` along unit ``mu`` at ``x``.

    ``mu`` may be a single direction or one direction per point.
    """
    mu = np.asarray(mu, dtype=float)
    pts, single = _as_points(x, p.dim)
    mus = mu.reshape(-1, p.dim)
    _check_unit(mus)
    H = hessian_at(p, pts)
    vals = np.einsum("ni,nij,nj->n", np.broadcast_to(mus, pts.shape), H,
                     np.broadcast_to(mus, pts.shape))
    return float(vals[0]) if single else vals


def radial_power(n: int, d: int) -> MultiPoly:
    """``|x|^(2n) = (x_1^2 + ... + x_d^2)^n`` expanded by the multinomial theorem."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    terms = {}
    for combo in combinations_with_replacement(range(d), n):
        a = [0] * d
        for i in combo:
            a[i] += 1
        coef = math.factorial(n)
        for ai in a:
            coef //= math.factorial(ai)
        terms[tuple(2 * ai for ai in a)] = float(coef)
    return MultiPoly(d, terms)


def add_scaled(p: MultiPoly, q: MultiPoly, c: float) -> MultiPoly:
    """Return ``p + c*q`` with exact zeros pruned."""
    p._check_dim(q)
    out = dict(p._terms)
    for e, v in q._terms.items():
        out[e] = out.get(e, 0.0) + c * v
    return MultiPoly(p.dim, out)


def restrict_to_line(p: MultiPoly, origin, mu) -> Polynomial:
    """Exact univariate polynomial ``t -> p(origin + t*mu)``."""
    origin = np.asarray(origin, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if origin.size != p.dim or mu.size != p.dim:
        raise ValueError("origin and mu must have length p.dim")
    _check_unit(mu)
    result = np.zeros(p.degree + 1)
    # powers of each affine factor (o_j + t mu_j) are reused across terms
    cache: dict[tuple[int, int], np.ndarray] = {}

    def factor_pow(j: int, k: int) -> np.ndarray:
        key = (j, k)
        if key not in cache:
            cache[key] = np.polynomial.polynomial.polypow([origin[j], mu[j]], k)
        return cache[key]

    for exp, c in p._terms.items():
        acc = np.array([c])
        for j, k in enumerate(exp):
            if k:
                acc = np.polynomial.polynomial.polymul(acc, factor_pow(j, k))
        result[:acc.size] += acc
    return Polynomial(np.polynomial.polynomial.polytrim(result, tol=0))


def sup_bound(p: MultiPoly, R: float) -> float:
    """Rigorous bound ``sum |c_k| R^|k|`` on ``max_{|x|<=R} |p(x)|``."""
    if R <= 0:
        raise ValueError("R must be positive")
    if p.is_zero():
        return 0.0
    degs = p._exps.sum(axis=1)
    return float(np.sum(np.abs(p._coefs) * float(R) ** degs))


def radial_majorant(p: MultiPoly) -> np.ndarray:
    """Coefficients ``b_k`` with ``|p(x)| <= sum_k b_k |x|^k`` (ascending in k)."""
    b = np.zeros(p.degree + 1)
    if not p.is_zero():
        np.add.at(b, p._exps.sum(axis=1), np.abs(p._coefs))
    return b


def growth(p: MultiPoly) -> tuple[float, int]:
    """Growth descriptor ``(C, n)`` such that ``|p(x)| <= C (1+|x|)^n``."""
    return float(np.sum(np.abs(p._coefs))), p.degree
