"""Numerical checks of the polynomial inequalities behind the construction.

Each check returns an :class:`InequalityCheck` with the two sides of the
inequality as measured.  Suprema are sampled, so they are lower bounds;
both sides are sampled the same way and the tolerances are relative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import erf, erfc

from .ballfit import monomial_exponents
from .freud import Ball, Complement, FreudParams, freud_number, mrs_number, weighted_norm, weighted_sup
from .poly import MultiPoly, dir_deriv2, eval_poly, growth
from .sampling import ball_points, hessian_sample, random_directions

REL_TOL = 1e-9
CSV_HEADER = ("check", "instance", "lhs", "rhs", "holds", "margin")


@dataclass(frozen=True)
class InequalityCheck:
    """One measured instance of ``lhs <= rhs``.

    ``margin`` is ``rhs - lhs`` unless a check documents otherwise;
    ``status`` is ``"ok"`` or a reason the check was skipped.
    """

    check: str
    instance: str
    lhs: float
    rhs: float
    holds: bool
    margin: float
    status: str = "ok"

    def row(self) -> list[str]:
        return [self.check, self.instance, repr(float(self.lhs)), repr(float(self.rhs)),
                str(bool(self.holds)), repr(float(self.margin))]


def write_checks_csv(checks: Iterable[InequalityCheck], out=None) -> str:
    """Write checks as CSV to the path or text stream ``out``; returns the CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in checks:
        w.writerow(c.row())
    text = buf.getvalue()
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text


def _leq(lhs: float, rhs: float, rel: float = REL_TOL) -> bool:
    return lhs <= rhs * (1 + rel) + 1e-300


def _describe(P: MultiPoly, **extra) -> str:
    parts = [f"d={P.dim}", f"deg={P.degree}"] + [f"{k}={v}" for k, v in extra.items()]
    return ";".join(parts)


def random_poly(d: int, n: int, rng: np.random.Generator) -> MultiPoly:
    """Polynomial of total degree ``n`` with standard normal coefficients."""
    exps = monomial_exponents(d, n)
    return MultiPoly.from_arrays(exps, rng.standard_normal(len(exps)))


# -- restricted range ----------------------------------------------------------


def _sup_grid(d: int) -> dict:
    return {"n_radial": 4000, "n_angle": 2} if d == 1 else {"n_radial": 600, "n_angle": 256}


def check_rri_sup(P: MultiPoly, fp: FreudParams, n: int, *, instance: str | None = None
                  ) -> InequalityCheck:
    """Weighted sup outside ``B(4 q_{2n})`` against ``2^-n`` times the sup on ``B(q_{2n})``.

    The outer supremum runs over the annulus up to the truncation radius at
    which ``sup_bound``-type growth times the weight drops below
    ``1e-12 * rhs``; that bound is added to ``lhs``.
    """
    if not fp.is_sup:
        raise ValueError("check_rri_sup needs p = inf")
    if P.degree > n:
        raise ValueError("P.degree exceeds n")
    inst = instance or _describe(P, n=n, alpha=fp.alpha)
    if P.is_zero():
        return InequalityCheck("rri_sup", inst, 0.0, 0.0, True, 0.0)
    q = freud_number(fp, 2 * n)
    kw = _sup_grid(P.dim)
    rhs = 2.0 ** (-n) * weighted_sup(P, fp, Ball(q), growth=growth(P), **kw).value
    tail_tol = 1e-12 * rhs
    outer = weighted_sup(P, fp, Complement(4 * q), growth=growth(P), trunc_tol=tail_tol, **kw)
    lhs = outer.value + tail_tol
    return InequalityCheck("rri_sup", inst, lhs, rhs, _leq(lhs, rhs, 1e-6), rhs - lhs)


def check_rri_lp(P: MultiPoly, fp: FreudParams, n: int, *, instance: str | None = None
                 ) -> InequalityCheck:
    """Ratio ``||PW||_{L_p(outside B(2 a_n))} / ||PW||_{L_p(B(a_n))}``.

    The constants of the underlying inequality are not computable, so this
    records the two norms with ``margin = log(ratio)``; ``holds`` means the
    ratio is below one.  Decay in ``n`` is judged by :func:`rri_lp_family`.
    """
    if fp.is_sup:
        raise ValueError("check_rri_lp needs p < inf")
    inst = instance or _describe(P, n=n, alpha=fp.alpha, p=fp.p)
    if P.is_zero():
        return InequalityCheck("rri_lp", inst, 0.0, 0.0, True, math.nan, status="skipped: zero polynomial")
    a = mrs_number(fp, n)
    inner = weighted_norm(P, fp, Ball(a), rtol=1e-11)
    outer = weighted_norm(P, fp, Complement(2 * a), growth=growth(P), rtol=1e-11)
    if inner == 0:
        return InequalityCheck("rri_lp", inst, outer, inner, False, math.nan,
                               status="skipped: zero inner norm")
    ratio = outer / inner
    log_ratio = math.log(ratio) if ratio > 0 else -math.inf
    return InequalityCheck("rri_lp", inst, outer, inner, ratio < 1, log_ratio)


def rri_lp_constant_oracle(n: int) -> float:
    """Closed-form ratio for ``P = 1``, d = 1, alpha = 2, p = 2."""
    fp = FreudParams(2.0, 2.0, 1)
    a = mrs_number(fp, n)
    s = math.sqrt(2.0)
    return math.sqrt(erfc(s * 2 * a) / erf(s * a))


@dataclass(frozen=True)
class FamilyDecay:
    degrees: tuple[int, ...]
    log_ratios: tuple[float, ...]
    decreasing: bool
    eventually_negative: bool
    fitted: dict  # exponent -> (slope, intercept) of log ratio against n**exponent

    @property
    def holds(self) -> bool:
        return self.decreasing and self.eventually_negative


def rri_lp_family(make_poly, fp: FreudParams, degrees: Sequence[int],
                  exponents: Sequence[float] = (0.25, 0.5, 1.0)) -> tuple[list[InequalityCheck], FamilyDecay]:
    """Run :func:`check_rri_lp` on ``make_poly(n)`` for each degree and summarize the decay.

    The least-squares fits of ``log ratio`` against ``n**delta`` are
    reported as information only.
    """
    checks = [check_rri_lp(make_poly(n), fp, n) for n in degrees]
    logs = np.array([c.margin for c in checks], dtype=float)
    finite = np.isfinite(logs)
    dec = bool(np.all(np.diff(logs[finite]) < 0)) if finite.sum() > 1 else False
    fits = {}
    ns = np.asarray(degrees, dtype=float)
    for e in exponents:
        if finite.sum() >= 2:
            slope, icpt = np.polyfit(ns[finite] ** e, logs[finite], 1)
            fits[e] = (float(slope), float(icpt))
    neg = bool(finite.any() and logs[finite][-1] < 0)
    return checks, FamilyDecay(tuple(int(n) for n in degrees), tuple(float(v) for v in logs),
                               dec, neg, fits)


# -- second-derivative growth ---------------------------------------------------


def _ball_sup(P: MultiPoly, r: float, m: int, seed: int) -> float:
    pts = hessian_sample(P.dim, r, m, seed)
    return float(np.max(np.abs(np.atleast_1d(eval_poly(P, pts)))))


def _trivial_degree(P: MultiPoly, n: int, name: str, inst: str) -> InequalityCheck | None:
    if P.degree > n:
        raise ValueError("P.degree exceeds n")
    if n < 2:
        if P.degree <= 1:
            return InequalityCheck(name, inst, 0.0, 0.0, True, 0.0, status="auto-pass: degree <= 1")
        raise ValueError("n must be >= 2")
    if P.degree <= 1:
        return InequalityCheck(name, inst, 0.0, 0.0, True, 0.0)
    return None


def _worst(name: str, inst: str, lhs: np.ndarray, rhs: np.ndarray) -> InequalityCheck:
    ok = lhs <= rhs * (1 + REL_TOL)
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    k = int(np.argmax(ratio))
    return InequalityCheck(name, inst, float(lhs[k]), float(rhs[k]), bool(ok.all()),
                           float(rhs[k] - lhs[k]))


def _shell_sample(d: int, rmin: float, rmax: float, m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if d == 1:
        half = np.linspace(rmin, rmax, m // 2)
        x = np.concatenate([-half[::-1], half]).reshape(-1, 1)
        return x, np.ones_like(x)
    x = ball_points(d, rmax, m, seed, rmin=rmin)
    mu = random_directions(d, m, np.random.default_rng(seed + 1))
    return x, mu


def check_bernstein_growth(P: MultiPoly, r: float, n: int, *, m: int | None = None, seed: int = 0,
                           instance: str | None = None) -> InequalityCheck:
    """``|d^2 P/du^2 (x)| <= (8|x|/r)^n 8n(n-1)/r^2 ||P||_{B(r)}`` for ``r/4 <= |x| <= 4r``.

    ``lhs``/``rhs`` are reported at the sample point with the largest ratio.
    """
    inst = instance or _describe(P, n=n, r=r, seed=seed)
    triv = _trivial_degree(P, n, "bernstein_growth", inst)
    if triv:
        return triv
    m = m or (100000 if P.dim == 1 else 20000)
    x, mu = _shell_sample(P.dim, r / 4, 4 * r, m, seed)
    lhs = np.abs(np.atleast_1d(dir_deriv2(P, x, mu)))
    sup = _ball_sup(P, r, m, seed + 3)
    rho = np.linalg.norm(x, axis=1)
    rhs = (8 * rho / r) ** n * (8 * n * (n - 1) / r ** 2) * sup
    return _worst("bernstein_growth", inst, lhs, rhs)


def check_bernstein_step(P: MultiPoly, r: float, n: int, *, m: int | None = None, seed: int = 0,
                         instance: str | None = None) -> InequalityCheck:
    """``|d^2 P/du^2 (x)| <= 8n(n-1)/r^2 ||P||_{B(r)}`` on ``B(r/4)``."""
    inst = instance or _describe(P, n=n, r=r, seed=seed)
    triv = _trivial_degree(P, n, "bernstein_step", inst)
    if triv:
        return triv
    m = m or (100000 if P.dim == 1 else 20000)
    x, mu = _shell_sample(P.dim, 0.0, r / 4, m, seed)
    lhs = np.abs(np.atleast_1d(dir_deriv2(P, x, mu)))
    sup = _ball_sup(P, r, m, seed + 3)
    rhs = np.full_like(lhs, 8 * n * (n - 1) / r ** 2 * sup)
    return _worst("bernstein_step", inst, lhs, rhs)


def interval_sup(R: Polynomial, s: float) -> float:
    """Exact ``max |R|`` on ``[-s, s]`` from the critical points."""
    cand = [-s, s]
    if R.degree() >= 2:
        cand += [z.real for z in R.deriv().roots() if abs(z.imag) < 1e-9 and -s < z.real < s]
    return float(np.max(np.abs(R(np.array(cand)))))


def check_chebyshev_growth(R: Polynomial, r: float, n: int, *, m: int = 100000,
                           instance: str | None = None) -> InequalityCheck:
    """``|R(t)| <= (2|t|/(r/4))^n ||R||_{[-r/4, r/4]}`` for ``r/4 <= |t| <= 4r``."""
    R = (R if isinstance(R, Polynomial) else Polynomial(R)).trim()
    if R.degree() >= n:
        raise ValueError("need deg R < n")
    inst = instance or f"deg={R.degree()};n={n};r={r}"
    s = r / 4
    half = np.linspace(s, 4 * r, m // 2)
    t = np.concatenate([-half[::-1], half])
    lhs = np.abs(R(t))
    rhs = (2 * np.abs(t) / s) ** n * interval_sup(R, s)
    return _worst("chebyshev_growth", inst, lhs, rhs)


def scaled_chebyshev(k: int, s: float) -> Polynomial:
    """``T_k(t / s)`` as a power series in ``t``."""
    from numpy.polynomial import Chebyshev
    return Chebyshev.basis(k, domain=[-s, s]).convert(kind=Polynomial)


# -- seeded suites -----------------------------------------------------------------


def rri_suite(alphas: Sequence[float] = (1.5, 2.0, 3.0), degrees: Sequence[int] = range(1, 7),
              count: int = 100, seed: int = 0, dims: Sequence[int] = (1, 2)) -> list[InequalityCheck]:
    """``count`` random polynomials per ``(alpha, n)``, dimensions cycled through ``dims``."""
    out = []
    for a in alphas:
        for n in degrees:
            rng = np.random.default_rng([seed, int(a * 1000), n])
            for i in range(count):
                d = dims[i % len(dims)]
                fp = FreudParams(float(a), math.inf, d)
                P = random_poly(d, n, rng)
                inst = f"seed={seed};i={i};d={d};n={n};alpha={a}"
                out.append(check_rri_sup(P, fp, n, instance=inst))
    return out


def bernstein_suite(degrees: Sequence[int] = range(2, 9), radii: Sequence[float] = (1.0, 4.0),
                    count: int = 100, seed: int = 0, dims: Sequence[int] = (1, 2),
                    m: int | None = None) -> list[InequalityCheck]:
    """Growth and step checks on ``count`` random polynomials per degree."""
    out = []
    for n in degrees:
        rng = np.random.default_rng([seed, 77, n])
        for i in range(count):
            d = dims[i % len(dims)]
            r = radii[(i // len(dims)) % len(radii)]
            P = random_poly(d, n, rng)
            inst = f"seed={seed};i={i};d={d};n={n};r={r}"
            out.append(check_bernstein_growth(P, r, n, m=m, seed=seed + i, instance=inst))
            out.append(check_bernstein_step(P, r, n, m=m, seed=seed + i, instance=inst))
    return out


def chebyshev_suite(degrees: Sequence[int] = range(1, 9), radii: Sequence[float] = (1.0, 4.0),
                    count: int = 100, seed: int = 0) -> list[InequalityCheck]:
    """Random ``R`` of degree ``n-1`` checked against exponent ``n``."""
    out = []
    for n in degrees:
        rng = np.random.default_rng([seed, 91, n])
        for i in range(count):
            r = radii[i % len(radii)]
            R = Polynomial(rng.standard_normal(n))
            out.append(check_chebyshev_growth(R, r, n, m=20000,
                                              instance=f"seed={seed};i={i};n={n};r={r}"))
    return out


def all_hold(checks: Iterable[InequalityCheck]) -> bool:
    return all(c.holds for c in checks if c.status == "ok" or c.status.startswith("auto"))
