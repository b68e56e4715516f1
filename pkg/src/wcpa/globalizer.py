"""From a convex function to a polynomial convex on all of R^d.

Pipeline per degree ``n``: radius ``r_n = n^(1/beta)``, convex fit ``P_n`` of
the piecewise linear minorant ``h`` on B(r_n), then
``S_n = P_n + eps * tau_n * |x|^(2n)``.  The radial term has weighted norm
exactly ``eps`` and its curvature outgrows that of ``P_n`` outside the ball,
which :func:`certify` checks.
"""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
from dataclasses import asdict, dataclass, field

import numpy as np

from .ballfit import BallFitReport, fit_convex
from .freud import (Ball, Complement, FreudParams, FullSpace, freud_number, log_tau,
                    mrs_number, tau, weighted_norm)
from .oracles import ConvexOracle, MinorantConstruction, construct_h, validate_convexity
from .poly import (MultiPoly, add_scaled, eval_poly, growth as poly_growth, hessian_at,
                   radial_majorant, radial_power, sup_bound)
from .sampling import ball_points, hessian_sample, random_directions

log = logging.getLogger(__name__)


def schedule(beta: float, n: int) -> float:
    if not beta > 1 or n < 1:
        raise ValueError("need beta > 1 and n >= 1")
    return n ** (1.0 / beta)


def radius_admissible(fp: FreudParams, beta: float, n: int) -> bool:
    """Is ``r_n`` past both restricted-range radii ``4 q_{2n}`` and ``2 a_n``?"""
    r = n ** (1.0 / beta)
    # relative slack absorbs rounding at exact thresholds such as n = 4096 for alpha=2, beta=1.5
    return r >= max(4 * freud_number(fp, 2 * n), 2 * mrs_number(fp, n)) * (1 - 1e-12)


def first_admissible(fp: FreudParams, beta: float, n_max: int = 10 ** 7) -> int | None:
    """Smallest ``n0`` with ``radius_admissible`` for every ``n >= n0`` (None if beyond ``n_max``).

    Both sides are powers of ``n``; once the larger exponent wins it keeps
    winning, so the first hit found by doubling and bisection is final.
    """
    if beta >= fp.alpha:
        return None
    hi = 1
    while not radius_admissible(fp, beta, hi):
        hi *= 2
        if hi > n_max:
            return None
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if radius_admissible(fp, beta, mid):
            hi = mid
        else:
            lo = mid
    return hi if hi >= 1 and radius_admissible(fp, beta, hi) else None


@dataclass(frozen=True)
class Eq26Check:
    lhs: float
    rhs: float
    holds: bool


def check_degree_inequality(fp: FreudParams, beta: float, eps: float, n: int,
                            c7: float) -> Eq26Check:
    """Log form of the degree condition that makes the boundary inequality hold.

    ``ln tau_n + (2n-1)/beta ln n  >=  ln c7 + n ln 8 + ln n - ln(2 eps)``
    """
    if n < 2:
        raise ValueError("needs n >= 2")
    lhs = log_tau(fp, n) + (2 * n - 1) / beta * math.log(n)
    rhs = math.log(c7) + n * math.log(8) + math.log(n) - math.log(2 * eps)
    return Eq26Check(lhs, rhs, lhs >= rhs)


def globalize(P: MultiPoly, fp: FreudParams, eps: float, n: int) -> MultiPoly:
    """``P + eps * tau_n * |x|^(2n)``."""
    if P.degree > n:
        raise ValueError(f"P has degree {P.degree} > n = {n}")
    if eps == 0:
        return P
    return add_scaled(P, radial_power(n, fp.d), eps * tau(fp, n))


@dataclass
class ConvexityCertificate:
    """Evidence that ``S_n`` is convex on R^d.

    Inside B(r_n): sampled Hessian.  Outside: the radial term's curvature
    ``2 n eps tau_n |x|^(2n-2)`` must dominate ``|d^2 P / du^2|``.  Two
    bounds on the latter are tried, both reducible to ``|x| = r_n``:

    * ``growth_rhs``: the Bernstein-Chebyshev growth bound
      ``8^n 8 n (n-1) / r_n^2 * ||P||_{B(r_n)}``;
    * ``majorant_rhs``: the Frobenius norm of coefficient-wise radial
      majorants of the Hessian entries of ``P``.  Each majorant has degree
      ``<= n-2 < 2n-2``, so its ratio to ``|x|^(2n-2)`` decreases in ``|x|``.
    """

    n: int
    r_n: float
    inside_margin: float
    boundary_lhs: float
    growth_rhs: float
    majorant_rhs: float
    p_sup: float
    p_sup_rigorous: bool
    annulus_margin: float
    outside_method: str
    holds: bool

    @property
    def boundary_rhs(self) -> float:
        return self.growth_rhs


def hessian_majorant(P: MultiPoly, rho: float) -> float:
    """Upper bound on ``|d^2 P/du^2 (x)|`` over ``|x| = rho``, all unit ``u``."""
    if P.degree < 2:
        return 0.0
    H = P.hessian_polys()
    total = 0.0
    for i in range(P.dim):
        for j in range(P.dim):
            b = radial_majorant(H[i][j])
            total += float(np.polyval(b[::-1], rho)) ** 2 if b.size else 0.0
    return math.sqrt(total)


def certify(S: MultiPoly, P: MultiPoly, fp: FreudParams, eps: float, n: int, r_n: float, *,
            m_inside: int = 10000, m_annulus: int = 4000, seed: int = 0) -> ConvexityCertificate:
    """Convexity certificate for ``S = P + eps tau_n |x|^(2n)`` on R^d."""
    if n < 2:
        raise ValueError("the boundary reduction needs n >= 2 (2(n-1) >= n)")
    d = fp.d
    pts = hessian_sample(d, r_n, m_inside, seed + 101)
    inside = float(np.linalg.eigvalsh(hessian_at(S, pts))[:, 0].min()) if S.degree >= 2 else 0.0
    lhs = 2 * n * eps * tau(fp, n) * r_n ** (2 * (n - 1))
    p_sup = float(np.max(np.abs(eval_poly(P, hessian_sample(d, r_n, 20000, seed + 7)))))
    growth_factor = 8.0 ** n * 8 * n * (n - 1) / r_n ** 2
    growth_rhs = growth_factor * p_sup
    rigorous = False
    if growth_rhs <= lhs < 1.1 * growth_rhs:
        # marginal pass on a sampled sup: switch to the rigorous coefficient bound
        p_sup = sup_bound(P, r_n)
        growth_rhs = growth_factor * p_sup
        rigorous = True
    majorant = hessian_majorant(P, r_n)
    if lhs >= growth_rhs:
        method = "growth-bound"
    elif lhs >= majorant:
        method = "majorant"
    else:
        method = "none"
    ann = ball_points(d, 2 * r_n, m_annulus, seed + 202, rmin=r_n)
    annulus = float(np.linalg.eigvalsh(hessian_at(S, ann))[:, 0].min()) if S.degree >= 2 else 0.0
    holds = inside >= 0 and method != "none"
    return ConvexityCertificate(n, r_n, inside, lhs, growth_rhs, majorant, p_sup, rigorous,
                                annulus, method, holds)


def independent_convexity_check(S: MultiPoly, radius: float, m: int = 10000,
                                seed: int = 12345) -> tuple[float, int]:
    """Random ``(x, u)`` spot check of ``d^2 S/du^2 >= -1e-9 (1 + |S(x)|)`` on B(radius).

    Returns the most negative normalized value and the violation count.
    """
    rng = np.random.default_rng(seed)
    d = S.dim
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    x = g * radius * rng.random((m, 1)) ** (1.0 / d)
    u = random_directions(d, m, rng)
    H = hessian_at(S, x)
    vals = np.einsum("ni,nij,nj->n", u, H, u)
    scale = 1 + np.abs(np.atleast_1d(eval_poly(S, x)))
    normalized = vals / scale
    return float(normalized.min()), int(np.sum(vals < -1e-9 * scale))


# -- pipeline -----------------------------------------------------------------


@dataclass
class PipelineConfig:
    fp: FreudParams
    beta: float
    eps: float
    degrees: list[int]
    seed: int = 0
    mode: str = "empirical"
    fit_method: str = "minimax"
    fit_weight: str = "freud"
    weight_floor: float = 1e-2
    m_hessian: int = 10000
    certificates: bool = True

    def __post_init__(self):
        a = self.fp.alpha
        if self.certificates and not 1 < self.beta < a:
            raise ValueError(f"need 1 < beta < alpha, got beta={self.beta}, alpha={a}")
        if not self.certificates and not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.mode not in {"empirical", "strict"}:
            raise ValueError(f"mode must be 'empirical' or 'strict', got {self.mode!r}")
        self.degrees = sorted(int(n) for n in self.degrees)
        if not self.degrees or self.degrees[0] < 1:
            raise ValueError("degrees must be positive integers")

    def to_json(self) -> dict:
        out = asdict(self)
        out["fp"] = self.fp.to_json()
        return out


@dataclass
class DegreeRecord:
    n: int
    r_n: float
    tau_n: float
    admissible: bool
    fit: BallFitReport | None = None
    certificate: ConvexityCertificate | None = None
    err_ball: float = math.nan
    err_tail: float = math.nan
    err_full: float = math.nan
    err_f_h: float = math.nan
    err_h_p: float = math.nan
    radial_term_norm: float = math.nan
    budget_bound: float = math.nan
    degree_check: Eq26Check | None = None
    poly: MultiPoly | None = None
    error: str | None = None

    def to_json(self) -> dict:
        out = {k: v for k, v in asdict(self).items()
               if k not in {"fit", "certificate", "degree_check", "poly"}}
        out["fit"] = None if self.fit is None else self.fit.to_json()
        out["certificate"] = None if self.certificate is None else asdict(self.certificate)
        out["degree_check"] = None if self.degree_check is None else asdict(self.degree_check)
        out["poly"] = None if self.poly is None else self.poly.to_json()
        return out


@dataclass
class PipelineReport:
    config: PipelineConfig
    oracle: str
    h_pieces: int
    h_radius: float
    h_delta: float
    h_tail_f: float
    h_interior_error: float
    h_g_constant: float = math.nan
    records: list[DegreeRecord] = field(default_factory=list)

    def first_index(self) -> dict:
        """First ``n`` at which each computable condition holds.

        These stand in for the existential thresholds of the convergence
        argument; they are properties of this run, not universal constants.
        """
        cfg = self.config
        adm = first_admissible(cfg.fp, cfg.beta) if cfg.beta > 1 else None
        deg = next((r.n for r in self.records if r.degree_check and r.degree_check.holds), None)
        cert = next((r.n for r in self.records if r.certificate and r.certificate.holds), None)
        return {"radius_admissible": adm, "degree_condition": deg, "certificate": cert}

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "oracle": self.oracle,
            "minorant": {"pieces": self.h_pieces, "r": self.h_radius, "delta": self.h_delta,
                         "tail_f": self.h_tail_f, "interior_error": self.h_interior_error,
                         "g_constant": self.h_g_constant},
            "first_n": self.first_index(),
            "records": [r.to_json() for r in self.records],
        }

    CSV_HEADER = ("n", "r_n", "tau_n", "fit_sup_error", "mu_added", "cert_holds",
                  "err_ball", "err_tail", "err_full")

    def csv_rows(self) -> list[list[str]]:
        rows = []
        for rec in self.records:
            fit = rec.fit
            cert = rec.certificate
            rows.append([str(rec.n), repr(rec.r_n), repr(rec.tau_n),
                         repr(fit.sup_error) if fit else "nan",
                         repr(fit.mu_added) if fit else "nan",
                         str(bool(cert.holds)) if cert else "False",
                         repr(rec.err_ball), repr(rec.err_tail), repr(rec.err_full)])
        return rows


def _fit_weight(cfg: PipelineConfig):
    if cfg.fit_weight == "none":
        return None
    a, floor = cfg.fp.alpha, cfg.weight_floor

    def w(x: np.ndarray) -> np.ndarray:
        return np.maximum(np.exp(-np.linalg.norm(x, axis=1) ** a), floor)

    return w


def _difference(f, g, growth_f, growth_g):
    def diff(pts: np.ndarray) -> np.ndarray:
        return np.asarray(f(pts)).reshape(-1) - np.asarray(g(pts)).reshape(-1)

    C = growth_f[0] + growth_g[0]
    return diff, (C, max(growth_f[1], growth_g[1]))


def _norm_kwargs(fp: FreudParams, degree: int) -> dict:
    if fp.is_sup:
        return {"n_radial": 1500 if fp.d == 1 else 500, "n_angle": 256}
    return {"rtol": 1e-10, "n_angle": max(64, 4 * degree + 16)}


# f - h and h - P have kinks along every piece boundary; they only feed the
# budget bound, which is compared at 1e-4, so a looser radial tolerance is used.
_KINKED_RTOL = 1e-7


def run_degree(f: ConvexOracle, mc: MinorantConstruction, cfg: PipelineConfig,
               n: int) -> DegreeRecord:
    fp = cfg.fp
    h = mc.h
    r_n = schedule(cfg.beta, n) if cfg.beta > 1 else n ** (1.0 / cfg.beta)
    seed = cfg.seed * 1000 + n
    rec = DegreeRecord(n, r_n, tau(fp, n), radius_admissible(fp, cfg.beta, n)
                       if cfg.beta > 1 else False)
    if cfg.mode == "strict" and not rec.admissible:
        rec.error = "radius not admissible in strict mode"
        return rec
    rec.fit = fit_convex(h, r_n, n, method=cfg.fit_method, weight=_fit_weight(cfg),
                         m_hessian=cfg.m_hessian, seed=seed)
    P = rec.fit.poly
    S = globalize(P, fp, cfg.eps, n)
    rec.poly = S
    if cfg.certificates and n >= 2:
        rec.certificate = certify(S, P, fp, cfg.eps, n, r_n, m_inside=cfg.m_hessian, seed=seed)
        c6 = max(rec.certificate.p_sup, 1e-300) / r_n
        rec.degree_check = check_degree_inequality(fp, cfg.beta, cfg.eps, n, 8 * c6)
    kw = _norm_kwargs(fp, 2 * n)
    diff_fs, g_fs = _difference(f, S, f.growth, poly_growth(S))
    rec.err_ball = weighted_norm(diff_fs, fp, Ball(r_n), **kw)
    rec.err_tail = weighted_norm(diff_fs, fp, Complement(r_n), growth=g_fs, **kw)
    rec.err_full = weighted_norm(diff_fs, fp, FullSpace, growth=g_fs, **kw)
    diff_fh, g_fh = _difference(f, h, f.growth, h.growth())
    kw_pl = dict(kw, rtol=_KINKED_RTOL) if "rtol" in kw else kw
    rec.err_f_h = weighted_norm(diff_fh, fp, FullSpace, growth=g_fh, **kw_pl)
    diff_hp, g_hp = _difference(h, P, h.growth(), poly_growth(P))
    rec.err_h_p = weighted_norm(diff_hp, fp, FullSpace, growth=g_hp, **kw_pl)
    Q = radial_power(n, fp.d).scale(cfg.eps * rec.tau_n)
    rec.radial_term_norm = weighted_norm(Q, fp, FullSpace, **kw)
    rec.budget_bound = rec.err_f_h + rec.err_h_p + cfg.eps
    return rec


_WORK: tuple | None = None


def _safe_degree(f, mc, cfg, n) -> DegreeRecord:
    try:
        return run_degree(f, mc, cfg, n)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("degree %d failed: %s", n, exc)
        r = n ** (1.0 / cfg.beta)
        return DegreeRecord(n, r, math.nan, False, error=f"{type(exc).__name__}: {exc}")


def _worker(n: int) -> DegreeRecord:
    f, mc, cfg = _WORK
    return _safe_degree(f, mc, cfg, n)


def run_pipeline(f: ConvexOracle, cfg: PipelineConfig, *, jobs: int = 1) -> PipelineReport:
    """Run every degree of ``cfg``; failures are recorded per degree.

    Degrees are independent given the minorant; with ``jobs > 1`` they run
    in forked worker processes and are collected in degree order, so the
    report does not depend on ``jobs``.
    """
    global _WORK
    if f.dim != cfg.fp.d:
        raise ValueError("oracle dimension differs from the weight dimension")
    if not validate_convexity(f, seed=cfg.seed):
        raise ValueError(f"oracle {f.tag!r} failed the sampled convexity check")
    mc = construct_h(f, cfg.eps, cfg.fp, seed=cfg.seed)
    report = PipelineReport(cfg, f.tag, len(mc.h), mc.r, mc.delta, mc.tail_f,
                            mc.interior_error, mc.g_constant)
    jobs = max(1, min(int(jobs), len(cfg.degrees)))
    if jobs == 1 or "fork" not in mp.get_all_start_methods():
        report.records = [_safe_degree(f, mc, cfg, n) for n in cfg.degrees]
        return report
    _WORK = (f, mc, cfg)
    try:
        # largest degrees first so the slowest fits start early
        order = sorted(cfg.degrees, reverse=True)
        with mp.get_context("fork").Pool(jobs) as pool:
            done = dict(zip(order, pool.map(_worker, order, chunksize=1)))
    finally:
        _WORK = None
    report.records = [done[n] for n in cfg.degrees]
    return report
