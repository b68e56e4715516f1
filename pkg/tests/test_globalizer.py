import math

import numpy as np
import pytest

from wcpa.freud import INF, Ball, Complement, FreudParams, FullSpace, log_tau, tau, weighted_norm
from wcpa.globalizer import (PipelineConfig, certify, check_degree_inequality, first_admissible,
                             globalize, hessian_majorant, independent_convexity_check,
                             radius_admissible, run_pipeline, schedule)
from wcpa.oracles import ConvexOracle, get_oracle
from wcpa.poly import MultiPoly, eval_poly, hessian_at, radial_power
from wcpa.sampling import ball_points, sphere_points


def test_schedule_examples():
    assert schedule(1.5, 8) == pytest.approx(4.0)
    assert schedule(2.0, 16) == pytest.approx(4.0)
    assert schedule(1.25, 32) == pytest.approx(16.0)
    with pytest.raises(ValueError):
        schedule(1.0, 4)


def test_admissibility_threshold_alpha2():
    fp = FreudParams(2.0, INF, 1)
    assert first_admissible(fp, 1.5) == 4096
    assert not radius_admissible(fp, 1.5, 4000)
    assert all(radius_admissible(fp, 1.5, n) for n in (4096, 5000, 10 ** 5))


def test_admissibility_scan_alpha3():
    fp = FreudParams(3.0, 2.0, 1)
    n0 = first_admissible(fp, 1.2)
    assert n0 is not None
    assert radius_admissible(fp, 1.2, n0) and not radius_admissible(fp, 1.2, n0 - 1)
    assert all(radius_admissible(fp, 1.2, n0 * k) for k in (2, 10, 100))


def test_admissibility_fails_for_beta_at_least_alpha():
    fp = FreudParams(2.0, INF, 1)
    assert first_admissible(fp, 2.0) is None
    assert not any(radius_admissible(fp, 2.5, n) for n in (10, 10 ** 4, 10 ** 8))


def test_degree_condition_direct_value():
    fp = FreudParams(2.0, INF, 1)
    chk = check_degree_inequality(fp, 1.5, 1.0, 2, 8.0)
    assert chk.lhs == pytest.approx(math.log(math.e ** 2 / 4) + 2 * math.log(2))
    assert chk.rhs == pytest.approx(3 * math.log(8))
    assert not chk.holds
    assert check_degree_inequality(fp, 1.5, 1e30, 2, 8.0).holds
    with pytest.raises(ValueError):
        check_degree_inequality(fp, 1.5, 1.0, 1, 8.0)


def test_degree_condition_slope_positive():
    fp = FreudParams(2.0, INF, 1)
    g = [(lambda c: (c.lhs - c.rhs))(check_degree_inequality(fp, 1.5, 0.25, n, 8.0))
         for n in (64, 128, 256)]
    assert g[0] < g[1] < g[2]


def test_globalize_examples():
    fp = FreudParams(2.0, INF, 1)
    S = globalize(MultiPoly.zero(1), fp, 1.0, 1)
    assert S.terms == {(2,): pytest.approx(math.e)}
    P = MultiPoly.variable(2, 0) + 0.5
    fp2 = FreudParams(2.0, 2.0, 2)
    assert globalize(P, fp2, 0.0, 3) == P
    S = globalize(P, fp2, 0.3, 3)
    assert S.degree == 6
    u = sphere_points(2, 16)
    np.testing.assert_allclose(eval_poly(S, u) - eval_poly(P, u), 0.3 * tau(fp2, 3), rtol=1e-12)
    with pytest.raises(ValueError):
        globalize(MultiPoly.variable(1, 0) ** 5, fp, 1.0, 4)


@pytest.mark.parametrize("p", [1.0, 2.0, INF])
@pytest.mark.parametrize("d", [1, 2])
def test_radial_term_norm_is_eps(p, d):
    fp = FreudParams(2.0, p, d)
    for n in (2, 5):
        Q = radial_power(n, d).scale(0.25 * tau(fp, n))
        tol = 1e-2 if p == INF else 1e-5
        assert weighted_norm(Q, fp, FullSpace) == pytest.approx(0.25, rel=tol)


def test_certify_zero_polynomial():
    fp = FreudParams(2.0, INF, 2)
    S = globalize(MultiPoly.zero(2), fp, 0.1, 3)
    cert = certify(S, MultiPoly.zero(2), fp, 0.1, 3, 2.0)
    assert cert.growth_rhs == 0.0 and cert.boundary_rhs == 0.0
    assert cert.holds and cert.outside_method == "growth-bound"


def test_certify_saddle_fails():
    fp = FreudParams(2.0, INF, 2)
    P = MultiPoly.variable(2, 0) ** 2 - MultiPoly.variable(2, 1) ** 2
    S = globalize(P, fp, 1e-3, 2)
    cert = certify(S, P, fp, 1e-3, 2, 1.0)
    assert cert.inside_margin < 0 and not cert.holds


def test_certify_requires_n2():
    fp = FreudParams(2.0, INF, 1)
    with pytest.raises(ValueError):
        certify(MultiPoly.zero(1), MultiPoly.zero(1), fp, 1.0, 1, 1.0)


def test_hessian_majorant_bounds_exterior(rng):
    P = (MultiPoly.variable(2, 0) ** 3 - MultiPoly.variable(2, 1) * MultiPoly.variable(2, 0)
         + MultiPoly.variable(2, 1) ** 2)
    for rho in (0.5, 2.0, 7.0):
        pts = rho * sphere_points(2, 500)
        H = hessian_at(P, pts)
        assert np.linalg.norm(H, ord=2, axis=(1, 2)).max() <= hessian_majorant(P, rho) + 1e-12


def test_majorant_certificate_is_sound(rng):
    """A certificate passing via the majorant must give a convex S well outside the ball."""
    fp = FreudParams(2.0, INF, 2)
    P = radial_power(1, 2) + MultiPoly.variable(2, 0) * MultiPoly.variable(2, 1).scale(0.3)
    n, r = 6, 2.0
    S = globalize(P, fp, 0.25, n)
    cert = certify(S, P, fp, 0.25, n, r)
    assert cert.holds
    pts = ball_points(2, 20 * r, 20000, seed=3, rmin=r)
    assert np.linalg.eigvalsh(hessian_at(S, pts))[:, 0].min() >= 0


def test_config_validation():
    fp = FreudParams(2.0, INF, 1)
    with pytest.raises(ValueError):
        PipelineConfig(fp, 2.5, 0.25, [4])
    with pytest.raises(ValueError):
        PipelineConfig(fp, 1.5, 0.0, [4])
    with pytest.raises(ValueError):
        PipelineConfig(fp, 1.5, 0.25, [4], mode="fast")
    with pytest.raises(ValueError):
        PipelineConfig(fp, 1.5, 0.25, [])
    assert PipelineConfig(fp, 1.5, 0.25, [8, 2, 4]).degrees == [2, 4, 8]


def affine_oracle(d):
    s = np.linspace(0.5, -0.5, d)
    return ConvexOracle(d, lambda x: x @ s + 0.3, lambda x: np.tile(s, (len(x), 1)), "affine",
                        (float(np.linalg.norm(s)) + 0.3, 1))


@pytest.mark.parametrize("p", [INF, 2.0])
def test_pipeline_affine(p):
    fp = FreudParams(2.0, p, 1)
    cfg = PipelineConfig(fp, 1.5, 0.25, [2, 4])
    rep = run_pipeline(affine_oracle(1), cfg)
    for rec in rep.records:
        assert rec.error is None
        assert rec.err_h_p <= 1e-7
        tol = 1e-2 if p == INF else 1e-5
        assert rec.err_full <= 0.25 * (1 + tol) + 1e-7
        assert rec.certificate.holds


def test_pipeline_abs_1d_decreasing():
    fp = FreudParams(2.0, INF, 1)
    rep = run_pipeline(get_oracle("abs", 1), PipelineConfig(fp, 1.5, 0.25, [4, 8, 16]))
    errs = [r.err_full for r in rep.records]
    assert all(r.certificate.holds for r in rep.records)
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.slow
def test_pipeline_square_2d_region_split():
    fp = FreudParams(2.0, 2.0, 2)
    rep = run_pipeline(get_oracle("sq", 2), PipelineConfig(fp, 1.5, 0.25, [4, 6]), jobs=2)
    for rec in rep.records:
        assert rec.error is None
        assert all(math.isfinite(v) for v in (rec.err_ball, rec.err_tail, rec.err_full))
        assert rec.err_ball ** 2 + rec.err_tail ** 2 == pytest.approx(rec.err_full ** 2, rel=1e-8)
        assert rec.err_full <= rec.budget_bound + 1e-4
    data = rep.to_json()
    assert data["config"]["fp"]["alpha"] == 2.0 and len(data["records"]) == 2


def test_pipeline_strict_mode_records_inadmissible():
    fp = FreudParams(2.0, INF, 1)
    rep = run_pipeline(get_oracle("abs", 1), PipelineConfig(fp, 1.5, 0.25, [4], mode="strict"))
    assert rep.records[0].error is not None and rep.records[0].fit is None


def test_pipeline_parallel_matches_serial():
    fp = FreudParams(2.0, INF, 1)
    cfg = PipelineConfig(fp, 1.5, 0.25, [3, 5, 7])
    a = run_pipeline(get_oracle("abs", 1), cfg, jobs=1)
    b = run_pipeline(get_oracle("abs", 1), cfg, jobs=3)
    assert a.csv_rows() == b.csv_rows()


def test_pipeline_rejects_nonconvex():
    fp = FreudParams(2.0, INF, 1)
    f = ConvexOracle(1, lambda x: -x[:, 0] ** 2, lambda x: -2 * x, "concave", (1.0, 2))
    with pytest.raises(ValueError):
        run_pipeline(f, PipelineConfig(fp, 1.5, 0.25, [4]))


def test_independent_check_flags_nonconvex():
    saddle = MultiPoly.variable(2, 0) ** 2 - MultiPoly.variable(2, 1) ** 2
    low, count = independent_convexity_check(saddle, 1.0, m=2000)
    assert low < 0 and count > 0
    low, count = independent_convexity_check(radial_power(2, 2), 3.0, m=2000)
    assert count == 0
