import math

import numpy as np
import pytest

from wcpa.freud import (INF, Ball, Complement, FreudParams, FullSpace, QuadratureError,
                        freud_number, log_tau, mrs_number, parse_p, tau, truncation_radius,
                        unit_ball_volume, weight, weighted_norm)
from wcpa.poly import MultiPoly, radial_power


def test_weight_examples():
    assert weight(FreudParams(2, INF, 1), [0.0]) == 1.0
    assert weight(FreudParams(2, INF, 1), [1.0]) == pytest.approx(math.exp(-1))
    w = weight(FreudParams(3, INF, 2), [1.0, 1.0])
    assert w == pytest.approx(math.exp(-2 ** 1.5), rel=1e-14)
    assert w == pytest.approx(0.059105, abs=1e-6)


def test_params_validation():
    with pytest.raises(ValueError):
        FreudParams(1.0, INF, 1)
    FreudParams(1.0, INF, 1, experimental=True)
    with pytest.raises(ValueError):
        FreudParams(2.0, 0.5, 1)
    with pytest.raises(ValueError):
        FreudParams(2.0, 2.0, 0)
    assert parse_p("inf") == INF and parse_p("2") == 2.0
    with pytest.raises(ValueError):
        parse_p("0.3")


def test_region_validation():
    with pytest.raises(ValueError):
        Ball(0.0)
    with pytest.raises(ValueError):
        Complement(-1.0)


def test_freud_and_mrs_numbers():
    fp = FreudParams(2, INF, 1)
    assert freud_number(fp, 2) == pytest.approx(1.0)
    assert freud_number(fp, 8) == pytest.approx(2.0)
    assert mrs_number(fp, 4) == pytest.approx(2.0)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_number_growth_rate(alpha):
    fp = FreudParams(alpha, INF, 1)
    ns = np.array([8, 16, 32, 64, 128])
    for fn in (freud_number, mrs_number):
        vals = np.array([fn(fp, int(n)) for n in ns])
        assert np.all(np.diff(vals) > 0)
        slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
        assert slope == pytest.approx(1 / alpha, abs=1e-3)


def test_tau_examples():
    assert tau(FreudParams(2, INF, 1), 1) == pytest.approx(math.e)
    assert tau(FreudParams(2, 1.0, 1), 0) == pytest.approx(1 / math.sqrt(math.pi))
    assert tau(FreudParams(2, INF, 1), 2) == pytest.approx(1.847264, abs=5e-7)
    with pytest.raises(ValueError):
        tau(FreudParams(2, INF, 1), 0)


def test_tau_log_space_no_overflow():
    for p in (1.0, 2.0, INF):
        for d in (1, 2, 3):
            assert math.isfinite(log_tau(FreudParams(2.0, p, d), 200))


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_weighted_norm_examples():
    one = MultiPoly.constant(1, 1.0)
    assert weighted_norm(one, FreudParams(2, 1.0, 1)) == pytest.approx(math.sqrt(math.pi), rel=1e-9)
    assert weighted_norm(MultiPoly.constant(2, 1.0), FreudParams(3, INF, 2)) == pytest.approx(1.0)
    sq = MultiPoly.variable(1, 0) ** 2
    assert weighted_norm(sq, FreudParams(2, INF, 1)) == pytest.approx(math.exp(-1), rel=1e-6)


def test_unbounded_region_requires_growth():
    with pytest.raises(ValueError):
        weighted_norm(lambda x: np.ones(len(x)), FreudParams(2, 2.0, 1), FullSpace)
    val = weighted_norm(lambda x: np.ones(len(x)), FreudParams(2, 2.0, 1), FullSpace,
                        growth=(1.0, 0))
    assert val == pytest.approx((math.pi / 2) ** 0.25, rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_region_split_identity(p, d):
    fp = FreudParams(2.0, p, d)
    g = radial_power(1, d) + MultiPoly.variable(d, 0)
    b = weighted_norm(g, fp, Ball(1.3))
    c = weighted_norm(g, fp, Complement(1.3))
    full = weighted_norm(g, fp, FullSpace)
    assert b ** p + c ** p == pytest.approx(full ** p, rel=1e-10)
    assert b <= full


def test_sup_monotone_in_region():
    fp = FreudParams(2.0, INF, 2)
    g = radial_power(2, 2)
    assert weighted_norm(g, fp, Ball(0.8)) <= weighted_norm(g, fp, FullSpace)


def test_truncation_radius_examples():
    R = truncation_radius((1.0, 0), FreudParams(2, INF, 1), math.exp(-25))
    assert R == pytest.approx(5.0, abs=1e-9)
    R2 = truncation_radius((1.0, 2), FreudParams(1.0, INF, 1, experimental=True), 1e-12)
    assert (1 + R2) ** 2 * math.exp(-R2) == pytest.approx(1e-12, rel=1e-6)
    assert truncation_radius((1.0, 0), FreudParams(2, INF, 1), 2.0) == 1.0
    with pytest.raises(ValueError):
        truncation_radius((0.0, 1), FreudParams(2, INF, 1), 1e-3)


def test_truncation_radius_lp_tail():
    fp = FreudParams(2.0, 2.0, 2)
    R = truncation_radius((3.0, 4), fp, 1e-10)
    g = radial_power(2, 2).scale(3.0)
    tail = weighted_norm(g, fp, Complement(R))
    assert tail < 1e-10


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_sampled_sup_close_to_closed_form(alpha):
    fp = FreudParams(alpha, INF, 2)
    for n in (1, 3, 6):
        val = weighted_norm(radial_power(n, 2), fp, FullSpace)
        assert val * tau(fp, n) == pytest.approx(1.0, rel=1e-2)
        assert val * tau(fp, n) <= 1 + 1e-12  # sampled sup is a lower bound
