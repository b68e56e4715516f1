import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wcpa.poly import (MultiPoly, add_scaled, dir_deriv2, eval_poly, hessian_at, radial_power,
                       restrict_to_line, sup_bound)
from wcpa.verify_lab import random_poly


def x(i, d=2):
    return MultiPoly.variable(d, i)


def test_eval_examples():
    p = x(0) ** 2 + x(1) ** 2
    assert eval_poly(p, [1.0, 1.0]) == 2.0
    assert eval_poly(MultiPoly.zero(3), [1.0, 2.0, 3.0]) == 0.0
    assert eval_poly(radial_power(2, 2), [1.0, 2.0]) == 25.0


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_poly(x(0), [1.0, 2.0, 3.0])


def test_zero_terms_pruned_and_degree():
    p = MultiPoly(2, {(1, 0): 1.0, (0, 3): 0.0})
    assert p.degree == 1 and len(p) == 1
    assert MultiPoly.zero(2).degree == 0


def test_integer_evaluation_exact():
    p = MultiPoly(2, {(3, 1): 7.0, (0, 2): -4.0, (0, 0): 11.0})
    assert eval_poly(p, [3.0, -2.0]) == 7 * 27 * -2 - 4 * 4 + 11


def test_dir_deriv2_examples():
    sq = radial_power(1, 2)
    mu = np.array([0.6, 0.8])
    assert dir_deriv2(sq, [0.3, -1.7], mu) == pytest.approx(2.0)
    assert dir_deriv2(MultiPoly.variable(1, 0) ** 4, [1.0], [1.0]) == pytest.approx(12.0)
    assert dir_deriv2(radial_power(2, 2), [1.0, 0.0], [0.0, 1.0]) == pytest.approx(4.0)


def test_dir_deriv2_rejects_non_unit():
    with pytest.raises(ValueError):
        dir_deriv2(radial_power(1, 2), [0.0, 0.0], [1.0, 1.0])


def test_radial_power_examples():
    assert radial_power(1, 2) == x(0) ** 2 + x(1) ** 2
    assert radial_power(2, 2) == MultiPoly(2, {(4, 0): 1, (2, 2): 2, (0, 4): 1})
    assert radial_power(3, 1) == MultiPoly(1, {(6,): 1})
    assert all(c > 0 and float(c).is_integer() for c in radial_power(4, 3).coefficients)


def test_add_scaled_examples():
    z = add_scaled(x(0, 1), x(0, 1), -1.0)
    assert z.is_zero() and z.degree == 0
    assert add_scaled(x(0, 1) ** 2, MultiPoly.constant(1, 1.0), 3.0) == x(0, 1) ** 2 + 3.0
    assert add_scaled(x(0) ** 2, radial_power(1, 2), 1.0) == MultiPoly(2, {(2, 0): 2, (0, 2): 1})


def test_restrict_to_line_examples():
    t2 = restrict_to_line(x(0) ** 2 + x(1) ** 2, [0, 0], [1, 0])
    np.testing.assert_allclose(t2.coef, [0, 0, 1], atol=1e-15)
    s = 1 / math.sqrt(2)
    half = restrict_to_line(x(0) * x(1), [0, 0], [s, s])
    np.testing.assert_allclose(half.coef, [0, 0, 0.5], atol=1e-15)
    const = restrict_to_line(x(0), [1, 0], [0, 1])
    np.testing.assert_allclose(const.trim().coef, [1.0])
    with pytest.raises(ValueError):
        restrict_to_line(x(0), [0, 0], [2, 0])


def test_sup_bound_examples():
    X = MultiPoly.variable(1, 0)
    assert sup_bound(X ** 2, 2.0) == 4.0
    assert sup_bound(X ** 2 - X, 2.0) == 6.0
    assert sup_bound(MultiPoly.zero(2), 3.0) == 0.0


def test_json_round_trip_bit_exact(rng):
    p = random_poly(3, 5, rng).scale(1 / 3)
    text = json.dumps(p.to_json())
    q = MultiPoly.from_json(text)
    assert q == p
    assert [t["exp"] for t in p.to_json()["terms"]] == sorted(
        [t["exp"] for t in p.to_json()["terms"]], key=lambda e: (sum(e), e))


def test_dir_deriv2_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(40):
        d = int(rng.integers(1, 4))
        p = random_poly(d, int(rng.integers(2, 9)), rng)
        pt = rng.standard_normal(d)
        pt *= 2 * rng.random() ** (1 / d) / np.linalg.norm(pt)
        mu = rng.standard_normal(d)
        mu /= np.linalg.norm(mu)
        h = 1e-4
        fd = (eval_poly(p, pt + h * mu) - 2 * eval_poly(p, pt) + eval_poly(p, pt - h * mu)) / h ** 2
        exact = dir_deriv2(p, pt, mu)
        scale = max(abs(exact), float(np.abs(hessian_at(p, pt)).max()), 1.0)
        worst = max(worst, abs(fd - exact) / scale)
    assert worst <= 1e-5


def test_restriction_consistent(rng):
    for _ in range(100):
        d = int(rng.integers(1, 4))
        p = random_poly(d, int(rng.integers(0, 7)), rng)
        o = rng.standard_normal(d)
        mu = rng.standard_normal(d)
        mu /= np.linalg.norm(mu)
        t = float(rng.uniform(-2, 2))
        direct = eval_poly(p, o + t * mu)
        via = restrict_to_line(p, o, mu)(t)
        assert via == pytest.approx(direct, rel=1e-12, abs=1e-12 * sup_bound(p, 5.0))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 8), d=st.integers(1, 3),
       pt=st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_radial_power_matches_norm(n, d, pt):
    v = np.array(pt[:d])
    expect = float(np.dot(v, v)) ** n
    assert eval_poly(radial_power(n, d), v) == pytest.approx(expect, rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 10), d=st.integers(1, 3), seed=st.integers(0, 10 ** 6))
def test_radial_hessian_lower_bound(n, d, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, (50, d))
    mu = rng.standard_normal((50, d))
    mu /= np.linalg.norm(mu, axis=1, keepdims=True)
    vals = dir_deriv2(radial_power(n, d), pts, mu)
    bound = 2 * n * np.linalg.norm(pts, axis=1) ** (2 * (n - 1))
    assert np.all(vals >= bound * (1 - 1e-12))


def test_sup_bound_dominates_samples(rng):
    for _ in range(10):
        p = random_poly(2, 5, rng)
        pts = rng.standard_normal((10000, 2))
        pts *= (1.5 * rng.random((10000, 1)) ** 0.5) / np.linalg.norm(pts, axis=1, keepdims=True)
        assert sup_bound(p, 1.5) >= np.abs(eval_poly(p, pts)).max()


def test_arithmetic_laws(rng):
    p, q = random_poly(2, 3, rng), random_poly(2, 2, rng)
    pt = rng.standard_normal(2)
    assert eval_poly(p * q, pt) == pytest.approx(eval_poly(p, pt) * eval_poly(q, pt))
    assert eval_poly(p - q, pt) == pytest.approx(eval_poly(p, pt) - eval_poly(q, pt))
    assert (p ** 2) == p * p
    assert (p * q).degree == p.degree + q.degree
