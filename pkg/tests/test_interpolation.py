import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from czkit.calculus import gradient_modulus, lp_norm
from czkit.errors import CZKitError
from czkit.interpolation import (KSolver, besov_norm, gn_check, interpolation_norm, k_bruteforce, k_curve,
                                 k_lebesgue, k_sobolev_upper, k_upper_rhs, parse_pair, space_norm)
from czkit.space import MetricMeasureSpace, build_space


def k_l1_linf_lp(mu, f, t):
    """Independent LP for ``min_a ||f - a||_1 + t ||a||_inf`` (variables a, u, m)."""
    n = len(f)
    c = np.concatenate([np.zeros(n), mu, [t]])
    I = np.eye(n)
    z = np.zeros((n, 1))
    A = np.block([[I, -I, z], [-I, -I, z], [I, np.zeros((n, n)), -np.ones((n, 1))],
                  [-I, np.zeros((n, n)), -np.ones((n, 1))]])
    b = np.concatenate([f, -f, np.zeros(2 * n)])
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n + [(0, None)] * (n + 1))
    return res.fun


def test_three_point_example():
    sp = build_space("path:3")
    f = np.array([3.0, 1.0, 2.0])
    brute = k_bruteforce(sp, f, 1.0, ("lebesgue", 1, math.inf))
    assert brute.value == pytest.approx(3.0, abs=1e-8)
    assert brute.value == pytest.approx(k_l1_linf_lp(sp.mu, f, 1.0), abs=1e-8)
    formula = k_lebesgue(sp, f, 1.0, 1, math.inf)
    assert formula.value == 5.0
    assert 1 <= formula.value / brute.value <= 4


def test_witness_reproduces_value():
    sp = build_space("cycle:6")
    f = np.random.default_rng(0).standard_normal(6)
    res = k_bruteforce(sp, f, 0.7, "L1,L2")
    np.testing.assert_allclose(res.a0 + res.a1, f, atol=1e-12)
    val = space_norm(sp, res.a0, "lebesgue", 1) + 0.7 * space_norm(sp, res.a1, "lebesgue", 2)
    assert val == pytest.approx(res.value, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.floats(0.05, 20))
def test_bruteforce_matches_linear_program(seed, t):
    rng = np.random.default_rng(seed)
    sp = MetricMeasureSpace(range(5), [(i, i + 1, 1.0) for i in range(4)], measure=rng.uniform(0.2, 3, 5))
    f = rng.standard_normal(5)
    assert k_bruteforce(sp, f, t, "L1,Linf").value == pytest.approx(k_l1_linf_lp(sp.mu, f, t), rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("pair", [("lebesgue", 2, 2), ("sobolev", 2, 2)])
@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_equal_spaces(pair, t):
    sp = build_space("path:4")
    f = np.array([1.0, -2.0, 0.5, 3.0])
    ref = min(1, t) * space_norm(sp, f, pair[0], 2)
    assert k_bruteforce(sp, f, t, pair).value == pytest.approx(ref, rel=1e-7)


def test_large_t_limit():
    sp = build_space("cycle:5")
    f = np.random.default_rng(2).standard_normal(5)
    for pair in ("L1,L2", "W1,W2"):
        kind, p0, _ = parse_pair(pair)
        assert k_bruteforce(sp, f, 1e4, pair).value == pytest.approx(space_norm(sp, f, kind, p0), rel=1e-7)


@pytest.mark.parametrize("pair", ["L1,Linf", "L1,L2", "W1,Winf", "W1,W2"])
def test_curve_concave_monotone_and_below_trivial(pair):
    sp = build_space("path:6")
    f = np.random.default_rng(4).standard_normal(6)
    kind, p0, p1 = parse_pair(pair)
    ts = np.geomspace(0.05, 20, 25)
    K = np.array([r.value for r in k_curve(sp, f, ts, pair)])
    assert np.all(np.diff(K) >= -1e-12)
    slopes = np.diff(K) / np.diff(ts)
    assert np.all(np.diff(slopes) <= 1e-9)
    trivial = np.minimum(space_norm(sp, f, kind, p0), ts * space_norm(sp, f, kind, p1))
    assert np.all(K <= trivial * (1 + 1e-12))


def test_sobolev_size_cap():
    with pytest.raises(CZKitError) as exc:
        KSolver(build_space("path:65"), "W1,W2")
    assert exc.value.code == "too-large"


def test_lebesgue_formula_basics():
    sp = build_space("path:4")
    assert k_lebesgue(sp, np.zeros(4), 1.0, 1, 2).value == 0.0
    f = np.array([1.0, -3.0, 2.0, 0.5])
    for c in (-2.0, 0.5, 3.0):
        assert k_lebesgue(sp, c * f, 0.8, 1, 2).value == pytest.approx(abs(c) * k_lebesgue(sp, f, 0.8, 1, 2).value)
    with pytest.raises(CZKitError) as exc:
        k_lebesgue(sp, f, 1.0, 2, 1)
    assert exc.value.code == "invalid-exponents"


def test_lebesgue_l1_linf_against_quadrature():
    # for (L1, Linf) the head is int_0^t f* and the tail is f*(t)
    sp = build_space("path:5")
    f = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
    for t in (0.5, 1.0, 2.5, 7.0):
        fs = np.sort(np.abs(f))[::-1]
        head = sum(fs[k] * max(0.0, min(t, k + 1) - k) for k in range(5))
        tail = fs[int(t)] if t < 5 else 0.0
        assert k_lebesgue(sp, f, t, 1, math.inf).value == pytest.approx(head + t * tail)


@pytest.mark.parametrize("pair", [(1, math.inf), (1, 2)])
def test_lebesgue_equivalence_band(pair):
    sp = build_space("path:8")
    rng = np.random.default_rng(5)
    solver = KSolver(sp, ("lebesgue",) + pair)
    ratios = []
    for _ in range(8):
        f = rng.standard_normal(8)
        for t in (0.1, 0.5, 1.0, 3.0):
            ratios.append(k_lebesgue(sp, f, t, *pair).value / solver.solve(f, t).value)
    assert 1 / 8 <= min(ratios) and max(ratios) <= 8


def test_sobolev_upper_dominates_bruteforce():
    sp = build_space("cycle:16")
    f = np.zeros(16)
    f[0] = 1.0
    solver = KSolver(sp, "W1,Winf")
    for t in (0.3, 0.6, 0.9):
        up = k_sobolev_upper(sp, f, t, 1, math.inf, 1)
        assert up.extra["mu_omega_ok"]
        assert solver.solve(f, t).value <= up.value * (1 + 1e-7)
        assert up.extra["rhs"] > 0


def test_sobolev_upper_empty_omega():
    sp = build_space("path:6")
    f = np.random.default_rng(1).standard_normal(6)
    up = k_sobolev_upper(sp, f, 0.01, 1, math.inf, 1)
    if up.extra["n_balls"] == 0:
        w = lp_norm(sp.mu, f, math.inf) + lp_norm(sp.mu, gradient_modulus(sp, f), math.inf)
        assert up.value == pytest.approx(0.01 * w)
    with pytest.raises(CZKitError) as exc:
        k_sobolev_upper(sp, f, 100.0, 1, math.inf, 1)
    assert exc.value.code == "degenerate-threshold"


def test_upper_rhs_scales_linearly():
    sp = build_space("cycle:8")
    f = np.random.default_rng(7).standard_normal(8)
    a = k_upper_rhs(sp, f, 0.5, 1, 2, 1)
    assert k_upper_rhs(sp, 3 * f, 0.5, 1, 2, 1) == pytest.approx(3 * a)


def test_besov_two_point_closed_form():
    sp = build_space("path:2")
    assert besov_norm(sp, [1.0, 0.0], -1.0, [1.0]) == pytest.approx((1 + math.exp(-2)) / 2, rel=1e-13)


def test_besov_trivial_fields():
    sp = build_space("cycle:6")
    assert besov_norm(sp, np.zeros(6), -1.0) == 0.0
    grid = np.geomspace(1e-2, 10, 7)
    assert besov_norm(sp, np.full(6, -2.0), -1.0, grid) == pytest.approx(2.0 * 10**0.5)
    with pytest.raises(CZKitError) as exc:
        besov_norm(sp, np.ones(6), 0.0)
    assert exc.value.code == "invalid-exponent"


def test_gn_scaling_invariance():
    sp = build_space("cycle:16")
    f = np.random.default_rng(0).standard_normal(16)
    a = gn_check(sp, f, 2, 4)
    b = gn_check(sp, -3.5 * f, 2, 4)
    assert b["sup"] == pytest.approx(a["sup"], rel=1e-12)
    assert b["sup_difference"] == pytest.approx(a["sup_difference"], rel=1e-12)


def test_gn_difference_variant_stable_across_sizes():
    vals = []
    for n in (16, 32, 64):
        f = np.zeros(n)
        f[0] = 1.0
        vals.append(gn_check(build_space(f"cycle:{n}"), f, 2, 4)["sup_difference"])
    assert max(vals) / min(vals) <= 2


def test_gn_rejects_constants():
    with pytest.raises(CZKitError) as exc:
        gn_check(build_space("path:4"), np.ones(4), 2, 4)
    assert exc.value.code == "degenerate-probes"


def test_interpolation_norm_monotone_under_domination():
    sp = build_space("path:6")
    rng = np.random.default_rng(9)
    ts = np.geomspace(1e-2, 1e2, 81)
    for _ in range(5):
        g = rng.standard_normal(6)
        f = g * rng.uniform(0, 1, 6)
        for q in (1.0, 2.0, math.inf):
            assert interpolation_norm(sp, f, 0.5, q, ("lebesgue", 1, 2), ts) <= \
                interpolation_norm(sp, g, 0.5, q, ("lebesgue", 1, 2), ts) * (1 + 1e-12)
