import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from czkit.calculus import gradient_modulus, laplacian_apply, lp_norm
from czkit.errors import CZKitError
from czkit.semigroup import (gaffney_check, heat_apply, heat_kernel, heat_kernel_dt, kernel_bounds_report,
                             make_collection, riesz_quotients, sample_gaffney_sets, spectral_decompose,
                             sqrt_laplacian_apply)
from czkit.space import build_space


def dense_laplacian(sp):
    return np.column_stack([laplacian_apply(sp, e) for e in np.eye(sp.n)])


def test_two_point_closed_forms():
    k2 = build_space("path:2")
    f = np.array([1.0, 0.0])
    np.testing.assert_allclose(sorted(spectral_decompose(k2).eigenvalues), [0.0, 2.0], atol=1e-14)
    e = math.exp(-2)
    np.testing.assert_allclose(heat_apply(k2, f, 1.0), [(1 + e) / 2, (1 - e) / 2], atol=1e-14)
    np.testing.assert_allclose(sqrt_laplacian_apply(k2, f), [1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-14)
    # on-diagonal kernel times ball measure mu(Q(x, 1)) = 1
    assert heat_kernel(k2, 1.0)[0, 0] == pytest.approx((1 + e) / 2, abs=1e-14)


def test_heat_matches_matrix_exponential(spaces, rng):
    for sp in spaces.values():
        L = dense_laplacian(sp)
        f = rng.standard_normal(sp.n)
        for t in (0.1, 1.0, 7.0):
            np.testing.assert_allclose(heat_apply(sp, f, t), expm(-t * L) @ f, rtol=1e-9, atol=1e-11)
            np.testing.assert_allclose(heat_kernel(sp, t), expm(-t * L) / sp.mu[None, :], rtol=1e-8, atol=1e-11)


def test_heat_zero_time_is_identity(rng):
    sp = build_space("grid:3")
    f = rng.standard_normal(sp.n)
    np.testing.assert_array_equal(heat_apply(sp, f, 0.0), f)


def test_negative_time_rejected():
    with pytest.raises(CZKitError) as exc:
        heat_apply(build_space("path:3"), [1, 0, 0], -0.1)
    assert exc.value.code == "invalid-time"


def test_time_derivative_matches_finite_difference():
    sp = build_space("cycle:6")
    h = 1e-5
    fd = (heat_kernel(sp, 1.0 + h) - heat_kernel(sp, 1.0 - h)) / (2 * h)
    np.testing.assert_allclose(heat_kernel_dt(sp, 1.0), fd, atol=1e-8)


def test_sqrt_laplacian_squares_to_laplacian(rng):
    sp = build_space("radial:7:3")
    f = rng.standard_normal(sp.n)
    np.testing.assert_allclose(sqrt_laplacian_apply(sp, sqrt_laplacian_apply(sp, f)), laplacian_apply(sp, f),
                               atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(spec=st.sampled_from(["path:6", "cycle:7", "tree:9", "radial:6:2"]),
       s=st.floats(0.01, 5.0), t=st.floats(0.01, 5.0))
def test_semigroup_property(spec, s, t):
    sp = build_space(spec)
    P = heat_kernel(sp, s) @ np.diag(sp.mu) @ heat_kernel(sp, t)
    np.testing.assert_allclose(P, heat_kernel(sp, s + t), atol=1e-10)


def test_collections():
    sp = build_space("path:5")
    f = np.arange(5.0)
    mean = make_collection(sp, "mean")
    np.testing.assert_allclose(mean.apply(f, 2, 1.5), np.full(5, 2.0))
    heat = make_collection(sp, "heat")
    np.testing.assert_allclose(heat.apply(f, 0, 2.0), heat_apply(sp, f, 4.0))
    with pytest.raises(CZKitError):
        make_collection(sp, "median")


def test_kernel_report_due_two_point():
    rep = kernel_bounds_report(build_space("path:2"), [1.0])
    assert rep.checks["DUE"].constant == pytest.approx((1 + math.exp(-2)) / 2, abs=1e-12)
    for name in ("DUE", "UE", "LY", "UTP", "G", "Gaffney_p1", "Gaffney_p2"):
        assert math.isfinite(rep.checks[name].constant)


def test_kernel_report_lower_bound_consistent():
    sp = build_space("cycle:8")
    rep = kernel_bounds_report(sp, [0.5, 2.0])
    ly = rep.checks["LY"]
    assert ly.extra["lower_constant"] <= ly.constant
    assert ly.extra["smallest_valid_c1"] >= 0


def test_kernel_report_rejects_bad_grid():
    with pytest.raises(CZKitError) as exc:
        kernel_bounds_report(build_space("path:3"), [])
    assert exc.value.code == "invalid-grid"


def test_gaffney_p2_exact_matches_probe_search(rng):
    sp = build_space("path:9")
    pairs = sample_gaffney_sets(sp, seed=1)[:3]
    exact = gaffney_check(sp, [1.0], pairs, 2)
    # random probes can only reach the exact value from below
    H = heat_kernel(sp, 1.0) * sp.mu[None, :]
    best = 0.0
    for E, F in pairs:
        for _ in range(200):
            f = np.where(E, rng.standard_normal(sp.n), 0.0)
            lhs = lp_norm(sp.mu, gradient_modulus(sp, H @ f), 2, F)
            best = max(best, lhs / lp_norm(sp.mu, f, 2, E))
    assert exact.extra["exact"]
    assert 0 < best <= exact.constant * (1 + 1e-9)
    assert best >= 0.5 * exact.constant


def test_riesz_quotient_is_one_at_two(rng):
    sp = build_space("grid:3")
    rows = riesz_quotients(sp, rng.standard_normal((sp.n, 10)), [2.0])
    assert rows[0]["rr"] == pytest.approx(1.0, rel=1e-9)
    assert rows[0]["r"] == pytest.approx(1.0, rel=1e-9)


def test_riesz_rejects_constant_probes():
    sp = build_space("path:4")
    with pytest.raises(CZKitError) as exc:
        riesz_quotients(sp, np.ones((sp.n, 2)), [2.0])
    assert exc.value.code == "degenerate-probes"
