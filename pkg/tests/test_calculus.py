import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from czkit.calculus import (check_exponent, dirichlet_form, gradient_modulus, inner, laplacian_apply, lp_norm,
                            norm, read_field, write_field)
from czkit.errors import CZKitError
from czkit.space import build_space


def loop_gradient(sp, f):
    out = np.zeros(sp.n)
    for u, v, w in zip(sp.edge_u, sp.edge_v, sp.edge_weight):
        out[u] += w * (f[u] - f[v]) ** 2
        out[v] += w * (f[u] - f[v]) ** 2
    return np.sqrt(out / (2 * sp.mu))


def loop_laplacian(sp, f):
    out = np.zeros(sp.n)
    for u, v, w in zip(sp.edge_u, sp.edge_v, sp.edge_weight):
        out[u] += w * (f[u] - f[v])
        out[v] += w * (f[v] - f[u])
    return out / sp.mu


def test_two_point_values():
    k2 = build_space("path:2")
    f = np.array([1.0, 0.0])
    np.testing.assert_allclose(gradient_modulus(k2, f), [1 / math.sqrt(2)] * 2)
    np.testing.assert_allclose(laplacian_apply(k2, f), [1.0, -1.0])
    assert norm(k2, f, "sobolev", 2) == pytest.approx(2.0)
    assert norm(k2, f, "homogeneous", 2) == pytest.approx(1.0)


def test_matches_loop_formulas(spaces, rng):
    for sp in spaces.values():
        f = rng.standard_normal(sp.n)
        np.testing.assert_allclose(gradient_modulus(sp, f), loop_gradient(sp, f), rtol=1e-12)
        np.testing.assert_allclose(laplacian_apply(sp, f), loop_laplacian(sp, f), rtol=1e-10, atol=1e-12)


def test_stacked_fields_match_columns(rng):
    sp = build_space("grid:3")
    F = rng.standard_normal((sp.n, 4))
    G = gradient_modulus(sp, F)
    for k in range(4):
        np.testing.assert_allclose(G[:, k], gradient_modulus(sp, F[:, k]))


@settings(max_examples=50, deadline=None)
@given(spec=st.sampled_from(["path:5", "cycle:6", "grid:3", "radial:6:3", "rgg:10:0.6:2"]),
       data=st.data())
def test_green_identity(spec, data):
    sp = build_space(spec)
    f = data.draw(arrays(float, sp.n, elements=st.floats(-10, 10)))
    lhs = lp_norm(sp.mu, gradient_modulus(sp, f), 2) ** 2
    assert lhs == pytest.approx(inner(sp, laplacian_apply(sp, f), f), rel=1e-9, abs=1e-9)
    assert lhs == pytest.approx(dirichlet_form(sp, f, f), rel=1e-9, abs=1e-9)


def test_constants_have_zero_gradient(spaces):
    for sp in spaces.values():
        assert np.all(gradient_modulus(sp, np.full(sp.n, 3.7)) == 0)
        np.testing.assert_allclose(laplacian_apply(sp, np.full(sp.n, 3.7)), 0, atol=1e-12)


def test_masked_gradient_uses_interior_edges():
    sp = build_space("path:4")
    f = np.array([0.0, 1.0, 3.0, 6.0])
    mask = np.array([False, True, True, False])
    g = gradient_modulus(sp, f, mask)
    assert g[0] == 0 and g[3] == 0
    assert g[1] == pytest.approx(2 / math.sqrt(2))


def test_lp_inf_and_exponent_check():
    mu = np.ones(3)
    assert lp_norm(mu, [1, -5, 2], math.inf) == 5
    with pytest.raises(CZKitError) as exc:
        check_exponent(0.5)
    assert exc.value.code == "invalid-exponent"


def test_field_csv_round_trip(tmp_path):
    sp = build_space("grid:2")
    f = np.array([0.1, -2.0, 3.5, 1e-7])
    path = tmp_path / "f.csv"
    write_field(sp, f, path)
    np.testing.assert_array_equal(read_field(sp, path), f)


def test_field_csv_missing_node(tmp_path):
    sp = build_space("path:3")
    path = tmp_path / "f.csv"
    path.write_text("0,1\n1,2\n")
    with pytest.raises(CZKitError):
        read_field(sp, path)
