import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from conftest import brute_maximal
from czkit.calculus import lp_norm
from czkit.errors import CZKitError
from czkit.maximal import (collection_maximal, hl_maximal, local_sobolev_norms, maximal_rearrangement_ratio,
                           rearrangement_of_values, rearrangements, weak_type_ratio)
from czkit.semigroup import heat_apply, make_collection
from czkit.space import build_space


def test_three_point_table():
    p3 = build_space("path:3")
    np.testing.assert_allclose(hl_maximal(p3, [1.0, 0.0, 0.0]), [1.0, 0.5, 1 / 3], rtol=0, atol=1e-15)
    np.testing.assert_allclose(collection_maximal(p3, [1.0, 0.0, 0.0], make_collection(p3, "mean")),
                               [1.0, 0.5, 1 / 3], atol=1e-15)


@pytest.mark.parametrize("s", [1.0, 2.0, 3.5])
def test_matches_brute_enumeration(spaces, rng, s):
    for sp in spaces.values():
        f = rng.standard_normal(sp.n)
        np.testing.assert_allclose(hl_maximal(sp, f, s), brute_maximal(sp, f, s), rtol=1e-12)


def test_pointwise_domination(spaces, rng):
    for sp in spaces.values():
        f = rng.standard_normal(sp.n)
        M = hl_maximal(sp, f)
        assert np.all(M >= np.abs(f) * (1 - 1e-12))
        assert np.all(collection_maximal(sp, f, make_collection(sp, "mean")) <= M * (1 + 1e-12))


def test_homogeneous_mean_collection_vanishes(rng):
    sp = build_space("cycle:6")
    out = collection_maximal(sp, rng.standard_normal(sp.n), make_collection(sp, "mean"), mode="homogeneous")
    assert np.all(out == 0)


def test_bad_mode_rejected():
    sp = build_space("path:3")
    with pytest.raises(CZKitError):
        collection_maximal(sp, [1, 2, 3], make_collection(sp, "mean"), mode="weird")


def test_heat_collection_on_constants():
    sp = build_space("grid:3")
    out = collection_maximal(sp, np.full(sp.n, 2.0), make_collection(sp, "heat"), s=2.0)
    # A_Q 2 = 2 with zero gradient: mu(Q)^(-1/2) ||2||_{L^2(Q)} = 2
    np.testing.assert_allclose(out, 2.0, rtol=1e-12)


def test_local_sobolev_norm_by_hand():
    sp = build_space("path:4")
    h = np.array([0.0, 1.0, 3.0, 6.0])
    mask = np.array([[False, True, True, False]])
    lpart, gpart = local_sobolev_norms(sp, h, mask, 2.0)
    assert lpart[0] == pytest.approx(math.sqrt(1 + 9))
    # interior edge (1, 2) has jump 2; each endpoint gets |grad|^2 = 4 / 2
    assert gpart[0] == pytest.approx(math.sqrt(4.0))


def test_weak_type_identity_is_one():
    sp = build_space("path:3")
    assert weak_type_ratio(sp, "identity", [1.0, 0.0, 0.0], 1.0) == pytest.approx(1.0)


def test_weak_type_rejects_zero():
    with pytest.raises(CZKitError) as exc:
        weak_type_ratio(build_space("path:3"), "hl", [0.0, 0.0, 0.0], 1.0)
    assert exc.value.code == "degenerate-input"


def test_weak_type_of_maximal_is_bounded(rng):
    sp = build_space("grid:4")
    C = max(weak_type_ratio(sp, "hl", rng.standard_normal(sp.n), 1.0) for _ in range(20))
    assert 0 < C < 25


def test_rearrangement_example():
    r = rearrangements(build_space("path:3"), [3.0, 1.0, 2.0])
    assert r.fstar([0.5, 1.5, 2.5, 3.5]).tolist() == [3.0, 2.0, 1.0, 0.0]
    assert float(r.fstarstar(1.5)) == pytest.approx(8 / 3)
    with pytest.raises(CZKitError):
        r.fstarstar(0.0)


@settings(max_examples=60, deadline=None)
@given(values=arrays(float, st.integers(1, 12), elements=st.floats(-50, 50)),
       seed=st.integers(0, 2**16))
def test_equimeasurable(values, seed):
    w = np.random.default_rng(seed).uniform(0.2, 3.0, len(values))
    r = rearrangement_of_values(values, w)
    for lam in np.r_[0.0, np.unique(np.abs(values))]:
        assert r.level_measure(lam) == pytest.approx(float(w[np.abs(values) > lam].sum()), abs=1e-12)
    for p in (1.0, 2.5):
        assert r.lp_norm_fstar(p) == pytest.approx(lp_norm(w, values, p), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(values=arrays(float, st.integers(1, 10), elements=st.floats(-20, 20)),
       p=st.sampled_from([1.5, 2.0, 4.0]))
def test_hardy_inequality(values, p):
    r = rearrangement_of_values(values, np.ones(len(values)))
    assert r.lp_norm_fstarstar(p) <= p / (p - 1) * r.lp_norm_fstar(p) * (1 + 1e-10) + 1e-12


def test_fstarstar_norm_matches_generic_quadrature():
    r = rearrangement_of_values([3.0, 1.0, 2.0, 0.5], [1.0, 2.0, 0.5, 1.0])
    p = 2.0
    ref = integrate.quad(lambda t: float(r.fstarstar(t)) ** p, 1e-12, r.support, points=list(r.breaks[1:-1]),
                         limit=200)[0]
    total = float(np.sum(np.diff(r.breaks) * r.values))
    ref += total**p / ((p - 1) * r.support ** (p - 1))
    assert r.lp_norm_fstarstar(p) == pytest.approx(ref ** (1 / p), rel=1e-9)


def test_maximal_rearrangement_comparable(rng):
    sp = build_space("path:16")
    lo, hi = maximal_rearrangement_ratio(sp, np.abs(rng.standard_normal(sp.n)))
    assert 0 < lo <= hi < 10
