import math

import numpy as np
import pytest
from scipy.linalg import expm

from czkit.calculus import gradient_modulus
from czkit.errors import CZKitError
from czkit.poincare import (bounded_covering, classical_ratio, global_from_local, global_pseudo_ratio,
                            offdiagonal_constants, poincare_constant, probe_family, pseudo_ratio)
from czkit.semigroup import make_collection
from czkit.space import Ball, build_space


def test_two_point_classical_exact():
    rep = poincare_constant(build_space("path:2"), 2, "classical")
    assert rep.exact
    # ||f - f_Q||_2 / (r ||grad f||_2) with f = (1, 0), Q = whole space, r = 1.5
    assert rep.constant == pytest.approx(math.sqrt(2) / 3, abs=1e-12)


def test_classical_witness_reproduces_constant():
    sp = build_space("grid:3")
    for q in (1.0, 2.0, 3.0):
        rep = poincare_constant(sp, q, "classical")
        w = rep.witness
        assert classical_ratio(sp, np.array(w["field"]), w["center"], w["radius"], q) == pytest.approx(
            rep.constant, rel=1e-9)


def test_classical_q2_dominates_random_search(rng):
    sp = build_space("path:6")
    exact = poincare_constant(sp, 2, "classical").constant
    fam = sp.balls
    best = 0.0
    for b in fam.unique_index:
        for _ in range(30):
            best = max(best, classical_ratio(sp, rng.standard_normal(sp.n), fam.centers[b], fam.radii[b], 2))
    assert best <= exact * (1 + 1e-12)
    assert best > 0.8 * exact


def test_constant_grows_with_probe_family(rng):
    sp = build_space("cycle:8")
    A = rng.standard_normal((sp.n, 3))
    B = rng.standard_normal((sp.n, 3))
    for kind in ("pseudo", "global_pseudo"):
        small = poincare_constant(sp, 1.5, kind, probes=A, eigen_probes=False).constant
        big = poincare_constant(sp, 1.5, kind, probes=np.c_[A, B], eigen_probes=False).constant
        assert small <= big


def test_constant_probes_contribute_nothing(rng):
    sp = build_space("path:5")
    with pytest.raises(CZKitError) as exc:
        poincare_constant(sp, 2, "pseudo", probes=np.ones((sp.n, 2)))
    assert exc.value.code == "degenerate-probes"
    f = np.full(sp.n, 4.0)
    assert classical_ratio(sp, f, 2, 1.5, 2) == 0
    assert pseudo_ratio(sp, f, 2, 1.5, 2) == 0
    assert global_pseudo_ratio(sp, f, 1.0, 2) == 0


def test_global_pseudo_two_point():
    rep = poincare_constant(build_space("path:2"), 2, "global_pseudo", probes=np.array([1.0, 0.0]), t_grid=[1.0])
    assert rep.constant == pytest.approx((1 - math.exp(-2)) / math.sqrt(2), abs=1e-9)


def test_exponent_and_kind_validation():
    sp = build_space("path:3")
    with pytest.raises(CZKitError) as exc:
        poincare_constant(sp, 0.5)
    assert exc.value.code == "invalid-exponent"
    with pytest.raises(CZKitError):
        poincare_constant(sp, 2, "sideways")
    with pytest.raises(CZKitError):
        poincare_constant(sp, 2, "relative")


def test_classical_finite_across_exponents():
    sp = build_space("tree:7")
    vals = [poincare_constant(sp, q, "classical").constant for q in (1.0, 2.0, 4.0)]
    assert all(math.isfinite(v) and v > 0 for v in vals)


def test_relative_constant_finite():
    sp = build_space("grid:3")
    for kind in ("mean", "heat"):
        for mode in ("nonhomogeneous", "homogeneous"):
            rep = poincare_constant(sp, 1, "relative", collection=make_collection(sp, kind), mode=mode)
            assert math.isfinite(rep.constant) and rep.constant > 0


def test_probe_family_is_deterministic():
    sp = build_space("grid:3")
    a, da = probe_family(sp, seed=4)
    b, db = probe_family(sp, seed=4)
    np.testing.assert_array_equal(a, b)
    assert da == db


def test_offdiag_rejects_q_above_r():
    sp = build_space("path:3")
    with pytest.raises(CZKitError) as exc:
        offdiagonal_constants(sp, make_collection(sp, "mean"), 3, 2)
    assert exc.value.code == "invalid-exponents"


def test_offdiag_mean_at_infinity_is_at_most_one(rng):
    sp = build_space("cycle:8")
    reps = offdiagonal_constants(sp, make_collection(sp, "mean"), 1, math.inf, probes=rng.standard_normal((sp.n, 6)))
    assert reps["b"].constant <= 1 + 1e-12
    assert reps["MH"].constant <= 1 + 1e-12


def _oracle_two_point(f, q, r):
    sp = build_space("path:2")
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    radii = [0.5, 1.5]
    grad = lambda h: np.full(2, abs(h[0] - h[1]) / math.sqrt(2))  # noqa: E731
    comb = np.abs(f) + grad(f)
    masks = {0.5: [np.array([1, 0], bool), np.array([0, 1], bool)], 1.5: [np.array([1, 1], bool)] * 2}
    Mq = np.zeros(2)
    for rad in radii:
        for m in masks[rad]:
            Mq[m] = np.maximum(Mq[m], np.mean(comb[m] ** q) ** (1 / q))
    b_best, mh = 0.0, np.zeros(2)
    for rad in radii:
        h = expm(-rad**2 * L) @ f
        for m in masks[rad]:
            gh = np.zeros(2) if m.sum() == 1 else grad(h)
            val = m.sum() ** (-1 / r) * ((np.sum(np.abs(h[m]) ** r)) ** (1 / r) + np.sum(gh[m] ** r) ** (1 / r))
            b_best = max(b_best, val / Mq[m].min())
            mh[m] = np.maximum(mh[m], val)
    return b_best, float(np.max(mh / Mq))


def test_offdiag_heat_two_point_against_closed_form():
    sp = build_space("path:2")
    f = np.array([1.0, 0.25])
    reps = offdiagonal_constants(sp, make_collection(sp, "heat"), 1, 2, probes=f[:, None])
    b_ref, mh_ref = _oracle_two_point(f, 1.0, 2.0)
    assert reps["b"].constant == pytest.approx(b_ref, rel=1e-9)
    assert reps["MH"].constant == pytest.approx(mh_ref, rel=1e-9)
    assert math.isfinite(reps["a"].constant)


def test_offdiag_identical_balls_give_zero():
    sp = build_space("path:3")
    f = np.array([[1.0], [0.0], [2.0]])
    # N = 1 only admits Q' = Q as a node set; distinct radii with equal members still differ as heat operators
    reps = offdiagonal_constants(sp, make_collection(sp, "mean"), 1, 2, N_equiv=1.0, probes=f)
    assert reps["a"].constant == 0.0


def test_covering_full_radius_is_one_ball():
    sp = build_space("cycle:16")
    cov = bounded_covering(sp, Ball(3, 4.5), 4.5**2)
    assert cov.centers == [3] and cov.covered


def test_covering_singleton():
    sp = build_space("path:4")
    cov = bounded_covering(sp, Ball(1, 0.5), 0.25)
    assert cov.centers == [1] and cov.covered


def test_covering_half_circle():
    sp = build_space("cycle:16")
    cov = bounded_covering(sp, Ball(0, 4.5), 1.0)
    assert cov.covered and len(cov.centers) >= 3
    assert max(cov.multiplicity[1.0], cov.multiplicity[2.0]) <= 3
    for s, m in cov.multiplicity.items():
        assert m <= cov.c_cov * s**cov.dim * (1 + 1e-12)


def test_covering_rejects_large_time():
    with pytest.raises(CZKitError) as exc:
        bounded_covering(build_space("path:5"), Ball(2, 1.5), 3.0)
    assert exc.value.code == "invalid-scale"


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_global_from_local_chain(q):
    out = global_from_local(build_space("grid:4"), q)
    assert out["holds"]
    assert all(row["holds"] for row in out["per_t"])


def test_pseudo_finite_when_classical_finite():
    sp = build_space("cycle:8")
    c = poincare_constant(sp, 2, "classical").constant
    p = poincare_constant(sp, 2, "pseudo").constant
    assert math.isfinite(c) and math.isfinite(p) and p > 0


def test_gradient_of_witness_nonzero():
    sp = build_space("path:5")
    rep = poincare_constant(sp, 2, "pseudo")
    assert np.any(gradient_modulus(sp, np.array(rep.witness["field"])) > 0)
