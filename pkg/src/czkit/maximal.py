"""Maximal functions and decreasing rearrangements.

Suprema over balls are exact: every distinct ball ``Q(x, r)`` with ``r``
in the realized-distance midpoint grid is enumerated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse

from .calculus import check_exponent, lp_norm
from .errors import CZKitError
from .semigroup import heat_apply


def _sup_over_balls(family, values, index=None):
    """``max_{b : x in Q_b} values[b]`` for every node ``x``."""
    masks = family.masks if index is None else family.masks[index]
    out = np.where(masks, values[:, None], -np.inf).max(axis=0)
    return np.maximum(out, 0.0)


def ball_averages(space, g, family=None, index=None):
    """``mu(Q)^-1 int_Q g`` for each ball of ``family`` (default: all balls)."""
    family = space.balls if family is None else family
    masks = family.masks if index is None else family.masks[index]
    meas = family.measures if index is None else family.measures[index]
    return (masks.astype(float) @ (space.mu * g)) / meas


def hl_maximal(space, f, s=1.0):
    """Uncentered maximal function ``M_s f(x) = sup_{Q ∋ x} (avg_Q |f|^s)^(1/s)``.

    Examples
    --------
    >>> from czkit.space import build_space
    >>> hl_maximal(build_space("path:3"), [1.0, 0.0, 0.0]).round(4)
    array([1.    , 0.5   , 0.3333])
    """
    s = check_exponent(s)
    f = np.abs(np.asarray(f, dtype=float))
    fam = space.balls
    idx = fam.unique_index
    avg = ball_averages(space, f**s, fam, idx)
    return _sup_over_balls(fam, np.maximum(avg, 0.0) ** (1.0 / s), idx)


def _interior_energy_matrix(space, h):
    """Sparse symmetric matrix with entries ``w_xy (h(x) - h(y))**2`` on edges."""
    u, v = space.edge_u, space.edge_v
    e = space.edge_weight * (h[u] - h[v]) ** 2
    return sparse.coo_matrix((np.r_[e, e], (np.r_[u, v], np.r_[v, u])), shape=(space.n, space.n)).tocsr()


def local_sobolev_norms(space, h, masks, s, homogeneous=False):
    """``||h||_{W^{1,s}(Q)}`` for each mask row, with interior-edge gradients.

    Returns ``(lp_part, grad_part)`` arrays; the Sobolev norm is their sum.
    """
    masks = np.atleast_2d(masks)
    mf = masks.astype(float)
    W = _interior_energy_matrix(space, h)
    # sum over neighbours z of y inside the ball: (W @ mask)[y]
    inner = (W @ mf.T).T
    grad2 = np.where(masks, inner / (2 * space.mu), 0.0)
    if math.isinf(s):
        gpart = np.sqrt(grad2.max(axis=1))
        lpart = np.where(masks, np.abs(h), 0.0).max(axis=1)
    else:
        gpart = (mf * grad2 ** (s / 2)) @ space.mu
        gpart = gpart ** (1 / s)
        lpart = (mf @ (space.mu * np.abs(h) ** s)) ** (1 / s)
    if homogeneous:
        lpart = np.zeros_like(lpart)
    return lpart, gpart


def collection_ball_values(space, f, collection, s, homogeneous=False, family=None):
    """``mu(Q)^(-1/s) ||A_Q f||_{W^{1,s}(Q)}`` for every ball of ``family``."""
    family = space.balls if family is None else family
    f = np.asarray(f, dtype=float)
    scale = family.measures ** (-1.0 / s) if not math.isinf(s) else np.ones(len(family))
    if collection.kind == "mean":
        if homogeneous:
            return np.zeros(len(family))
        avg = np.abs(ball_averages(space, f, family))
        # constant on Q: interior gradient vanishes, ||c||_{L^s(Q)} = |c| mu(Q)^(1/s)
        return avg
    values = np.zeros(len(family))
    for rho in np.unique(family.radii):
        sel = np.flatnonzero(family.radii == rho)
        h = heat_apply(space, f, rho**2)
        lpart, gpart = local_sobolev_norms(space, h, family.masks[sel], s, homogeneous)
        values[sel] = scale[sel] * (lpart + gpart)
    return values


def collection_maximal(space, f, collection, s=1.0, mode="nonhomogeneous"):
    """``M_{A,s} f(x) = sup_{Q ∋ x} mu(Q)^(-1/s) ||A_Q f||_{W^{1,s}(Q)}``.

    ``mode="homogeneous"`` keeps only the gradient part of the local norm.
    """
    s = check_exponent(s)
    homogeneous = _is_homogeneous(mode)
    values = collection_ball_values(space, f, collection, s, homogeneous)
    return _sup_over_balls(space.balls, values)


def _is_homogeneous(mode):
    if mode not in ("nonhomogeneous", "homogeneous"):
        raise CZKitError("invalid-spec", f"unknown mode {mode!r}")
    return mode == "homogeneous"


# --- rearrangements ---------------------------------------------------------

@dataclass
class RearrangementPair:
    """Decreasing rearrangement ``f*`` and its running average ``f**``.

    ``f*`` equals ``values[k]`` on ``[breaks[k], breaks[k+1])`` and 0 from
    ``breaks[-1]`` on.  ``total`` is the measure of the whole space.
    """

    values: np.ndarray
    breaks: np.ndarray
    total: float

    @property
    def support(self):
        return float(self.breaks[-1])

    def fstar(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breaks, t, side="right") - 1
        vals = np.r_[self.values, 0.0]
        k = np.where(k < 0, 0, k)
        return vals[np.minimum(k, len(self.values))]

    def integral(self, a, b, p=1.0):
        """``int_a^b f*(s)^p ds`` (exact), for ``0 <= a <= b`` possibly infinite."""
        if b <= a:
            return 0.0
        lo = np.clip(self.breaks[:-1], a, b)
        hi = np.clip(self.breaks[1:], a, b)
        if math.isinf(p):
            raise CZKitError("invalid-exponent", "use sup for p = inf")
        return float(np.sum((hi - lo) * self.values**p))

    def sup_after(self, a):
        """``sup_{s > a} f*(s)``."""
        return float(self.fstar(a)) if a < self.support else 0.0

    def fstarstar(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise CZKitError("invalid-time", "f** needs t > 0")
        cum = np.r_[0.0, np.cumsum(np.diff(self.breaks) * self.values)]
        k = np.searchsorted(self.breaks, t, side="right") - 1
        inside = k < len(self.values)
        kk = np.minimum(k, len(self.values) - 1) if len(self.values) else np.zeros_like(k)
        if len(self.values) == 0:
            return np.zeros_like(t)
        partial = np.where(inside, cum[kk] + (t - self.breaks[kk]) * self.values[kk], cum[-1])
        return partial / t

    def level_measure(self, lam):
        """Lebesgue measure of ``{f* > lam}``."""
        return float(np.sum(np.diff(self.breaks)[self.values > lam]))

    def lp_norm_fstar(self, p):
        if math.isinf(p):
            return float(self.values[0]) if len(self.values) else 0.0
        return self.integral(0.0, self.support, p) ** (1.0 / p)

    def lp_norm_fstarstar(self, p):
        """``||f**||_{L^p(0, inf)}`` by piecewise quadrature plus an exact tail."""
        if len(self.values) == 0:
            return 0.0
        if math.isinf(p):
            return float(self.values[0])
        if p <= 1:
            return math.inf
        cum = np.r_[0.0, np.cumsum(np.diff(self.breaks) * self.values)]
        total = 0.0
        for k, v in enumerate(self.values):
            a, b = self.breaks[k], self.breaks[k + 1]
            beta = cum[k] - v * a  # f**(t) = v + beta / t on [a, b)
            if a == 0:
                total += (b * v**p)  # f** == f* == v on the first step
                continue
            val, _ = integrate.quad(lambda t: (v + beta / t) ** p, a, b, epsabs=0, epsrel=1e-13, limit=200)
            total += val
        T = self.breaks[-1]
        total += cum[-1] ** p * T ** (1 - p) / (p - 1)
        return total ** (1.0 / p)


def rearrangements(space, f):
    """``f*(t) = inf{lam : mu(|f| > lam) <= t}`` and ``f** = t^-1 int_0^t f*``.

    Examples
    --------
    >>> from czkit.space import build_space
    >>> r = rearrangements(build_space("path:3"), [3.0, 1.0, 2.0])
    >>> r.fstar([0.5, 1.5, 2.5, 3.5]).tolist(), float(r.fstarstar(1.5))
    ([3.0, 2.0, 1.0, 0.0], 2.6666666666666665)
    """
    a = np.abs(np.asarray(f, dtype=float))
    pos = a > 0
    vals, inv = np.unique(a[pos], return_inverse=True)
    mass = np.bincount(inv, weights=space.mu[pos], minlength=len(vals))
    vals, mass = vals[::-1], mass[::-1]
    breaks = np.r_[0.0, np.cumsum(mass)]
    return RearrangementPair(vals, breaks, space.total_measure)


def rearrangement_of_values(values, weights):
    """Rearrangement of ``|values|`` against arbitrary positive weights."""
    a = np.abs(np.asarray(values, dtype=float))
    w = np.asarray(weights, dtype=float)
    pos = a > 0
    vals, inv = np.unique(a[pos], return_inverse=True)
    mass = np.bincount(inv, weights=w[pos], minlength=len(vals))
    return RearrangementPair(vals[::-1], np.r_[0.0, np.cumsum(mass[::-1])], float(w.sum()))


def _apply_tagged(space, op, f, s=1.0):
    if callable(op):
        return np.asarray(op(f), dtype=float)
    if op == "identity":
        return np.asarray(f, dtype=float)
    if op in ("hl", "maximal", "M"):
        return hl_maximal(space, f, s)
    raise CZKitError("invalid-spec", f"unknown operator {op!r}")


def weak_type_ratio(space, op, f, p, s=1.0):
    """``sup_{a > 0} a^p mu(|Tf| > a) / ||f||_p^p`` over the level values of ``Tf``.

    ``op`` is ``"identity"``, ``"hl"`` (uncentered maximal ``M_s``) or a
    callable taking and returning a field.
    """
    p = check_exponent(p)
    f = np.asarray(f, dtype=float)
    fp = lp_norm(space.mu, f, p) ** p
    if fp == 0:
        raise CZKitError("degenerate-input", "zero field")
    Tf = np.abs(_apply_tagged(space, op, f, s))
    best = 0.0
    for v in np.unique(Tf[Tf > 0]):
        # as a -> v from below, mu(|Tf| > a) -> mu(|Tf| >= v)
        best = max(best, v**p * float(space.mu[Tf >= v].sum()))
    return best / fp


def maximal_rearrangement_ratio(space, f, t_grid=None):
    """Range of ``(Mf)*(t) / f**(t)`` over a time grid inside ``(0, mu(M))``."""
    rf = rearrangements(space, f)
    rm = rearrangements(space, hl_maximal(space, f))
    if t_grid is None:
        edges = np.linspace(0, rf.support, 65)
        t_grid = 0.5 * (edges[1:] + edges[:-1]) if rf.support > 0 else np.array([])
    t_grid = np.asarray(t_grid, dtype=float)
    ff = rf.fstarstar(t_grid) if t_grid.size else np.array([])
    ok = ff > 0
    if not ok.any():
        return (math.nan, math.nan)
    ratio = rm.fstar(t_grid[ok]) / ff[ok]
    return float(ratio.min()), float(ratio.max())
