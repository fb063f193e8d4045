"""Empirical constants of Poincare-type inequalities and off-diagonal estimates.

Constants are suprema of ratios over balls and a probe family, so they
are lower bounds of the true extremal constants.  The classical ``q = 2``
inequality is the exception: a generalized eigenproblem on each ball
gives the exact ball-wise constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .calculus import gradient_modulus, lp_norm
from .errors import CZKitError
from .maximal import collection_ball_values, hl_maximal, local_sobolev_norms
from .semigroup import heat_apply, spectral_decompose
from .space import doubling_profile


@dataclass
class ConstantReport:
    """Best constant of one inequality and the data that produced it."""

    tag: str
    q: float
    r: float | None
    constant: float
    witness: dict
    probes: str
    exact: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "tag": self.tag,
            "q": self.q,
            "r": self.r,
            "constant": self.constant,
            "witness": self.witness,
            "probes": self.probes,
            "exact": self.exact,
            **self.extra,
        }


# --- probes -----------------------------------------------------------------

def probe_family(space, seed=0, n_eigen=8, n_pivot=4, n_random=8, n_smooth=4):
    """Deterministic probe fields as the columns of an ``(n, k)`` array.

    Laplacian eigenvectors, distances to pivot nodes, seeded Gaussian
    fields and heat-smoothed indicators.  Returns ``(fields, descriptor)``.
    """
    rng = np.random.default_rng(seed)
    n = space.n
    cols = []
    spec = spectral_decompose(space)
    cols.extend(spec.eigenvectors[:, k] for k in range(1, min(n_eigen + 1, n)))
    pivots = [0]
    while len(pivots) < min(n_pivot, n):
        pivots.append(int(np.argmax(space.dist[pivots].min(axis=0))))
    cols.extend(space.dist[p] for p in pivots)
    cols.extend(rng.standard_normal(n) for _ in range(n_random))
    for x in rng.choice(n, size=min(n_smooth, n), replace=False):
        e = np.zeros(n)
        e[x] = 1.0
        cols.append(heat_apply(space, e, 1.0))
    fields = np.column_stack(cols) if cols else np.zeros((n, 0))
    descriptor = f"eigen{n_eigen}+pivot{n_pivot}+gauss{n_random}(seed={seed})+smooth{n_smooth}"
    return fields, descriptor


def _probes(space, probes, seed):
    if probes is None:
        return probe_family(space, seed=seed)
    arr = np.asarray(probes, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] != space.n:
        arr = arr.T
    return arr, f"user({arr.shape[1]})"


def _nonconstant(space, fields):
    spread = np.ptp(fields, axis=0)
    scale = np.maximum(np.abs(fields).max(axis=0), 1.0)
    keep = spread > 1e-12 * scale
    if not keep.any():
        raise CZKitError("degenerate-probes", "all probes are constant")
    return keep


def _avg_q(mu, g, mask, q):
    g = np.abs(g)[mask]
    if math.isinf(q):
        return float(g.max())
    w = mu[mask]
    return float((np.sum(w * g**q) / np.sum(w)) ** (1 / q))


def dilation_grid(space, center, radius):
    """``s = 1, 2, 4, ...`` until ``sQ`` is the whole space."""
    ecc = space.dist[center].max()
    s, out = 1.0, [1.0]
    while s * radius <= ecc:
        s *= 2
        out.append(s)
    return out


def sup_dilated_average(space, g, center, radius, q):
    """``sup_{s >= 1} (avg_{sQ} |g|^q)^(1/q)`` over the doubling dilation grid."""
    return max(_avg_q(space.mu, g, space.ball_mask(center, s * radius), q)
               for s in dilation_grid(space, center, radius))


def _interior_stiffness(space, mask):
    idx = np.flatnonzero(mask)
    pos = -np.ones(space.n, dtype=int)
    pos[idx] = np.arange(len(idx))
    keep = mask[space.edge_u] & mask[space.edge_v]
    u, v, w = pos[space.edge_u[keep]], pos[space.edge_v[keep]], space.edge_weight[keep]
    K = np.zeros((len(idx), len(idx)))
    np.add.at(K, (u, u), w)
    np.add.at(K, (v, v), w)
    np.add.at(K, (u, v), -w)
    np.add.at(K, (v, u), -w)
    return idx, K


def _ratio(num, den, f):
    """``num / den`` with oscillation at round-off level counted as zero."""
    if num <= 1e-12 * max(float(np.abs(f).max()), 1e-300):
        return 0.0
    return num / den if den > 0 else math.inf


def classical_ratio(space, f, center, radius, q):
    """``(avg_Q |f - f_Q|^q)^(1/q) / (r (avg_Q |grad_Q f|^q)^(1/q))`` with interior gradient."""
    mask = space.ball_mask(center, radius)
    f = np.asarray(f, dtype=float)
    fq = np.sum(space.mu[mask] * f[mask]) / np.sum(space.mu[mask])
    num = _avg_q(space.mu, f - fq, mask, q)
    grad = gradient_modulus(space, f, mask)
    den = radius * _avg_q(space.mu, grad, mask, q)
    return _ratio(num, den, f)


def _classical_exact_q2(space, fam, idx):
    """Per ball: ``C_Q = 1 / (r sqrt(lambda_1))`` of the interior pencil ``(K_Q, M_Q)``."""
    best = (0.0, None, None)
    per_ball = {}
    for b in idx:
        mask = fam.masks[b]
        if mask.sum() < 2:
            continue
        nodes, K = _interior_stiffness(space, mask)
        lam, vec = linalg.eigh(K, np.diag(space.mu[nodes]))
        lam1 = lam[1]
        c = 1.0 / (fam.radii[b] * math.sqrt(lam1)) if lam1 > 0 else math.inf
        per_ball[int(b)] = c
        if c > best[0]:
            f = np.zeros(space.n)
            f[nodes] = vec[:, 1]
            best = (c, int(b), f)
    return best, per_ball


def pseudo_ratio(space, f, center, radius, q, heat_f=None):
    """Pseudo-Poincare ratio with ``exp(-r^2 Lap)`` and gradient-only right side."""
    mask = space.ball_mask(center, radius)
    hf = heat_apply(space, f, radius**2) if heat_f is None else heat_f
    num = _avg_q(space.mu, f - hf, mask, q)
    den = radius * sup_dilated_average(space, gradient_modulus(space, f), center, radius, q)
    return _ratio(num, den, f)


def relative_ratio(space, f, collection, center, radius, q, homogeneous=False):
    """Poincare ratio relative to a collection: ``A_Q f`` replaces ``f_Q``."""
    mask = space.ball_mask(center, radius)
    num = _avg_q(space.mu, f - collection.apply(f, center, radius), mask, q)
    grad = gradient_modulus(space, f)
    g = grad if homogeneous else np.abs(f) + grad
    den = radius * sup_dilated_average(space, g, center, radius, q)
    return _ratio(num, den, f)


def global_pseudo_ratio(space, f, t, q):
    num = lp_norm(space.mu, f - heat_apply(space, f, t), q)
    den = math.sqrt(t) * lp_norm(space.mu, gradient_modulus(space, f), q)
    return _ratio(num, den, f)


def _pseudo_eigen_probes(space, center, radius, rows=None):
    """Top generalized eigenvectors of the ``q = 2`` pseudo-Poincare pencil on one ball.

    The right side ``max_s`` is replaced by the whole-space average and by
    the mean over dilations; both give valid lower bounds on the max, so the
    eigenvectors are strong probes for the true ratio.
    """
    spec = spectral_decompose(space)
    phi = spec.eigenvectors[:, 1:]  # complement of constants
    lam = spec.eigenvalues[1:]
    n = space.n
    mask = space.ball_mask(center, radius)
    muQ = space.mu[mask].sum()
    # (I - H) phi_k = (1 - e^{-r^2 lam_k}) phi_k
    osc = phi * (1.0 - np.exp(-radius**2 * lam))
    P = osc[mask].T @ (space.mu[mask, None] * osc[mask]) / muQ
    u, v, w = space.edge_u, space.edge_v, space.edge_weight
    dphi = phi[u] - phi[v]
    forms = []
    for s in dilation_grid(space, center, radius):
        sm = space.ball_mask(center, s * radius)
        ew = 0.5 * w * (sm[u].astype(float) + sm[v])
        forms.append(dphi.T @ (ew[:, None] * dphi) / space.mu[sm].sum())
    out = []
    for D in (forms[-1], sum(forms) / len(forms)):
        D = 0.5 * (D + D.T) + 1e-14 * np.trace(D) / max(len(D), 1) * np.eye(len(D))
        try:
            _, vec = linalg.eigh(0.5 * (P + P.T), D, subset_by_index=[len(D) - 1, len(D) - 1])
        except linalg.LinAlgError:
            continue
        out.append(phi @ vec[:, 0])
    return out


def poincare_constant(space, q, kind="classical", probes=None, collection=None, t_grid=None,
                      mode="nonhomogeneous", seed=0, eigen_probes=True):
    """Best constant of a Poincare-type inequality.

    Parameters
    ----------
    space : MetricMeasureSpace
    q : float
        Exponent, ``1 <= q < inf``.
    kind : {"classical", "relative", "pseudo", "global_pseudo"}
        ``classical``: ``f_Q`` and interior gradient on Q.
        ``relative``: ``A_Q f`` from ``collection``; right side is
        ``r sup_s (avg_sQ (|f| + |grad f|)^q)^(1/q)`` (gradient only in
        homogeneous mode).
        ``pseudo``: ``exp(-r^2 Lap) f`` and gradient-only right side.
        ``global_pseudo``: ``||f - exp(-t Lap) f||_q / (sqrt(t) ||grad f||_q)``
        over ``t_grid``.
    probes : array_like, optional
        Probe fields as columns; defaults to :func:`probe_family`.
    eigen_probes : bool
        Add per-ball eigenvector probes (classical ``q != 2`` and pseudo
        ``q = 2``).

    Returns
    -------
    ConstantReport
    """
    q = float(q)
    if not 1 <= q < math.inf:
        raise CZKitError("invalid-exponent", "q must lie in [1, inf)")
    fields, desc = _probes(space, probes, seed)
    keep = _nonconstant(space, fields)
    fields = fields[:, keep]
    fam = space.balls

    if kind == "global_pseudo":
        if t_grid is None:
            t_grid = default_t_grid(space)
        best = (0.0, None, None)
        for t in t_grid:
            for j in range(fields.shape[1]):
                c = global_pseudo_ratio(space, fields[:, j], t, q)
                if c > best[0]:
                    best = (c, float(t), j)
        return ConstantReport("global_pseudo", q, None, best[0],
                              {"t": best[1], "probe": best[2]}, desc, False)

    if kind == "classical":
        idx = fam.unique_index
        best = (0.0, None, None)
        exact = False
        if q == 2:
            (c, b, f), _ = _classical_exact_q2(space, fam, idx)
            best = (c, b, f)
            exact = True
        else:
            for b in idx:
                if fam.masks[b].sum() < 2:
                    continue
                cand = [fields[:, j] for j in range(fields.shape[1])]
                if eigen_probes:
                    cand.append(_classical_exact_q2(space, fam, [b])[0][2])
                for f in cand:
                    if f is None:
                        continue
                    c = classical_ratio(space, f, fam.centers[b], fam.radii[b], q)
                    if c > best[0]:
                        best = (c, int(b), f)
        c, b, f = best
        witness = {"center": int(fam.centers[b]), "radius": float(fam.radii[b]),
                   "field": None if f is None else f.tolist()} if b is not None else {}
        return ConstantReport("classical", q, None, c, witness, desc if not exact else "generalized-eigen", exact)

    if kind == "pseudo":
        best = (0.0, None, None)
        idx = np.arange(len(fam))
        for rho in np.unique(fam.radii):
            heat = heat_apply(space, fields, rho**2)
            for b in idx[fam.radii == rho]:
                x = int(fam.centers[b])
                for j in range(fields.shape[1]):
                    c = pseudo_ratio(space, fields[:, j], x, rho, q, heat[:, j])
                    if c > best[0]:
                        best = (c, int(b), fields[:, j])
                if eigen_probes and q == 2:
                    for f in _pseudo_eigen_probes(space, x, rho):
                        c = pseudo_ratio(space, f, x, rho, q)
                        if c > best[0]:
                            best = (c, int(b), f)
        c, b, f = best
        witness = {"center": int(fam.centers[b]), "radius": float(fam.radii[b]), "field": f.tolist()} if b is not None else {}
        return ConstantReport("pseudo", q, None, c, witness, desc + ("+ball-eigen" if eigen_probes and q == 2 else ""))

    if kind == "relative":
        if collection is None:
            raise CZKitError("invalid-spec", "relative kind needs a collection")
        homogeneous = mode == "homogeneous"
        best = (0.0, None, None)
        for b in range(len(fam)):
            for j in range(fields.shape[1]):
                c = relative_ratio(space, fields[:, j], collection, int(fam.centers[b]), float(fam.radii[b]), q, homogeneous)
                if c > best[0]:
                    best = (c, b, j)
        c, b, j = best
        witness = {"center": int(fam.centers[b]), "radius": float(fam.radii[b]), "probe": j} if b is not None else {}
        return ConstantReport(f"relative[{collection.kind}]", q, None, c, witness, desc, extra={"mode": mode})

    raise CZKitError("invalid-spec", f"unknown Poincare kind {kind!r}")


def default_t_grid(space, num=9):
    """Geometric time grid from a quarter of the shortest edge squared to the diameter squared."""
    lo = 0.25 * float(space.length.min()) ** 2 if space.n_edges else 0.25
    hi = max(space.diameter, 1.0) ** 2
    return np.geomspace(lo, hi, num)


# --- off-diagonal estimates ----------------------------------------------------

def _combined(space, f, homogeneous):
    grad = gradient_modulus(space, f)
    return grad if homogeneous else np.abs(f) + grad


def offdiagonal_constants(space, collection, q, r, N_equiv=10, probes=None, mode="nonhomogeneous",
                          seed=0, max_pairs=20000):
    """Constants of the off-diagonal estimates (a), (b) and of the maximal domination.

    Returns a dict with keys ``"a"``, ``"b"`` and ``"MH"`` mapping to
    :class:`ConstantReport`.  Pair ``(Q, Q')`` is equivalent when
    ``Q ⊂ Q' ⊂ N Q`` as node sets.
    """
    q, r = float(q), float(r)
    if q > r:
        raise CZKitError("invalid-exponents", "off-diagonal estimates need q <= r")
    if q < 1:
        raise CZKitError("invalid-exponent", "q must be >= 1")
    homogeneous = mode == "homogeneous"
    fields, desc = _probes(space, probes, seed)
    fields = fields[:, _nonconstant(space, fields)]
    fam = space.balls
    B = len(fam)
    masks = fam.masks
    counts = masks.sum(axis=1)
    mi = masks.astype(np.int32)
    nmask = space.dist[fam.centers] < (N_equiv * fam.radii)[:, None]
    sub = (mi @ mi.T) == counts[:, None]  # Q_i ⊂ Q_j
    in_n = (mi @ nmask.T.astype(np.int32)).T == counts[None, :]  # Q_j ⊂ N Q_i
    ii, jj = np.nonzero(sub & in_n)
    off = ii != jj
    ii, jj = ii[off], jj[off]
    if len(ii) > max_pairs:
        sel = np.sort(np.random.default_rng(seed).choice(len(ii), max_pairs, replace=False))
        ii, jj = ii[sel], jj[sel]

    best_a = (0.0, None)
    best_b = (0.0, None)
    best_mh = (0.0, None)
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    for k in range(fields.shape[1]):
        f = fields[:, k]
        Mq = hl_maximal(space, _combined(space, f, homogeneous), q)
        # A_Q f for every ball, as full vectors grouped by radius
        if collection.kind == "mean":
            avg = (masks.astype(float) @ (space.mu * f)) / fam.measures
            Af = np.repeat(avg[:, None], space.n, axis=1)
        else:
            Af = np.empty((B, space.n))
            for rho in np.unique(fam.radii):
                Af[fam.radii == rho] = heat_apply(space, f, rho**2)
        if len(ii):
            diff = np.abs(Af[ii] - Af[jj])
            nm = nmask[ii]
            if math.isinf(r):
                num = np.where(nm, diff, 0.0).max(axis=1)
            else:
                num = (np.where(nm, diff**r, 0.0) @ space.mu) ** inv_r
            num = num * fam.measures[ii] ** (-inv_r)
            den = fam.radii[ii] * np.where(nm, Mq[None, :], np.inf).min(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(num == 0, 0.0, num / den)
            p = int(np.argmax(ratio))
            if ratio[p] > best_a[0]:
                best_a = (float(ratio[p]), {"Q": fam.ball(int(ii[p])).__dict__, "Q'": fam.ball(int(jj[p])).__dict__, "probe": k})

        vals = collection_ball_values(space, f, collection, r, homogeneous)
        inf_q = np.where(masks, Mq[None, :], np.inf).min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_b = np.where(vals == 0, 0.0, vals / inf_q)
        p = int(np.argmax(ratio_b))
        if ratio_b[p] > best_b[0]:
            best_b = (float(ratio_b[p]), {"Q": fam.ball(p).__dict__, "probe": k})

        Mar = np.where(masks, vals[:, None], 0.0).max(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_mh = np.where(Mar == 0, 0.0, Mar / Mq)
        p = int(np.argmax(ratio_mh))
        if ratio_mh[p] > best_mh[0]:
            best_mh = (float(ratio_mh[p]), {"x": p, "probe": k})

    extra = {"N": N_equiv, "mode": mode, "n_pairs": int(len(ii))}
    return {
        "a": ConstantReport("offdiag_a", q, r, best_a[0], best_a[1] or {}, desc, extra=extra),
        "b": ConstantReport("offdiag_b", q, r, best_b[0], best_b[1] or {}, desc, extra=extra),
        "MH": ConstantReport("MH", q, r, best_mh[0], best_mh[1] or {}, desc, extra=extra),
    }


# --- bounded covering ------------------------------------------------------------

@dataclass
class Covering:
    """Balls of radius ``sqrt(t)`` covering a ball ``Q`` and their overlap statistics."""

    centers: list
    radius: float
    covered: bool
    multiplicity: dict
    c_cov: float
    dim: float

    def to_dict(self):
        return {"centers": self.centers, "radius": self.radius, "covered": self.covered,
                "multiplicity": {str(k): v for k, v in self.multiplicity.items()},
                "C_cov": self.c_cov, "d": self.dim}


def bounded_covering(space, ball, t, s_grid=(1, 2, 4, 8), dim=None):
    """Cover ``ball`` by balls of radius ``sqrt(t)`` whose thirds are disjoint.

    Centers are picked greedily (ball center first, then node order) among
    nodes not yet covered, keeping the balls ``Q(x_j, sqrt(t)/3)`` pairwise
    disjoint.  For each ``s`` the largest number of dilated balls ``s Q_j``
    containing a point of ``s Q`` is recorded, and ``C_cov`` is the smallest
    constant with ``multiplicity(s) <= C_cov s^d``.
    """
    t = float(t)
    if not (0 < t <= ball.radius**2 * (1 + 1e-12)):
        raise CZKitError("invalid-scale", f"need 0 < t <= r_Q^2, got t={t}, r_Q={ball.radius}")
    rad = math.sqrt(t)
    rho = rad / 3
    Q = space.ball_mask(ball.center, ball.radius)
    order = [ball.center] + [int(x) for x in np.flatnonzero(Q) if x != ball.center]
    taken = np.zeros(space.n, dtype=bool)
    covered = np.zeros(space.n, dtype=bool)
    centers = []
    for x in order:
        if covered[x]:
            continue
        small = space.dist[x] < rho
        if (small & taken).any():
            continue
        centers.append(x)
        taken |= small
        covered |= space.dist[x] < rad
    ok = bool(np.all(covered[Q]))
    if dim is None:
        dim = doubling_profile(space).dim
    mult = {}
    for s in s_grid:
        sQ = space.ball_mask(ball.center, s * ball.radius)
        cnt = (space.dist[centers][:, sQ] < s * rad).sum(axis=0)
        mult[float(s)] = int(cnt.max()) if cnt.size else 0
    c_cov = max(m / float(s) ** dim for s, m in mult.items())
    return Covering(centers, rad, ok, mult, c_cov, dim)


def global_from_local(space, q, probes=None, t_grid=None, seed=0):
    """Check ``global <= N_1^(1/q) * local`` for the global pseudo-Poincare constant.

    For each ``t`` the whole space is covered with :func:`bounded_covering`
    by balls of radius ``sqrt(t)``; ``N_1`` is the largest number of
    covering balls through a point.  ``local`` is the largest ratio
    ``||f - e^{-t Lap} f||_{L^q(Q_j)} / (sqrt(t) ||grad f||_{L^q(Q_j)})``
    over covering balls.  Summing the local bounds over the cover gives the
    inequality exactly.
    """
    q = float(q)
    fields, desc = _probes(space, probes, seed)
    fields = fields[:, _nonconstant(space, fields)]
    if t_grid is None:
        t_grid = default_t_grid(space)
    dim = doubling_profile(space).dim
    grads = gradient_modulus(space, fields)
    glob, loc, n1 = 0.0, 0.0, 0
    per_t = []
    for t in t_grid:
        whole = max(space.diameter + 1.0, math.sqrt(t))
        from .space import Ball
        cov = bounded_covering(space, Ball(0, whole), t, s_grid=(1,), dim=dim)
        N1 = cov.multiplicity[1.0]
        osc = np.abs(fields - heat_apply(space, fields, t))
        g_t, l_t = 0.0, 0.0
        for j in range(fields.shape[1]):
            num = lp_norm(space.mu, osc[:, j], q)
            den = math.sqrt(t) * lp_norm(space.mu, grads[:, j], q)
            g_t = max(g_t, num / den if num > 0 else 0.0)
            for c in cov.centers:
                m = space.dist[c] < cov.radius
                ln = lp_norm(space.mu, osc[:, j], q, m)
                ld = math.sqrt(t) * lp_norm(space.mu, grads[:, j], q, m)
                if ln > 0:
                    l_t = max(l_t, ln / ld if ld > 0 else math.inf)
        per_t.append({"t": float(t), "global": g_t, "local": l_t, "N1": N1,
                      "holds": bool(g_t <= N1 ** (1 / q) * l_t * (1 + 1e-12))})
        glob, loc, n1 = max(glob, g_t), max(loc, l_t), max(n1, N1)
    return {
        "q": q,
        "global": glob,
        "local": loc,
        "N1": n1,
        "bound": n1 ** (1 / q) * loc,
        "holds": bool(glob <= n1 ** (1 / q) * loc * (1 + 1e-12)),
        "per_t": per_t,
        "probes": desc,
    }
