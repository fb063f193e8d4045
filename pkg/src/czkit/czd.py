"""Calderon-Zygmund decomposition of Sobolev functions and its verifier.

Pipeline: level set ``Omega = {S > alpha}`` of the combined maximal field
``S = M_q(|f| + |grad f|) + M_{A,q} f``, greedy Whitney covering of Omega,
tent partition of unity, bad parts ``b_i = (f - A_{Qbar_i} f) chi_i`` and
good part ``g = f - sum b_i``.  All bounds are measured on the discrete
objects themselves.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import gradient_modulus, lp_norm
from .errors import CZKitError
from .maximal import _is_homogeneous, collection_maximal, hl_maximal
from .semigroup import make_collection
from .space import doubling_profile, space_from_json

SCHEMA_VERSION = 1


def _inf_or(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _parse_exp(x):
    return math.inf if x == "inf" else float(x)


def combined_maximal(space, f, collection, q, mode="nonhomogeneous"):
    """``M_q(|f| + |grad f|) + M_{A,q} f``; homogeneous mode drops the ``|f|`` terms."""
    homogeneous = _is_homogeneous(mode)
    f = np.asarray(f, dtype=float)
    grad = gradient_modulus(space, f)
    base = grad if homogeneous else np.abs(f) + grad
    return hl_maximal(space, base, q) + collection_maximal(space, f, collection, q, mode)


def level_set(space, f, alpha, collection, q, mode="nonhomogeneous", S=None):
    """``Omega = {x : S(x) > alpha}`` as a boolean mask."""
    if not alpha > 0:
        raise CZKitError("degenerate-threshold", "alpha must be positive")
    if S is None:
        S = combined_maximal(space, f, collection, q, mode)
    return S > alpha


def minimal_alpha(S):
    """Thresholds ``alpha < min S`` make Omega the whole space and are rejected."""
    return float(np.min(S))


# --- Whitney covering -------------------------------------------------------

@dataclass
class WhitneyDecomposition:
    """Whitney balls of Omega.

    Ball ``i`` has center ``centers[i]`` at distance ``dist_F[i]`` from F.
    Radii: core ``dist_F / (2 C1)``, ``Q_i`` ``dist_F / 2`` and
    ``Qbar_i`` ``C2 dist_F / C1``.
    """

    omega: np.ndarray
    centers: np.ndarray
    dist_F: np.ndarray
    C1: float = 2.0
    C2: float = 8.0
    fallback: int = 0

    def __len__(self):
        return len(self.centers)

    @property
    def radii(self):
        return self.dist_F / 2

    @property
    def core_radii(self):
        return self.dist_F / (2 * self.C1)

    @property
    def outer_radii(self):
        return self.C2 * self.dist_F / self.C1

    def masks(self, space, which="Q"):
        rad = {"Q": self.radii, "core": self.core_radii, "outer": self.outer_radii}[which]
        if len(self) == 0:
            return np.zeros((0, space.n), dtype=bool)
        return space.dist[self.centers] < rad[:, None]

    def overlap(self, space):
        m = self.masks(space)
        return int(m.sum(axis=0).max()) if len(self) else 0


def overlap_bound(space, C1=2.0, doubling_constant=None):
    """Overlap bound depending only on the space and ``C1``.

    Every ``Q_i`` through ``x`` has ``dist_F`` within a factor 3 of
    ``d(x, F)``, and the disjoint cores fill a ball around ``x``.  Doubling
    then gives ``N <= C^ceil(log2(6 C1 + 3))``.
    """
    if doubling_constant is None:
        doubling_constant = doubling_profile(space).constant
    return int(math.floor(doubling_constant ** math.ceil(math.log2(6 * C1 + 3)) + 1e-9))


def whitney(space, omega, C1=2.0, C2=8.0):
    """Greedy Whitney covering of ``omega`` (boolean mask).

    Nodes are scanned by decreasing ``d(x, F)`` with node index breaking
    ties; ``x`` becomes a center when its core ball misses all accepted
    cores.  For ``C1 >= 2`` this covers Omega; a densifying pass over any
    uncovered node is kept as a safeguard and counted in ``fallback``.
    """
    omega = np.asarray(omega, dtype=bool)
    if not omega.any():
        raise CZKitError("empty-omega", "Omega is empty")
    if omega.all():
        raise CZKitError("threshold-too-small", "Omega is the whole space")
    if C1 < 1 or C2 < C1:
        raise CZKitError("invalid-spec", "need 1 <= C1 <= C2")
    dF = space.distance_to_set(~omega)
    nodes = np.flatnonzero(omega)
    order = nodes[np.lexsort((nodes, -dF[nodes]))]
    cores = np.zeros(space.n, dtype=int)  # how many accepted cores contain a node
    centers = []
    for x in order:
        core = space.dist[x] < dF[x] / (2 * C1)
        if (cores[core] > 0).any():
            continue
        centers.append(int(x))
        cores[core] += 1
    centers = np.array(centers, dtype=int)
    covered = (space.dist[centers] < (dF[centers] / 2)[:, None]).any(axis=0)
    fallback = 0
    for x in order:
        if not covered[x]:
            centers = np.r_[centers, x]
            covered |= space.dist[x] < dF[x] / 2
            fallback += 1
    return WhitneyDecomposition(omega, centers, dF[centers].astype(float), float(C1), float(C2), fallback)


def whitney_checks(space, wd, N_bound=None):
    """Invariant checks of a Whitney covering as ``{name: (passed, value)}``."""
    out = {}
    if len(wd) == 0:
        return {"cover": (not wd.omega.any(), 0)}
    Q = wd.masks(space)
    core = wd.masks(space, "core")
    out["cover"] = (bool(np.array_equal(Q.any(axis=0), wd.omega)), int((Q.any(axis=0) != wd.omega).sum()))
    core_over = int(core.sum(axis=0).max())
    out["cores_disjoint"] = (core_over <= 1 or wd.fallback > 0, core_over)
    F = ~wd.omega
    c2 = space.dist[wd.centers] < (wd.C2 * wd.core_radii)[:, None]
    out["C2_meets_F"] = (bool((c2 & F).any(axis=1).all()), int((~(c2 & F).any(axis=1)).sum()))
    inter = (Q.astype(int) @ Q.T.astype(int)) > 0
    ri = wd.radii
    ratio = np.where(inter, ri[None, :] / ri[:, None], 1.0)
    worst = float(ratio.max())
    out["radius_comparability"] = (worst <= 3 + 1e-12, worst)
    N = wd.overlap(space)
    out["overlap"] = (N_bound is None or N <= N_bound, N)
    return out


# --- partition of unity ------------------------------------------------------

@dataclass
class PartitionOfUnity:
    chi: np.ndarray  # (k, n)
    kappa: float

    def to_dict(self):
        return {"kappa": self.kappa}


def partition_of_unity(space, wd):
    """Normalized tents ``chi_i = phi_i / sum_j phi_j`` with ``phi_i = (1 - d(., x_i)/R_i)_+``."""
    if len(wd) == 0:
        return PartitionOfUnity(np.zeros((0, space.n)), 0.0)
    R = wd.radii[:, None]
    phi = np.maximum(0.0, 1.0 - space.dist[wd.centers] / R)
    phi[:, ~wd.omega] = 0.0
    tot = phi.sum(axis=0)
    if np.any(tot[wd.omega] <= 0):
        raise CZKitError("coverage-gap", "a node of Omega is outside every Whitney ball",
                         nodes=np.flatnonzero(wd.omega & (tot <= 0)).tolist())
    chi = np.divide(phi, tot, out=np.zeros_like(phi), where=tot > 0)
    return PartitionOfUnity(chi, lipschitz_kappa(space, chi, wd.radii))


def lipschitz_kappa(space, chi, radii):
    """``max_i r_i * max_edge |chi_i(u) - chi_i(v)| / length``."""
    if len(chi) == 0:
        return 0.0
    slope = np.abs(chi[:, space.edge_u] - chi[:, space.edge_v]) / space.length
    return float((slope.max(axis=1) * radii).max())


# --- decomposition -------------------------------------------------------------

@dataclass
class CZDecomposition:
    space: object
    f: np.ndarray
    alpha: float
    p: float
    q: float
    r: float
    kind: str
    mode: str
    whitney: WhitneyDecomposition
    pou: PartitionOfUnity
    averages: np.ndarray  # A_{Qbar_i} f, shape (k, n)
    bad: np.ndarray  # (k, n)
    good: np.ndarray
    N_bound: int
    constants: dict = field(default_factory=dict)

    @property
    def homogeneous(self):
        return self.mode == "homogeneous"

    @property
    def omega(self):
        return self.whitney.omega

    def to_dict(self):
        sp = self.space
        wd = self.whitney
        balls = []
        for i in range(len(wd)):
            balls.append({
                "center": str(sp.ids[wd.centers[i]]),
                "dist_F": float(wd.dist_F[i]),
                "core_radius": float(wd.core_radii[i]),
                "radius": float(wd.radii[i]),
                "outer_radius": float(wd.outer_radii[i]),
                "measure": float(sp.mu[wd.masks(sp)[i]].sum()),
            })
        return {
            "schema_version": SCHEMA_VERSION,
            "input": {"alpha": self.alpha, "p": _inf_or(self.p), "q": _inf_or(self.q), "r": _inf_or(self.r),
                      "collection": self.kind, "mode": self.mode, "C1": wd.C1, "C2": wd.C2},
            "space": sp.to_json(),
            "omega": [str(sp.ids[x]) for x in np.flatnonzero(wd.omega)],
            "balls": balls,
            "whitney_fallback": wd.fallback,
            "N_bound": self.N_bound,
            "kappa": self.pou.kappa,
            "constants": {k: _inf_or(v) for k, v in self.constants.items()},
            "fields": {
                "f": self.f.tolist(),
                "g": self.good.tolist(),
                "chi": self.pou.chi.tolist(),
                "averages": self.averages.tolist(),
                "b": self.bad.tolist(),
            },
        }


def _check_exponents(p, q, r):
    if not (1 <= q <= p < r):
        raise CZKitError("invalid-exponents", f"need 1 <= q <= p < r, got q={q}, p={p}, r={r}")


def cz_decompose(space, f, alpha, p, q, r, collection="mean", mode="nonhomogeneous", C1=2.0, C2=8.0,
                 S=None, N_bound=None):
    """Calderon-Zygmund decomposition ``f = g + sum_i b_i`` at level ``alpha``.

    Parameters
    ----------
    space : MetricMeasureSpace
    f : array_like
    alpha : float
        Threshold; must exceed ``min S`` so that Omega is a proper subset.
    p, q, r : float
        Exponents with ``q <= p < r`` (``r`` may be inf).
    collection : {"mean", "heat"} or OperatorCollection
    mode : {"nonhomogeneous", "homogeneous"}
    S : ndarray, optional
        Precomputed :func:`combined_maximal`, reused across an alpha sweep.
    N_bound : int, optional
        Precomputed :func:`overlap_bound`.

    Returns
    -------
    CZDecomposition
    """
    p, q, r = float(p), float(q), float(r)
    _check_exponents(p, q, r)
    if isinstance(collection, str):
        collection = make_collection(space, collection)
    _is_homogeneous(mode)
    f = np.asarray(f, dtype=float)
    if S is None:
        S = combined_maximal(space, f, collection, q, mode)
    omega = level_set(space, f, alpha, collection, q, mode, S)
    if N_bound is None:
        N_bound = overlap_bound(space, C1)
    if omega.all():
        amin = minimal_alpha(S)
        raise CZKitError("threshold-too-small",
                         f"alpha={alpha:g} makes Omega the whole space; the minimal admissible alpha is {amin:.12g}",
                         min_alpha=amin)
    if omega.any():
        wd = whitney(space, omega, C1, C2)
    else:
        wd = WhitneyDecomposition(omega, np.zeros(0, dtype=int), np.zeros(0), float(C1), float(C2))
    pou = partition_of_unity(space, wd)
    avgs = np.array([collection.apply(f, int(x), float(R)) for x, R in zip(wd.centers, wd.outer_radii)])
    avgs = avgs.reshape(len(wd), space.n)
    bad = (f[None, :] - avgs) * pou.chi
    good = f - bad.sum(axis=0)
    dec = CZDecomposition(space, f, float(alpha), p, q, r, collection.kind, mode, wd, pou, avgs, bad, good, N_bound)
    dec.constants = measure_constants(dec)
    return dec


def _wnorm(space, h, s, homogeneous, mask=None, grad=None):
    """``||h||_s + ||grad h||_s`` with the global gradient, optionally restricted to a mask."""
    if grad is None:
        grad = gradient_modulus(space, h)
    gpart = lp_norm(space.mu, grad, s, mask)
    return gpart if homogeneous else gpart + lp_norm(space.mu, h, s, mask)


def measure_constants(dec):
    """Measured constants of the good, bad, budget and level-set bounds."""
    sp, f, a, p, q, r = dec.space, dec.f, dec.alpha, dec.p, dec.q, dec.r
    hom = dec.homogeneous
    wd = dec.whitney
    grad_f = gradient_modulus(sp, f)
    base = grad_f if hom else np.abs(f) + grad_f
    budget = float(np.sum(sp.mu * base**p))
    out = {}
    Q = wd.masks(sp)
    muQ = Q.astype(float) @ sp.mu if len(wd) else np.zeros(0)
    sum_mu = float(muQ.sum())
    union = Q.any(axis=0) if len(wd) else np.zeros(sp.n, dtype=bool)
    mu_union = float(sp.mu[union].sum())
    out["sum_mu_Qi"] = sum_mu
    out["mu_union_Qi"] = mu_union
    out["n_balls"] = len(wd)
    out["overlap"] = wd.overlap(sp)
    out["N"] = dec.N_bound
    out["c_omega"] = sum_mu * a**p / budget if budget > 0 else 0.0
    # bad parts
    cb = 0.0
    for i in range(len(wd)):
        nb = _wnorm(sp, dec.bad[i], q, hom)
        cb = max(cb, nb / (a * muQ[i] ** (1 / q)))
    out["c_b"] = cb
    # good part, global
    g = dec.good
    grad_g = gradient_modulus(sp, g)
    fnorm = _wnorm(sp, f, p, hom, grad=grad_f)
    gnorm = _wnorm(sp, g, r, hom, grad=grad_g)
    theta = 0.0 if math.isinf(r) else p / r
    den = fnorm**theta * a ** (1 - theta)
    out["c_g"] = gnorm / den if den > 0 else (0.0 if gnorm == 0 else math.inf)
    # good part on the union of the Q_i
    if union.any():
        if math.isinf(r):
            gl = grad_g if hom else np.maximum(np.abs(g), grad_g)
            val = float(gl[union].max())
            out["c_g_omega"] = val / a
            out["c_g_omega_sum"] = val / a
        else:
            integ = np.sum(sp.mu[union] * (grad_g[union] ** r + (0 if hom else np.abs(g[union]) ** r)))
            out["c_g_omega"] = float((integ / mu_union) ** (1 / r) / a)
            out["c_g_omega_sum"] = float((integ / sum_mu) ** (1 / r) / a)
    else:
        out["c_g_omega"] = 0.0
        out["c_g_omega_sum"] = 0.0
    F = ~wd.omega
    out["F_sup_over_alpha"] = float(base[F].max() / a) if F.any() else 0.0
    out["residual"] = float(np.abs(f - g - dec.bad.sum(axis=0)).max())
    return out


# --- verification --------------------------------------------------------------

@dataclass
class VerificationReport:
    checks: dict

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    @property
    def failures(self):
        return sorted(k for k, c in self.checks.items() if not c["passed"])

    def to_dict(self):
        return {"passed": self.passed, "failures": self.failures,
                "checks": {k: {kk: _inf_or(vv) for kk, vv in v.items()} for k, v in sorted(self.checks.items())}}


def verify_cz(dec, tol=1e-10):
    """Check every conclusion of the decomposition on the stored discrete objects.

    Nothing is trusted from construction: Whitney invariants, the partition
    of unity, the definition of each ``b_i``, supports, reconstruction, the
    level-set bound on F and finiteness of the measured constants are all
    recomputed.
    """
    sp = dec.space
    wd = dec.whitney
    f, g, b, chi = dec.f, dec.good, dec.bad, dec.pou.chi
    checks = {}
    scale = max(float(np.abs(f).max()), 1e-300)

    def add(name, passed, value, bound=None):
        checks[name] = {"passed": bool(passed), "value": value, "bound": bound}

    res = float(np.abs(f - g - b.sum(axis=0)).max()) if b.size else float(np.abs(f - g).max())
    add("reconstruction", res <= tol * scale, res, tol * scale)

    Q = wd.masks(sp)
    leak = int(np.count_nonzero(b[~Q])) if len(wd) else 0
    add("support", leak == 0, leak, 0)
    chi_leak = int(np.count_nonzero(chi[~Q])) if len(wd) else 0
    add("chi_support", chi_leak == 0, chi_leak, 0)

    total = chi.sum(axis=0) if len(wd) else np.zeros(sp.n)
    target = wd.omega.astype(float)
    dev = float(np.abs(total - target).max())
    add("chi_partition", dev <= 1e-12 and chi.min(initial=0) >= 0 and chi.max(initial=0) <= 1 + 1e-12, dev, 1e-12)
    kappa = lipschitz_kappa(sp, chi, wd.radii)
    add("chi_lipschitz", math.isfinite(kappa), kappa)

    if len(wd):
        expect = (f[None, :] - dec.averages) * chi
        dev_b = float(np.abs(expect - b).max())
    else:
        dev_b = 0.0
    add("bad_definition", dev_b <= tol * scale, dev_b, tol * scale)

    for name, (ok, val) in whitney_checks(sp, wd, dec.N_bound).items():
        add("whitney_" + name, ok, val)

    grad_f = gradient_modulus(sp, f)
    base = grad_f if dec.homogeneous else np.abs(f) + grad_f
    F = ~wd.omega
    fsup = float(base[F].max()) if F.any() else 0.0
    add("F_bound", fsup <= dec.alpha * (1 + 1e-12), fsup, dec.alpha)

    c = measure_constants(dec)
    for key in ("c_b", "c_g", "c_g_omega", "c_omega"):
        add(key, math.isfinite(c[key]), c[key])
    add("overlap_N", c["overlap"] <= dec.N_bound, c["overlap"], dec.N_bound)
    return VerificationReport(checks)


# --- sweeps and serialization -------------------------------------------------

def alpha_sweep(space, f, alphas, p, q, r, collection="mean", mode="nonhomogeneous", C1=2.0, C2=8.0):
    """Decompose at each alpha, sharing the combined maximal field.

    Returns ``(rows, S)`` where each row holds the measured constants plus
    ``alpha`` and the verifier verdict.  Alphas below ``min S`` raise.
    """
    if isinstance(collection, str):
        collection = make_collection(space, collection)
    f = np.asarray(f, dtype=float)
    S = combined_maximal(space, f, collection, q, mode)
    N = overlap_bound(space, C1)
    rows = []
    for a in alphas:
        dec = cz_decompose(space, f, a, p, q, r, collection, mode, C1, C2, S=S, N_bound=N)
        row = {"alpha": float(a), **dec.constants, "verified": verify_cz(dec).passed}
        rows.append(row)
    return rows, S


def budget_fit(rows):
    """Log-log fit of ``sum_mu_Qi`` against alpha over rows with nonempty Omega.

    Returns ``(slope, c_omega_spread)`` where the spread is ``max / min`` of
    the measured ``c_omega``.
    """
    pts = [(r["alpha"], r["sum_mu_Qi"], r["c_omega"]) for r in rows if r["sum_mu_Qi"] > 0]
    if len(pts) < 2:
        return math.nan, math.nan
    a, m, c = map(np.array, zip(*pts))
    slope = float(np.polyfit(np.log(a), np.log(m), 1)[0])
    return slope, float(c.max() / c.min())


def dump_decomposition(dec, path):
    from .io import atomic_write_text

    atomic_write_text(path, json.dumps(dec.to_dict(), indent=1, sort_keys=True))


def load_decomposition(obj):
    """Rebuild a :class:`CZDecomposition` from its JSON form (dict or path)."""
    if not isinstance(obj, dict):
        with open(obj) as fh:
            obj = json.load(fh)
    if "decomposition" in obj.get("results", {}):  # a full czd run report
        obj = obj["results"]["decomposition"]
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise CZKitError("schema-mismatch", f"decomposition schema {obj.get('schema_version')} != {SCHEMA_VERSION}")
    sp = space_from_json(obj["space"])
    inp = obj["input"]
    index = {str(v): i for i, v in enumerate(sp.ids)}
    omega = np.zeros(sp.n, dtype=bool)
    omega[[index[x] for x in obj["omega"]]] = True
    centers = np.array([index[b["center"]] for b in obj["balls"]], dtype=int)
    dF = np.array([b["dist_F"] for b in obj["balls"]], dtype=float)
    wd = WhitneyDecomposition(omega, centers, dF, inp["C1"], inp["C2"], obj.get("whitney_fallback", 0))
    fl = obj["fields"]
    k = len(centers)
    chi = np.array(fl["chi"], dtype=float).reshape(k, sp.n)
    pou = PartitionOfUnity(chi, float(obj.get("kappa", 0.0)))
    dec = CZDecomposition(
        sp, np.array(fl["f"], dtype=float), float(inp["alpha"]), _parse_exp(inp["p"]), _parse_exp(inp["q"]),
        _parse_exp(inp["r"]), inp["collection"], inp["mode"], wd, pou,
        np.array(fl["averages"], dtype=float).reshape(k, sp.n), np.array(fl["b"], dtype=float).reshape(k, sp.n),
        np.array(fl["g"], dtype=float), int(obj["N_bound"]),
    )
    dec.constants = {key: _parse_exp(v) if v == "inf" else v for key, v in obj.get("constants", {}).items()}
    return dec
