"""Spectral calculus of the graph Laplacian.

Heat semigroup, heat kernel, square root of the Laplacian, kernel bound
diagnostics (on-diagonal, Gaussian, Li-Yau, time derivative, gradient,
Gaffney), Riesz quotients and the ball-indexed operator collections.

Kernel convention: ``exp(-t Lap) f(x) = sum_y p_t(x, y) f(y) mu(y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .calculus import gradient_modulus, lp_norm
from .errors import CZKitError

DEFAULT_CAP = 4096


@dataclass
class SpectralDecomposition:
    """Eigenpairs of the Laplacian, eigenvectors orthonormal in ``L^2(mu)``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mu: np.ndarray

    def apply(self, func, f):
        """``func(Lap) f`` for a scalar function ``func`` of the eigenvalue."""
        f = np.asarray(f, dtype=float)
        phi = self.eigenvectors
        mf = self.mu * f if f.ndim == 1 else self.mu[:, None] * f
        coef = phi.T @ mf
        scale = func(self.eigenvalues)
        return phi @ (scale * coef if f.ndim == 1 else scale[:, None] * coef)

    def kernel(self, func):
        """Symmetric kernel ``k(x, y)`` of ``func(Lap)`` w.r.t. ``mu``."""
        phi = self.eigenvectors
        return (phi * func(self.eigenvalues)) @ phi.T


def spectral_decompose(space, cap=DEFAULT_CAP):
    """Full eigendecomposition of ``Lap = M^-1 L``, cached on the space."""
    cached = space.__dict__.get("_spectral")
    if cached is not None:
        return cached
    if space.n > cap:
        raise CZKitError("too-large", f"{space.n} nodes exceeds spectral cap {cap}")
    s = 1.0 / np.sqrt(space.mu)
    sym = space.stiffness.toarray() * s[:, None] * s[None, :]
    sym = 0.5 * (sym + sym.T)
    lam, U = linalg.eigh(sym)
    lam = np.maximum(lam, 0.0)
    lam[0] = 0.0
    phi = U * s[:, None]
    # fix the sign of the constant mode so it is positive
    if phi[:, 0].sum() < 0:
        phi[:, 0] *= -1
    for arr in (lam, phi):
        arr.setflags(write=False)
    spec = SpectralDecomposition(lam, phi, space.mu)
    space.__dict__["_spectral"] = spec
    return spec


def _check_time(t):
    t = float(t)
    if not t >= 0:
        raise CZKitError("invalid-time", f"t = {t} < 0")
    return t


def heat_apply(space, f, t):
    """``exp(-t Lap) f`` by spectral calculus."""
    t = _check_time(t)
    if t == 0:
        return np.array(f, dtype=float)
    return spectral_decompose(space).apply(lambda lam: np.exp(-t * lam), f)


def heat_kernel(space, t):
    """Matrix ``p_t(x, y)``; symmetric, rows integrate to 1 against ``mu``."""
    t = _check_time(t)
    if t == 0:
        return np.diag(1.0 / space.mu)
    return spectral_decompose(space).kernel(lambda lam: np.exp(-t * lam))


def heat_kernel_dt(space, t):
    """``d/dt p_t(x, y) = -sum_k lam_k exp(-lam_k t) phi_k(x) phi_k(y)``."""
    t = _check_time(t)
    return spectral_decompose(space).kernel(lambda lam: -lam * np.exp(-t * lam))


def sqrt_laplacian_apply(space, f):
    """``Lap^(1/2) f``."""
    return spectral_decompose(space).apply(np.sqrt, f)


# --- operator collections -------------------------------------------------

class OperatorCollection:
    """Ball-indexed family ``A_Q`` of linear operators.

    ``kind="mean"``: ``A_Q f`` is the constant ``f_Q`` (average over Q),
    extended as that constant to the whole space.
    ``kind="heat"``: ``A_Q f = exp(-r_Q^2 Lap) f``.
    """

    def __init__(self, space, kind):
        if kind not in ("mean", "heat"):
            raise CZKitError("invalid-spec", f"unknown collection kind {kind!r}")
        self.space = space
        self.kind = kind
        if kind == "heat":
            spectral_decompose(space)

    def __repr__(self):
        return f"OperatorCollection({self.kind!r})"

    def apply(self, f, center, radius):
        space = self.space
        f = np.asarray(f, dtype=float)
        if self.kind == "mean":
            mask = space.ball_mask(center, radius)
            avg = np.sum(space.mu[mask] * f[mask]) / np.sum(space.mu[mask])
            return np.full(space.n, avg)
        return heat_apply(space, f, radius**2)

    def apply_ball(self, f, ball):
        return self.apply(f, ball.center, ball.radius)

    def __call__(self, f, ball):
        return self.apply(f, ball.center, ball.radius)


def make_collection(space, kind):
    """Mean-value or heat collection over all balls of ``space``."""
    return OperatorCollection(space, kind)


# --- kernel bounds --------------------------------------------------------

@dataclass
class KernelCheck:
    """Best constant of one kernel inequality over the grid."""

    constant: float
    witness: dict
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"constant": self.constant, "witness": self.witness, "passed": self.passed, **self.extra}


@dataclass
class KernelBoundReport:
    checks: dict
    t_grid: list
    calibration: dict

    def to_dict(self):
        return {
            "t_grid": list(self.t_grid),
            "checks": {k: v.to_dict() for k, v in sorted(self.checks.items())},
            "calibration": self.calibration,
        }


DEFAULT_CANDIDATES = {
    "due": None,
    "ue": None,
    "ue_c": 0.25,
    "ly_lower": None,
    "ly_upper": None,
    "ly_c1": 1.0,
    "ly_c2": 0.25,
    "utp": None,
    "utp_c": 0.25,
    "g": None,
    "gaffney_p": (1.0, 2.0),
    "gaffney_alpha": None,
    "gaffney_C": None,
    "q0": None,
    "p0": None,
    "s0": None,
}


def _max_witness(values, ts):
    idx = np.unravel_index(np.argmax(values), values.shape)
    t, x, y = idx
    return float(values[idx]), {"t": float(ts[t]), "x": int(x), "y": int(y)}


def _min_witness(values, ts):
    idx = np.unravel_index(np.argmin(values), values.shape)
    t, x, y = idx
    return float(values[idx]), {"t": float(ts[t]), "x": int(x), "y": int(y)}


def _upper_pass(value, cand):
    return bool(np.isfinite(value)) if cand is None else bool(value <= cand)


def kernel_bounds_report(space, t_grid, candidates=None, gaffney_sets=None, seed=0):
    """Best constants of the heat kernel inequalities over a time grid.

    Parameters
    ----------
    space : MetricMeasureSpace
    t_grid : array_like
        Positive times.
    candidates : dict, optional
        Candidate constants and exponents; see ``DEFAULT_CANDIDATES``.  A
        check passes when its best constant respects the candidate (or is
        finite when no candidate is given).
    gaffney_sets : list of (mask_E, mask_F), optional
        Disjoint node sets for the Gaffney check.  By default they are
        sampled by distance buckets.
    seed : int
        Seed of the Gaffney sampling.

    Returns
    -------
    KernelBoundReport
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or np.any(ts <= 0):
        raise CZKitError("invalid-grid", "t grid must be nonempty and positive")
    cand = dict(DEFAULT_CANDIDATES)
    cand.update(candidates or {})

    n = space.n
    D2 = space.dist**2
    vol = space.ball_measures(np.sqrt(ts)).T  # (T, n): mu(B(y, sqrt t))
    P = np.stack([heat_kernel(space, t) for t in ts])  # (T, n, n)
    dP = np.stack([heat_kernel_dt(space, t) for t in ts])
    scaled = P * vol[:, None, :]  # p_t(x, y) mu(B(y, sqrt t))
    gauss = D2[None] / ts[:, None, None]
    checks = {}

    diag = np.stack([np.diag(s) for s in scaled])  # (T, n)
    i = np.unravel_index(np.argmax(diag), diag.shape)
    due = float(diag[i])
    checks["DUE"] = KernelCheck(due, {"t": float(ts[i[0]]), "x": int(i[1]), "y": int(i[1])},
                                _upper_pass(due, cand["due"]),
                                {"per_t": diag.max(axis=1).tolist()})

    def gaussian_upper(values, c):
        with np.errstate(over="ignore"):
            logv = np.log(np.maximum(values, 1e-300)) + c * gauss
        const, wit = _max_witness(logv, ts)
        per_t = np.exp(np.minimum(logv.reshape(len(ts), -1).max(axis=1), 700))
        return math.exp(min(const, 700.0)), wit, per_t

    ue, wit, per_t = gaussian_upper(np.abs(scaled), cand["ue_c"])
    checks["UE"] = KernelCheck(ue, wit, _upper_pass(ue, cand["ue"]), {"c": cand["ue_c"], "per_t": per_t.tolist()})

    # Li-Yau: multiplicative constants for given exponents and tightest exponents
    low_log = np.log(np.maximum(scaled, 1e-300)) + cand["ly_c1"] * gauss
    c_low, wit_low = _min_witness(low_log, ts)
    c_low = math.exp(max(c_low, -700.0))
    c_up, wit_up, _ = gaussian_upper(scaled, cand["ly_c2"])
    off = D2 > 0
    C_low_ref = cand["ly_lower"] if cand["ly_lower"] is not None else c_low
    C_up_ref = cand["ly_upper"] if cand["ly_upper"] is not None else c_up
    if off.any():
        tt = np.broadcast_to(ts[:, None, None], scaled.shape)[:, off]
        dd = np.broadcast_to(D2, scaled.shape)[:, off]
        sv = np.maximum(scaled[:, off], 1e-300)
        c1_needed = float(np.max(tt / dd * np.log(C_low_ref / sv)))
        c2_allowed = float(np.min(tt / dd * np.log(C_up_ref / sv)))
    else:
        c1_needed, c2_allowed = 0.0, math.inf
    ly_pass = (cand["ly_lower"] is None or c_low >= cand["ly_lower"]) and _upper_pass(c_up, cand["ly_upper"])
    checks["LY"] = KernelCheck(c_up, wit_up, bool(ly_pass), {
        "lower_constant": c_low,
        "lower_witness": wit_low,
        "c1": cand["ly_c1"],
        "c2": cand["ly_c2"],
        "smallest_valid_c1": max(c1_needed, 0.0),
        "largest_valid_c2": c2_allowed,
        "per_t_lower": np.exp(np.maximum(low_log.reshape(len(ts), -1).min(axis=1), -700)).tolist(),
    })

    utp_vals = np.abs(dP) * ts[:, None, None] * vol[:, None, :]
    utp, wit, per_t = gaussian_upper(utp_vals, cand["utp_c"])
    checks["UTP"] = KernelCheck(utp, wit, _upper_pass(utp, cand["utp"]), {"c": cand["utp_c"], "per_t": per_t.tolist()})

    grads = np.stack([gradient_modulus(space, P[k]) for k in range(len(ts))])  # |grad_x p_t(x, y)|
    gvals = grads * np.sqrt(ts)[:, None, None] * vol[:, None, :]
    g, wit = _max_witness(gvals, ts)
    checks["G"] = KernelCheck(g, wit, _upper_pass(g, cand["g"]))

    if gaffney_sets is None:
        gaffney_sets = sample_gaffney_sets(space, seed=seed)
    for p in cand["gaffney_p"]:
        checks[f"Gaffney_p{p:g}"] = gaffney_check(space, ts, gaffney_sets, p, cand["gaffney_alpha"], cand["gaffney_C"])

    calibration = {k: cand[k] for k in ("q0", "p0", "s0")}
    return KernelBoundReport(checks, ts.tolist(), calibration)


def sample_gaffney_sets(space, n_centers=4, seed=0):
    """Disjoint pairs ``(E, F)``: E a small ball, F the nodes at distance >= delta from E."""
    rng = np.random.default_rng(seed)
    centers = rng.choice(space.n, size=min(n_centers, space.n), replace=False)
    radii = space.radius_grid[:2]
    pairs = []
    for x in sorted(int(c) for c in centers):
        for rho in radii:
            E = space.ball_mask(x, rho)
            dE = space.distance_to_set(E)
            for delta in np.unique(dE[~E]):
                F = dE >= delta
                pairs.append((E, F))
    return pairs


def _gaffney_constant(space, H, E, F, t, p, rng):
    """Best constant of ``||sqrt(t)|grad H f| ||_{L^p(F)} <= C ||f||_{L^p(E)}`` for f on E."""
    idx = np.flatnonzero(E)
    HE = H[:, idx]  # maps values on E to the heat extension on all nodes
    muE = space.mu[idx]
    if p == 2:
        u, v, w = space.edge_u, space.edge_v, space.edge_weight
        # node x in F gets half of each incident edge energy
        wu = 0.5 * w * F[u]
        wv = 0.5 * w * F[v]
        diff = HE[u] - HE[v]
        Q = diff.T @ ((wu + wv)[:, None] * diff)
        s = 1.0 / np.sqrt(muE)
        A = (Q * s[:, None]) * s[None, :]
        lam = linalg.eigvalsh(0.5 * (A + A.T))[-1]
        return math.sqrt(t * max(lam, 0.0)), True
    if p == 1:
        fields = np.diag(1.0 / muE)
        exact = True
    else:
        k = len(idx)
        fields = np.c_[np.eye(k), np.ones(k), rng.choice([-1.0, 1.0], size=(k, 16))]
        exact = False
    h = HE @ fields
    grads = gradient_modulus(space, h)
    best = 0.0
    for j in range(fields.shape[1]):
        num = math.sqrt(t) * lp_norm(space.mu, grads[:, j], p, F)
        den = lp_norm(muE, fields[:, j], p)
        if den > 0:
            best = max(best, num / den)
    return best, exact


def gaffney_check(space, ts, pairs, p, alpha_cand=None, C_cand=None):
    """Fit ``C exp(-alpha d(E,F)^2 / t)`` to the Gaffney constants of sampled pairs."""
    rng = np.random.default_rng(0)
    rows = []
    exact = True
    for t in ts:
        H = spectral_decompose(space).kernel(lambda lam: np.exp(-t * lam)) * space.mu[None, :]
        for E, F in pairs:
            dEF = float(space.dist[np.ix_(E, F)].min())
            c, ex = _gaffney_constant(space, H, E, F, t, p, rng)
            exact = exact and ex
            rows.append((dEF**2 / t, c, float(t), dEF))
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    pos = y > 0
    if pos.sum() >= 2 and np.ptp(x[pos]) > 0:
        slope, icpt = np.polyfit(x[pos], np.log(y[pos]), 1)
        pred = icpt + slope * x[pos]
        ss_res = np.sum((np.log(y[pos]) - pred) ** 2)
        ss_tot = np.sum((np.log(y[pos]) - np.log(y[pos]).mean()) ** 2)
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        alpha = max(-slope, 0.0)
    else:
        alpha, r2 = 0.0, float("nan")
    C_fit = float(np.max(y * np.exp(alpha * x))) if len(y) else 0.0
    k = int(np.argmax(y * np.exp(alpha * x))) if len(y) else 0
    witness = {"t": rows[k][2], "d": rows[k][3], "ratio": float(y[k])} if rows else {}
    passed = bool(np.isfinite(C_fit))
    if alpha_cand is not None:
        needed = float(np.max(y * np.exp(alpha_cand * x)))
        passed = C_cand is None or needed <= C_cand
    return KernelCheck(C_fit, witness, passed, {
        "p": float(p),
        "alpha": float(alpha),
        "r2": float(r2),
        "exact": exact,
        "n_samples": len(rows),
    })


def riesz_quotients(space, probes, p_list):
    """``||Lap^(1/2) f||_p / ||grad f||_p`` and its reciprocal, maximized over probes.

    Returns a list of rows ``{"p", "rr", "r", "rr_witness", "r_witness"}``
    where ``rr`` is the reverse-Riesz direction and ``r`` the Riesz one.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] != space.n:
        probes = probes.T
    grads = gradient_modulus(space, probes)
    halves = np.abs(sqrt_laplacian_apply(space, probes))
    keep = [j for j in range(probes.shape[1]) if lp_norm(space.mu, grads[:, j], 2) > 1e-12 * max(1.0, np.abs(probes[:, j]).max())]
    if not keep:
        raise CZKitError("degenerate-probes", "all probes are constant")
    rows = []
    for p in p_list:
        p = float(p)
        rr = [(lp_norm(space.mu, halves[:, j], p) / lp_norm(space.mu, grads[:, j], p), j) for j in keep]
        r = [(1.0 / q, j) for q, j in rr]
        best_rr = max(rr)
        best_r = max(r)
        rows.append({"p": p, "rr": best_rr[0], "r": best_r[0], "rr_witness": best_rr[1], "r_witness": best_r[1]})
    return rows
