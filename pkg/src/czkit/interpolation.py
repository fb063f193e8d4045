"""K-functionals, interpolation norms, Besov norms and Gagliardo-Nirenberg ratios.

Pairs are written ``("lebesgue", p0, p1)`` for ``(L^p0, L^p1)`` and
``("sobolev", s, r)`` for ``(W^{1,s}, W^{1,r})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import check_exponent, gradient_modulus, lp_norm
from .czd import combined_maximal, cz_decompose
from .errors import CZKitError
from .maximal import hl_maximal, rearrangement_of_values, rearrangements
from .semigroup import make_collection, spectral_decompose

SOBOLEV_NODE_CAP = 64


@dataclass
class KFunctionalResult:
    """Value of ``K(f, t)`` with the splitting ``f = a0 + a1`` that attains it, if any."""

    t: float
    value: float
    method: str
    a0: np.ndarray | None = None
    a1: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"t": self.t, "value": self.value, "method": self.method, **self.extra}
        if self.a1 is not None:
            out["a0"] = self.a0.tolist()
            out["a1"] = self.a1.tolist()
        return out


def parse_pair(pair):
    """Normalize a pair spec; strings like ``"L1,Linf"`` or ``"W1,Winf"`` are accepted."""
    if isinstance(pair, str):
        parts = [x.strip() for x in pair.split(",")]
        if len(parts) != 2 or parts[0][0] != parts[1][0] or parts[0][0] not in "LW":
            raise CZKitError("invalid-spec", f"bad pair {pair!r}")
        kind = "lebesgue" if parts[0][0] == "L" else "sobolev"
        pair = (kind, parts[0][1:], parts[1][1:])
    kind, a, b = pair
    a, b = check_exponent(float(a)), check_exponent(float(b))
    if kind not in ("lebesgue", "sobolev"):
        raise CZKitError("invalid-spec", f"unknown pair kind {kind!r}")
    return kind, a, b


def space_norm(space, f, kind, p):
    """``||f||_{L^p}`` or ``||f||_{W^{1,p}}`` with the global gradient."""
    f = np.asarray(f, dtype=float)
    val = lp_norm(space.mu, f, p)
    if kind == "sobolev":
        val += lp_norm(space.mu, gradient_modulus(space, f), p)
    return val


# --- brute force ----------------------------------------------------------------

def _cvx_norm(space, a, kind, p):
    import cvxpy as cp

    def lp(v, weights):
        if math.isinf(p):
            return cp.norm_inf(v)
        return cp.pnorm(cp.multiply(weights ** (1 / p), v), p)

    val = lp(a, space.mu)
    if kind == "sobolev":
        # |grad a|(x) is the 2-norm of sqrt(w / (2 mu_x)) (a_x - a_y) over edges at x
        inc = [[] for _ in range(space.n)]
        for e, (u, v) in enumerate(zip(space.edge_u, space.edge_v)):
            inc[u].append((e, v))
            inc[v].append((e, u))
        deg = max(len(x) for x in inc)
        from scipy import sparse

        mats = []
        for k in range(deg):
            rows, cols, vals = [], [], []
            for x, lst in enumerate(inc):
                if k < len(lst):
                    e, y = lst[k]
                    c = math.sqrt(space.edge_weight[e] / (2 * space.mu[x]))
                    if not math.isinf(p):
                        c *= space.mu[x] ** (1 / p)
                    rows += [x, x]
                    cols += [x, y]
                    vals += [c, -c]
            mats.append(sparse.csr_matrix((vals, (rows, cols)), shape=(space.n, space.n)))
        grad = cp.norm(cp.vstack([m @ a for m in mats]), 2, axis=0)
        val = val + (cp.max(grad) if math.isinf(p) else cp.pnorm(grad, p))
    return val


class KSolver:
    """Reusable convex program ``min ||f - a1||_A0 + t ||a1||_A1`` for one space and pair."""

    def __init__(self, space, pair):
        import cvxpy as cp

        self.space = space
        self.kind, self.p0, self.p1 = parse_pair(pair)
        if self.kind == "sobolev" and space.n > SOBOLEV_NODE_CAP:
            raise CZKitError("too-large", f"Sobolev K-functional brute force is capped at {SOBOLEV_NODE_CAP} nodes")
        self.f = cp.Parameter(space.n)
        self.t = cp.Parameter(nonneg=True)
        self.a1 = cp.Variable(space.n)
        obj = _cvx_norm(space, self.f - self.a1, self.kind, self.p0) + self.t * _cvx_norm(space, self.a1, self.kind, self.p1)
        self.problem = cp.Problem(cp.Minimize(obj))

    def objective(self, f, a1, t):
        return space_norm(self.space, f - a1, self.kind, self.p0) + t * space_norm(self.space, a1, self.kind, self.p1)

    def solve(self, f, t):
        """Best splitting among the solver optimum and the two trivial ones."""
        import cvxpy as cp

        f = np.asarray(f, dtype=float)
        self.f.value = f
        self.t.value = float(t)
        cands = [np.zeros_like(f), f.copy()]
        status = None
        for solver in ("CLARABEL", "SCS"):
            try:
                self.problem.solve(solver=solver)
                status = self.problem.status
            except cp.error.SolverError:
                status = "solver_error"
                continue
            if self.a1.value is not None:
                cands.append(np.asarray(self.a1.value, dtype=float))
            if status == cp.OPTIMAL:
                break
        vals = [self.objective(f, a1, t) for a1 in cands]
        k = int(np.argmin(vals))
        res = KFunctionalResult(float(t), float(vals[k]), "bruteforce", f - cands[k], cands[k],
                                {"status": status, "solver_value": self.problem.value})
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise CZKitError("no-convergence", f"K-functional solver status {status}", best=res)
        return res


def k_bruteforce(space, f, t, pair, solver=None):
    """Exact K-functional by convex minimization over the splitting."""
    solver = KSolver(space, pair) if solver is None else solver
    return solver.solve(f, t)


def k_curve(space, f, t_grid, pair, solver=None):
    """Brute-force K on a grid, made exactly concave.

    Every witness ``a1_j`` gives an affine upper bound
    ``||f - a1_j||_A0 + t ||a1_j||_A1`` valid at all ``t``; the curve is
    the lower envelope of these, so it is concave, nondecreasing and no
    larger than any single solve.
    """
    solver = KSolver(space, pair) if solver is None else solver
    f = np.asarray(f, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    wit = [solver.solve(f, t) for t in t_grid]
    A = np.array([space_norm(space, w.a0, solver.kind, solver.p0) for w in wit])
    B = np.array([space_norm(space, w.a1, solver.kind, solver.p1) for w in wit])
    env = A[None, :] + t_grid[:, None] * B[None, :]
    best = env.argmin(axis=1)
    return [KFunctionalResult(float(t), float(env[i, best[i]]), "bruteforce", wit[best[i]].a0, wit[best[i]].a1)
            for i, t in enumerate(t_grid)]


# --- closed forms and upper bounds ---------------------------------------------------

def k_lebesgue(space, f, t, p0, p1):
    """Rearrangement formula for ``K(f, t, L^p0, L^p1)``.

    ``(int_0^{t^a} f*^p0)^(1/p0) + t (int_{t^a}^inf f*^p1)^(1/p1)`` with
    ``1/a = 1/p0 - 1/p1``, evaluated exactly on the step function ``f*``.

    Examples
    --------
    >>> from czkit.space import build_space
    >>> k_lebesgue(build_space("path:3"), [3.0, 1.0, 2.0], 1.0, 1, float("inf")).value
    5.0
    """
    p0, p1 = float(p0), float(p1)
    if not (0 < p0 < p1):
        raise CZKitError("invalid-exponents", "need 0 < p0 < p1")
    t = float(t)
    if not t > 0:
        raise CZKitError("invalid-time", "t must be positive")
    rf = rearrangements(space, f)
    inv_a = 1 / p0 - (0.0 if math.isinf(p1) else 1 / p1)
    T = t ** (1 / inv_a)
    head = rf.integral(0.0, T, p0) ** (1 / p0)
    if math.isinf(p1):
        tail = rf.sup_after(T)
    else:
        tail = rf.integral(T, math.inf, p1) ** (1 / p1)
    return KFunctionalResult(t, head + t * tail, "lebesgue-formula", extra={"t_alpha": T})


def _time_exponent(s, r):
    """``rs / (r - s)``, equal to ``s`` when ``r`` is infinite."""
    return s if math.isinf(r) else r * s / (r - s)


def k_sobolev_upper(space, f, t, s, r, q, collection="mean", mode="nonhomogeneous", S=None):
    """Upper bound of ``K(f, t, W^{1,s}, W^{1,r})`` from a Calderon-Zygmund splitting.

    The threshold is ``alpha(t) = S*(tau)`` with ``tau = t^{rs/(r-s)}`` and
    ``S`` the combined maximal field, so that ``mu(Omega) <= tau``.  The
    result carries ``||b||_{W^{1,s}} + t ||g||_{W^{1,r}}`` and, in
    ``extra``, the right side of the rearrangement bound it is compared
    with.
    """
    s, r, q, t = float(s), float(r), float(q), float(t)
    if not (1 <= q <= s < r):
        raise CZKitError("invalid-exponents", "need 1 <= q <= s < r")
    if isinstance(collection, str):
        collection = make_collection(space, collection)
    f = np.asarray(f, dtype=float)
    if S is None:
        S = combined_maximal(space, f, collection, q, mode)
    tau = t ** _time_exponent(s, r)
    alpha = float(rearrangement_of_values(S, space.mu).fstar(tau))
    if alpha <= 0:
        raise CZKitError("degenerate-threshold", f"alpha(t) = 0 at t={t:g}: tau={tau:g} exceeds the measure of supp S")
    dec = cz_decompose(space, f, alpha, s, q, r, collection, mode, S=S)
    hom = mode == "homogeneous"
    bsum = dec.bad.sum(axis=0) if len(dec.bad) else np.zeros(space.n)

    def w(h, p):
        val = lp_norm(space.mu, gradient_modulus(space, h), p)
        return val if hom else val + lp_norm(space.mu, h, p)

    value = w(bsum, s) + t * w(dec.good, r)
    mu_omega = float(space.mu[dec.omega].sum())
    return KFunctionalResult(t, float(value), "cz-upper", bsum, dec.good, {
        "alpha": alpha,
        "tau": tau,
        "mu_omega": mu_omega,
        "mu_omega_ok": bool(mu_omega <= tau * (1 + 1e-12)),
        "n_balls": len(dec.whitney),
        "rhs": k_upper_rhs(space, f, t, s, r, q),
    })


def k_upper_rhs(space, f, t, s, r, q):
    """Right side of the rearrangement bound for ``K(f, t, W^{1,s}, W^{1,r})``, constant 1.

    ``t^{r/(r-s)} [(|f|^q)**(tau) + (|grad f|^q)**(tau)]^{1/q}
    + t [int_tau^inf ((M (|f| + |grad f|)^q)*)^{r/q}]^{1/r}``.
    """
    f = np.asarray(f, dtype=float)
    grad = gradient_modulus(space, f)
    tau = t ** _time_exponent(s, r)
    lead = t if math.isinf(r) else t ** (r / (r - s))
    head = 0.0
    for h in (np.abs(f) ** q, grad**q):
        rp = rearrangements(space, h)
        head += float(rp.fstarstar(tau)) if rp.support > 0 else 0.0
    head = head ** (1 / q)
    m = rearrangements(space, hl_maximal(space, (np.abs(f) + grad) ** q, 1.0))
    if math.isinf(r):
        tail = m.sup_after(tau) ** (1 / q)
    else:
        # ((M h)*)^{r/q} is again a step function: rearrange the powered values
        vals = m.values ** (r / q)
        lo = np.clip(m.breaks[:-1], tau, None)
        hi = np.clip(m.breaks[1:], tau, None)
        tail = float(np.sum((hi - lo) * vals)) ** (1 / r)
    return lead * head + t * tail


# --- interpolation, Besov, Gagliardo-Nirenberg ------------------------------------------

def interpolation_norm(space, f, theta, qexp, pair=("lebesgue", 1, math.inf), t_grid=None, method="lebesgue"):
    """``(int (t^-theta K(f, t))^q dt/t)^(1/q)`` by the trapezoid rule in ``log t``.

    ``method="lebesgue"`` uses :func:`k_lebesgue`; ``"bruteforce"`` uses
    :func:`k_curve`.  ``qexp = inf`` gives the sup over the grid.
    """
    kind, p0, p1 = parse_pair(pair)
    if not 0 < theta < 1:
        raise CZKitError("invalid-exponent", "theta must lie in (0, 1)")
    if t_grid is None:
        t_grid = np.geomspace(1e-3, 1e3, 385)
    t_grid = np.asarray(t_grid, dtype=float)
    if method == "lebesgue":
        if kind != "lebesgue":
            raise CZKitError("invalid-spec", "the rearrangement formula needs a Lebesgue pair")
        K = np.array([k_lebesgue(space, f, t, p0, p1).value for t in t_grid])
    else:
        K = np.array([r.value for r in k_curve(space, f, t_grid, (kind, p0, p1))])
    vals = t_grid ** (-theta) * K
    if math.isinf(qexp):
        return float(vals.max())
    return float(np.trapezoid(vals**qexp, np.log(t_grid)) ** (1 / qexp))


def default_besov_grid():
    """64 points per decade on ``[1e-3, 1e3]``."""
    return np.geomspace(1e-3, 1e3, 6 * 64 + 1)


def _heat_stack(space, f, t_grid):
    spec = spectral_decompose(space)
    coef = spec.eigenvectors.T @ (spec.mu * np.asarray(f, dtype=float))
    decay = np.exp(-np.outer(t_grid, spec.eigenvalues))
    return (decay * coef) @ spec.eigenvectors.T  # (len(t), n)


def besov_norm(space, f, a, t_grid=None, variant="heat"):
    """``sup_t t^{-a/2} ||e^{-t Lap} f||_inf`` over a finite grid, for ``a < 0``.

    ``variant="difference"`` uses ``e^{-t Lap}(f - e^{-t Lap} f)`` instead.
    On a finite space a field with nonzero mean makes the continuum sup
    diverge as ``t`` grows; the grid value is then dominated by its top end.

    Examples
    --------
    >>> import math
    >>> from czkit.space import build_space
    >>> v = besov_norm(build_space("path:2"), [1.0, 0.0], -1.0, [1.0])
    >>> abs(v - (1 + math.exp(-2)) / 2) < 1e-12
    True
    """
    if not a < 0:
        raise CZKitError("invalid-exponent", "Besov exponent must be negative")
    t_grid = default_besov_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise CZKitError("invalid-time", "Besov grid must be positive")
    H = _heat_stack(space, f, t_grid)
    if variant == "difference":
        spec = spectral_decompose(space)
        osc = np.asarray(f, dtype=float)[None, :] - H  # f - e^{-t Lap} f, one row per t
        proj = (osc * spec.mu) @ spec.eigenvectors
        decay = np.exp(-t_grid[:, None] * spec.eigenvalues[None, :])
        H = (proj * decay) @ spec.eigenvectors.T
    elif variant != "heat":
        raise CZKitError("invalid-spec", f"unknown Besov variant {variant!r}")
    return float(np.max(t_grid ** (-a / 2) * np.abs(H).max(axis=1)))


def gn_check(space, probes, p, l, q=None, t_grid=None):
    """Gagliardo-Nirenberg ratios ``||f||_l / (||grad f||_p^th ||f||_B^(1-th))``, ``th = p/l``.

    The Besov exponent is ``th / (th - 1)``.  Returns a dict with the
    per-probe ratios, their sup and the equivalent-norm variant.
    """
    p, l = float(p), float(l)
    q = p if q is None else float(q)
    if not (1 <= q <= p < l < math.inf):
        raise CZKitError("invalid-exponents", "need 1 <= q <= p < l < inf")
    fields = np.asarray(probes, dtype=float)
    if fields.ndim == 1:
        fields = fields[:, None]
    theta = p / l
    a = theta / (theta - 1)
    ratios, ratios_diff = [], []
    for j in range(fields.shape[1]):
        f = fields[:, j]
        if np.ptp(f) == 0:
            continue
        num = lp_norm(space.mu, f, l)
        gp = lp_norm(space.mu, gradient_modulus(space, f), p)
        b = besov_norm(space, f, a, t_grid)
        bd = besov_norm(space, f, a, t_grid, variant="difference")
        ratios.append(num / (gp**theta * b ** (1 - theta)))
        ratios_diff.append(num / (gp**theta * bd ** (1 - theta)) if bd > 0 else math.inf)
    if not ratios:
        raise CZKitError("degenerate-probes", "all probes are constant")
    return {"p": p, "l": l, "theta": theta, "besov_exponent": a, "ratios": ratios,
            "sup": float(max(ratios)), "ratios_difference": ratios_diff,
            "sup_difference": float(max(ratios_diff))}
