"""Discrete gradient modulus, Laplacian and Sobolev norms.

Fields are plain float arrays indexed like ``space.ids``.  With edge weight
``w = conductance / length**2`` the conventions are

    |grad f|(x)**2 = 1/(2 mu(x)) * sum_{y ~ x} w_xy (f(y) - f(x))**2
    Lap f(x)       = 1/mu(x)     * sum_{y ~ x} w_xy (f(x) - f(y))

so that ``||grad f||_2**2 == <Lap f, f>_mu`` holds as an identity.
"""
import csv
import math

import numpy as np

from .errors import CZKitError


def _edge_energy(space, f):
    df = f[space.edge_u] - f[space.edge_v]
    w = space.edge_weight
    if f.ndim == 2:
        w = w[:, None]
    return w * df**2


def gradient_modulus(space, f, mask=None):
    """Pointwise gradient modulus ``|grad f|``.

    Parameters
    ----------
    space : MetricMeasureSpace
    f : ndarray
        Field of shape ``(n,)`` or a stack of fields of shape ``(n, k)``.
    mask : ndarray of bool, optional
        Restrict to edges with both endpoints in the mask.  Nodes outside
        the mask get 0.  This is the gradient used for ``W^{1,s}(Q)``.
    """
    f = np.asarray(f, dtype=float)
    energy = _edge_energy(space, f)
    u, v = space.edge_u, space.edge_v
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        keep = mask[u] & mask[v]
        energy, u, v = energy[keep], u[keep], v[keep]
    n = space.n
    if f.ndim == 1:
        acc = np.bincount(u, energy, n) + np.bincount(v, energy, n)
        return np.sqrt(acc / (2 * space.mu))
    acc = np.zeros((n,) + f.shape[1:])
    np.add.at(acc, u, energy)
    np.add.at(acc, v, energy)
    return np.sqrt(acc / (2 * space.mu[:, None]))


def laplacian_apply(space, f):
    """Positive Laplacian ``Lap f(x) = mu(x)^-1 sum_y w_xy (f(x) - f(y))``."""
    f = np.asarray(f, dtype=float)
    out = space.stiffness @ f
    return out / (space.mu if f.ndim == 1 else space.mu[:, None])


def inner(space, f, g):
    """``<f, g>_mu``."""
    return float(np.sum(space.mu * np.asarray(f) * np.asarray(g)))


def dirichlet_form(space, f, g):
    """``sum_edges w_xy (f(x) - f(y)) (g(x) - g(y))``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    df = f[space.edge_u] - f[space.edge_v]
    dg = g[space.edge_u] - g[space.edge_v]
    return float(np.sum(space.edge_weight * df * dg))


def check_exponent(p):
    p = float(p)
    if not p >= 1:
        raise CZKitError("invalid-exponent", f"exponent {p} < 1")
    return p


def lp_norm(mu, f, p, mask=None):
    """``(sum mu |f|^p)^(1/p)``, or the max of ``|f|`` when ``p`` is inf."""
    f = np.abs(np.asarray(f, dtype=float))
    if mask is not None:
        f = f[mask]
        mu = mu[mask]
    if f.size == 0:
        return 0.0
    if math.isinf(p):
        return float(f.max())
    return float(np.sum(mu * f**p) ** (1.0 / p))


def norm(space, f, kind="lp", p=2.0, mask=None):
    """L^p, Sobolev ``W^{1,p}`` or homogeneous ``dot W^{1,p}`` norm.

    ``kind`` is ``"lp"``, ``"sobolev"`` (``||f||_p + || |grad f| ||_p``) or
    ``"homogeneous"`` (gradient part only).  With ``mask`` the sums run
    over the masked nodes and the gradient uses interior edges only.
    """
    p = check_exponent(p)
    f = np.asarray(f, dtype=float)
    if kind == "lp":
        return lp_norm(space.mu, f, p, mask)
    grad = gradient_modulus(space, f, mask)
    gpart = lp_norm(space.mu, grad, p, mask)
    if kind == "homogeneous":
        return gpart
    if kind == "sobolev":
        return lp_norm(space.mu, f, p, mask) + gpart
    raise CZKitError("invalid-spec", f"unknown norm kind {kind!r}")


def sobolev_norm(space, f, p, homogeneous=False, mask=None):
    return norm(space, f, "homogeneous" if homogeneous else "sobolev", p, mask)


def read_field(space, path):
    """Read a ``node_id,value`` CSV into a field; missing nodes are an error."""
    values = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                values[row[0].strip()] = float(row[1])
            except (IndexError, ValueError) as exc:
                if not values and row[0].strip() in ("node_id", "id", "node"):
                    continue
                raise CZKitError("invalid-spec", f"bad field row {row!r}") from exc
    try:
        f = np.array([values[str(v)] for v in space.ids])
    except KeyError as exc:
        raise CZKitError("invalid-spec", f"field misses node {exc.args[0]}") from exc
    if not np.all(np.isfinite(f)):
        raise CZKitError("invalid-spec", "field has non-finite values")
    return f


def write_field(space, f, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for v, val in zip(space.ids, f):
            w.writerow([str(v), repr(float(val))])
