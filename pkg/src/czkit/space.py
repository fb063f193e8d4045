"""Finite metric-measure spaces modelled as weighted graphs.

A space is a connected graph whose edges carry a positive length (the
metric is the weighted shortest-path distance) and an optional positive
conductance (used by the Laplacian, defaults to 1).  Nodes carry a
positive measure.  Balls are open: ``Q(x, r) = {y : d(x, y) < r}``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import CZKitError

# distances closer than this are treated as the same realized value
_DIST_DECIMALS = 10


@dataclass(frozen=True)
class Ball:
    """Open ball given by a center (node index) and a radius."""

    center: int
    radius: float

    def dilate(self, lam):
        return Ball(self.center, self.radius * lam)


@dataclass
class BallFamily:
    """All balls ``Q(x, r)`` with ``x`` a node and ``r`` in a radius grid.

    ``masks[b]`` is the boolean membership vector of ball ``b``.
    """

    centers: np.ndarray
    radii: np.ndarray
    masks: np.ndarray
    measures: np.ndarray

    def __len__(self):
        return len(self.centers)

    def ball(self, b):
        return Ball(int(self.centers[b]), float(self.radii[b]))

    @cached_property
    def unique_index(self):
        """Index of one representative per distinct membership set.

        The representative kept is the one with the smallest radius.
        """
        order = np.lexsort((self.centers, self.radii))
        packed = np.packbits(self.masks[order], axis=1)
        _, first = np.unique(packed, axis=0, return_index=True)
        return np.sort(order[first])


@dataclass
class DoublingProfile:
    """Empirical doubling data of a space.

    Attributes
    ----------
    constant : float
        ``C = max mu(Q(x, 2r)) / mu(Q(x, r))`` over centers and the grid.
    dim : float
        Homogeneous dimension ``log2(C)``.
    witness : tuple
        ``(Ball, ratio)`` attaining the maximum.
    per_center : ndarray
        Largest ratio seen at each center.
    dilation_violation : float
        Worst value of ``mu(Q(x, theta R)) / (C theta^d mu(Q(x, R)))``.
    """

    constant: float
    dim: float
    witness: tuple
    per_center: np.ndarray
    dilation_violation: float
    radius_grid: np.ndarray = field(repr=False)
    theta_grid: np.ndarray = field(repr=False)

    def to_dict(self):
        ball, ratio = self.witness
        return {
            "C": self.constant,
            "d": self.dim,
            "witness": {"center": ball.center, "radius": ball.radius, "ratio": ratio},
            "per_center": self.per_center.tolist(),
            "dilation_violation": self.dilation_violation,
        }


class MetricMeasureSpace:
    """Connected weighted graph with node measure and shortest-path metric.

    Parameters
    ----------
    nodes : sequence
        Node identifiers.  They are stored as given and mapped to indices
        ``0..n-1`` in order.
    edges : sequence of tuples
        ``(u, v, length)`` or ``(u, v, length, conductance)``.
    measure : sequence or mapping, optional
        Positive node measure; defaults to 1 on every node.
    name : str, optional
        Spec string the space was built from, kept for reports.
    """

    def __init__(self, nodes, edges, measure=None, name=None):
        self.ids = tuple(nodes)
        self.n = len(self.ids)
        if self.n == 0:
            raise CZKitError("invalid-spec", "space has no nodes")
        if len(set(self.ids)) != self.n:
            raise CZKitError("invalid-spec", "duplicate node ids")
        self.index = {v: i for i, v in enumerate(self.ids)}
        self.name = name

        if measure is None:
            mu = np.ones(self.n)
        elif isinstance(measure, dict):
            mu = np.array([measure[v] for v in self.ids], dtype=float)
        else:
            mu = np.asarray(measure, dtype=float)
        if mu.shape != (self.n,) or not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise CZKitError("invalid-measure", "node measures must be positive")
        self.mu = mu

        us, vs, ls, cs = [], [], [], []
        seen = set()
        for e in edges:
            u, v, length = e[0], e[1], float(e[2])
            cond = float(e[3]) if len(e) > 3 else 1.0
            if not (length > 0 and cond > 0 and math.isfinite(length) and math.isfinite(cond)):
                raise CZKitError("invalid-measure", f"edge ({u}, {v}) has nonpositive weight")
            i, j = self.index[u], self.index[v]
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key in seen:
                raise CZKitError("invalid-spec", f"duplicate edge {key}")
            seen.add(key)
            us.append(key[0])
            vs.append(key[1])
            ls.append(length)
            cs.append(cond)
        self.edge_u = np.array(us, dtype=int)
        self.edge_v = np.array(vs, dtype=int)
        self.length = np.array(ls, dtype=float)
        self.conductance = np.array(cs, dtype=float)

        lengths = sparse.coo_matrix((self.length, (self.edge_u, self.edge_v)), shape=(self.n, self.n))
        ncomp, _ = csgraph.connected_components(lengths, directed=False)
        if ncomp != 1:
            raise CZKitError("disconnected", f"graph has {ncomp} components")
        dist = csgraph.shortest_path(lengths.tocsr(), method="D", directed=False)
        dist.setflags(write=False)
        self.dist = dist
        for arr in (self.mu, self.edge_u, self.edge_v, self.length, self.conductance):
            arr.setflags(write=False)

    def __repr__(self):
        return f"MetricMeasureSpace(name={self.name!r}, n={self.n}, edges={len(self.edge_u)})"

    @property
    def n_edges(self):
        return len(self.edge_u)

    @property
    def total_measure(self):
        return float(self.mu.sum())

    @cached_property
    def diameter(self):
        return float(self.dist.max())

    @cached_property
    def edge_weight(self):
        """Laplacian weight ``conductance / length**2`` of each edge."""
        w = self.conductance / self.length**2
        w.setflags(write=False)
        return w

    @cached_property
    def stiffness(self):
        """Symmetric matrix ``L`` with ``<Lf, f> = sum_e w_e (f(u) - f(v))**2``."""
        n = self.n
        w = self.edge_weight
        W = sparse.coo_matrix((np.r_[w, w], (np.r_[self.edge_u, self.edge_v], np.r_[self.edge_v, self.edge_u])),
                              shape=(n, n)).tocsr()
        deg = np.asarray(W.sum(axis=1)).ravel()
        return (sparse.diags(deg) - W).tocsr()

    @cached_property
    def realized_distances(self):
        """Sorted distinct pairwise distances, starting with 0."""
        return np.unique(np.round(self.dist, _DIST_DECIMALS))

    @cached_property
    def radius_grid(self):
        """Midpoints between consecutive realized distances plus one radius past the diameter.

        Ball membership is constant between realized distances, so this
        grid enumerates every distinct ball around every center.
        """
        return _midpoint_grid(self.realized_distances)

    @cached_property
    def _sorted_rows(self):
        order = np.argsort(self.dist, axis=1, kind="stable")
        sd = np.take_along_axis(self.dist, order, axis=1)
        cum = np.cumsum(self.mu[order], axis=1)
        return sd, cum

    def ball_measures(self, radii):
        """``mu(Q(x, r))`` for every node ``x`` (rows) and radius ``r`` (columns)."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        sd, cum = self._sorted_rows
        out = np.empty((self.n, radii.size))
        for x in range(self.n):
            k = np.searchsorted(sd[x], radii, side="left")
            out[x] = np.where(k > 0, cum[x, np.maximum(k - 1, 0)], 0.0)
        return out

    def ball_mask(self, center, radius):
        return self.dist[center] < radius

    @cached_property
    def balls(self):
        """The :class:`BallFamily` over :attr:`radius_grid`."""
        return self.ball_family(self.radius_grid)

    def ball_family(self, radii):
        radii = np.asarray(radii, dtype=float)
        centers = np.repeat(np.arange(self.n), radii.size)
        rr = np.tile(radii, self.n)
        masks = self.dist[centers] < rr[:, None]
        measures = masks.astype(float) @ self.mu
        return BallFamily(centers, rr, masks, measures)

    def distance_to_set(self, mask):
        """``d(x, E)`` for every node, with ``E`` given as a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return np.full(self.n, np.inf)
        return self.dist[:, mask].min(axis=1)

    def to_json(self):
        nodes = [{"id": str(v), "mu": float(m)} for v, m in zip(self.ids, self.mu)]
        edges = []
        for u, v, l, c in zip(self.edge_u, self.edge_v, self.length, self.conductance):
            e = {"u": str(self.ids[u]), "v": str(self.ids[v]), "w": float(l)}
            if c != 1.0:
                e["c"] = float(c)
            edges.append(e)
        return {"nodes": nodes, "edges": edges}


def _midpoint_grid(values):
    values = np.asarray(values, dtype=float)
    if values.size == 1:
        return np.array([1.0])
    mids = 0.5 * (values[1:] + values[:-1])
    last = values[-1] + 0.5 * (values[-1] - values[-2])
    return np.r_[mids, last]


def ball_members(space, ball):
    """Indices of the nodes in the open ball, in increasing order."""
    if not ball.radius > 0:
        raise CZKitError("invalid-scale", "ball radius must be positive")
    return np.flatnonzero(space.ball_mask(ball.center, ball.radius))


def doubling_grid(space):
    """Radius grid on which ``mu(Q(x,2r)) / mu(Q(x,r))`` takes all its values.

    The ratio only changes when ``r`` or ``2r`` crosses a realized
    distance, so the breakpoints are the distances and their halves.
    """
    ds = space.realized_distances
    return _midpoint_grid(np.unique(np.round(np.r_[ds, ds / 2], _DIST_DECIMALS)))


def doubling_profile(space, radius_grid=None, theta_grid=None):
    """Doubling constant, homogeneous dimension and dilation check.

    Parameters
    ----------
    space : MetricMeasureSpace
    radius_grid : array_like, optional
        Radii at which the two-ball ratio is evaluated.  Defaults to
        :func:`doubling_grid`, which is exact.
    theta_grid : array_like, optional
        Dilation factors ``theta >= 1`` used to check
        ``mu(Q(x, theta R)) <= C theta^d mu(Q(x, R))``.

    Returns
    -------
    DoublingProfile
    """
    grid = doubling_grid(space) if radius_grid is None else np.asarray(radius_grid, dtype=float)
    grid = grid[grid > 0]
    if grid.size == 0:
        raise CZKitError("invalid-grid", "empty radius grid")
    if theta_grid is None:
        theta_grid = np.unique(np.r_[np.geomspace(1.0, 64.0, 25), np.arange(1.0, 9.0, 0.5)])
    theta_grid = np.asarray(theta_grid, dtype=float)

    small = space.ball_measures(grid)
    big = space.ball_measures(2 * grid)
    ratio = big / small
    x, g = np.unravel_index(np.argmax(ratio), ratio.shape)
    C = float(ratio[x, g])
    d = math.log2(C) if C > 1 else 0.0

    worst = 0.0
    for theta in theta_grid:
        dil = space.ball_measures(theta * grid)
        worst = max(worst, float(np.max(dil / (C * theta**d * small))))

    return DoublingProfile(
        constant=C,
        dim=d,
        witness=(Ball(int(x), float(grid[g])), C),
        per_center=ratio.max(axis=1),
        dilation_violation=worst,
        radius_grid=grid,
        theta_grid=theta_grid,
    )


# --- construction -------------------------------------------------------

def _path_edges(n):
    return [(i, i + 1, 1.0) for i in range(n - 1)]


def _grid(a, b):
    nodes = [(i, j) for i in range(a) for j in range(b)]
    ids = [f"{i},{j}" for i, j in nodes]
    edges = []
    for i in range(a):
        for j in range(b):
            if i + 1 < a:
                edges.append((f"{i},{j}", f"{i + 1},{j}", 1.0))
            if j + 1 < b:
                edges.append((f"{i},{j}", f"{i},{j + 1}", 1.0))
    return ids, edges


def _vicsek_cells(level):
    cells = {(0, 0)}
    size = 1
    for _ in range(level):
        offsets = [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)]
        cells = {(ox * size + x, oy * size + y) for ox, oy in offsets for x, y in cells}
        size *= 3
    return sorted(cells)


def _random_geometric(n, radius, seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    edges = []
    for i in range(n):
        d = np.linalg.norm(pts[i + 1:] - pts[i], axis=1)
        for k in np.flatnonzero(d < radius):
            edges.append((i, i + 1 + int(k), float(d[k])))
    return list(range(n)), edges


def parse_space_spec(text):
    """Split ``"family:a:b"`` into the family name and numeric arguments."""
    parts = text.strip().split(":")
    family = parts[0].lower()
    args = []
    for p in parts[1:]:
        if "x" in p and family == "grid":
            args.extend(int(s) for s in p.split("x"))
        else:
            try:
                args.append(int(p))
            except ValueError:
                args.append(float(p))
    return family, args


def build_space(spec):
    """Build a space from a generator spec or a graph file.

    Generator specs are ``family:args``:

    ``path:n``, ``cycle:n``, ``grid:n`` (n x n) or ``grid:AxB``,
    ``tree:n`` (complete binary tree with n nodes in heap order),
    ``rgg:n[:radius[:seed]]`` (random geometric graph in the unit square),
    ``vicsek:level``, ``radial:n:D`` (path with measure ``(1+x)^(D-1)``
    and matching conductances, a radial model of a D-dimensional space).

    Anything ending in ``.json`` is read with :func:`load_space`.
    A mapping ``{"family": ..., "n": ...}`` is also accepted.
    """
    if isinstance(spec, dict):
        if "nodes" in spec:
            return space_from_json(spec)
        fam = spec["family"]
        args = [spec[k] for k in ("n", "m", "radius", "seed", "dim") if k in spec]
        spec = ":".join([fam] + [str(a) for a in args])
    spec = str(spec)
    if spec.endswith(".json"):
        return load_space(spec)
    try:
        family, args = parse_space_spec(spec)
        if family == "path":
            (n,) = args
            return MetricMeasureSpace(range(n), _path_edges(n), name=spec)
        if family == "cycle":
            (n,) = args
            if n < 3:
                raise CZKitError("invalid-spec", "cycle needs n >= 3")
            return MetricMeasureSpace(range(n), _path_edges(n) + [(n - 1, 0, 1.0)], name=spec)
        if family == "grid":
            a, b = (args[0], args[0]) if len(args) == 1 else args
            ids, edges = _grid(a, b)
            return MetricMeasureSpace(ids, edges, name=spec)
        if family == "tree":
            (n,) = args
            edges = [((i - 1) // 2, i, 1.0) for i in range(1, n)]
            return MetricMeasureSpace(range(n), edges, name=spec)
        if family == "rgg":
            n = args[0]
            radius = args[1] if len(args) > 1 else 1.5 * math.sqrt(math.log(max(n, 2)) / n)
            seed = args[2] if len(args) > 2 else 0
            ids, edges = _random_geometric(n, radius, seed)
            return MetricMeasureSpace(ids, edges, name=spec)
        if family == "vicsek":
            (level,) = args
            cells = _vicsek_cells(level)
            cellset = set(cells)
            ids = [f"{x},{y}" for x, y in cells]
            edges = [(f"{x},{y}", f"{x + dx},{y + dy}", 1.0)
                     for x, y in cells for dx, dy in ((1, 0), (0, 1)) if (x + dx, y + dy) in cellset]
            return MetricMeasureSpace(ids, edges, name=spec)
        if family == "radial":
            n, dim = args
            mu = (1.0 + np.arange(n)) ** (dim - 1)
            edges = [(i, i + 1, 1.0, (1.5 + i) ** (dim - 1)) for i in range(n - 1)]
            return MetricMeasureSpace(range(n), edges, measure=mu, name=spec)
    except ValueError as exc:
        raise CZKitError("invalid-spec", f"bad arguments in {spec!r}") from exc
    raise CZKitError("invalid-spec", f"unknown space family {family!r}")


def space_from_json(obj, name=None):
    try:
        nodes = [str(d["id"]) for d in obj["nodes"]]
        mu = [float(d.get("mu", 1.0)) for d in obj["nodes"]]
        edges = [(str(e["u"]), str(e["v"]), float(e["w"]), float(e.get("c", 1.0))) for e in obj["edges"]]
    except (KeyError, TypeError) as exc:
        raise CZKitError("invalid-spec", "malformed graph json") from exc
    return MetricMeasureSpace(nodes, edges, measure=mu, name=name)


def load_space(path):
    """Read a graph file ``{"nodes": [{"id", "mu"}], "edges": [{"u", "v", "w"}]}``."""
    with open(path) as fh:
        obj = json.load(fh)
    return space_from_json(obj, name=str(Path(path)))


def save_space(space, path):
    with open(path, "w") as fh:
        json.dump(space.to_json(), fh, indent=1)
