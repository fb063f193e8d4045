"""Named scalar-field generators and grid specs shared by the CLI and demos."""
import math
import os

import numpy as np

from .calculus import read_field
from .errors import CZKitError


def build_field(space, spec, seed=0):
    """Field from a CSV path or a generator spec.

    Generators: ``spike[:i]`` (indicator of node index ``i``), ``const:c``,
    ``random[:seed]`` (standard Gaussian), ``eigen:k`` (``k``-th Laplacian
    eigenvector), ``dist[:i]`` (distance to node ``i``) and
    ``profile:i:a`` (``(1 + d(i, .))^-a``, the borderline decay used for
    measure-budget scaling).
    """
    if spec is None:
        spec = "spike:0"
    if os.path.exists(spec):
        return read_field(space, spec)
    name, *args = spec.split(":")
    try:
        if name == "spike":
            f = np.zeros(space.n)
            f[int(args[0]) if args else 0] = 1.0
            return f
        if name == "const":
            return np.full(space.n, float(args[0]))
        if name == "random":
            return np.random.default_rng(int(args[0]) if args else seed).standard_normal(space.n)
        if name == "eigen":
            from .semigroup import spectral_decompose

            return spectral_decompose(space).eigenvectors[:, int(args[0])].copy()
        if name == "dist":
            return space.dist[int(args[0]) if args else 0].copy()
        if name == "profile":
            return (1.0 + space.dist[int(args[0])]) ** (-float(args[1]))
    except (IndexError, ValueError) as exc:
        raise CZKitError("invalid-spec", f"bad field spec {spec!r}") from exc
    raise CZKitError("invalid-spec", f"unknown field spec {spec!r} (not a file or generator)")


def parse_grid(spec):
    """``geom:lo:hi:num``, ``lin:lo:hi:num`` or a comma list; ``inf`` allowed in lists."""
    if spec is None or spec == "":
        return np.zeros(0)
    try:
        if spec.startswith(("geom:", "lin:")):
            kind, lo, hi, num = spec.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
            if num < 0 or (kind == "geom" and not (0 < lo <= hi)):
                raise ValueError
            return np.geomspace(lo, hi, num) if kind == "geom" else np.linspace(lo, hi, num)
        return np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError as exc:
        raise CZKitError("invalid-grid", f"bad grid spec {spec!r}") from exc


def parse_exponent(text):
    x = float(text)
    if math.isnan(x):
        raise CZKitError("invalid-exponent", "exponent is nan")
    return x
