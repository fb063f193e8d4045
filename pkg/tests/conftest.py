import numpy as np
import pytest

from czkit.space import build_space

SMALL_SPECS = ["path:2", "path:5", "cycle:8", "grid:3", "tree:7", "rgg:12:0.5:1", "radial:6:2"]


@pytest.fixture(scope="session")
def spaces():
    return {spec: build_space(spec) for spec in SMALL_SPECS}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_balls(space):
    """Every distinct open ball, enumerated from scratch: radii just above each distance."""
    ds = np.unique(np.round(space.dist, 12))
    radii = np.r_[ds[1:] - 1e-9, ds[-1] + 1.0] if len(ds) > 1 else np.array([1.0])
    seen = {}
    for x in range(space.n):
        for r in radii:
            m = space.dist[x] < r
            seen.setdefault(m.tobytes(), m)
    return list(seen.values())


def brute_maximal(sp, f, s=1.0):
    """Uncentered maximal function from the brute ball list."""
    out = np.zeros(sp.n)
    for m in brute_balls(sp):
        avg = (np.sum(sp.mu[m] * np.abs(f[m]) ** s) / sp.mu[m].sum()) ** (1 / s)
        out[m] = np.maximum(out[m], avg)
    return out


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, title, passed, detail=""):
        store[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
                                    + (f" ({detail})" if detail else ""))
