import itertools

import numpy as np
import pytest
from scipy import stats as sps

from ngcn.graph import UndirectedWeightedGraph, build_normalized_adjacency
from ngcn.model import NgcnParams

# Published comparison grid: rows D1..D4 x (RMSE, MAE), columns M1..M8.
GRID_MODELS = ["M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"]
GRID_ROWS = [(ds, m) for ds in ("D1", "D2", "D3", "D4") for m in ("RMSE", "MAE")]
GRID = np.array([
    [0.04123, 0.03834, 0.03848, 0.04026, 0.03939, 0.03818, 0.03857, 0.03520],
    [0.02312, 0.02317, 0.02320, 0.02298, 0.02171, 0.02280, 0.02168, 0.02068],
    [0.07388, 0.07029, 0.06921, 0.07205, 0.07046, 0.06796, 0.06912, 0.06873],
    [0.03445, 0.03508, 0.03504, 0.03774, 0.03336, 0.03595, 0.03341, 0.03191],
    [0.07355, 0.06121, 0.07339, 0.09000, 0.07453, 0.06238, 0.07614, 0.06050],
    [0.05030, 0.04527, 0.05564, 0.06150, 0.05062, 0.04651, 0.05030, 0.04368],
    [0.08809, 0.08619, 0.08576, 0.08716, 0.08203, 0.08231, 0.08141, 0.07323],
    [0.04523, 0.05366, 0.05181, 0.05046, 0.04227, 0.04796, 0.04224, 0.04028],
])
GRID_STD = np.array([
    [5e-5, 2e-4, 2e-4, 2e-3, 3e-4, 1e-4, 5e-5, 8e-5],
    [1e-4, 5e-4, 8e-5, 9e-5, 3e-5, 4e-4, 1e-5, 2e-4],
    [1e-4, 5e-4, 8e-4, 8e-4, 1e-5, 4e-4, 8e-5, 2e-4],
    [4e-5, 6e-4, 9e-4, 6e-4, 3e-5, 5e-4, 5e-5, 8e-5],
    [7e-5, 2e-4, 6e-4, 2e-3, 2e-4, 2e-4, 3e-4, 4e-4],
    [1e-4, 5e-4, 6e-4, 1e-3, 2e-5, 3e-4, 4e-5, 5e-4],
    [1e-4, 2e-4, 1e-3, 3e-4, 4e-5, 7e-4, 5e-5, 2e-4],
    [4e-5, 8e-4, 9e-4, 4e-4, 5e-5, 4e-4, 3e-5, 2e-4],
])


def grid_csv() -> str:
    lines = ["dataset,metric,model,mean,std"]
    for r, (ds, metric) in enumerate(GRID_ROWS):
        for c, m in enumerate(GRID_MODELS):
            lines.append(f"{ds},{metric},{m},{GRID[r, c]},{GRID_STD[r, c]}")
    return "\n".join(lines) + "\n"


def path_graph() -> UndirectedWeightedGraph:
    return UndirectedWeightedGraph.from_triples(3, [(0, 1, 2.0), (1, 2, 6.0)])


@pytest.fixture
def path3():
    return path_graph()


def random_graph(rng, n_nodes=8, n_edges=12, low=0.1, high=1.0):
    iu, ju = np.triu_indices(n_nodes, k=1)
    pick = rng.choice(len(iu), size=n_edges, replace=False)
    w = rng.uniform(low, high, size=n_edges)
    return UndirectedWeightedGraph.from_triples(n_nodes, zip(iu[pick], ju[pick], w))


def random_connected_graph(rng, n_nodes=8, n_edges=12, low=0.1, high=1.0):
    """Random spanning tree plus extra random pairs, so no node is isolated."""
    order = rng.permutation(n_nodes)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n_nodes)}
    while len(pairs) < n_edges:
        i, j = rng.choice(n_nodes, 2, replace=False)
        pairs.add((int(min(i, j)), int(max(i, j))))
    w = rng.uniform(low, high, size=len(pairs))
    return UndirectedWeightedGraph.from_triples(n_nodes, [(i, j, wk) for (i, j), wk in zip(sorted(pairs), w)])


def random_ngcn_instance(seed, n_nodes=8, f=4, d=4, L=2, n_edges=12, kink_margin=1e-3):
    """Random connected graph + parameters whose ReLU inputs all sit at least ``kink_margin`` from zero."""
    from ngcn.model import forward

    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n_nodes, n_edges)
    adj = build_normalized_adjacency(g, g.edges)
    while True:
        p = NgcnParams(rng.normal(0, 0.5, (n_nodes, f)),
                       [rng.normal(0, 0.5, (f, f)) for _ in range(L)],
                       rng.normal(0, 0.5, (n_nodes, d)), float(rng.uniform(0.2, 0.8)))
        trace = forward(p, adj)
        if all(np.min(np.abs(z)) > kink_margin for z in trace.pre_act):
            return g, adj, p


def central_differences(loss, arrays: dict, step=1e-5) -> dict:
    """Coordinate-wise central finite differences of ``loss(arrays)``; perturbs copies only."""
    out = {}
    for name, a in arrays.items():
        a = np.asarray(a, dtype=float)
        grad = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            plus = {k: np.array(v, dtype=float, copy=True) for k, v in arrays.items()}
            minus = {k: np.array(v, dtype=float, copy=True) for k, v in arrays.items()}
            plus[name][idx] += step
            minus[name][idx] -= step
            grad[idx] = (loss(plus) - loss(minus)) / (2 * step)
        out[name] = grad
    return out


def max_relative_error(analytic: dict, numeric: dict, floor=1e-8) -> float:
    worst = 0.0
    for name, num in numeric.items():
        ana = np.asarray(analytic[name], dtype=float)
        rel = np.abs(ana - num) / np.maximum(np.maximum(np.abs(ana), np.abs(num)), floor)
        # coordinates whose gradient is numerically zero on both sides compare absolutely
        rel = np.where(np.maximum(np.abs(ana), np.abs(num)) < floor, np.abs(ana - num), rel)
        worst = max(worst, float(np.max(rel)) if rel.size else 0.0)
    return worst


def brute_force_wilcoxon(diffs):
    """Enumerate every sign assignment of the ranks; independent of the counting recursion."""
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    ranks = sps.rankdata(np.abs(d))
    r_plus = ranks[d > 0].sum()
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        if np.dot(signs, ranks) >= r_plus - 1e-9:
            hits += 1
    return r_plus, ranks.sum() - r_plus, hits / 2 ** len(d)


# -- acceptance report --------------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or (rep.when == "setup" and not rep.passed)):
        return
    label = f"criterion {marker.args[0]}" + (" (stretch)" if marker.kwargs.get("stretch") else "")
    detail = dict(item.user_properties).get("detail", "")
    if rep.skipped:
        status, detail = "SKIP", rep.longrepr[2] if isinstance(rep.longrepr, tuple) else detail
    else:
        status = "PASS" if rep.passed else "FAIL"
    _ACCEPTANCE.append(f"{label}: {status}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
