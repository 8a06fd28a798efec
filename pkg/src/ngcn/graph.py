"""Undirected weighted graphs: ingestion, scaling, splitting, propagation operator."""
from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

N_SHARDS = 10
TRAIN_SHARDS = range(0, 7)
VALIDATION_SHARDS = range(7, 8)
TEST_SHARDS = range(8, 10)


class MatrixMarketError(ValueError):
    """Malformed or unsupported MatrixMarket input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelfLoopWarning(UserWarning):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"dropped {count} self-loop entr{'y' if count == 1 else 'ies'}")


@dataclass(frozen=True)
class EdgeList:
    """Parallel arrays of undirected edges, one entry per pair with ``src < dst``."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "src", np.asarray(self.src, dtype=np.int64).ravel())
        object.__setattr__(self, "dst", np.asarray(self.dst, dtype=np.int64).ravel())
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=np.float64).ravel())
        if not (len(self.src) == len(self.dst) == len(self.weight)):
            raise ValueError("src, dst and weight must have equal length")

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, int, float]]) -> "EdgeList":
        triples = list(triples)
        if not triples:
            return cls.empty()
        i, j, w = zip(*triples)
        return cls(np.array(i), np.array(j), np.array(w, dtype=float))

    @classmethod
    def empty(cls) -> "EdgeList":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))

    def __len__(self) -> int:
        return len(self.src)

    def __getitem__(self, index) -> "EdgeList":
        return EdgeList(self.src[index], self.dst[index], self.weight[index])

    def triples(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.src, self.dst, self.weight)]

    def keys(self, n_nodes: int) -> np.ndarray:
        """Integer key ``i * n + j`` identifying each pair."""
        return self.src * n_nodes + self.dst

    def nodes(self) -> np.ndarray:
        return np.union1d(self.src, self.dst)

    def with_weights(self, weight: np.ndarray) -> "EdgeList":
        return EdgeList(self.src, self.dst, weight)


@dataclass(frozen=True)
class UndirectedWeightedGraph:
    n_nodes: int
    edges: EdgeList
    weight_scale: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        e = self.edges
        if len(e):
            if np.any(e.src < 0) or np.any(e.dst >= self.n_nodes):
                raise ValueError("edge index out of range")
            if np.any(e.src >= e.dst):
                raise ValueError("edges must satisfy i < j")
            if np.any(e.weight <= 0) or not np.all(np.isfinite(e.weight)):
                raise ValueError("edge weights must be finite and positive")
            if len(np.unique(e.keys(self.n_nodes))) != len(e):
                raise ValueError("duplicate edges")
        if self.weight_scale is not None and len(e) and e.weight.max() > 1.0:
            raise ValueError("scaled graph has weights above 1")

    @classmethod
    def from_triples(cls, n_nodes: int, triples, weight_scale=None) -> "UndirectedWeightedGraph":
        """Build from arbitrary (i, j, w) triples; orientation is canonicalized and rows sorted."""
        e = EdgeList.from_triples(triples)
        lo, hi = np.minimum(e.src, e.dst), np.maximum(e.src, e.dst)
        order = np.lexsort((hi, lo))
        return cls(n_nodes, EdgeList(lo[order], hi[order], e.weight[order]), weight_scale)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def denormalize(self, values):
        """Map scaled weights (or predictions) back to original units."""
        if self.weight_scale is None:
            return np.asarray(values, dtype=float)
        lo, hi = self.weight_scale
        return lo + np.asarray(values, dtype=float) * (hi - lo)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        a[self.edges.src, self.edges.dst] = self.edges.weight
        a[self.edges.dst, self.edges.src] = self.edges.weight
        return a


@dataclass(frozen=True)
class EdgeSplit:
    train: EdgeList
    validation: EdgeList
    test: EdgeList
    seed: int
    shard: np.ndarray = field(repr=False, default=None)  # shard id per edge, canonical order

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "n_shards": N_SHARDS,
            "train_shards": list(TRAIN_SHARDS),
            "validation_shards": list(VALIDATION_SHARDS),
            "test_shards": list(TEST_SHARDS),
            "sizes": {"train": len(self.train), "validation": len(self.validation), "test": len(self.test)},
            "shard": None if self.shard is None else self.shard.tolist(),
        }


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric operator with entries ``a_ij / sqrt(d_ii d_jj)`` and an empty diagonal."""

    n_nodes: int
    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def entries(self) -> EdgeList:
        coo = self.matrix.tocoo()
        return EdgeList(coo.row, coo.col, coo.data)

    def __matmul__(self, other):
        return self.matrix @ other


# ---------------------------------------------------------------------------
# MatrixMarket / edge-list IO
# ---------------------------------------------------------------------------

def _lines(text) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_matrix_market(text: str | TextIO) -> UndirectedWeightedGraph:
    """Parse a MatrixMarket coordinate matrix into a canonical undirected graph.

    Accepts ``symmetric`` and ``general`` real/integer/pattern matrices. A general
    matrix must store both ``(i, j)`` and ``(j, i)`` with equal values. Diagonal
    entries are dropped and reported through a :class:`SelfLoopWarning`.
    """
    lines = iter(_lines(text))
    lineno = 0
    header = None
    for raw in lines:
        lineno += 1
        header = raw.strip()
        if header:
            break
    if not header or not header.lower().startswith("%%matrixmarket"):
        raise MatrixMarketError("missing %%MatrixMarket banner", lineno)
    tokens = header.lower().split()
    if len(tokens) != 5 or tokens[1] != "matrix" or tokens[2] != "coordinate":
        raise MatrixMarketError(f"unsupported header {header!r}", lineno)
    field_, symmetry = tokens[3], tokens[4]
    if field_ not in ("real", "integer", "pattern"):
        raise MatrixMarketError(f"unsupported field {field_!r}", lineno)
    if symmetry not in ("symmetric", "general"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", lineno)

    size = None
    for raw in lines:
        lineno += 1
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(f"non-numeric size line {s!r}", lineno) from None
        if len(size) != 3:
            raise MatrixMarketError(f"size line needs 3 integers, got {s!r}", lineno)
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    n_rows, n_cols, nnz = size
    if n_rows != n_cols or n_rows < 1:
        raise MatrixMarketError(f"adjacency must be square, got {n_rows}x{n_cols}", lineno)

    want = 2 if field_ == "pattern" else 3
    seen: dict[tuple[int, int], tuple[float, int]] = {}
    self_loops = 0
    count = 0
    for raw in lines:
        lineno += 1
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != want:
            raise MatrixMarketError(f"expected {want} fields, got {len(parts)}", lineno)
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            w = 1.0 if field_ == "pattern" else float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"non-numeric entry {s!r}", lineno) from None
        count += 1
        if not (0 <= i < n_rows and 0 <= j < n_cols):
            raise MatrixMarketError(f"index out of range in {s!r}", lineno)
        if not np.isfinite(w) or w <= 0:
            raise MatrixMarketError(f"non-positive weight {w!r}", lineno)
        if i == j:
            self_loops += 1
            continue
        key = (i, j)
        if key in seen:
            if seen[key][0] != w:
                raise MatrixMarketError(f"conflicting duplicate entry ({i + 1}, {j + 1})", lineno)
            continue
        seen[key] = (w, lineno)
    if count != nnz:
        raise MatrixMarketError(f"header declares {nnz} entries, found {count}", lineno)

    triples = []
    for (i, j), (w, ln) in seen.items():
        if symmetry == "general":
            mirror = seen.get((j, i))
            if mirror is None:
                raise MatrixMarketError(f"asymmetric matrix: ({i + 1}, {j + 1}) has no mirror", ln)
            if mirror[0] != w:
                raise MatrixMarketError(f"asymmetric matrix: values differ at ({i + 1}, {j + 1})", ln)
            if i < j:
                triples.append((i, j, w))
        else:
            mirror = seen.get((j, i))
            if mirror is not None and mirror[0] != w:
                raise MatrixMarketError(f"conflicting entries at ({i + 1}, {j + 1})", ln)
            if mirror is None or i > j:
                triples.append((min(i, j), max(i, j), w))
    if self_loops:
        warnings.warn(SelfLoopWarning(self_loops), stacklevel=2)
    return UndirectedWeightedGraph.from_triples(n_rows, triples)


def read_matrix_market(path) -> UndirectedWeightedGraph:
    with open(path) as fh:
        return parse_matrix_market(fh)


def format_matrix_market(g: UndirectedWeightedGraph) -> str:
    """Serialize as a symmetric real MatrixMarket file (lower triangle, 1-based)."""
    out = ["%%MatrixMarket matrix coordinate real symmetric",
           f"{g.n_nodes} {g.n_nodes} {g.n_edges}"]
    out += [f"{j + 1} {i + 1} {w!r}" for i, j, w in g.edges.triples()]
    return "\n".join(out) + "\n"


def format_edge_list(edges: EdgeList, n_nodes: int | None = None) -> str:
    """``i j w`` lines, 0-based, with an optional ``# n_nodes`` header."""
    out = [] if n_nodes is None else [f"# n_nodes {n_nodes}"]
    out += [f"{i} {j} {w!r}" for i, j, w in edges.triples()]
    return "\n".join(out) + "\n"


def parse_edge_list(text: str | TextIO) -> tuple[EdgeList, int | None]:
    n_nodes = None
    triples = []
    for lineno, raw in enumerate(_lines(text), start=1):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            parts = s[1:].split()
            if len(parts) == 2 and parts[0] == "n_nodes":
                n_nodes = int(parts[1])
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"expected 'i j w', got {s!r}", lineno)
        try:
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise MatrixMarketError(f"non-numeric entry {s!r}", lineno) from None
    return EdgeList.from_triples(triples), n_nodes


def read_graph(path) -> UndirectedWeightedGraph:
    """Load ``.mtx`` as MatrixMarket, anything else as an ``i j w`` edge list."""
    path = Path(path)
    if path.suffix == ".mtx":
        return read_matrix_market(path)
    edges, n_nodes = parse_edge_list(path.read_text())
    if n_nodes is None:
        n_nodes = int(max(edges.src.max(), edges.dst.max())) + 1 if len(edges) else 1
    return UndirectedWeightedGraph.from_triples(n_nodes, edges.triples())


# ---------------------------------------------------------------------------
# Scaling, splitting, propagation operator
# ---------------------------------------------------------------------------

def normalize_weights(g: UndirectedWeightedGraph) -> UndirectedWeightedGraph:
    """Scale weights to (0, 1] by ``w / max(w)``; a no-op on already scaled graphs."""
    if g.n_edges == 0:
        raise ValueError("cannot normalize a graph without edges")
    if g.weight_scale is not None:
        return g
    w = g.edges.weight
    hi = float(w.max())
    if float(w.min()) == hi:
        raise ValueError("degenerate weight scale: all weights are equal")
    return UndirectedWeightedGraph(g.n_nodes, g.edges.with_weights(w / hi), (0.0, hi))


def split_edges(g: UndirectedWeightedGraph, seed: int) -> EdgeSplit:
    """Shuffle the edges into ten near-equal shards: 0-6 train, 7 validation, 8-9 test."""
    m = g.n_edges
    if m < N_SHARDS:
        raise ValueError(f"need at least {N_SHARDS} edges to split, got {m}")
    perm = np.random.default_rng(seed).permutation(m)
    shard = np.empty(m, dtype=np.int64)
    for k, idx in enumerate(np.array_split(perm, N_SHARDS)):
        shard[idx] = k

    def take(shards):
        return g.edges[np.flatnonzero(np.isin(shard, list(shards)))]

    return EdgeSplit(take(TRAIN_SHARDS), take(VALIDATION_SHARDS), take(TEST_SHARDS), seed, shard)


def split_from_manifest(g: UndirectedWeightedGraph, manifest: dict) -> EdgeSplit:
    shard = np.asarray(manifest["shard"], dtype=np.int64)
    if len(shard) != g.n_edges:
        raise ValueError("split manifest does not match the graph's edge count")

    def take(key):
        return g.edges[np.flatnonzero(np.isin(shard, manifest[key]))]

    return EdgeSplit(take("train_shards"), take("validation_shards"), take("test_shards"),
                     int(manifest["seed"]), shard)


def write_split(split: EdgeSplit, n_nodes: int, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("train", "validation", "test"):
        (out_dir / f"{name}.txt").write_text(format_edge_list(getattr(split, name), n_nodes))
    (out_dir / "split.json").write_text(json.dumps(split.manifest()) + "\n")


def build_normalized_adjacency(g: UndirectedWeightedGraph, train: EdgeList) -> NormalizedAdjacency:
    """Weighted symmetric normalization over training edges only, no self-loops."""
    n = g.n_nodes
    if len(train) and not np.all(np.isin(train.keys(n), g.edges.keys(n))):
        raise ValueError("training edges must be a subset of the graph's edges")
    deg = np.zeros(n)
    np.add.at(deg, train.src, train.weight)
    np.add.at(deg, train.dst, train.weight)
    if len(train):
        c = train.weight / np.sqrt(deg[train.src] * deg[train.dst])
    else:
        c = np.empty(0)
    rows = np.concatenate([train.src, train.dst])
    cols = np.concatenate([train.dst, train.src])
    matrix = sp.csr_matrix((np.concatenate([c, c]), (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    return NormalizedAdjacency(n, matrix, deg)
