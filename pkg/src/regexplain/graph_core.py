"""Core graph data model, edge-mask algebra, and dataset serialization.

Graphs are undirected, stored as dense symmetric {0,1} adjacencies with a
zero diagonal. Edge masks are symmetric [0,1] matrices supported on the
adjacency. All types are immutable after construction: their arrays are
frozen, so instances are safe to share across workers.

Edge order is upper-triangular row-major wherever edges are enumerated or
flattened; this pins tie-breaking and serialization byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConformanceError, DatasetFormatError, RangeError, ValidationError

GENERATOR_VERSION = "1"


def _fmt_real(x: float) -> str:
    """Serialize a float with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EdgeMask:
    """Symmetric matrix of per-edge weights in [0, 1]."""

    m: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"mask must be square, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise ValidationError("mask must be symmetric")
        if np.any(m.diagonal() != 0.0):
            raise ValidationError("mask diagonal must be zero")
        if m.size and (m.min() < 0.0 or m.max() > 1.0):
            raise ValidationError("mask entries must lie in [0, 1]")
        object.__setattr__(self, "m", _frozen(m))

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def edge_sum(self) -> float:
        """Sum of weights over the upper triangle (each edge counted once)."""
        return float(np.triu(self.m, 1).sum())

    def __eq__(self, other):
        return isinstance(other, EdgeMask) and np.array_equal(self.m, other.m)


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected graph with a real-valued regression label.

    x: (n, d) node features; a: (n, n) binary adjacency; gt_mask: optional
    ground-truth explanation mask supported on the adjacency.
    """

    x: np.ndarray
    a: np.ndarray
    label: float
    id: int = 0
    gt_mask: EdgeMask | None = None

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {a.shape}")
        if x.ndim != 2 or x.shape[0] != a.shape[0]:
            raise ValidationError(
                f"features must be (n, d) with n={a.shape[0]}, got shape {x.shape}"
            )
        if not np.array_equal(a, a.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(a.diagonal() != 0.0):
            raise ValidationError("adjacency diagonal must be zero")
        if not np.isin(a, (0.0, 1.0)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        if not np.isfinite(self.label):
            raise ValidationError("label must be finite")
        if self.gt_mask is not None:
            if self.gt_mask.n != a.shape[0]:
                raise ConformanceError(
                    f"gt mask is {self.gt_mask.n}x{self.gt_mask.n}, graph has n={a.shape[0]}"
                )
            if np.any((self.gt_mask.m > 0.0) & (a == 0.0)):
                raise ValidationError("gt mask has weight outside the adjacency support")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "label", float(self.label))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Existing edges as (i, j) with i < j, row-major order."""
        rows, cols = np.nonzero(np.triu(self.a, 1))
        return tuple((int(i), int(j)) for i, j in zip(rows, cols))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.id == other.id
            and self.label == other.label
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.x, other.x)
            and self.gt_mask == other.gt_mask
        )


@dataclass(frozen=True, eq=False)
class Explanation:
    """An edge mask for one graph plus its flat per-edge score list."""

    graph_id: int
    mask: EdgeMask
    scores: tuple[tuple[int, int, float], ...]

    @classmethod
    def from_mask(cls, graph: Graph, mask: EdgeMask) -> "Explanation":
        check_conforms(graph, mask)
        scores = tuple((i, j, float(mask.m[i, j])) for i, j in graph.edges)
        return cls(graph_id=graph.id, mask=mask, scores=scores)

    def score_vector(self) -> np.ndarray:
        return np.array([w for _, _, w in self.scores])

    def __eq__(self, other):
        return (
            isinstance(other, Explanation)
            and self.graph_id == other.graph_id
            and self.scores == other.scores
            and self.mask == other.mask
        )


@dataclass(frozen=True)
class Splits:
    """Disjoint index lists: GNN train, explainer train, explainer test."""

    train: tuple[int, ...]
    explainer_train: tuple[int, ...]
    explainer_test: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(int(i) for i in self.train))
        object.__setattr__(self, "explainer_train", tuple(int(i) for i in self.explainer_train))
        object.__setattr__(self, "explainer_test", tuple(int(i) for i in self.explainer_test))
        everything = self.train + self.explainer_train + self.explainer_test
        if len(set(everything)) != len(everything):
            raise ValidationError("split index lists must be disjoint")

    def as_dict(self) -> dict:
        return {
            "train": list(self.train),
            "explainer_train": list(self.explainer_train),
            "explainer_test": list(self.explainer_test),
        }


def make_splits(n_graphs: int, seed: int, ratios=(8, 1, 1)) -> Splits:
    """Shuffle indices by seed and cut into the three splits (default 8:1:1)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5917])))
    idx = rng.permutation(n_graphs)
    total = float(sum(ratios))
    n_train = int(round(n_graphs * ratios[0] / total))
    n_etrain = int(round(n_graphs * ratios[1] / total))
    return Splits(
        train=tuple(int(i) for i in idx[:n_train]),
        explainer_train=tuple(int(i) for i in idx[n_train : n_train + n_etrain]),
        explainer_test=tuple(int(i) for i in idx[n_train + n_etrain :]),
    )


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """An ordered collection of graphs with train/explain splits."""

    graphs: tuple[Graph, ...]
    splits: Splits
    name: str = ""
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        all_idx = self.splits.train + self.splits.explainer_train + self.splits.explainer_test
        if any(i < 0 or i >= len(self.graphs) for i in all_idx):
            raise ValidationError("split index out of range")

    def __len__(self):
        return len(self.graphs)

    def subset(self, which: str) -> list[Graph]:
        return [self.graphs[i] for i in getattr(self.splits, which)]

    def by_id(self, graph_id: int) -> Graph:
        for g in self.graphs:
            if g.id == graph_id:
                return g
        raise KeyError(f"no graph with id {graph_id}")

    def __eq__(self, other):
        return (
            isinstance(other, GraphDataset)
            and self.name == other.name
            and self.seed == other.seed
            and self.splits == other.splits
            and len(self.graphs) == len(other.graphs)
            and all(a == b for a, b in zip(self.graphs, other.graphs))
        )


def check_conforms(g: Graph, mask: EdgeMask) -> None:
    """Raise unless the mask matches the graph's size and edge support."""
    if mask.n != g.n:
        raise ConformanceError(f"mask is {mask.n}x{mask.n}, graph has n={g.n}")
    if np.any((mask.m > 0.0) & (g.a == 0.0)):
        raise ConformanceError("mask has weight on a non-existent edge")


def ones_mask(g: Graph) -> EdgeMask:
    """The identity mask: weight 1 on every existing edge."""
    return EdgeMask(g.a.copy())


def zeros_mask(g: Graph) -> EdgeMask:
    return EdgeMask(np.zeros((g.n, g.n)))


def mask_from_edge_weights(g: Graph, weights) -> EdgeMask:
    """Scatter per-edge weights (ordered like g.edges) into a symmetric mask."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (g.num_edges,):
        raise ConformanceError(
            f"expected {g.num_edges} edge weights, got shape {weights.shape}"
        )
    m = np.zeros((g.n, g.n))
    for (i, j), w in zip(g.edges, weights):
        m[i, j] = m[j, i] = w
    return EdgeMask(m)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average a square matrix with its transpose."""
    m = np.asarray(m, dtype=np.float64)
    return (m + m.T) / 2.0


def apply_mask(g: Graph, mask: EdgeMask) -> np.ndarray:
    """Element-wise product of adjacency and mask: the weighted adjacency."""
    check_conforms(g, mask)
    return g.a * mask.m


def residual_mask(g: Graph, m_star: EdgeMask) -> EdgeMask:
    """Complement of a mask on the graph's edges: (1 - m*) on edges, 0 off."""
    check_conforms(g, m_star)
    return EdgeMask(g.a * (1.0 - m_star.m))


def threshold_topk(expl: Explanation, k: int) -> set[tuple[int, int]]:
    """The k highest-weighted edges; ties resolved by (i, j) order."""
    if k <= 0:
        raise RangeError(f"k must be positive, got {k}")
    if k > len(expl.scores):
        raise RangeError(f"k={k} exceeds edge count {len(expl.scores)}")
    ranked = sorted(expl.scores, key=lambda e: (-e[2], e[0], e[1]))
    return {(i, j) for i, j, _ in ranked[:k]}


def topk_mask(g: Graph, expl: Explanation, k: int) -> EdgeMask:
    """Binary mask keeping only the top-k edges of an explanation."""
    keep = threshold_topk(expl, k)
    m = np.zeros((g.n, g.n))
    for i, j in keep:
        m[i, j] = m[j, i] = 1.0
    return EdgeMask(m)


# ---------------------------------------------------------------------------
# Dataset file format: line-delimited JSON, one record per graph, preceded by
# a header record. Reals carry 17 significant digits so round-trips are exact.
# ---------------------------------------------------------------------------


def graph_record(g: Graph, node_weights=None) -> str:
    """One JSON line for a graph; optional per-node weights ride along."""
    xs = ",".join(_fmt_real(v) for v in g.x.ravel())
    edges = ",".join(f"[{i},{j}]" for i, j in g.edges)
    if g.gt_mask is None:
        gt = "null"
    else:
        gt = "[" + ",".join(
            f"[{i},{j},{_fmt_real(g.gt_mask.m[i, j])}]"
            for i, j in g.edges
            if g.gt_mask.m[i, j] != 0.0
        ) + "]"
    rec = (
        f'{{"id":{g.id},"n":{g.n},"d":{g.d},"label":{_fmt_real(g.label)},'
        f'"x":[{xs}],"edges":[{edges}],"gt_edges":{gt}'
    )
    if node_weights is not None:
        ws = ",".join(_fmt_real(w) for w in node_weights)
        rec += f',"node_weights":[{ws}]'
    return rec + "}"


def header_record(name: str, seed: int, splits: Splits) -> str:
    return json.dumps(
        {
            "dataset_name": name,
            "seed": seed,
            "generator_version": GENERATOR_VERSION,
            "splits": splits.as_dict(),
        },
        separators=(",", ":"),
    )


def write_dataset(ds: GraphDataset, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header_record(ds.name, ds.seed, ds.splits) + "\n")
        for g in ds.graphs:
            fh.write(graph_record(g) + "\n")


def _parse_graph_record(rec: dict, lineno: int) -> tuple[Graph, list | None]:
    def fail(msg):
        raise DatasetFormatError(f"line {lineno}: {msg}")

    for key in ("id", "n", "d", "label", "x", "edges", "gt_edges"):
        if key not in rec:
            fail(f"missing field {key!r}")
    n, d = rec["n"], rec["d"]
    if not (isinstance(n, int) and n > 0 and isinstance(d, int) and d > 0):
        fail(f"n and d must be positive integers, got n={n!r} d={d!r}")
    x = np.asarray(rec["x"], dtype=np.float64)
    if x.size != n * d:
        fail(f"x has {x.size} entries, expected n*d={n * d}")
    a = np.zeros((n, n))
    for e in rec["edges"]:
        if len(e) != 2 or not all(isinstance(v, int) and 0 <= v < n for v in e):
            fail(f"bad edge {e!r} for n={n}")
        i, j = e
        if i == j:
            fail(f"self-loop edge {e!r}")
        a[i, j] = a[j, i] = 1.0
    gt = None
    if rec["gt_edges"] is not None:
        m = np.zeros((n, n))
        for e in rec["gt_edges"]:
            if len(e) != 3:
                fail(f"bad gt edge {e!r}")
            i, j, w = e
            if not (isinstance(i, int) and isinstance(j, int) and 0 <= i < n and 0 <= j < n):
                fail(f"bad gt edge endpoints {e!r}")
            if a[i, j] == 0.0:
                fail(f"gt edge ({i},{j}) not in adjacency")
            m[i, j] = m[j, i] = float(w)
        try:
            gt = EdgeMask(m)
        except ValidationError as exc:
            fail(f"invalid gt mask: {exc}")
    node_weights = rec.get("node_weights")
    if node_weights is not None and len(node_weights) != n:
        fail(f"node_weights has {len(node_weights)} entries, expected n={n}")
    try:
        graph = Graph(x=x.reshape(n, d), a=a, label=float(rec["label"]), id=int(rec["id"]), gt_mask=gt)
    except (ValidationError, ConformanceError) as exc:
        fail(str(exc))
    return graph, node_weights


def read_dataset(path, with_node_weights: bool = False):
    """Read a dataset file; inverse of write_dataset.

    With with_node_weights=True returns (dataset, list-of-weight-lists) so
    loaders can run integrity checks against the per-node scalars.
    """
    graphs, weights = [], []
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file, expected a header record")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: not valid JSON ({exc.msg})") from exc
    for key in ("dataset_name", "seed", "generator_version", "splits"):
        if key not in header:
            raise DatasetFormatError(f"line 1: header missing field {key!r}")
    sp = header["splits"]
    try:
        splits = Splits(
            train=sp["train"],
            explainer_train=sp["explainer_train"],
            explainer_test=sp["explainer_test"],
        )
    except (KeyError, TypeError, ValidationError) as exc:
        raise DatasetFormatError(f"line 1: bad splits record ({exc})") from exc
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {lineno}: not valid JSON ({exc.msg})") from exc
        g, w = _parse_graph_record(rec, lineno)
        graphs.append(g)
        weights.append(w)
    ds = GraphDataset(
        graphs=tuple(graphs),
        splits=splits,
        name=header["dataset_name"],
        seed=int(header["seed"]),
    )
    if with_node_weights:
        return ds, weights
    return ds
