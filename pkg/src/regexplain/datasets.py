"""Benchmark dataset generators and the preprocessed-file loader.

Three synthetic families are generated here: a BA graph with one house motif
whose feature mass is the label (volume), a padded BA graph with a variable
number of house motifs counted by the label (counting), and Erdos-Renyi
graphs labeled by triangle count. The fourth family (molecule graphs with
per-node contribution weights) is loaded from a preprocessed file; this
module never touches chemistry.

Every generator is a pure function of its config: per-graph RNG streams are
derived from (seed, graph index), so generation is deterministic regardless
of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataIntegrityError, ValidationError
from .graph_core import EdgeMask, Graph, GraphDataset, make_splits, read_dataset

# House motif: the 5-cycle 0-1-2-3-4-0 plus the roof cross edge (1, 4).
HOUSE_EDGES = ((0, 1), (0, 4), (1, 2), (1, 4), (2, 3), (3, 4))
MOTIF_SIZE = 5


@dataclass(frozen=True)
class GenConfig:
    """Knobs shared by the synthetic generators.

    base_size is the BA base node count for the volume dataset; the counting
    dataset draws its base size from counting_base_range instead (then pads
    every graph to pad_to with isolated nodes). er_nodes/er_prob parameterize
    the triangle dataset.
    """

    n_graphs: int = 1000
    seed: int = 0
    base_size: int = 20
    motif_size: int = MOTIF_SIZE
    feature_dim: int = 10
    pad_to: int = 70
    motif_count_range: tuple[int, int] = (1, 10)
    counting_base_range: tuple[int, int] = (10, 40)
    er_nodes: int = 30
    er_prob: float = 0.2

    def __post_init__(self):
        for name in ("n_graphs", "base_size", "motif_size", "feature_dim", "pad_to", "er_nodes"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0.0 < self.er_prob < 1.0):
            raise ValidationError(f"er_prob must be in (0, 1), got {self.er_prob}")
        lo, hi = self.motif_count_range
        if not (0 < lo <= hi):
            raise ValidationError(f"bad motif_count_range {self.motif_count_range}")
        blo, bhi = self.counting_base_range
        if not (0 < blo <= bhi):
            raise ValidationError(f"bad counting_base_range {self.counting_base_range}")
        if self.pad_to < self.base_size + self.motif_size * hi:
            raise ValidationError(
                f"pad_to={self.pad_to} too small for base_size={self.base_size} "
                f"plus {hi} motifs of {self.motif_size} nodes"
            )
        if self.pad_to < blo + self.motif_size * lo:
            raise ValidationError("pad_to too small for even the smallest counting graph")


def _graph_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _ba_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Barabasi-Albert tree (attachment parameter 1) via the repeated-node urn."""
    if n < 2:
        return []
    edges = [(0, 1)]
    urn = [0, 1]
    for v in range(2, n):
        target = int(urn[rng.integers(len(urn))])
        edges.append((target, v))
        urn.extend((target, v))
    return edges


def _adjacency(n: int, edges) -> np.ndarray:
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    return a


def _attach_motifs(base_n: int, k: int, rng: np.random.Generator):
    """Place k house motifs after the base nodes, each tied by one random edge.

    Returns (motif_edges, attachment_edges, motif_node_lists).
    """
    motif_edges, attach_edges, node_lists = [], [], []
    for t in range(k):
        offset = base_n + MOTIF_SIZE * t
        nodes = list(range(offset, offset + MOTIF_SIZE))
        motif_edges.extend((offset + i, offset + j) for i, j in HOUSE_EDGES)
        anchor = int(rng.integers(base_n))
        port = offset + int(rng.integers(MOTIF_SIZE))
        attach_edges.append((anchor, port))
        node_lists.append(nodes)
    return motif_edges, attach_edges, node_lists


def _gt_from_edges(n: int, edges) -> EdgeMask:
    return EdgeMask(_adjacency(n, edges))


def gen_ba_motif_volume(cfg: GenConfig) -> GraphDataset:
    """BA base + one house motif; label = sum of features on motif nodes.

    Node features are uniform reals in [0, 100]. Ground truth marks the six
    motif-internal edges; the attachment edge is excluded.
    """
    graphs = []
    for idx in range(cfg.n_graphs):
        rng = _graph_rng(cfg.seed, idx)
        n = cfg.base_size + cfg.motif_size
        edges = _ba_edges(cfg.base_size, rng)
        motif_edges, attach_edges, node_lists = _attach_motifs(cfg.base_size, 1, rng)
        x = rng.uniform(0.0, 100.0, size=(n, cfg.feature_dim))
        label = float(x[node_lists[0]].sum())
        graphs.append(
            Graph(
                x=x,
                a=_adjacency(n, edges + motif_edges + attach_edges),
                label=label,
                id=idx,
                gt_mask=_gt_from_edges(n, motif_edges),
            )
        )
    return GraphDataset(
        graphs=tuple(graphs),
        splits=make_splits(cfg.n_graphs, cfg.seed),
        name="ba_motif_volume",
        seed=cfg.seed,
    )


def gen_ba_motif_counting(cfg: GenConfig) -> GraphDataset:
    """Variable-size BA base + k house motifs, padded to a fixed node count.

    Features are all-ones; the label is k. The base size is drawn from
    counting_base_range, clipped so base + 5k fits inside pad_to; padding
    nodes are isolated so they cannot change the label.
    """
    graphs = []
    lo_k, hi_k = cfg.motif_count_range
    lo_b, hi_b = cfg.counting_base_range
    for idx in range(cfg.n_graphs):
        rng = _graph_rng(cfg.seed, idx)
        k = int(rng.integers(lo_k, hi_k + 1))
        max_base = cfg.pad_to - cfg.motif_size * k
        base_n = int(rng.integers(lo_b, min(hi_b, max_base) + 1))
        edges = _ba_edges(base_n, rng)
        motif_edges, attach_edges, _ = _attach_motifs(base_n, k, rng)
        x = np.ones((cfg.pad_to, cfg.feature_dim))
        graphs.append(
            Graph(
                x=x,
                a=_adjacency(cfg.pad_to, edges + motif_edges + attach_edges),
                label=float(k),
                id=idx,
                gt_mask=_gt_from_edges(cfg.pad_to, motif_edges),
            )
        )
    return GraphDataset(
        graphs=tuple(graphs),
        splits=make_splits(cfg.n_graphs, cfg.seed),
        name="ba_motif_counting",
        seed=cfg.seed,
    )


def count_triangles(g: Graph) -> int:
    """Exact triangle count by triple enumeration (kernel-backed)."""
    return int(_kernels.count_triangles(g.a))


def count_triangles_trace(g: Graph) -> int:
    """Second, independent triangle count: trace(A^3) / 6."""
    a = g.a
    return int(round(np.trace(a @ a @ a) / 6.0))


def triangle_edges_mask(g: Graph) -> EdgeMask:
    """Binary mask of edges that belong to at least one triangle."""
    a = g.a
    common = a @ a
    return EdgeMask(((common > 0.0) & (a > 0.0)).astype(np.float64))


def gen_triangles(cfg: GenConfig) -> GraphDataset:
    """Erdos-Renyi graphs labeled by triangle count.

    Features are all-ones; ground truth marks every edge covered by at least
    one triangle (the label-determining structure, binarized for edge AUC).
    """
    graphs = []
    for idx in range(cfg.n_graphs):
        rng = _graph_rng(cfg.seed, idx)
        n = cfg.er_nodes
        upper = rng.random((n, n)) < cfg.er_prob
        a = np.triu(upper, 1).astype(np.float64)
        a = a + a.T
        common = a @ a
        gt = EdgeMask(((common > 0.0) & (a > 0.0)).astype(np.float64))
        graphs.append(
            Graph(
                x=np.ones((n, cfg.feature_dim)),
                a=a,
                label=float(_kernels.count_triangles(a)),
                id=idx,
                gt_mask=gt,
            )
        )
    return GraphDataset(
        graphs=tuple(graphs),
        splits=make_splits(cfg.n_graphs, cfg.seed),
        name="triangles",
        seed=cfg.seed,
    )


def load_crippen(path) -> GraphDataset:
    """Load a preprocessed molecule file in the shared dataset format.

    Each record must carry per-node contribution weights, one-hot node
    features, and ground-truth edge weights equal to the mean of the two
    endpoint weights (checked to 1e-9).
    """
    ds, weights = read_dataset(path, with_node_weights=True)
    for g, w in zip(ds.graphs, weights):
        if w is None:
            raise DataIntegrityError(f"graph {g.id}: record is missing node_weights")
        if g.gt_mask is None:
            raise DataIntegrityError(f"graph {g.id}: record is missing gt_edges")
        w = np.asarray(w, dtype=np.float64)
        onehot = np.isin(g.x, (0.0, 1.0)).all() and np.all(g.x.sum(axis=1) == 1.0)
        if not onehot:
            raise DataIntegrityError(f"graph {g.id}: features are not one-hot atom types")
        for i, j in g.edges:
            expected = (w[i] + w[j]) / 2.0
            got = g.gt_mask.m[i, j]
            if abs(got - expected) > 1e-9:
                raise DataIntegrityError(
                    f"graph {g.id}: gt weight at edge ({i},{j}) is {got!r}, "
                    f"expected endpoint mean {expected!r}"
                )
    return ds


def gen_crippen_like(cfg: GenConfig, n_atom_types: int = 8) -> tuple[GraphDataset, list]:
    """Synthetic stand-in with the Crippen file's structure (no chemistry).

    Random connected graphs, one-hot atom-type features, per-node weights in
    [0, 1], gt edge weights equal to endpoint means, label = sum of weights.
    Returns (dataset, node_weight_lists) ready for write_crippen_file.
    """
    graphs, all_weights = [], []
    for idx in range(cfg.n_graphs):
        rng = _graph_rng(cfg.seed, idx)
        n = int(rng.integers(5, 19))
        edges = _ba_edges(n, rng)
        extra = rng.integers(0, n // 3 + 1)
        existing = set(edges)
        for _ in range(int(extra)):
            i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
            if (i, j) not in existing:
                existing.add((i, j))
                edges.append((i, j))
        a = _adjacency(n, edges)
        types = rng.integers(0, n_atom_types, size=n)
        x = np.zeros((n, n_atom_types))
        x[np.arange(n), types] = 1.0
        w = rng.uniform(0.0, 1.0, size=n)
        m = np.zeros((n, n))
        for i, j in edges:
            m[i, j] = m[j, i] = (w[i] + w[j]) / 2.0
        graphs.append(
            Graph(x=x, a=a, label=float(w.sum()), id=idx, gt_mask=EdgeMask(m))
        )
        all_weights.append(w.tolist())
    ds = GraphDataset(
        graphs=tuple(graphs),
        splits=make_splits(cfg.n_graphs, cfg.seed),
        name="crippen",
        seed=cfg.seed,
    )
    return ds, all_weights


def write_crippen_file(path, ds: GraphDataset, node_weights) -> None:
    """Write a dataset plus per-node weights in the preprocessed-file format."""
    from .graph_core import graph_record, header_record

    with open(path, "w", encoding="ascii") as fh:
        fh.write(header_record(ds.name, ds.seed, ds.splits) + "\n")
        for g, w in zip(ds.graphs, node_weights):
            fh.write(graph_record(g, node_weights=w) + "\n")


GENERATORS = {
    "ba_motif_volume": gen_ba_motif_volume,
    "ba_motif_counting": gen_ba_motif_counting,
    "triangles": gen_triangles,
}


def generate(name: str, cfg: GenConfig) -> GraphDataset:
    if name not in GENERATORS:
        raise ValidationError(f"unknown dataset {name!r}; choices: {sorted(GENERATORS)}")
    return GENERATORS[name](cfg)


def label_stats(ds: GraphDataset) -> dict:
    labels = np.array([g.label for g in ds.graphs])
    return {
        "name": ds.name,
        "seed": ds.seed,
        "n_graphs": len(ds.graphs),
        "label_min": float(labels.min()),
        "label_mean": float(labels.mean()),
        "label_max": float(labels.max()),
    }
