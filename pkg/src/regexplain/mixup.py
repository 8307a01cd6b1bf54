"""Block-merge mix-up: a target's explanation plus a partner's remainder.

The merged graph stacks the two node sets; its adjacency is the block matrix
[[A_a, C], [C^T, A_b]] with eta sampled cross connections C, and its mask is
[[M_a*, M_conn], [M_conn^T, 1 - M_b*]] where the bottom-right complement is
taken on the partner's existing edges. Feeding A_merged * M_merged to the
GNN evaluates the target's explanation inside an in-distribution topology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _autodiff as ad
from .errors import ConformanceError, RangeError, SamplingError, ValidationError
from .gnn import GcnModel, gcn_forward
from .graph_core import EdgeMask, Graph, GraphDataset, check_conforms


@dataclass(frozen=True)
class MixupResult:
    """The merged graph with provenance maps back into the two inputs."""

    merged: Graph
    mask: EdgeMask
    index_map_a: tuple[int, ...]
    index_map_b: tuple[int, ...]
    conn_edges: tuple[tuple[int, int], ...]

    def weighted_adjacency(self) -> np.ndarray:
        return self.merged.a * self.mask.m


def _eta_count(eta_fraction: float, num_edges_a: int) -> int:
    if eta_fraction < 0:
        raise ValidationError(f"eta_fraction must be >= 0, got {eta_fraction}")
    return max(1, round(eta_fraction * num_edges_a))


def sample_cross_edges(na: int, nb: int, eta: int, rng: np.random.Generator):
    """eta distinct (u, v) pairs, u in the first block, v in the second."""
    if eta > na * nb:
        raise RangeError(f"eta={eta} exceeds the {na * nb} possible cross pairs")
    flat = rng.choice(na * nb, size=eta, replace=False)
    pairs = sorted((int(p // nb), int(na + p % nb)) for p in flat)
    return tuple(pairs)


def merged_edge_index(ga: Graph, gb: Graph, conn_edges):
    """Row/col index arrays over the merged graph for scatter construction.

    Order: target edges, partner edges shifted by na, then cross edges --
    matching the value layout mixup_weights produces.
    """
    na = ga.n
    rows = [i for i, _ in ga.edges] + [i + na for i, _ in gb.edges] + [u for u, _ in conn_edges]
    cols = [j for _, j in ga.edges] + [j + na for _, j in gb.edges] + [v for _, v in conn_edges]
    return np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp)


def mixup_weights(wa, wb, n_conn: int, conn_weight: float = 1.0):
    """Per-edge weights of the merged mask: [w_a, 1 - w_b, conn_weight...].

    wa/wb may be Vars (training) or arrays; ordering matches merged_edge_index.
    """
    return ad.concat([wa, ad.sub(1.0, wb), np.full(n_conn, conn_weight)])


def mixup_graphs(
    ga: Graph,
    ma_star: EdgeMask,
    gb: Graph,
    mb_star: EdgeMask,
    eta_fraction: float = 0.03,
    rng_seed: int = 0,
    conn_weight: float = 1.0,
) -> MixupResult:
    """Merge ga's explanation block with gb's residual block.

    eta = max(1, round(eta_fraction * |E_a|)) cross edges are sampled
    uniformly without replacement between the node sets and carry mask weight
    conn_weight. The merged graph keeps ga's label and id.
    """
    check_conforms(ga, ma_star)
    check_conforms(gb, mb_star)
    if ga.d != gb.d:
        raise ConformanceError(f"feature dims differ: {ga.d} vs {gb.d}")
    na, nb = ga.n, gb.n
    n = na + nb
    eta = _eta_count(eta_fraction, ga.num_edges)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(rng_seed), 0xA11])))
    conn = sample_cross_edges(na, nb, eta, rng)

    adj = np.zeros((n, n))
    adj[:na, :na] = ga.a
    adj[na:, na:] = gb.a
    mask = np.zeros((n, n))
    mask[:na, :na] = ma_star.m
    mask[na:, na:] = gb.a * (1.0 - mb_star.m)
    for u, v in conn:
        adj[u, v] = adj[v, u] = 1.0
        mask[u, v] = mask[v, u] = conn_weight

    merged = Graph(
        x=np.vstack([ga.x, gb.x]),
        a=adj,
        label=ga.label,
        id=ga.id,
    )
    return MixupResult(
        merged=merged,
        mask=EdgeMask(mask),
        index_map_a=tuple(range(na)),
        index_map_b=tuple(range(na, n)),
        conn_edges=conn,
    )


def order_by_similarity(h_target, gb: Graph, hb, gc: Graph, hc):
    """Order two candidates into (positive, negative) by embedding dot product.

    Ties go to the smaller graph id.
    """
    sim_b = float(np.dot(h_target, hb))
    sim_c = float(np.dot(h_target, hc))
    if sim_b > sim_c or (sim_b == sim_c and gb.id < gc.id):
        return (gb, hb), (gc, hc)
    return (gc, hc), (gb, hb)


def sample_neighbors(
    target: Graph, ds: GraphDataset, model: GcnModel, rng_seed: int = 0
) -> tuple[Graph, Graph]:
    """Draw two distinct explainer-train graphs and order them by similarity.

    Similarity is the dot product of unmasked GNN embeddings; the closer
    candidate is returned first (the positive neighbor).
    """
    pool = [g for g in ds.subset("explainer_train") if g.id != target.id]
    if len(pool) < 2:
        raise SamplingError(
            f"need at least 2 candidates besides the target, have {len(pool)}"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(rng_seed), 0xB22])))
    gi, gj = rng.choice(len(pool), size=2, replace=False)
    gb, gc = pool[int(gi)], pool[int(gj)]
    h_t = gcn_forward(model, target)[1]
    hb = gcn_forward(model, gb)[1]
    hc = gcn_forward(model, gc)[1]
    (g_pos, _), (g_neg, _) = order_by_similarity(h_t, gb, hb, gc, hc)
    return g_pos, g_neg
