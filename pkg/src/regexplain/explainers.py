"""Five post-hoc explainers mapping (model, graph) to an edge-mask Explanation.

Three of them share one parameterized backbone: an MLP scoring each existing
edge from the concatenated endpoint node states plus the graph embedding of
the frozen GNN. They differ only in the training objective:

  pgexplainer     size + beta * MSE(f(G*), Y)
  mixupexplainer  size + beta * MSE(f(G_mix), Y), one random partner per graph
  regexplainer    size + alpha * InfoNCE + beta * MSE(f(G), f(G_mix+)),
                  positive/negative partners ordered by embedding similarity

The remaining two need no training network: grad scores edges by the
magnitude of the prediction-loss gradient, and gnnexplainer optimizes a
per-instance logit for every edge.

All randomness is drawn from streams keyed by (seed, epoch, graph index,
purpose), so runs are bit-reproducible and per-graph work is independent of
loop order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _autodiff as ad
from ._optim import Adam
from .errors import NumericError, SamplingError, TrainingError, ValidationError
from .gnn import GcnModel, forward_weighted, gcn_node_states
from .graph_core import (
    EdgeMask,
    Explanation,
    Graph,
    GraphDataset,
    _fmt_real,
    mask_from_edge_weights,
    symmetrize,
)
from .losses import LossWeights, info_nce_loss, mse_loss, overall_loss, size_loss
from .mixup import merged_edge_index, mixup_weights, order_by_similarity, sample_cross_edges

EXPLAINER_KINDS = ("grad", "gnnexplainer", "pgexplainer", "mixupexplainer", "regexplainer")
ABLATIONS = ("no_mix", "no_nce", "no_mse")

# purpose tags for derived RNG streams
_NOISE_TARGET, _NOISE_POS, _NOISE_NEG, _NEIGHBORS, _CONN_POS, _CONN_NEG, _PARTNER = range(7)


@dataclass
class ExplainerConfig:
    kind: str = "regexplainer"
    epochs: int = 100
    learning_rate: float = 0.003
    loss_weights: LossWeights = field(default_factory=LossWeights)
    eta_fraction: float = 0.03
    seed: int = 0
    temp_start: float = 5.0
    temp_end: float = 1.0
    ablation: frozenset = frozenset()
    pg_hidden: int = 64
    sign_mode: str = "as_derived"
    update_per_graph: bool = False

    def __post_init__(self):
        if self.kind not in EXPLAINER_KINDS:
            raise ValidationError(f"unknown explainer kind {self.kind!r}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.eta_fraction < 0:
            raise ValidationError(f"eta_fraction must be >= 0, got {self.eta_fraction}")
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        bad = self.ablation - set(ABLATIONS)
        if bad:
            raise ValidationError(f"unknown ablation switches {sorted(bad)}")


@dataclass
class PgNetwork:
    """Edge-scoring MLP over [z_i; z_j; graph embedding]."""

    params: dict
    hidden: int
    embed_dim: int


def init_pg_network(embed_dim: int, hidden: int = 64, seed: int = 0) -> PgNetwork:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x961])))

    def glorot(n_in, n_out):
        span = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-span, span, size=(n_in, n_out))

    params = {
        "pw1": glorot(3 * embed_dim, hidden),
        "pb1": np.zeros(hidden),
        "pw2": glorot(hidden, 1)[:, 0],
        "pb2": np.zeros(()),
    }
    return PgNetwork(params=params, hidden=hidden, embed_dim=embed_dim)


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def _edge_features(model: GcnModel, g: Graph) -> np.ndarray:
    """(num_edges, 3h) rows of [z_i, z_j, graph_embedding], edges in i<j order."""
    z, emb = gcn_node_states(model, g)
    if g.num_edges == 0:
        return np.zeros((0, 3 * z.shape[1]))
    ii = np.array([i for i, _ in g.edges])
    jj = np.array([j for _, j in g.edges])
    return np.hstack([z[ii], z[jj], np.tile(emb, (g.num_edges, 1))])


def _pg_logits(params, feats):
    hidden = ad.relu(ad.add(ad.matmul(feats, params["pw1"]), params["pb1"]))
    return ad.add(ad.matmul(hidden, params["pw2"]), params["pb2"])


def _concrete_weights(logits, temperature: float, rng: np.random.Generator):
    """Concrete relaxation: logistic noise on the logits, squashed at temperature."""
    n = ad.value_of(logits).shape[0]
    eps = rng.uniform(1e-12, 1.0 - 1e-12, size=n)
    noise = np.log(eps) - np.log1p(-eps)
    return ad.sigmoid(ad.mul(ad.add(logits, noise), 1.0 / temperature))


def _scatter_mask(g: Graph, weights):
    """Per-edge weights to a weighted adjacency over g (A * M collapses to M)."""
    rows = np.array([i for i, _ in g.edges], dtype=np.intp)
    cols = np.array([j for _, j in g.edges], dtype=np.intp)
    return ad.scatter_symmetric(weights, rows, cols, g.n)


class _GraphContext:
    """Per-graph constants reused across epochs of one training run."""

    def __init__(self, model: GcnModel, g: Graph):
        self.graph = g
        self.feats = _edge_features(model, g)
        pred, emb = forward_weighted(model, g.x, g.a)
        self.pred = float(ad.value_of(pred))
        self.emb = np.asarray(ad.value_of(emb))


def _temperature(cfg: ExplainerConfig, epoch: int) -> float:
    if cfg.epochs <= 1:
        return cfg.temp_end
    frac = epoch / (cfg.epochs - 1)
    return cfg.temp_start + (cfg.temp_end - cfg.temp_start) * frac


def _pick_two(pool_size: int, skip: int, rng: np.random.Generator) -> tuple[int, int]:
    choices = [i for i in range(pool_size) if i != skip]
    if len(choices) < 2:
        raise SamplingError(
            f"need at least 2 other graphs in the explainer-train split, have {len(choices)}"
        )
    a, b = rng.choice(len(choices), size=2, replace=False)
    return choices[int(a)], choices[int(b)]


def _graph_loss(model, cfg, mode, pvars, contexts, idx, epoch):
    """Build the differentiable loss for one graph under the given mode."""
    ctx = contexts[idx]
    g = ctx.graph
    w = cfg.loss_weights
    tau = _temperature(cfg, epoch)
    logits = _pg_logits(pvars, ctx.feats)
    wt = _concrete_weights(logits, tau, _rng(cfg.seed, epoch, idx, _NOISE_TARGET))
    pred_star, h_star = forward_weighted(model, g.x, _scatter_mask(g, wt))
    l_size = size_loss(ad.sum(wt), h_star, w.gamma)

    if mode == "pgexplainer":
        return ad.add(l_size, ad.mul(mse_loss(pred_star, g.label), w.beta))

    if mode == "mixupexplainer":
        pool = [i for i in range(len(contexts)) if i != idx]
        if not pool:
            raise SamplingError("mixupexplainer needs at least one partner graph")
        pi = pool[int(_rng(cfg.seed, epoch, idx, _PARTNER).integers(len(pool)))]
        pred_mix, _ = _mixup_forward(model, cfg, pvars, contexts, idx, wt, pi, epoch, _NOISE_POS, _CONN_POS)
        return ad.add(l_size, ad.mul(mse_loss(pred_mix, g.label), w.beta))

    # regexplainer
    abl = cfg.ablation
    need_neighbors = not ({"no_mix", "no_nce"} <= abl)
    nce = 0.0
    if need_neighbors:
        bi, ci = _pick_two(len(contexts), idx, _rng(cfg.seed, epoch, idx, _NEIGHBORS))
        (g_pos_ctx, h_pos), (g_neg_ctx, h_neg) = order_by_similarity(
            ctx.emb, contexts[bi].graph, contexts[bi].emb, contexts[ci].graph, contexts[ci].emb
        )
        pos_idx = bi if g_pos_ctx is contexts[bi].graph else ci
        neg_idx = ci if pos_idx == bi else bi
    if "no_mix" in abl:
        h_mix_pos, pred_mix_pos = h_star, pred_star
        h_mix_neg = h_star
    else:
        pred_mix_pos, h_mix_pos = _mixup_forward(
            model, cfg, pvars, contexts, idx, wt, pos_idx, epoch, _NOISE_POS, _CONN_POS
        )
        _, h_mix_neg = _mixup_forward(
            model, cfg, pvars, contexts, idx, wt, neg_idx, epoch, _NOISE_NEG, _CONN_NEG
        )
    if "no_nce" not in abl:
        nce = info_nce_loss(h_mix_pos, h_mix_neg, ctx.emb, h_pos, h_neg)
    mse = 0.0 if "no_mse" in abl else mse_loss(ctx.pred, pred_mix_pos)
    return overall_loss(l_size, nce, mse, w, cfg.sign_mode)


def _mixup_forward(model, cfg, pvars, contexts, idx, w_target, partner_idx, epoch, noise_tag, conn_tag):
    """Forward the block-merged graph built from live mask weights."""
    ga = contexts[idx].graph
    pctx = contexts[partner_idx]
    gb = pctx.graph
    tau = _temperature(cfg, epoch)
    logits_b = _pg_logits(pvars, pctx.feats)
    w_partner = _concrete_weights(logits_b, tau, _rng(cfg.seed, epoch, idx, noise_tag))
    eta = max(1, round(cfg.eta_fraction * ga.num_edges))
    conn = sample_cross_edges(ga.n, gb.n, eta, _rng(cfg.seed, epoch, idx, conn_tag))
    rows, cols = merged_edge_index(ga, gb, conn)
    vals = mixup_weights(w_target, w_partner, len(conn))
    wadj = ad.scatter_symmetric(vals, rows, cols, ga.n + gb.n)
    return forward_weighted(model, np.vstack([ga.x, gb.x]), wadj)


def _train_pg_family(model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig, mode: str) -> PgNetwork:
    split = ds.subset("explainer_train")
    if not split:
        raise TrainingError("explainer-train split is empty")
    contexts = [_GraphContext(model, g) for g in split]
    net = init_pg_network(model.hidden_dim, cfg.pg_hidden, cfg.seed)
    opt = Adam(net.params, cfg.learning_rate)
    for epoch in range(cfg.epochs):
        accum = {k: np.zeros_like(v) for k, v in net.params.items()}
        total = 0.0
        for idx in range(len(contexts)):
            pvars = {k: ad.Var(v) for k, v in net.params.items()}
            loss = _graph_loss(model, cfg, mode, pvars, contexts, idx, epoch)
            loss.backward()
            total += float(loss.value)
            if cfg.update_per_graph:
                net.params = opt.step({k: v.grad for k, v in pvars.items()})
            else:
                for k, v in pvars.items():
                    if v.grad is not None:
                        accum[k] += v.grad
        if not np.isfinite(total):
            raise TrainingError(f"{mode} diverged at epoch {epoch}")
        if not cfg.update_per_graph:
            scale = 1.0 / len(contexts)
            net.params = opt.step({k: g * scale for k, g in accum.items()})
    return net


def pgexplainer_train(model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig) -> PgNetwork:
    return _train_pg_family(model, ds, cfg, "pgexplainer")


def mixupexplainer_train(model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig) -> PgNetwork:
    return _train_pg_family(model, ds, cfg, "mixupexplainer")


def regexplainer_train(model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig) -> PgNetwork:
    """Contrastive mix-up training: the full per-epoch loop over the split."""
    return _train_pg_family(model, ds, cfg, "regexplainer")


def pgexplainer_explain(net: PgNetwork, model: GcnModel, g: Graph) -> Explanation:
    """Deterministic inference: logistic of the edge logits, no sampling."""
    feats = _edge_features(model, g)
    logits = ad.value_of(_pg_logits(net.params, feats))
    weights = 1.0 / (1.0 + np.exp(-logits))
    return Explanation.from_mask(g, mask_from_edge_weights(g, weights))


def regexplainer_explain(net: PgNetwork, model: GcnModel, g: Graph) -> Explanation:
    """Identical inference path to pgexplainer; training differs, not this."""
    return pgexplainer_explain(net, model, g)


def mixupexplainer_explain(
    model: GcnModel, ds: GraphDataset, g: Graph, cfg: ExplainerConfig, net: PgNetwork | None = None
) -> Explanation:
    if net is None:
        net = mixupexplainer_train(model, ds, cfg)
    return pgexplainer_explain(net, model, g)


def grad_explain(model: GcnModel, g: Graph) -> Explanation:
    """Edge scores from |d MSE(f(G), Y) / d A_ij| at the all-ones mask."""
    wadj = ad.Var(g.a.copy())
    pred, _ = forward_weighted(model, g.x, wadj)
    loss = mse_loss(pred, g.label)
    loss.backward()
    grad = wadj.grad
    if grad is None or not np.isfinite(grad).all():
        raise NumericError("non-finite or missing adjacency gradient")
    scores = symmetrize(np.abs(grad)) * (g.a > 0)
    vals = np.array([scores[i, j] for i, j in g.edges])
    if vals.size:
        lo, hi = vals.min(), vals.max()
        vals = (vals - lo) / (hi - lo) if hi > lo else np.zeros_like(vals)
    return Explanation.from_mask(g, mask_from_edge_weights(g, vals))


def gnnexplainer_explain(model: GcnModel, g: Graph, cfg: ExplainerConfig) -> Explanation:
    """Per-instance mask optimization: Adam on one logit per existing edge."""
    w = cfg.loss_weights
    params = {"logits": np.zeros(g.num_edges)}
    opt = Adam(params, cfg.learning_rate)
    for _ in range(cfg.epochs):
        lv = ad.Var(params["logits"])
        wt = ad.sigmoid(lv)
        pred_star, h_star = forward_weighted(model, g.x, _scatter_mask(g, wt))
        loss = ad.add(
            size_loss(ad.sum(wt), h_star, w.gamma),
            ad.mul(mse_loss(pred_star, g.label), w.beta),
        )
        loss.backward()
        if not np.isfinite(float(loss.value)):
            raise TrainingError("gnnexplainer diverged")
        params = opt.step({"logits": lv.grad})
    weights = 1.0 / (1.0 + np.exp(-params["logits"]))
    return Explanation.from_mask(g, mask_from_edge_weights(g, weights))


def train_explainer(model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig) -> PgNetwork | None:
    """Train whatever the configured kind needs; None for gradient/per-instance kinds."""
    if cfg.kind == "pgexplainer":
        return pgexplainer_train(model, ds, cfg)
    if cfg.kind == "mixupexplainer":
        return mixupexplainer_train(model, ds, cfg)
    if cfg.kind == "regexplainer":
        return regexplainer_train(model, ds, cfg)
    return None


def explain_graph(
    model: GcnModel, ds: GraphDataset, g: Graph, cfg: ExplainerConfig, net: PgNetwork | None
) -> Explanation:
    if cfg.kind == "grad":
        return grad_explain(model, g)
    if cfg.kind == "gnnexplainer":
        return gnnexplainer_explain(model, g, cfg)
    if net is None:
        raise ValidationError(f"{cfg.kind} needs a trained network")
    return pgexplainer_explain(net, model, g)


def explain_split(
    model: GcnModel,
    ds: GraphDataset,
    cfg: ExplainerConfig,
    net: PgNetwork | None = None,
    which: str = "explainer_test",
) -> dict[int, Explanation]:
    """Explanations for every graph in a split, keyed by graph id."""
    if net is None and cfg.kind in ("pgexplainer", "mixupexplainer", "regexplainer"):
        net = train_explainer(model, ds, cfg)
    return {g.id: explain_graph(model, ds, g, cfg, net) for g in ds.subset(which)}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_explanations(path, explanations) -> None:
    """Append-ready JSONL: {"graph_id": ..., "edges": [[i, j, weight]...]}."""
    items = sorted(explanations.values(), key=lambda e: e.graph_id)
    with open(path, "w", encoding="ascii") as fh:
        for expl in items:
            edges = ",".join(f"[{i},{j},{_fmt_real(w)}]" for i, j, w in expl.scores)
            fh.write(f'{{"graph_id":{expl.graph_id},"edges":[{edges}]}}\n')


def read_explanations(path, ds: GraphDataset) -> dict[int, Explanation]:
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            g = ds.by_id(rec["graph_id"])
            weights = {(i, j): w for i, j, w in rec["edges"]}
            vals = np.array([weights.get((i, j), 0.0) for i, j in g.edges])
            out[g.id] = Explanation.from_mask(g, mask_from_edge_weights(g, vals))
    return out


def save_pg_checkpoint(net: PgNetwork, path) -> None:
    from .gnn import _array_to_lists, _emit

    doc = {
        "kind": json.dumps("pg_network"),
        "hidden": net.hidden,
        "embed_dim": net.embed_dim,
        "params": {k: _array_to_lists(v) for k, v in net.params.items()},
    }
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_emit(doc))


def load_pg_checkpoint(path) -> PgNetwork:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "pg_network":
        raise ValidationError(f"not a pg checkpoint: kind={doc.get('kind')!r}")
    params = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
    params["pb2"] = np.asarray(float(doc["params"]["pb2"]))
    return PgNetwork(params=params, hidden=int(doc["hidden"]), embed_dim=int(doc["embed_dim"]))
