"""The to-be-explained regressor: a three-layer edge-weight-aware GCN.

Propagation per layer: H' = relu(P H W + b) with P = D^-1/2 (A*M + I) D^-1/2,
where M is an optional edge mask and the self-loop weight is fixed at 1 so a
mask can never disconnect a node from itself. The graph embedding is the
readout (mean by default) of the last layer's node states, taken before the
dense head that produces the scalar prediction.

The forward pass is written against the autodiff ops, so the same code path
yields plain numbers during inference and gradients during training --
including gradients with respect to mask entries, which is what the
explainers differentiate through.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _autodiff as ad
from ._optim import Adam
from .errors import NumericError, TrainingError, ValidationError
from .graph_core import EdgeMask, Graph, GraphDataset, check_conforms, _fmt_real

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3", "hw1", "hb1", "hw2", "hb2")


@dataclass
class TrainConfig:
    learning_rate: float = 0.003
    epochs: int = 100
    seed: int = 0
    hidden_dim: int = 20
    readout: str = "mean"
    batch_size: int = 0  # 0 means one update per epoch on the mean gradient
    conv_lr_scale: float = 0.1
    whiten_floor: float = 1e-2  # 1.0 degrades whitening to center-and-rescale
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.readout not in ("mean", "sum"):
            raise ValidationError(f"readout must be 'mean' or 'sum', got {self.readout!r}")
        if self.batch_size < 0:
            raise ValidationError(f"batch_size must be >= 0, got {self.batch_size}")
        if self.conv_lr_scale <= 0:
            raise ValidationError(f"conv_lr_scale must be positive, got {self.conv_lr_scale}")
        if not (0.0 < self.whiten_floor <= 1.0):
            raise ValidationError(f"whiten_floor must be in (0, 1], got {self.whiten_floor}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class GcnModel:
    """Parameters of the regressor plus the scalings learned with them.

    emb_shift/emb_scale standardize the readout vector before the dense head
    (frozen at training start, absorbable into the first dense layer); label
    mean/std de-standardize the head output. The embedding reported by
    gcn_forward stays raw.
    """

    params: dict
    hidden_dim: int
    readout: str = "mean"
    label_mean: float = 0.0
    label_std: float = 1.0
    feat_scale: np.ndarray | None = None
    emb_shift: np.ndarray | None = None
    emb_scale: np.ndarray | None = None
    train_config: TrainConfig | None = None

    @property
    def feature_dim(self) -> int:
        return self.params["w1"].shape[0]


def init_model(
    feature_dim: int,
    hidden_dim: int = 20,
    readout: str = "mean",
    seed: int = 0,
    bias_init: float = 0.2,
) -> GcnModel:
    """Glorot-uniform weights; conv biases start slightly positive.

    The positive bias keeps relu units alive on constant-feature graphs,
    where zero-bias init collapses the pooled embedding to a near-constant.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x6C41])))

    def glorot(n_in, n_out):
        span = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-span, span, size=(n_in, n_out))

    h = hidden_dim
    params = {
        "w1": glorot(feature_dim, h),
        "b1": np.full(h, bias_init),
        "w2": glorot(h, h),
        "b2": np.full(h, bias_init),
        "w3": glorot(h, h),
        "b3": np.full(h, bias_init),
        "hw1": glorot(h, h),
        "hb1": np.zeros(h),
        "hw2": glorot(h, 1)[:, 0],
        "hb2": np.zeros(()),
    }
    return GcnModel(params=params, hidden_dim=h, readout=readout)


def forward_parts(
    params,
    x,
    weighted_adj,
    readout,
    label_mean=0.0,
    label_std=1.0,
    emb_shift=None,
    emb_scale=None,
    feat_scale=None,
    check=True,
):
    """Shared forward pass; inputs may be numpy arrays or autodiff Vars.

    Returns (prediction, embedding) as Vars when anything upstream is a Var,
    otherwise as (float, ndarray).
    """
    p_hat = ad.normalize_adjacency(weighted_adj)
    h = x if feat_scale is None else x / feat_scale
    for li, (w, b) in enumerate((("w1", "b1"), ("w2", "b2"), ("w3", "b3")), start=1):
        h = ad.relu(ad.add(ad.matmul(ad.matmul(p_hat, h), params[w]), params[b]))
        if check and not np.isfinite(ad.value_of(h)).all():
            raise NumericError(f"non-finite activations in layer {li}")
    emb = ad.mean(h, axis=0) if readout == "mean" else ad.sum(h, axis=0)
    head_in = emb
    if emb_shift is not None:
        head_in = ad.matmul(ad.sub(emb, emb_shift), emb_scale)
    z = ad.relu(ad.add(ad.matmul(head_in, params["hw1"]), params["hb1"]))
    raw = ad.add(ad.dot(z, params["hw2"]), params["hb2"])
    if check and not np.isfinite(ad.value_of(raw)).all():
        raise NumericError("non-finite activations in dense head")
    pred = ad.add(ad.mul(raw, label_std), label_mean)
    return pred, emb


def gcn_forward(model: GcnModel, g: Graph, mask: EdgeMask | None = None):
    """Predict on a graph, optionally through an edge mask.

    Returns (prediction, embedding); the embedding is the readout vector
    before the dense head.
    """
    if mask is None:
        wadj = g.a
    else:
        check_conforms(g, mask)
        wadj = g.a * mask.m
    pred, emb = forward_parts(
        model.params, g.x, wadj, model.readout, model.label_mean, model.label_std,
        model.emb_shift, model.emb_scale, model.feat_scale,
    )
    return float(ad.value_of(pred)), np.asarray(ad.value_of(emb))


def forward_weighted(model: GcnModel, x, weighted_adj):
    """Forward on an explicit weighted adjacency (array or Var)."""
    return forward_parts(
        model.params, x, weighted_adj, model.readout, model.label_mean, model.label_std,
        model.emb_shift, model.emb_scale, model.feat_scale,
    )


def gcn_node_states(model: GcnModel, g: Graph):
    """Final-layer node states (n, h) and the readout embedding, unmasked."""
    p_hat = ad.normalize_adjacency(g.a)
    h = g.x if model.feat_scale is None else g.x / model.feat_scale
    for w, b in (("w1", "b1"), ("w2", "b2"), ("w3", "b3")):
        h = ad.relu(ad.add(ad.matmul(ad.matmul(p_hat, h), model.params[w]), model.params[b]))
    emb = ad.mean(h, axis=0) if model.readout == "mean" else ad.sum(h, axis=0)
    return np.asarray(h), np.asarray(emb)


def batch_embed(model: GcnModel, graphs, masks=None):
    """Embeddings for a sequence of graphs; element-wise gcn_forward."""
    if masks is None:
        masks = [None] * len(graphs)
    return [gcn_forward(model, g, m)[1] for g, m in zip(graphs, masks)]


def _wrap_params(params):
    return {k: ad.Var(v) for k, v in params.items()}


def loss_and_grads(model: GcnModel, g: Graph) -> tuple[float, dict]:
    """Squared error on one graph and its gradient for every parameter."""
    pvars = _wrap_params(model.params)
    pred, _ = forward_parts(
        pvars, g.x, g.a, model.readout, model.label_mean, model.label_std,
        model.emb_shift, model.emb_scale, model.feat_scale,
    )
    loss = ad.power(ad.sub(pred, g.label), 2)
    loss.backward()
    grads = {k: v.grad for k, v in pvars.items()}
    return float(loss.value), grads


def _zca_transform(embs: np.ndarray, floor_rel: float):
    """Mean and floored ZCA whitening matrix of an embedding sample."""
    mu = embs.mean(axis=0)
    centered = embs - mu
    cov = centered.T @ centered / max(1, len(embs) - 1)
    lam, vec = np.linalg.eigh(cov)
    floor = max(float(lam.max()), 1e-12) * floor_rel
    white = vec @ np.diag(1.0 / np.sqrt(np.maximum(lam, floor))) @ vec.T
    return mu, white


def _fit_embedding_scaling(model: GcnModel, graphs, floor_rel: float = 1e-2) -> None:
    """Whiten the embedding as the head's fixed input transform.

    Constant-feature datasets leave the useful embedding variation in tiny-
    eigenvalue directions of the embedding covariance; plain gradient descent
    needs ~1/eigenvalue steps to reach them, so the head never learns within
    a desk-scale budget. Whitening (eigenvalues floored at 1e-2 of the
    largest) makes those directions unit-scale. The transform is absorbable
    into the first dense layer, so the function class is unchanged.
    """
    embs = np.array([gcn_forward(model, g)[1] for g in graphs])
    model.emb_shift, model.emb_scale = _zca_transform(embs, floor_rel)


def _refit_embedding_scaling(model: GcnModel, graphs, floor_rel: float = 1e-2) -> None:
    """Track conv drift: recompute the whitening, compensating the head.

    The head is rewritten so the end-to-end function is unchanged at the
    refit point (W_new h' = W_old h has the exact solution below); only the
    optimizer's gradient geometry improves. Without tracking, conv updates
    quietly invalidate the init-time whitening and the head chases noise.
    """
    embs = np.array([gcn_forward(model, g)[1] for g in graphs])
    mu_new, white_new = _zca_transform(embs, floor_rel)
    old_map = model.emb_scale @ model.params["hw1"]
    model.params["hw1"] = np.linalg.solve(white_new, old_map)
    model.params["hb1"] = model.params["hb1"] + (mu_new - model.emb_shift) @ old_map
    model.emb_shift, model.emb_scale = mu_new, white_new


def train_gnn(ds: GraphDataset, cfg: TrainConfig) -> tuple[GcnModel, list]:
    """Fit the regressor on the train split by per-graph Adam steps on MSE.

    Labels are standardized internally (constants stored on the model) so the
    same learning rate works across label scales. Returns the model and the
    per-epoch mean train loss.
    """
    train_graphs = ds.subset("train")
    if not train_graphs:
        raise TrainingError("train split is empty")
    model = init_model(train_graphs[0].d, cfg.hidden_dim, cfg.readout, cfg.seed)
    model.train_config = cfg
    labels = np.array([g.label for g in train_graphs])
    model.label_mean = float(labels.mean())
    std = float(labels.std())
    model.label_std = std if std > 0 else 1.0
    # per-dimension RMS input scaling keeps first-layer relus sculptable
    rms = np.sqrt(np.mean(np.vstack([g.x for g in train_graphs]) ** 2, axis=0))
    model.feat_scale = np.maximum(rms, 1e-8)
    _fit_embedding_scaling(model, train_graphs, cfg.whiten_floor)

    # convs move slower than the head so the frozen whitening stays valid
    conv_scales = {k: cfg.conv_lr_scale for k in ("w1", "b1", "w2", "b2", "w3", "b3")}
    opt = Adam(
        model.params,
        cfg.learning_rate,
        lr_scales=conv_scales,
        weight_decay=cfg.weight_decay,
        decay_names=("w1", "w2", "w3", "hw1", "hw2"),
    )
    order_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0x0E9])))
    batch = cfg.batch_size if cfg.batch_size > 0 else len(train_graphs)
    inv_var = 1.0 / (model.label_std**2)
    history = []
    for epoch in range(cfg.epochs):
        if epoch:
            _refit_embedding_scaling(model, train_graphs, cfg.whiten_floor)
        order = order_rng.permutation(len(train_graphs))
        total = 0.0
        for start in range(0, len(order), batch):
            chunk = order[start : start + batch]
            accum = {k: np.zeros_like(v) for k, v in model.params.items()}
            for gi in chunk:
                loss, grads = loss_and_grads(model, train_graphs[gi])
                total += loss
                # optimize in standardized units: de-scale squared-error grads
                for k, v in grads.items():
                    if v is not None:
                        accum[k] += v * inv_var
            model.params = opt.step({k: v / len(chunk) for k, v in accum.items()})
        mean_loss = total / len(train_graphs)
        if not np.isfinite(mean_loss):
            raise TrainingError(f"training diverged at epoch {epoch} (loss={mean_loss})")
        history.append(mean_loss)
    return model, history


def predictions(model: GcnModel, graphs, masks=None):
    if masks is None:
        masks = [None] * len(graphs)
    return np.array([gcn_forward(model, g, m)[0] for g, m in zip(graphs, masks)])


# ---------------------------------------------------------------------------
# Checkpoints: JSON with 17-significant-digit reals, exact round-trip.
# ---------------------------------------------------------------------------


def _array_to_lists(arr):
    arr = np.asarray(arr)
    if arr.ndim == 0:
        return _fmt_real(arr)
    return [_array_to_lists(sub) for sub in arr]


def _emit(obj) -> str:
    """JSON-encode, except pre-formatted real strings embed unquoted."""
    if isinstance(obj, str):
        return obj
    if isinstance(obj, list):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_emit(v)}" for k, v in obj.items()) + "}"
    return json.dumps(obj)


def save_checkpoint(model: GcnModel, path) -> None:
    cfg = model.train_config
    doc = {
        "kind": json.dumps("gcn"),
        "hidden_dim": model.hidden_dim,
        "readout": json.dumps(model.readout),
        "label_mean": _fmt_real(model.label_mean),
        "label_std": _fmt_real(model.label_std),
        "feat_scale": _array_to_lists(model.feat_scale) if model.feat_scale is not None else None,
        "emb_shift": _array_to_lists(model.emb_shift) if model.emb_shift is not None else None,
        "emb_scale": _array_to_lists(model.emb_scale) if model.emb_scale is not None else None,
        "train_config": {
            "learning_rate": _fmt_real(cfg.learning_rate) if cfg else "null",
            "epochs": cfg.epochs if cfg else "null",
            "seed": cfg.seed if cfg else "null",
            "hidden_dim": cfg.hidden_dim if cfg else "null",
            "readout": json.dumps(cfg.readout) if cfg else "null",
        }
        if cfg
        else None,
        "params": {k: _array_to_lists(model.params[k]) for k in PARAM_NAMES},
    }
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_emit(doc))


def load_checkpoint(path) -> GcnModel:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "gcn":
        raise ValidationError(f"not a model checkpoint: kind={doc.get('kind')!r}")
    params = {}
    for name in PARAM_NAMES:
        params[name] = np.asarray(doc["params"][name], dtype=np.float64)
    params["hb2"] = np.asarray(float(doc["params"]["hb2"]))
    tc = doc.get("train_config")
    cfg = (
        TrainConfig(
            learning_rate=tc["learning_rate"],
            epochs=tc["epochs"],
            seed=tc["seed"],
            hidden_dim=tc["hidden_dim"],
            readout=tc["readout"],
        )
        if tc
        else None
    )
    def _buf(name):
        v = doc.get(name)
        return np.asarray(v, dtype=np.float64) if v is not None else None

    return GcnModel(
        params=params,
        hidden_dim=int(doc["hidden_dim"]),
        readout=doc["readout"],
        label_mean=float(doc["label_mean"]),
        label_std=float(doc["label_std"]),
        feat_scale=_buf("feat_scale"),
        emb_shift=_buf("emb_shift"),
        emb_scale=_buf("emb_scale"),
        train_config=cfg,
    )
