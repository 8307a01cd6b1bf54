"""Metrics and protocol reports: edge AUC, shift/repair studies, correlations.

Edge AUC treats ground-truth explanation edges as binary labels and ranks
them by predicted mask weight (tied ranks averaged). Dataset-level AUC pools
the edges of every test graph before ranking, since individual graphs can
have single-class ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import (
    ConformanceError,
    CoverageError,
    UndefinedMetricError,
    ValidationError,
)
from .explainers import ExplainerConfig, explain_split, train_explainer
from .gnn import GcnModel, gcn_forward
from .graph_core import EdgeMask, Explanation, Graph, GraphDataset, topk_mask
from .losses import LossWeights
from .mixup import MixupResult, mixup_graphs, sample_neighbors


@dataclass
class EvalReport:
    auc_mean: float | None = None
    auc_std: float | None = None
    rmse_gy: float | None = None
    rmse_sy: float | None = None
    rmse_gs: float | None = None
    cos_ge: float | None = None
    cos_gm: float | None = None
    euc_ge: float | None = None
    euc_gm: float | None = None
    rmse_pe: float | None = None
    rmse_pm: float | None = None
    pearson: list = field(default_factory=list)

    def merged_with(self, other: "EvalReport") -> "EvalReport":
        out = EvalReport(**vars(self))
        for k, v in vars(other).items():
            if v is not None and v != []:
                setattr(out, k, v)
        return out


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: {n_pos} positive and {n_neg} negative edges"
        )
    ranks = _tied_ranks(scores)
    return float((ranks[labels > 0].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def binarize_gt(g: Graph) -> np.ndarray:
    """Per-edge binary labels from the ground-truth mask.

    Binary masks pass through; continuous ones (the molecule dataset) are
    thresholded at the graph's median edge weight, keeping classes balanced.
    """
    if g.gt_mask is None:
        raise CoverageError(f"graph {g.id} has no ground-truth mask")
    vals = np.array([g.gt_mask.m[i, j] for i, j in g.edges])
    if np.isin(vals, (0.0, 1.0)).all():
        return vals
    return (vals >= np.median(vals)).astype(np.float64)


def edge_auc(pred: Explanation, gt: EdgeMask) -> float:
    """ROC AUC of predicted edge weights against a binary ground-truth mask."""
    scores = pred.score_vector()
    labels = np.array([gt.m[i, j] for i, j, _ in pred.scores])
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValidationError("ground-truth mask must be binary for AUC")
    return _rank_auc(scores, labels)


def dataset_edge_auc(explanations: dict, graphs) -> float:
    """Pooled edge AUC over many graphs (single ranking across all edges)."""
    all_scores, all_labels = [], []
    for g in graphs:
        if g.id not in explanations:
            raise CoverageError(f"missing explanation for graph {g.id}")
        all_scores.append(explanations[g.id].score_vector())
        all_labels.append(binarize_gt(g))
    return _rank_auc(np.concatenate(all_scores), np.concatenate(all_labels))


def rmse(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ConformanceError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if xs.size == 0:
        raise ValidationError("rmse of empty lists is undefined")
    return float(np.sqrt(np.mean((xs - ys) ** 2)))


def pearson(xs, ys) -> tuple[float, float]:
    """Sample correlation and the two-sided non-correlation p-value."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ConformanceError(f"length mismatch: {xs.shape} vs {ys.shape}")
    n = xs.size
    if n < 3:
        raise ValidationError(f"need at least 3 points, got {n}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("zero variance input")
    r = float((dx * dy).sum() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 2))
    return r, p


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def explanation_mask(g: Graph, expl: Explanation, style: str = "soft") -> EdgeMask:
    """The mask actually fed to the model for f(G*).

    "soft" uses the learned weights as-is (dynamic-size datasets); "topk"
    hardens to the gt-edge-count best edges (fixed-size datasets).
    """
    if style == "soft":
        return expl.mask
    if style == "topk":
        if g.gt_mask is None:
            raise CoverageError(f"graph {g.id} has no gt mask to size top-k")
        k = int(np.count_nonzero(np.triu(g.gt_mask.m, 1)))
        return topk_mask(g, expl, k)
    raise ValidationError(f"unknown explanation style {style!r}")


def shift_report(
    model: GcnModel,
    ds: GraphDataset,
    explanations: dict,
    explanation_style: str = "soft",
) -> EvalReport:
    """RMSE triplet over the test split: (f(G), Y), (f(G*), Y), (f(G), f(G*))."""
    ys, f_g, f_s = [], [], []
    for g in ds.subset("explainer_test"):
        if g.id not in explanations:
            raise CoverageError(f"missing explanation for graph {g.id}")
        mask = explanation_mask(g, explanations[g.id], explanation_style)
        ys.append(g.label)
        f_g.append(gcn_forward(model, g)[0])
        f_s.append(gcn_forward(model, g, mask)[0])
    return EvalReport(
        rmse_gy=rmse(f_g, ys), rmse_sy=rmse(f_s, ys), rmse_gs=rmse(f_g, f_s)
    )


def build_positive_mixups(
    model: GcnModel,
    ds: GraphDataset,
    explanations: dict,
    explain_fn,
    eta_fraction: float = 0.03,
    seed: int = 0,
) -> dict[int, MixupResult]:
    """G^(mix)+ for every test graph: its explanation block plus the positive
    neighbor's residual block, with the neighbor's mask from explain_fn."""
    mixups = {}
    for g in ds.subset("explainer_test"):
        if g.id not in explanations:
            raise CoverageError(f"missing explanation for graph {g.id}")
        g_pos, _ = sample_neighbors(g, ds, model, rng_seed=seed * 1_000_003 + g.id)
        partner_expl = explain_fn(g_pos)
        mixups[g.id] = mixup_graphs(
            g,
            explanations[g.id].mask,
            g_pos,
            partner_expl.mask,
            eta_fraction=eta_fraction,
            rng_seed=seed * 1_000_003 + g.id,
        )
    return mixups


def repair_report(
    model: GcnModel,
    ds: GraphDataset,
    explanations: dict,
    mixups: dict,
    explanation_style: str = "soft",
) -> EvalReport:
    """Distribution-repair metrics: explanation vs mix-up against the original.

    Cosine similarity on raw embeddings, Euclidean distance on unit-normalized
    embeddings, and RMSE between predictions.
    """
    cos_e, cos_m, euc_e, euc_m = [], [], [], []
    p_g, p_e, p_m = [], [], []
    for g in ds.subset("explainer_test"):
        if g.id not in explanations:
            raise CoverageError(f"missing explanation for graph {g.id}")
        if g.id not in mixups:
            raise CoverageError(f"missing mixup for graph {g.id}")
        mask = explanation_mask(g, explanations[g.id], explanation_style)
        pg_, vg = gcn_forward(model, g)
        pe_, ve = gcn_forward(model, g, mask)
        mix = mixups[g.id]
        pm_, vm = gcn_forward(model, mix.merged, mix.mask)
        cos_e.append(_cosine(vg, ve))
        cos_m.append(_cosine(vg, vm))
        euc_e.append(float(np.linalg.norm(_unit(vg) - _unit(ve))))
        euc_m.append(float(np.linalg.norm(_unit(vg) - _unit(vm))))
        p_g.append(pg_)
        p_e.append(pe_)
        p_m.append(pm_)
    return EvalReport(
        cos_ge=float(np.mean(cos_e)),
        cos_gm=float(np.mean(cos_m)),
        euc_ge=float(np.mean(euc_e)),
        euc_gm=float(np.mean(euc_m)),
        rmse_pe=rmse(p_g, p_e),
        rmse_pm=rmse(p_g, p_m),
    )


def correlation_study(
    model: GcnModel,
    ds: GraphDataset,
    explanations: dict,
    explanation_style: str = "soft",
) -> dict:
    """Correlation of prediction shifts against the label value.

    Returns pearson tuples for (|f(G*) - Y| vs Y) and (|f(G) - f(G*)| vs Y)
    plus the raw series for scatter plots.
    """
    ys, f_g, f_s = [], [], []
    for g in ds.subset("explainer_test"):
        if g.id not in explanations:
            raise CoverageError(f"missing explanation for graph {g.id}")
        mask = explanation_mask(g, explanations[g.id], explanation_style)
        ys.append(g.label)
        f_g.append(gcn_forward(model, g)[0])
        f_s.append(gcn_forward(model, g, mask)[0])
    ys = np.array(ys)
    f_g = np.array(f_g)
    f_s = np.array(f_s)
    shift_sy = np.abs(f_s - ys)
    shift_gs = np.abs(f_g - f_s)
    r_sy, p_sy = pearson(shift_sy, ys)
    r_gs, p_gs = pearson(shift_gs, ys)
    return {
        "pearson": [
            ("abs(f(G*)-Y) vs Y", r_sy, p_sy),
            ("abs(f(G)-f(G*)) vs Y", r_gs, p_gs),
        ],
        "y": ys,
        "f_g": f_g,
        "f_s": f_s,
        "shift_sy": shift_sy,
        "shift_gs": shift_gs,
    }


def auc_over_seeds(
    model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig, seeds
) -> list[float]:
    """Retrain/explain per seed and return the pooled test AUC per run."""
    out = []
    test = ds.subset("explainer_test")
    for seed in seeds:
        run_cfg = replace(cfg, seed=int(seed))
        expl = explain_split(model, ds, run_cfg)
        out.append(dataset_edge_auc(expl, test))
    return out


def ablation_suite(
    model: GcnModel, ds: GraphDataset, cfg: ExplainerConfig, seeds=tuple(range(10))
) -> dict:
    """AUC mean/std per training variant: full plus the three term removals."""
    variants = {
        "full": frozenset(),
        "no_mix": frozenset({"no_mix"}),
        "no_nce": frozenset({"no_nce"}),
        "no_mse": frozenset({"no_mse"}),
    }
    table = {}
    for name, abl in variants.items():
        run_cfg = replace(cfg, kind="regexplainer", ablation=abl)
        aucs = auc_over_seeds(model, ds, run_cfg, seeds)
        table[name] = {
            "mean": float(np.mean(aucs)),
            "std": float(np.std(aucs)),
            "aucs": aucs,
        }
    return table


def hyperparam_sweep(
    model: GcnModel,
    ds: GraphDataset,
    cfg: ExplainerConfig,
    param: str = "alpha",
    grid=(0.01, 1.0, 100.0),
    seeds=tuple(range(5)),
) -> dict:
    """Sweep alpha (or beta) with the other weight fixed at 1."""
    if param not in ("alpha", "beta"):
        raise ValidationError(f"sweep param must be alpha or beta, got {param!r}")
    table = {}
    for value in grid:
        lw = cfg.loss_weights
        weights = LossWeights(
            alpha=value if param == "alpha" else 1.0,
            beta=value if param == "beta" else 1.0,
            gamma=lw.gamma,
        )
        run_cfg = replace(cfg, kind="regexplainer", loss_weights=weights)
        aucs = auc_over_seeds(model, ds, run_cfg, seeds)
        table[value] = {
            "mean": float(np.mean(aucs)),
            "std": float(np.std(aucs)),
            "aucs": aucs,
        }
    return table
