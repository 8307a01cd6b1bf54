"""Post-hoc edge-mask explanations for graph regression models.

Generates the benchmark datasets, trains a small GCN regressor, runs five
explainers (gradient, per-instance mask, parameterized mask, mix-up, and the
contrastive mix-up method), and reproduces the evaluation protocol: edge AUC,
distribution-shift and repair studies, ablations, and hyper-parameter sweeps.
"""

from . import _kernels
from .datasets import (
    GenConfig,
    count_triangles,
    count_triangles_trace,
    gen_ba_motif_counting,
    gen_ba_motif_volume,
    gen_crippen_like,
    gen_triangles,
    load_crippen,
)
from .evaluation import (
    EvalReport,
    ablation_suite,
    correlation_study,
    dataset_edge_auc,
    edge_auc,
    hyperparam_sweep,
    pearson,
    repair_report,
    rmse,
    shift_report,
)
from .explainers import (
    ExplainerConfig,
    PgNetwork,
    gnnexplainer_explain,
    grad_explain,
    mixupexplainer_explain,
    pgexplainer_explain,
    pgexplainer_train,
    regexplainer_explain,
    regexplainer_train,
)
from .gnn import GcnModel, TrainConfig, batch_embed, gcn_forward, train_gnn
from .graph_core import (
    EdgeMask,
    Explanation,
    Graph,
    GraphDataset,
    Splits,
    apply_mask,
    read_dataset,
    residual_mask,
    threshold_topk,
    write_dataset,
)
from .losses import LossWeights, info_nce_loss, mse_loss, overall_loss, size_loss
from .mixup import MixupResult, mixup_graphs, sample_neighbors

__version__ = "0.1.0"
