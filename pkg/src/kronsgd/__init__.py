"""Training a two-layer shifted-ReLU network on Kronecker-structured data
with per-step cost independent of the data dimension.

Public surface, by concern:

- :mod:`kronsgd.data` -- Kronecker datasets, vectorization, file I/O
- :mod:`kronsgd.maxtree` -- per-point max-trees for threshold reporting
- :mod:`kronsgd.kernels` -- factorized scores and Gram-cached inner products
- :mod:`kronsgd.network` -- dense reference network / naive SGD oracle
- :mod:`kronsgd.trainer` -- the structured, dimension-free SGD loop
- :mod:`kronsgd.gram` -- kernel-matrix diagnostics and smallest eigenvalues
- :mod:`kronsgd.cli` -- command-line front end (``kron-sgd``)
"""

from .data import (
    DatasetFormatError,
    KroneckerDataset,
    generate_synthetic,
    load_dataset,
    materialize_column,
    materialize_matrix,
    save_dataset,
    unvectorize,
    vectorize,
)
from .gram import GramReport, h_cts_mc, h_dis, h_dynamic, lambda_min_sym
from .kernels import (
    GramCache,
    batch_inner,
    batch_inner_all,
    delta_dot,
    precompute_grams,
    scores_for_weight,
    scores_matrix,
)
from .maxtree import HAVE_COMPILED, TreeBank, build_bank, default_backend
from .network import (
    Trajectory,
    TwoLayerNet,
    gradient_norm_check,
    init_network,
    phi_tau,
    predict,
    predict_all,
    resolve_eta,
    resolve_tau,
    sgd_gradient_naive,
    train_naive,
)
from .seeding import BatchSampler, substream
from .trainer import (
    FireStats,
    StepReport,
    TrainerState,
    export_weights,
    fire_statistics,
    full_loss,
    init_trainer,
    predict_all_from_trees,
    step,
    train,
    weight_movement,
)

__version__ = "0.1.0"
