"""Lazy localized kernel ridge regression."""

from ._accel import get_backend, set_backend
from .archive import load_archive, load_model, save_model
from .continuous import BlendedModel, HierModel, fit_hierarchical, predict_blended, predict_hierarchical
from .dense import (
    DenseModel,
    cardinal_basis,
    fit_dense,
    krr_gradients,
    power_function,
    predict_dense,
    rkhs_norm,
)
from .errors import ArchiveError, InputError, NumericalError, ParseError, TrainingError
from .kernels import KernelSpec, Normalizer, fit_normalizer, gram
from .learn import (
    HybridConfig,
    HybridModel,
    LossSpec,
    ReadoutConfig,
    TrainState,
    adamw_step,
    hybrid_forward,
    hybrid_loss_and_grads,
    init_hybrid,
    loss_and_grad,
    train_hybrid,
    train_readout,
)
from .neighbors import NeighborIndex, build_index, query_knn
from .selection import fill_distance, greedy_select, gromov_monge, monge_assign
from .sparse import SparseModel, build_sparse, local_error, predict_sparse, predict_sparse_batch
from .tables import load_table, save_table

__version__ = "0.1.0"
