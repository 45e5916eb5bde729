"""Correlation-based spectral clustering for multi-scale data (ROSC, ROSC-S, CAST)."""
from .core import (
    CastError,
    Clustering,
    DegenerateInputError,
    DimensionError,
    NumericError,
    ParameterError,
    SolverConfig,
    relabel_canonical,
    symmetrize_abs,
)
from .datasets import LabeledPoints, gen_syn1, gen_syn2, load_csv, save_csv, syn1_params, syn2_params
from .metrics import ami, purity, rand_index
from .pseudoeig import PiSchedule
from .similarity import gaussian_similarity, locally_scaled_similarity
from .solvers import build_cast_matrix, rosc_closed_form, solve_cast_column, solve_sparse_alm
from .spectral import MethodParams, StageError, baseline_cluster, cluster

__version__ = "0.1.0"
