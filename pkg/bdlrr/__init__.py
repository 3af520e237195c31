"""
Block-diagonal low-rank representation learning for classification.

The public entry points are re-exported here; see the individual modules
for the lower-level pieces (proximal operators, masks, solver updates).
"""

from bdlrr.baselines import BaselineResult, lrr_solve, rpca_solve
from bdlrr.classifier import TrainedModel, fit_ridge, load_model, one_hot, predict, save_model
from bdlrr.data import (
    GeneratorConfig,
    PartitionedDataset,
    assemble_dataset,
    load_dataset,
    load_matrix,
    save_dataset,
    save_matrix,
    synth_union_of_subspaces,
)
from bdlrr.errors import (
    BdlrrError,
    DimensionError,
    DivergenceError,
    NumericalError,
    ParseError,
    SingularSystemError,
    TrialError,
    UndefinedRatioError,
)
from bdlrr.experiment import CALIBRATED_CONFIG, cross_validate, run_experiment, sweep_parameters
from bdlrr.out_of_sample import OosConfig, oos_predict, oos_predict_batch, oos_solve
from bdlrr.solver import BdlrrSolver, SolverConfig, SolveResult, solve
from bdlrr.structure import ClassPartition

__version__ = "0.1.0"

__all__ = [
    "CALIBRATED_CONFIG",
    "BaselineResult",
    "BdlrrError",
    "BdlrrSolver",
    "ClassPartition",
    "DimensionError",
    "DivergenceError",
    "GeneratorConfig",
    "NumericalError",
    "OosConfig",
    "ParseError",
    "PartitionedDataset",
    "SingularSystemError",
    "SolveResult",
    "SolverConfig",
    "TrainedModel",
    "TrialError",
    "UndefinedRatioError",
    "assemble_dataset",
    "cross_validate",
    "fit_ridge",
    "load_dataset",
    "load_matrix",
    "load_model",
    "lrr_solve",
    "one_hot",
    "oos_predict",
    "oos_predict_batch",
    "oos_solve",
    "predict",
    "rpca_solve",
    "run_experiment",
    "save_dataset",
    "save_matrix",
    "save_model",
    "solve",
    "sweep_parameters",
    "synth_union_of_subspaces",
]
