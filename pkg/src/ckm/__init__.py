"""Compressive K-means: sketch a dataset once, then recover K centroids from the sketch."""

from .baselines import kmeanspp_seed, lloyd_max
from .core import (
    Bounds,
    CentroidModel,
    CKMError,
    Dataset,
    Distribution,
    FrequencyMatrix,
    FrequencySpec,
    InitStrategy,
    Sketch,
    SolverConfig,
    compute_bounds,
    validate_dataset,
)
from .datagen import GmmGenConfig, gen_gmm
from .frequencies import estimate_sigma2, sample_frequencies
from .metrics import ari, assign_labels, relative_sse, sse
from .pipeline import select_best_replicate
from .sketcher import PartialSketch, sketch_dataset, sketch_points
from .solver import ckm, ckm_solve

__all__ = [
    "Bounds", "CentroidModel", "CKMError", "Dataset", "Distribution", "FrequencyMatrix",
    "FrequencySpec", "GmmGenConfig", "InitStrategy", "PartialSketch", "Sketch", "SolverConfig",
    "ari", "assign_labels", "ckm", "ckm_solve", "compute_bounds", "estimate_sigma2", "gen_gmm",
    "kmeanspp_seed", "lloyd_max", "relative_sse", "sample_frequencies", "select_best_replicate",
    "sketch_dataset", "sketch_points", "sse", "validate_dataset",
]
