"""Counting grids: toroidal grids of word distributions trained by EM.

Documents are modeled as bags of words generated from the average of the
grid's distributions over a sliding hypercube window; sliding the window
produces smooth thematic shifts instead of topic mixing. The package
provides the windowed-sum kernels, the variational EM trainer, label
embedding for classification and regression, synthetic corpus generation,
serialization, scikit-learn style estimators, and a CLI.
"""

from .corpus import Bag, Corpus, bags_to_matrix, matrix_to_bags
from .embedding import (
    LabelEmbedding,
    MetricReport,
    cell_occupancy,
    embed,
    loo_evaluate,
    predict,
)
from .errors import DataFormatError, ModelFormatError, NumericFailure
from .estimators import CountingGridClassifier, CountingGridModel, CountingGridRegressor
from .geometry import PROB_FLOOR, GridGeometry
from .io import (
    ModelFile,
    read_corpus,
    read_model,
    read_targets,
    read_vocab,
    write_corpus,
    write_model,
    write_targets,
)
from .kernels import forward_window_sum, reverse_window_sum, window_sum
from .model import (
    CountingGrid,
    GridField,
    bag_log_likelihood,
    compute_histograms,
    floor_distributions,
)
from .synth import SynthSpec, block_labeler, blocky_grid, generate
from .trainer import (
    FitResult,
    PosteriorMap,
    TrainConfig,
    bag_log_evidence,
    e_step,
    fit,
    infer_posteriors,
    init_grid,
    m_step,
    mean_log_likelihood,
    variational_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Bag",
    "Corpus",
    "CountingGrid",
    "CountingGridClassifier",
    "CountingGridModel",
    "CountingGridRegressor",
    "DataFormatError",
    "FitResult",
    "GridField",
    "GridGeometry",
    "LabelEmbedding",
    "MetricReport",
    "ModelFile",
    "ModelFormatError",
    "NumericFailure",
    "PROB_FLOOR",
    "PosteriorMap",
    "SynthSpec",
    "TrainConfig",
    "bag_log_evidence",
    "bag_log_likelihood",
    "bags_to_matrix",
    "block_labeler",
    "blocky_grid",
    "cell_occupancy",
    "compute_histograms",
    "e_step",
    "embed",
    "fit",
    "floor_distributions",
    "forward_window_sum",
    "generate",
    "infer_posteriors",
    "init_grid",
    "loo_evaluate",
    "m_step",
    "matrix_to_bags",
    "mean_log_likelihood",
    "predict",
    "read_corpus",
    "read_model",
    "read_targets",
    "read_vocab",
    "reverse_window_sum",
    "variational_bound",
    "window_sum",
    "write_corpus",
    "write_model",
    "write_targets",
]
