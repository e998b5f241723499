"""Support and quantile tubes: LP fits, distribution-free risk bounds,
planar convex hulls and a tube-based lower bound on mutual information."""

__version__ = "0.1.0"

from .dataset import (DataError, Dataset, FeatureMap, GeneratorSpec, generate_synthetic,
                      load_csv, parse_features, parse_generator, write_csv)
from .lp import LinearProgram, LpSolution, NumericalBreakdown, solve
from .tubes import (FitError, MultiTubeModel, TubeModel, compression_size, empirical_risk,
                    fit_multi_quantile, fit_quantile_tube, fit_support_tube, multi_quantile_fit,
                    support_tube_fit, tube_contains)

__all__ = [
    "DataError", "Dataset", "FeatureMap", "GeneratorSpec", "generate_synthetic", "load_csv",
    "parse_features", "parse_generator", "write_csv", "LinearProgram", "LpSolution",
    "NumericalBreakdown", "solve", "FitError", "MultiTubeModel", "TubeModel",
    "compression_size", "empirical_risk", "fit_multi_quantile", "fit_quantile_tube",
    "fit_support_tube", "multi_quantile_fit", "support_tube_fit", "tube_contains",
]
