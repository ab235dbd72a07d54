"""homofair: local-homophily-aware fairness evaluation for small GNNs.

The package is organized by pipeline stage:

  graph        CSR graphs, global/local homophily, histograms
  generate     synthetic attributed graphs with controllable homophily
  autodiff     reverse-mode engine over dense float64 matrices
  optim        adaptive-moment optimizer
  propagation  sparse aggregation operators
  models       the four architectures, splits, training
  metrics      fairness metrics, 5x5 stratification, family comparison
  io           bundles, CSVs, flat configs
  ingest       real-dataset import
  sweep        deterministic resumable experiment grids
  cli          the `homofair` command
"""

from .graph import (Graph, Histogram, LocalHomophilyProfile, global_homophily,
                    homophily_histogram, homophily_profile, local_homophily)
from .generate import (CompatibilityMatrix, GenerationError, GeneratorConfig,
                       JointDistribution, NodeAttributes, generate)
from .metrics import (DesignComparison, FairnessReport, HomophilyBin,
                      StratifiedReport, design_comparison, equal_opportunity,
                      f1_binary, fairness_report, high_hs_slice,
                      statistical_parity, stratified_report, stratify)
from .models import (DivergenceError, ModelConfig, Predictions, SplitMasks,
                     fit, forward, init_params, make_splits, run_design_family,
                     train)
from .sweep import SweepSpec, bias_sweep_spec, sweep

__version__ = "0.1.0"

__all__ = [
    "Graph", "Histogram", "LocalHomophilyProfile", "global_homophily",
    "homophily_histogram", "homophily_profile", "local_homophily",
    "CompatibilityMatrix", "GenerationError", "GeneratorConfig",
    "JointDistribution", "NodeAttributes", "generate",
    "DesignComparison", "FairnessReport", "HomophilyBin", "StratifiedReport",
    "design_comparison", "equal_opportunity", "f1_binary", "fairness_report",
    "high_hs_slice", "statistical_parity", "stratified_report", "stratify",
    "DivergenceError", "ModelConfig", "Predictions", "SplitMasks", "fit",
    "forward", "init_params", "make_splits", "run_design_family", "train",
    "SweepSpec", "bias_sweep_spec", "sweep",
    "__version__",
]
