"""Joint accelerator/mapping search: an analytical energy-delay cost model
plus constrained Bayesian optimization over hardware configs and per-layer
loop-nest mappings."""

from .design_space import (DEFAULT_BUDGET, DEFAULT_HARDWARE, DIMS, LEVELS,
                           ConstraintReport, EnergyTable, FeatureVector,
                           HardwareBudget, HardwareConfig, LayerShape, Mapping,
                           SamplingExhausted, Violation, factorizations,
                           hw_features, sample_hardware, sample_mapping,
                           sw_features, validate_hardware, validate_mapping)
from .cost_model import EdpResult, access_counts, evaluate_edp, tile_footprints, trace_oracle
from .gp import GPModel, KernelSpec, Linear, SquaredExponential, Sum, build_model, classify, fit, log_marginal_likelihood, posterior
from .acquisition import AcquisitionSpec, Proposal, ProposerConfig, expected_improvement, feasibility_weight, lcb, propose
from .optimizer import (CodesignResult, MappingSearchResult, Observation,
                        OptimizationTrace, codesign, hardware_objective,
                        normalize_trace, random_search_hw, random_search_sw,
                        software_search)
from .workloads import Workload, WorkloadLayer, builtin_names, get_builtin, load_workload, matmul_layer, save_workload

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BUDGET", "DEFAULT_HARDWARE", "DIMS", "LEVELS",
    "ConstraintReport", "EnergyTable", "FeatureVector", "HardwareBudget",
    "HardwareConfig", "LayerShape", "Mapping", "SamplingExhausted", "Violation",
    "factorizations", "hw_features", "sample_hardware", "sample_mapping",
    "sw_features", "validate_hardware", "validate_mapping",
    "EdpResult", "access_counts", "evaluate_edp", "tile_footprints", "trace_oracle",
    "GPModel", "KernelSpec", "Linear", "SquaredExponential", "Sum",
    "build_model", "classify", "fit", "log_marginal_likelihood", "posterior",
    "AcquisitionSpec", "Proposal", "ProposerConfig", "expected_improvement",
    "feasibility_weight", "lcb", "propose",
    "CodesignResult", "MappingSearchResult", "Observation", "OptimizationTrace",
    "codesign", "hardware_objective", "normalize_trace", "random_search_hw",
    "random_search_sw", "software_search",
    "Workload", "WorkloadLayer", "builtin_names", "get_builtin",
    "load_workload", "matmul_layer", "save_workload",
    "__version__",
]
