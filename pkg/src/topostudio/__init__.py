"""topostudio: interactive 2.5D structural part generation.

Generates manufacturable 2.5D parts from a load case (or a color-coded
sketch of one) by compliance minimization on a regular grid, with preserved
regions, seeded stochastic regeneration, mesh export, and an interaction
cost model for comparing editing workflows.
"""

from .model import (
    DensityField,
    FeaSolution,
    GenerationResult,
    GridDims,
    Load,
    MaterialParams,
    ProblemSpec,
    Support,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
    validate_problem,
)

__version__ = "0.1.0"

__all__ = [
    "DensityField",
    "FeaSolution",
    "GenerationResult",
    "GridDims",
    "Load",
    "MaterialParams",
    "ProblemSpec",
    "Support",
    "spec_from_dict",
    "spec_from_json",
    "spec_to_dict",
    "spec_to_json",
    "validate_problem",
    "__version__",
]
