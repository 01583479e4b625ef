"""First-passage positions of Lévy processes: which processes overshoot deterministically."""

__version__ = "0.1.0"

from .levy_model import (  # noqa: E402
    Cutoff,
    JumpMeasure,
    LevyTriplet,
    ProcessClass,
    StableTail,
    Variant,
    classify,
    lattice_fit,
    predicted_passage_position,
    validate_triplet,
)
from .pathsim import SimConfig, run_to_passage, simulate  # noqa: E402
from .overshoot_measures import EmpiricalLaw, estimate_law, triviality_test  # noqa: E402
from .estimators import PassageLawEstimator, PassagePositionPredictor  # noqa: E402

__all__ = [
    "Cutoff", "JumpMeasure", "LevyTriplet", "ProcessClass", "StableTail", "Variant",
    "classify", "lattice_fit", "predicted_passage_position", "validate_triplet",
    "SimConfig", "run_to_passage", "simulate", "EmpiricalLaw", "estimate_law",
    "triviality_test", "PassageLawEstimator", "PassagePositionPredictor",
]
