"""Bayesian factor-augmented VAR with Normal-Gamma shrinkage, structural
identification and regional impulse responses."""

from .errors import (
    ConfigError,
    DataError,
    DegenerateInstrumentError,
    FavarError,
    NumericalError,
    ParameterError,
    ShapeError,
)
from .model import (
    CompanionForm,
    FavarParams,
    Hyperparams,
    ModelDims,
    PanelData,
    ShrinkageState,
    build_companion,
    default_hyperparams,
)

__version__ = "0.1.0"
