"""Pulse-level simulator of modular DQC1 trace estimation on one trapped ion."""
from .errors import ContractViolation, LeakageError, ParameterError, ServerContractError, TransportError
from .protocol import (
    EstimateResult,
    LocalServer,
    NoiseConfig,
    UnitarySpec,
    benchmark_unitaries,
    calibrate,
    estimate_trace,
    exact_expectation,
    required_shots,
)
from .statevec import IonState

__version__ = "0.1.0"
