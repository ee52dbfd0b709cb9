"""Detector / propagator / quality-estimator backends: deterministic
built-ins for desk-scale runs plus an external-process client that lets
neural models plug in over a framed stdin/stdout protocol."""

from .builtin import (
    ClassicalPropagator,
    CorruptionSchedule,
    Detector,
    HeuristicEstimator,
    IdentityPropagator,
    MaeOracleEstimator,
    NoisyOracleDetector,
    OracleDetector,
    OracleEstimator,
    classical_propagate_step,
    noisy_detect,
    oracle_detect,
)
from .external import ExternalBackendError, ExternalWorker
from .protocol import Message, MessageType, ProtocolError

__all__ = [
    "ClassicalPropagator",
    "CorruptionSchedule",
    "Detector",
    "ExternalBackendError",
    "ExternalWorker",
    "HeuristicEstimator",
    "IdentityPropagator",
    "MaeOracleEstimator",
    "Message",
    "MessageType",
    "NoisyOracleDetector",
    "OracleDetector",
    "OracleEstimator",
    "ProtocolError",
    "classical_propagate_step",
    "noisy_detect",
    "oracle_detect",
]
