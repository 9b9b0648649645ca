"""Agent-aware estimation of a shared global state from direct and behavioural evidence."""
from .errors import (
    AaseError,
    ConfigError,
    EnumerationCapError,
    ModelValidationError,
    SchemaError,
    TraceMismatchError,
    UnknownAgentError,
    ZeroSupportError,
)
from .inference import (
    FactorGraph,
    PosteriorSequence,
    attach_evidence,
    brute_force_posterior,
    exact_smooth,
    hmm_smooth,
    map_sequence,
    sum_product_smooth,
    unroll_dbn,
)
from .io import load_model, load_trace, save_model, save_trace
from .model import AgentAwareModel, AgentChain, GlobalChain, StateSpace, ValidationReport, prune_agents, validate_model
from .simkit import GroundTruth, OcclusionPattern, accuracy, apply_occlusion, majority_baseline, simulate
from .trace import MISSING, ObservationTrace
from .traffic import TrafficConfig, build_traffic_model, legal_cycle_default

__all__ = [name for name in dir() if not name.startswith("_")]
