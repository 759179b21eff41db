"""Semantic navigation reference stack: deterministic instruction
resolution, VLM escalation, auditable execution, cross-platform memory."""

from .resolver import (  # noqa: F401
    EscalationSignal,
    METHOD_DETERMINISTIC,
    METHOD_M3,
    METHOD_VLM,
    Resolution,
    resolve,
)
from .world import (  # noqa: F401
    DetectedObject,
    NavGraph,
    Policy,
    StaticPoi,
    load_policy,
    load_world,
    merge_semantic_objects,
)
from .memory import Digest, compile_digest, extract_memory, load_digest  # noqa: F401
from .experiment import build_oracle, default_policy, fiir_world, run_experiment  # noqa: F401

__version__ = "0.1.0"
