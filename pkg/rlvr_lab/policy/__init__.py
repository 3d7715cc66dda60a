"""Policy model, sampling and checkpoints."""

from rlvr_lab.policy.model import ModelConfig, PolicyParams, forward_logits, init_params, parameter_shapes
from rlvr_lab.policy.sampling import (
    SampledResponse,
    SamplingConfig,
    logprobs_under,
    sample_response,
    scored_log_probs,
    token_entropies,
)
from rlvr_lab.policy.checkpoint import (
    Checkpoint,
    CheckpointError,
    checkpoint_bytes,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "ModelConfig",
    "PolicyParams",
    "forward_logits",
    "init_params",
    "parameter_shapes",
    "SampledResponse",
    "SamplingConfig",
    "logprobs_under",
    "sample_response",
    "scored_log_probs",
    "token_entropies",
    "Checkpoint",
    "CheckpointError",
    "checkpoint_bytes",
    "load_checkpoint",
    "save_checkpoint",
]
