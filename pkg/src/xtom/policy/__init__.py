from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import (
    StateEncoding,
    action_from_index,
    action_index,
    action_space_size,
    encode_state,
    encoding_dim,
    valid_action_mask,
)
from .kernels import backend_name
from .net import (
    AdamState,
    Experience,
    FeedbackRecord,
    PolicyConfig,
    PolicyParams,
    ReplayPool,
    TrainingMetrics,
    anneal_epsilon,
    compute_advantages,
    forward,
    heads,
    initial_state,
    masked_softmax,
    reward,
    select_action,
    step,
    surrogate_loss_and_grads,
    train_step,
)

__all__ = [
    "AdamState",
    "Experience",
    "FeedbackRecord",
    "PolicyConfig",
    "PolicyParams",
    "ReplayPool",
    "StateEncoding",
    "TrainingMetrics",
    "action_from_index",
    "action_index",
    "action_space_size",
    "anneal_epsilon",
    "backend_name",
    "compute_advantages",
    "encode_state",
    "encoding_dim",
    "forward",
    "heads",
    "initial_state",
    "load_checkpoint",
    "masked_softmax",
    "reward",
    "save_checkpoint",
    "select_action",
    "step",
    "surrogate_loss_and_grads",
    "train_step",
    "valid_action_mask",
]
