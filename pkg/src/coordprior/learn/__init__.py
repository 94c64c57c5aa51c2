"""CTDE value-based learners (IQL, VDN, QMIX, QMIX over GNN embeddings)."""
from .buffer import Batch, Episode, ReplayBuffer, flatten
from .learner import (
    METHODS,
    Learner,
    LearnerSpec,
    agent_qs,
    init_params,
    masked_argmax,
    pad_observations,
    q_tot,
    select_actions,
    td_loss,
)
from .training import (
    LOG_COLUMNS,
    PRIOR_MODES,
    PriorSource,
    TrainConfig,
    TrainingLog,
    evaluate,
    load_checkpoint,
    random_policy_returns,
    rollout,
    run_training,
    save_checkpoint,
    td_update,
)

__all__ = [
    "LOG_COLUMNS", "METHODS", "PRIOR_MODES", "Batch", "Episode", "Learner", "LearnerSpec",
    "PriorSource", "ReplayBuffer", "TrainConfig", "TrainingLog", "agent_qs", "evaluate",
    "flatten", "init_params", "load_checkpoint", "masked_argmax", "pad_observations", "q_tot",
    "random_policy_returns", "rollout", "run_training", "save_checkpoint", "select_actions",
    "td_loss", "td_update",
]
