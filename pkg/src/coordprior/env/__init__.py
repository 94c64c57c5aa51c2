"""Cooperative particle-world scenarios with discrete actions."""
from .engine import (
    MOVES,
    N_MOVES,
    AgentObservation,
    StepResult,
    WorldState,
    global_state,
    is_terminal,
    layout,
    n_actions,
    obs_dims,
    observation_layout,
    observe,
    reset,
    reward,
    role,
    scripted_adversary,
    state_dim,
    step,
)
from .spec import SCENARIOS, ScenarioSpec, make_spec

__all__ = [
    "MOVES", "N_MOVES", "SCENARIOS", "AgentObservation", "ScenarioSpec", "StepResult",
    "WorldState", "global_state", "is_terminal", "layout", "make_spec", "n_actions",
    "obs_dims", "observation_layout", "observe", "reset", "reward", "role",
    "scripted_adversary", "state_dim", "step",
]
