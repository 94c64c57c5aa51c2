"""Particle-world Dec-POMDP engine.

Entity order inside a :class:`WorldState` is: cooperative agents, then the
scenario's extra movable entity (pushable object or adversary), then
landmarks. Rewards are shared by the whole cooperative team.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import UsageError
from ..physics import physics_step
from .spec import ScenarioSpec

# movement action -> unit force
MOVES = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
N_MOVES = len(MOVES)

ROLES = {
    "speaker_listener": lambda i: "speaker" if i == 0 else "listener",
    "reference": lambda i: "navigator",
    "cooperative_push": lambda i: "pusher",
    "adversary": lambda i: "evader",
}


@dataclass
class WorldState:
    pos: np.ndarray
    vel: np.ndarray
    goal: int = -1
    targets: tuple = ()
    comm: int = -1
    step: int = 0
    done: bool = False

    def copy(self) -> "WorldState":
        return WorldState(self.pos.copy(), self.vel.copy(), self.goal, self.targets,
                          self.comm, self.step, self.done)

    def __eq__(self, other):
        if not isinstance(other, WorldState):
            return NotImplemented
        return (np.array_equal(self.pos, other.pos) and np.array_equal(self.vel, other.vel)
                and (self.goal, self.targets, self.comm, self.step, self.done)
                == (other.goal, other.targets, other.comm, other.step, other.done))


@dataclass
class AgentObservation:
    vector: np.ndarray
    role: str
    scenario: str
    agent_index: int


@dataclass
class StepResult:
    observations: list
    reward: float
    done: bool
    state: WorldState
    terminated: bool = False


@dataclass(frozen=True)
class Layout:
    kinds: tuple
    mass: np.ndarray
    size: np.ndarray
    movable: np.ndarray
    pair_mask: np.ndarray
    friction: np.ndarray
    landmark0: int
    extra: int  # index of object/adversary, -1 if none

    def __hash__(self):
        return hash(self.kinds)


@lru_cache(maxsize=64)
def layout(spec: ScenarioSpec) -> Layout:
    n, L = spec.n_agents, spec.n_landmarks
    kinds = ["agent"] * n
    if spec.scenario == "cooperative_push":
        kinds.append("object")
    elif spec.scenario == "adversary":
        kinds.append("adversary")
    extra = n if len(kinds) > n else -1
    landmark0 = len(kinds)
    kinds += ["landmark"] * L
    E = len(kinds)
    size = np.array([{"agent": spec.agent_radius, "object": spec.object_radius,
                      "adversary": spec.agent_radius, "landmark": spec.landmark_radius}[k]
                     for k in kinds])
    mass = np.array([spec.object_mass if k == "object" else spec.agent_mass for k in kinds])
    movable = np.array([k != "landmark" for k in kinds], dtype=np.uint8)
    if spec.scenario == "speaker_listener":
        movable[0] = 0
    friction = np.zeros(E)
    if extra >= 0 and kinds[extra] == "object":
        friction[extra] = spec.push_friction * spec.force_scale
    pair_mask = np.zeros((E, E), dtype=np.uint8)
    if spec.scenario in ("cooperative_push", "adversary"):
        for i in range(E):
            for j in range(i + 1, E):
                ki, kj = kinds[i], kinds[j]
                if ki == "agent" and kj in ("agent", "object"):
                    pair_mask[i, j] = pair_mask[j, i] = 1
    for arr in (size, mass, movable, pair_mask, friction):
        arr.setflags(write=False)
    return Layout(tuple(kinds), mass, size, movable, pair_mask, friction, landmark0, extra)


def n_actions(spec: ScenarioSpec) -> list[int]:
    """Action-space size per cooperative agent."""
    if spec.scenario == "speaker_listener":
        return [spec.n_landmarks, N_MOVES]
    return [N_MOVES] * spec.n_agents


def role(spec: ScenarioSpec, agent: int) -> str:
    return ROLES[spec.scenario](agent)


def observation_layout(spec: ScenarioSpec, agent: int) -> list[tuple[str, int]]:
    """Named segments of agent ``agent``'s observation vector, in order."""
    n, L = spec.n_agents, spec.n_landmarks
    s = spec.scenario
    if s == "speaker_listener":
        if agent == 0:
            return [("goal", L)]
        return [("vel", 2), ("landmarks", 2 * L), ("message", L)]
    if s == "reference":
        return [("vel", 2), ("landmarks", 2 * L), ("teammates", 2), ("teammate_target", L)]
    if s == "cooperative_push":
        return [("vel", 2), ("object", 2), ("object_vel", 2), ("target", 2),
                ("teammates", 2 * (n - 1))]
    return [("vel", 2), ("target", 2), ("adversary", 2), ("adversary_vel", 2),
            ("teammates", 2 * (n - 1))]


def obs_dims(spec: ScenarioSpec) -> list[int]:
    return [sum(k for _, k in observation_layout(spec, i)) for i in range(spec.n_agents)]


def _one_hot(k: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    if 0 <= k < size:
        v[k] = 1.0
    return v


def observe(spec: ScenarioSpec, state: WorldState) -> list[AgentObservation]:
    lay = layout(spec)
    n, L = spec.n_agents, spec.n_landmarks
    pos, vel = state.pos, state.vel
    lm = pos[lay.landmark0:lay.landmark0 + L]
    out = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        mates = (pos[others] - pos[i]).ravel()
        if spec.scenario == "speaker_listener":
            if i == 0:
                vec = _one_hot(state.goal, L)
            else:
                vec = np.concatenate([vel[i], (lm - pos[i]).ravel(), _one_hot(state.comm, L)])
        elif spec.scenario == "reference":
            other = others[0]
            vec = np.concatenate([vel[i], (lm - pos[i]).ravel(), mates,
                                  _one_hot(state.targets[other], L)])
        elif spec.scenario == "cooperative_push":
            vec = np.concatenate([vel[i], pos[lay.extra] - pos[i], vel[lay.extra],
                                  lm[0] - pos[i], mates])
        else:
            vec = np.concatenate([vel[i], lm[0] - pos[i], pos[lay.extra] - pos[i],
                                  vel[lay.extra], mates])
        out.append(AgentObservation(vec, role(spec, i), spec.scenario, i))
    return out


def global_state(spec: ScenarioSpec, state: WorldState) -> np.ndarray:
    """Centralised state for the mixing network (training only)."""
    lay = layout(spec)
    mov = lay.movable.astype(bool)
    parts = [state.pos.ravel(), state.vel[mov].ravel()]
    L = spec.n_landmarks
    if spec.scenario == "speaker_listener":
        parts += [_one_hot(state.goal, L), _one_hot(state.comm, L)]
    elif spec.scenario == "reference":
        parts += [_one_hot(t, L) for t in state.targets]
    return np.concatenate(parts)


def state_dim(spec: ScenarioSpec) -> int:
    lay = layout(spec)
    dim = 2 * len(lay.kinds) + 2 * int(lay.movable.sum())
    if spec.scenario == "speaker_listener":
        dim += 2 * spec.n_landmarks
    elif spec.scenario == "reference":
        dim += spec.n_agents * spec.n_landmarks
    return dim


# -- reset -------------------------------------------------------------------


def _spawn_clear(rng, pos, idx, blockers, min_gap) -> None:
    # rejection sampling; bounded so a pathological spec cannot hang
    for _ in range(1000):
        p = rng.uniform(-1.0, 1.0, 2)
        if all(np.hypot(*(p - pos[b])) > min_gap for b in blockers):
            break
    pos[idx] = p


def reset(spec: ScenarioSpec, seed) -> tuple[WorldState, list[AgentObservation]]:
    rng = np.random.default_rng(seed)
    lay = layout(spec)
    E = len(lay.kinds)
    n, L = spec.n_agents, spec.n_landmarks
    pos = np.zeros((E, 2))
    vel = np.zeros((E, 2))
    pos[lay.landmark0:] = rng.uniform(-1.0, 1.0, (L, 2))
    goal, targets = -1, ()
    if spec.scenario == "speaker_listener":
        pos[:n] = rng.uniform(-1.0, 1.0, (n, 2))
        goal = int(rng.integers(L))
    elif spec.scenario == "reference":
        pos[:n] = rng.uniform(-1.0, 1.0, (n, 2))
        targets = tuple(int(t) for t in rng.choice(L, size=n, replace=L < n))
    elif spec.scenario == "cooperative_push":
        pos[lay.extra] = rng.uniform(-0.5, 0.5, 2)
        gap = spec.object_radius + spec.agent_radius + 0.05
        for i in range(n):
            _spawn_clear(rng, pos, i, [lay.extra], gap)
    else:
        pos[:n] = rng.uniform(-1.0, 1.0, (n, 2))
        _spawn_clear(rng, pos, lay.extra, range(n), 0.5)
    state = WorldState(pos, vel, goal=goal, targets=targets)
    return state, observe(spec, state)


# -- dynamics ------------------------------------------------------------------


def scripted_adversary(spec: ScenarioSpec, state: WorldState) -> int:
    """Greedy pursuit of the nearest cooperative agent.

    The chosen move minimises the predicted distance after one step given
    the adversary's current velocity; ties go to the lower index, both for
    the pursued agent and for the move.
    """
    if spec.scenario != "adversary":
        raise UsageError("scripted_adversary needs the adversary scenario")
    lay = layout(spec)
    a = lay.extra
    d = np.hypot(*(state.pos[:spec.n_agents] - state.pos[a]).T)
    target = state.pos[int(np.argmin(d))]
    keep = 1.0 - spec.damping
    best, best_d = 0, np.inf
    for k, move in enumerate(MOVES):
        v = state.vel[a] * keep + move * spec.adversary_force / lay.mass[a] * spec.dt
        p = state.pos[a] + v * spec.dt
        dist = float(np.hypot(*(target - p)))
        if dist < best_d:
            best, best_d = k, dist
    return best


def _check_actions(spec: ScenarioSpec, actions) -> list[int]:
    sizes = n_actions(spec)
    if len(actions) != spec.n_agents:
        raise UsageError(f"expected {spec.n_agents} actions, got {len(actions)}")
    out = []
    for i, a in enumerate(actions):
        a = int(a)
        if not 0 <= a < sizes[i]:
            raise UsageError(f"action {a} out of range for agent {i} (size {sizes[i]})")
        out.append(a)
    return out


def step(spec: ScenarioSpec, state: WorldState, actions) -> StepResult:
    if state.done:
        raise UsageError("cannot step a finished episode; call reset")
    actions = _check_actions(spec, actions)
    lay = layout(spec)
    nxt = state.copy()
    force = np.zeros_like(nxt.pos)
    for i, a in enumerate(actions):
        if spec.scenario == "speaker_listener" and i == 0:
            nxt.comm = a
        else:
            force[i] = MOVES[a] * spec.force_scale
    if spec.scenario == "adversary":
        force[lay.extra] = MOVES[scripted_adversary(spec, state)] * spec.adversary_force
    physics_step(nxt.pos, nxt.vel, force, lay.mass, lay.size, lay.movable, lay.pair_mask,
                 lay.friction, spec.dt, spec.damping, spec.contact_force, spec.contact_margin)
    nxt.step = state.step + 1
    r = reward(spec, nxt, actions)
    terminated = is_terminal(spec, nxt)
    nxt.done = terminated or nxt.step >= spec.max_steps
    return StepResult(observe(spec, nxt), r, nxt.done, nxt, terminated)


def is_terminal(spec: ScenarioSpec, state: WorldState) -> bool:
    if spec.scenario == "cooperative_push":
        lay = layout(spec)
        d = np.hypot(*(state.pos[lay.extra] - state.pos[lay.landmark0]))
        return bool(d < spec.arrival_radius)
    return False


def reward(spec: ScenarioSpec, state: WorldState, actions=None) -> float:
    """Shared team reward for ``state`` (the post-transition state)."""
    lay = layout(spec)
    n = spec.n_agents
    pos = state.pos
    lm = pos[lay.landmark0:]
    s = spec.scenario
    if s == "speaker_listener":
        r = -float(np.hypot(*(pos[1] - lm[state.goal])))
    elif s == "reference":
        r = -sum(float(np.hypot(*(pos[i] - lm[state.targets[i]]))) for i in range(n))
    elif s == "cooperative_push":
        r = -float(np.hypot(*(pos[lay.extra] - lm[0]))) - 0.1
    else:
        d_target = np.hypot(*(pos[:n] - lm[0]).T)
        d_adv = np.hypot(*(pos[:n] - pos[lay.extra]).T)
        arrivals = int(np.sum(d_target < spec.arrival_radius))
        tags = int(np.sum(d_adv < 2 * spec.agent_radius))
        r = 10.0 * arrivals - 5.0 * tags - float(d_target.mean())
    mov = lay.movable[:n].astype(bool)
    excess = np.maximum(np.abs(pos[:n][mov]) - spec.boundary, 0.0)
    return r - float(np.sum(excess * excess))
