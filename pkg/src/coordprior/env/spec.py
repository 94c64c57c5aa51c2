from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError

SCENARIOS = ("speaker_listener", "reference", "cooperative_push", "adversary")

# (agents, landmarks)
_DEFAULT_COUNTS = {
    "speaker_listener": (2, 3),
    "reference": (2, 3),
    "cooperative_push": (3, 1),
    "adversary": (3, 1),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Static description of one particle-world scenario.

    Physics constants follow the usual particle-environment conventions;
    ``push_friction`` is the minimum net force, in multiples of one agent's
    action force, needed to move the pushable object.
    """

    scenario: str
    n_agents: int
    n_landmarks: int
    max_steps: int = 25
    dt: float = 0.1
    damping: float = 0.25
    contact_force: float = 100.0
    contact_margin: float = 1e-3
    agent_radius: float = 0.075
    landmark_radius: float = 0.04
    object_radius: float = 0.25
    agent_mass: float = 1.0
    object_mass: float = 1.0
    force_scale: float = 1.0
    adversary_force: float = 0.75
    push_friction: float = 1.5
    arrival_radius: float = 0.1
    boundary: float = 1.5

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.n_agents < 2:
            raise ConfigError("n_agents must be >= 2")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.n_landmarks < 1:
            raise ConfigError("n_landmarks must be >= 1")
        if self.scenario in ("speaker_listener", "reference") and self.n_agents != 2:
            raise ConfigError(f"{self.scenario} is a two-agent scenario")
        if self.scenario == "reference" and self.n_landmarks < 2:
            raise ConfigError("reference needs at least two landmarks")
        for name in ("dt", "agent_radius", "landmark_radius", "object_radius",
                     "agent_mass", "object_mass", "contact_margin"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.damping < 1.0:
            raise ConfigError("damping must be in [0, 1)")

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str) -> "ScenarioSpec":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {raw!r}", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"unknown scenario key {key!r}", lineno)
            values[key] = _coerce(value, types[key], lineno)
        if "scenario" not in values:
            raise ConfigError("scenario key is required")
        return make_spec(**values)


def _coerce(value: str, typ: str, lineno: int):
    try:
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {typ}", lineno) from None
    return value


def make_spec(scenario: str, **overrides) -> ScenarioSpec:
    """Spec with the default agent/landmark counts for ``scenario``."""
    if scenario not in _DEFAULT_COUNTS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    n, n_landmarks = _DEFAULT_COUNTS[scenario]
    overrides.setdefault("n_agents", n)
    overrides.setdefault("n_landmarks", n_landmarks)
    return ScenarioSpec(scenario=scenario, **overrides)
