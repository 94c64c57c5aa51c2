"""Deterministic natural-language summaries of local observations.

Each scenario has a template file (``templates/<scenario>.ini``) with a
``[task]`` section and one section per agent role. Quantities are
discretised before they reach the text: distances into close/medium/far
and directions into eight compass sectors.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .env import AgentObservation, ScenarioSpec, observation_layout, role
from .errors import UsageError

TEMPLATE_DIR = Path(__file__).with_name("templates")

CLOSE, MEDIUM = 0.3, 0.8
COMPASS = ("east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast")
STATIONARY_SPEED = 0.05


@dataclass(frozen=True)
class ObservationSummary:
    agent_index: int
    text: str
    scenario: str


def distance_bucket(d: float) -> str:
    if d < CLOSE:
        return "close"
    if d < MEDIUM:
        return "medium"
    return "far"


def direction_bucket(dx: float, dy: float) -> str:
    angle = math.atan2(dy, dx)
    return COMPASS[int(math.floor(angle / (math.pi / 4) + 0.5)) % 8]


def _where(rel) -> str:
    dx, dy = float(rel[0]), float(rel[1])
    return f"at {distance_bucket(math.hypot(dx, dy))} range to the {direction_bucket(dx, dy)}"


def _motion(vel) -> str:
    vx, vy = float(vel[0]), float(vel[1])
    if math.hypot(vx, vy) < STATIONARY_SPEED:
        return "stationary"
    return f"moving {direction_bucket(vx, vy)}"


@lru_cache(maxsize=32)
def load_templates(scenario: str, template_dir: str | None = None) -> dict[str, str]:
    path = Path(template_dir or TEMPLATE_DIR) / f"{scenario}.ini"
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return {section: " ".join(parser[section]["text"].split()) for section in parser.sections()}


def _segments(obs: AgentObservation, spec: ScenarioSpec, agent: int) -> dict[str, np.ndarray]:
    parts = observation_layout(spec, agent)
    vec = np.asarray(obs.vector)
    if vec.shape != (sum(k for _, k in parts),):
        raise UsageError(
            f"observation of length {vec.size} does not match {spec.scenario} agent {agent}"
        )
    out, at = {}, 0
    for name, k in parts:
        out[name] = vec[at:at + k]
        at += k
    return out


def _entities(seg: dict[str, np.ndarray], agent: int, n: int) -> str:
    items = []
    if "landmarks" in seg:
        for k, rel in enumerate(seg["landmarks"].reshape(-1, 2)):
            items.append(f"landmark {k} {_where(rel)}")
    if "object" in seg:
        items.append(f"the box {_where(seg['object'])}")
    if "target" in seg:
        items.append(f"the target location {_where(seg['target'])}")
    if "adversary" in seg:
        items.append(f"the pursuer {_where(seg['adversary'])}")
    if "teammates" in seg:
        others = [j for j in range(n) if j != agent]
        for j, rel in zip(others, seg["teammates"].reshape(-1, 2)):
            items.append(f"teammate agent {j} {_where(rel)}")
    if not items:
        return "nothing nearby"
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def describe(obs: AgentObservation, agent_index: int, spec: ScenarioSpec,
             template_dir: str | None = None) -> ObservationSummary:
    """Summarise one agent's local observation as a single line of text."""
    if obs.scenario != spec.scenario:
        raise UsageError(f"observation from {obs.scenario!r} passed with a {spec.scenario!r} spec")
    if not 0 <= agent_index < spec.n_agents:
        raise UsageError(f"agent index {agent_index} out of range")
    seg = _segments(obs, spec, agent_index)
    agent_role = role(spec, agent_index)
    fields = {
        "agent": agent_index,
        "role": agent_role,
        "n_agents": spec.n_agents,
        "n_landmarks": spec.n_landmarks,
        "n_symbols": spec.n_landmarks,
        "entity_list": _entities(seg, agent_index, spec.n_agents),
    }
    if "vel" in seg:
        fields["motion"] = _motion(seg["vel"])
    if "goal" in seg:
        fields["goal"] = int(np.argmax(seg["goal"]))
    if "message" in seg:
        msg = seg["message"]
        fields["message"] = (f"has received symbol {int(np.argmax(msg))}" if msg.any()
                             else "has not received a message yet")
    if "teammate_target" in seg:
        fields["teammate_target"] = int(np.argmax(seg["teammate_target"]))
    templates = load_templates(spec.scenario, template_dir)
    text = templates[agent_role].format_map(fields)
    return ObservationSummary(agent_index, " ".join(text.split()), spec.scenario)


def describe_all(observations, spec: ScenarioSpec, template_dir: str | None = None):
    return [describe(o, i, spec, template_dir) for i, o in enumerate(observations)]


def task_text(spec: ScenarioSpec, template_dir: str | None = None) -> str:
    return load_templates(spec.scenario, template_dir)["task"].format(
        n_agents=spec.n_agents, n_landmarks=spec.n_landmarks)
