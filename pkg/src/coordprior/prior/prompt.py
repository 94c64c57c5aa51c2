from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from ..describe import ObservationSummary, task_text
from ..env import ScenarioSpec, role
from ..errors import UsageError

SYSTEM_PREAMBLE = (
    "You are a coordination planner for a team of cooperative agents. "
    "You estimate which agents would benefit from coordinating with each other."
)

INSTRUCTION = (
    "Based on these observations, decide how strongly each pair of agents should "
    "coordinate. Return only a valid {n}x{n} JSON matrix (a list of {n} lists of {n} numbers) "
    "with real-valued entries in the range [0, 1], where larger values indicate stronger "
    "coordination affinity and entry [i][j] scores how much agent i should attend to agent j. "
    "The matrix must be symmetric, i.e. entry [i][j] must equal entry [j][i]. "
    "Do not include any explanation or other text."
)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    n: int
    prompt_hash: str
    scenario: str = ""
    roles: tuple = ()
    summaries: tuple = ()

    def messages(self) -> list[dict]:
        return [{"role": "system", "content": self.system},
                {"role": "user", "content": self.user}]


def prompt_digest(system: str, user: str) -> str:
    return hashlib.sha256(json.dumps([system, user]).encode("utf-8")).hexdigest()


def build_prompt(summaries: list[ObservationSummary], spec: ScenarioSpec,
                 template_dir: str | None = None) -> PromptBundle:
    """Zero-shot prompt asking for an n x n symmetric affinity matrix."""
    n = spec.n_agents
    seen = sorted(s.agent_index for s in summaries)
    if seen != list(range(n)):
        raise UsageError(f"summaries must cover agents 0..{n - 1} exactly once, got {seen}")
    ordered = sorted(summaries, key=lambda s: s.agent_index)
    roles = tuple(role(spec, i) for i in range(n))
    role_text = "; ".join(f"agent {i} is the {r}" for i, r in enumerate(roles))
    system = f"{SYSTEM_PREAMBLE} Task: {task_text(spec, template_dir)} Roles: {role_text}."
    lines = ["Observations:"]
    lines += [f"Agent {s.agent_index}: {s.text}" for s in ordered]
    lines += ["", INSTRUCTION.format(n=n)]
    user = "\n".join(lines)
    return PromptBundle(system, user, n, prompt_digest(system, user), spec.scenario, roles,
                        tuple(s.text for s in ordered))
