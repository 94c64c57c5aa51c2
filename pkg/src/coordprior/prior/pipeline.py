from __future__ import annotations

import logging

from ..describe import describe_all
from ..env import ScenarioSpec
from .parse import ParseFailure, parse_adjacency
from .postprocess import GraphPrior, postprocess, uniform_fallback
from .prompt import build_prompt
from .providers import ProviderConfig, ProviderFailure, request_text

log = logging.getLogger(__name__)


def prior_for_episode(observations, spec: ScenarioSpec, cfg: ProviderConfig, provider=None,
                      template_dir: str | None = None) -> GraphPrior:
    """describe -> prompt -> query -> parse -> postprocess, once per episode.

    Provider failures are retried ``cfg.retry_count`` times; after that, or
    on an unparseable response, the uniform fallback prior is returned.
    """
    bundle = build_prompt(describe_all(observations, spec, template_dir), spec, template_dir)
    text = ""
    for attempt in range(cfg.retry_count + 1):
        try:
            text, _ = request_text(bundle, cfg, provider)
        except ProviderFailure as exc:
            log.warning("provider attempt %d failed: %s", attempt + 1, exc)
            continue
        try:
            raw = parse_adjacency(text, bundle.n)
        except ParseFailure as exc:
            # a deterministic model would answer the same way again
            log.warning("could not parse provider response: %s", exc)
            break
        raw.provider, raw.model = cfg.kind, cfg.model_id
        prior = postprocess(raw)
        prior.prompt_hash = bundle.prompt_hash
        return prior
    fallback = uniform_fallback(spec.n_agents, bundle.prompt_hash)
    fallback.raw_text = text
    return fallback
