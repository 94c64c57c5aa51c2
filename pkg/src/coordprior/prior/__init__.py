"""LLM-derived coordination-graph priors: prompt, query, parse, post-process."""
from .parse import ParseFailure, RawAdjacency, find_matrix, parse_adjacency, serialize_matrix
from .pipeline import prior_for_episode
from .postprocess import (
    GraphPrior,
    add_self_loops,
    postprocess,
    row_normalize,
    symmetrize,
    uniform_fallback,
)
from .prompt import PromptBundle, build_prompt
from .providers import (
    PROVIDER_KINDS,
    HttpChatProvider,
    MockHeuristicProvider,
    MockUniformProvider,
    ProviderConfig,
    ProviderFailure,
    ResponseCache,
    make_provider,
    query_provider,
    request_text,
    uniform_adjacency,
)

__all__ = [
    "PROVIDER_KINDS", "GraphPrior", "HttpChatProvider", "MockHeuristicProvider",
    "MockUniformProvider", "ParseFailure", "PromptBundle", "ProviderConfig", "ProviderFailure",
    "RawAdjacency", "ResponseCache", "add_self_loops", "build_prompt", "find_matrix",
    "make_provider", "parse_adjacency", "postprocess", "prior_for_episode", "query_provider",
    "request_text", "row_normalize", "serialize_matrix", "symmetrize", "uniform_adjacency", "uniform_fallback",
]
