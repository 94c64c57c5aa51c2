"""Turn a raw affinity matrix into the coordination-graph prior.

Order matters and is fixed: symmetrise, row-normalise, add self-loops.
Rows of the result therefore sum to 2, not 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .parse import RawAdjacency

DEGENERATE_ROW_SUM = 1e-9


@dataclass
class GraphPrior:
    matrix: np.ndarray
    prompt_hash: str = ""
    provider: str = ""
    model: str = ""
    fallback: bool = False
    raw_text: str = ""
    degenerate_rows: tuple = field(default=())

    def provenance(self) -> dict:
        return {"prompt_hash": self.prompt_hash, "provider": self.provider,
                "model": self.model, "fallback": self.fallback,
                "degenerate_rows": list(self.degenerate_rows)}


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def row_normalize(a: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Divide each row by its sum; rows summing below 1e-9 become uniform 1/n."""
    n = a.shape[0]
    # correctly rounded sums, so the result does not depend on summation order
    sums = [math.fsum(row) for row in a.tolist()]
    out = np.empty_like(a)
    degenerate = []
    for i in range(n):
        if sums[i] < DEGENERATE_ROW_SUM:
            out[i] = 1.0 / n
            degenerate.append(i)
        else:
            out[i] = a[i] / sums[i]
    return out, tuple(degenerate)


def add_self_loops(a: np.ndarray) -> np.ndarray:
    return a + np.eye(a.shape[0])


def postprocess(raw: RawAdjacency | np.ndarray) -> GraphPrior:
    m = raw.matrix if isinstance(raw, RawAdjacency) else raw
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"adjacency must be square, got {m.shape}")
    norm, degenerate = row_normalize(symmetrize(m))
    prior = GraphPrior(add_self_loops(norm), degenerate_rows=degenerate)
    if isinstance(raw, RawAdjacency):
        prior.provider, prior.model, prior.raw_text = raw.provider, raw.model, raw.source_text
    return prior


def uniform_fallback(n: int, prompt_hash: str = "") -> GraphPrior:
    prior = postprocess(np.zeros((n, n)))
    prior.fallback = True
    prior.prompt_hash = prompt_hash
    prior.provider = "fallback"
    return prior
