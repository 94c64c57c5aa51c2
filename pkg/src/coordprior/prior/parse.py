"""Extract an n x n adjacency matrix from free-form model output."""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

_THINK = re.compile(r"<think>.*?(</think>|$)", re.S | re.I)
_TRAILING_COMMA = re.compile(r",\s*([\]}])")
_BARE_DECIMAL = re.compile(r"(?<![\w.])(-?)\.(\d)")
_LINE_COMMENT = re.compile(r"//[^\n]*")
_decoder = json.JSONDecoder()


class ParseFailure(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass
class RawAdjacency:
    matrix: np.ndarray
    source_text: str = ""
    provider: str = ""
    model: str = ""


def _is_matrix_candidate(obj) -> bool:
    return (isinstance(obj, list) and len(obj) > 0
            and all(isinstance(r, list) for r in obj)
            and all(not isinstance(x, (list, dict)) for r in obj for x in r))


def _first_candidate(text: str):
    i = text.find("[")
    while i != -1:
        try:
            obj, _ = _decoder.raw_decode(text, i)
        except (ValueError, RecursionError):
            obj = None
        if _is_matrix_candidate(obj):
            return obj
        i = text.find("[", i + 1)
    return None


def find_matrix(text: str):
    """First JSON array-of-arrays of scalars in ``text``, or None."""
    text = _THINK.sub(" ", text)
    found = _first_candidate(text)
    if found is None:
        lenient = _TRAILING_COMMA.sub(r"\1", _LINE_COMMENT.sub("", text))
        lenient = _BARE_DECIMAL.sub(r"\g<1>0.\2", lenient)
        if lenient != text:
            found = _first_candidate(lenient)
    return found


def _number(x) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseFailure("non_numeric", f"entry {x!r}")
    v = float(x)
    if not math.isfinite(v):
        raise ParseFailure("non_numeric", f"non-finite entry {x!r}")
    return v


def parse_adjacency(text: str, n: int) -> RawAdjacency:
    """Parse an n x n matrix, tolerating prose and code fences around it.

    Entries outside [0, 1] are clamped (with a logged warning).
    """
    rows = find_matrix(text)
    if rows is None:
        raise ParseFailure("no_matrix", "no JSON array-of-arrays found")
    if len(rows) != n or any(len(r) != n for r in rows):
        shape = f"{len(rows)} rows of lengths {sorted({len(r) for r in rows})}"
        raise ParseFailure("wrong_shape", f"expected {n}x{n}, got {shape}")
    m = np.array([[_number(x) for x in r] for r in rows], dtype=np.float64)
    if np.any((m < 0.0) | (m > 1.0)):
        log.warning("clamping %d adjacency entries into [0, 1]", int(np.sum((m < 0) | (m > 1))))
        m = np.clip(m, 0.0, 1.0)
    return RawAdjacency(m, text)


def serialize_matrix(m) -> str:
    return json.dumps(np.asarray(m, dtype=np.float64).tolist())
