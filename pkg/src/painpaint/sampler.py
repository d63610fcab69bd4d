"""Adaptive anchor sampling: anchor rounds, exclusion zones, retirement.

State tracks the anchor set A (views barred from future anchor duty),
the inpainted set P, and the masked set I of views still needing work.
Each round inpaints the anchor plus its still-masked k-nearest
neighbors; views whose consistency score exceeds the retirement
threshold leave I.  The next anchor is drawn from (I \\ A) subset of P,
biased toward the worst scores; when that pool is empty a fresh anchor
is drawn from the un-inpainted views (disconnected-component restart).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGraphError, ExhaustedError, IoError, UnknownViewError
from .graph import PerspectiveGraph, k_nearest

DEFAULT_K = 8
DEFAULT_RETIRE_THRESHOLD = 0.9


@dataclass(eq=False)
class SamplerState:
    """Mutable sampler state; single-owner, mutated only between rounds."""

    seed: int
    rng: np.random.Generator
    anchor_set: set[int] = field(default_factory=set)      # A
    inpainted: set[int] = field(default_factory=set)       # P
    masked: set[int] = field(default_factory=set)          # I
    scores: dict[int, float] = field(default_factory=dict)
    round: int = 0
    current_anchor: int | None = None
    anchors_used: list[int] = field(default_factory=list)
    last_neighbors: list[int] = field(default_factory=list)
    round_views: tuple[int, ...] | None = None
    strict_min: bool = False

    def pending(self) -> list[int]:
        """Views still needing work, worst consistency first."""
        return sorted(self.masked, key=lambda v: (self.scores.get(v, -1.0), v))


def init_sampler(
    graph: PerspectiveGraph, seed: int, strict_min: bool = False
) -> SamplerState:
    """Fresh state over all graph nodes with a seeded uniform initial anchor."""
    if not graph.node_ids:
        raise EmptyGraphError("cannot sample from an empty graph")
    rng = np.random.default_rng(seed)
    ids = sorted(graph.node_ids)
    anchor = int(ids[rng.integers(0, len(ids))])
    return SamplerState(
        seed=int(seed),
        rng=rng,
        masked=set(ids),
        current_anchor=anchor,
        strict_min=strict_min,
    )


def begin_round(
    state: SamplerState, graph: PerspectiveGraph, k: int = DEFAULT_K
) -> tuple[int, list[int]]:
    """Open a round at the current anchor.

    Returns (anchor, adjacent ids); the adjacent list starts with the
    anchor itself, followed by the still-masked members of the anchor's
    k-nearest neighbors in nearest-first order.  The anchor and its
    floor(k/2) nearest neighbors enter the exclusion set A.
    """
    anchor = state.current_anchor
    if anchor is None:
        raise ExhaustedError("no anchor available; sampling is done")
    neighbors = k_nearest(graph, anchor, k)
    state.anchor_set.add(anchor)
    state.anchor_set.update(neighbors[: k // 2])
    adjacent = [anchor] + [v for v in neighbors if v in state.masked and v != anchor]
    state.anchors_used.append(anchor)
    state.last_neighbors = neighbors
    state.round_views = tuple(adjacent)
    return anchor, adjacent


def record_round(
    state: SamplerState,
    results: list[tuple[int, float]],
    retire_threshold: float = DEFAULT_RETIRE_THRESHOLD,
) -> SamplerState:
    """Store round scores; views scoring strictly above the threshold retire."""
    allowed = set(state.round_views or ())
    for vid, _ in results:
        if vid not in allowed:
            raise UnknownViewError(f"view {vid} was not part of round {state.round}")
    for vid, s in results:
        state.inpainted.add(vid)
        state.scores[vid] = float(s)
        if s > retire_threshold:
            state.masked.discard(vid)
    state.round += 1
    state.round_views = None
    return state


def next_anchor(
    state: SamplerState, graph: PerspectiveGraph, force: int | None = None
) -> int | None:
    """Choose the next anchor, or None when nothing is left to refine.

    Primary pool: inpainted-but-unretired views outside the exclusion set,
    sampled with weights 1 - score (worst coherence first); `strict_min`
    switches to the deterministic minimum.  When the primary pool is empty
    but un-inpainted views remain (disconnected components), restart
    uniformly among those.  As a last resort, stranded low-score views are
    resampled uniformly, never repeating a previous anchor.
    """
    if force is not None:
        state.current_anchor = force
        return force
    if not state.masked:
        state.current_anchor = None
        return None

    pool = sorted((state.masked - state.anchor_set) & state.inpainted)
    if pool:
        if state.strict_min:
            anchor = min(pool, key=lambda v: (state.scores.get(v, -1.0), v))
        else:
            weights = np.array([1.0 - state.scores.get(v, 0.0) for v in pool])
            weights = np.clip(weights, 0.0, None)
            total = weights.sum()
            if total <= 0.0:
                anchor = int(pool[state.rng.integers(0, len(pool))])
            else:
                anchor = int(state.rng.choice(pool, p=weights / total))
        state.current_anchor = anchor
        return anchor

    fresh = sorted(state.masked - state.inpainted)
    if fresh:
        anchor = int(fresh[state.rng.integers(0, len(fresh))])
        state.current_anchor = anchor
        return anchor

    stranded = sorted(state.masked - set(state.anchors_used))
    if stranded:
        anchor = int(stranded[state.rng.integers(0, len(stranded))])
        state.current_anchor = anchor
        return anchor

    state.current_anchor = None
    return None


# --- trajectory log -----------------------------------------------------------

def append_trajectory(
    path: str | os.PathLike,
    round_index: int,
    anchor: int,
    neighbors: list[int],
    adjacent: list[int],
    scores: dict[int, float],
    retired: list[int],
) -> None:
    """Append one JSON-lines trajectory record (audit and replay input)."""
    rec = {
        "round": round_index,
        "anchor": anchor,
        "neighbors": neighbors,
        "adjacent": adjacent,
        "scores": {str(k): v for k, v in scores.items()},
        "retired": retired,
    }
    try:
        with open(os.fspath(path), "a", encoding="ascii") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot append trajectory: {path}") from exc


def load_trajectory(path: str | os.PathLike) -> list[dict]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such trajectory log: {path}")
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for ln in fh:
            ln = ln.strip()
            if ln:
                records.append(json.loads(ln))
    return records
