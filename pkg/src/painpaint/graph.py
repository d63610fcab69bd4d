"""Perspective graph: feature-match-based view proximity and k-NN queries.

Edge weights are similarities in [0, 1] (higher = closer viewpoint),
computed as the mean confidence of matches whose confidence exceeds the
threshold tau.  Pairs with no surviving match are absent from the edge
set and treated as infinitely distant.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .dataset import ViewRecord
from .errors import FormatError, InsufficientViewsError, IoError, UnknownNodeError

DEFAULT_TAU = 0.4


@dataclass(frozen=True, eq=False)
class MatchSet:
    """Point correspondences between two views with per-match confidence."""

    points_i: np.ndarray   # (N, 2) pixel coordinates in view i
    points_j: np.ndarray   # (N, 2) pixel coordinates in view j
    confidence: np.ndarray  # (N,) in [0, 1]

    def __post_init__(self):
        pi = np.asarray(self.points_i, dtype=np.float64).reshape(-1, 2)
        pj = np.asarray(self.points_j, dtype=np.float64).reshape(-1, 2)
        c = np.asarray(self.confidence, dtype=np.float64).reshape(-1)
        if not (len(pi) == len(pj) == len(c)):
            raise FormatError("match arrays disagree in length")
        if len(c) and (c.min() < 0.0 or c.max() > 1.0):
            raise FormatError("match confidences must lie in [0, 1]")
        object.__setattr__(self, "points_i", pi)
        object.__setattr__(self, "points_j", pj)
        object.__setattr__(self, "confidence", c)

    def __len__(self) -> int:
        return len(self.confidence)

    def swapped(self) -> "MatchSet":
        return MatchSet(self.points_j, self.points_i, self.confidence)


class Matcher(Protocol):
    """Deterministic pairwise matcher; symmetric up to pair ordering."""

    def match(self, view_i: ViewRecord, view_j: ViewRecord) -> MatchSet: ...


@dataclass(eq=False)
class PerspectiveGraph:
    """Nodes are view ids; symmetric edges carry similarity in [0, 1]."""

    node_ids: tuple[int, ...]
    edges: dict[tuple[int, int], float]  # keyed by (min_id, max_id)
    tau: float
    views: dict[int, ViewRecord] = field(default_factory=dict)

    def __post_init__(self):
        for (i, j), s in self.edges.items():
            if i == j:
                raise FormatError(f"self edge on node {i}")
            if i > j:
                raise FormatError(f"edge key ({i}, {j}) not canonical")
            if not (0.0 <= s <= 1.0):
                raise FormatError(f"edge ({i}, {j}) similarity {s} outside [0, 1]")

    def similarity(self, i: int, j: int) -> float | None:
        return self.edges.get((min(i, j), max(i, j)))

    def neighbors(self, node: int) -> list[tuple[int, float]]:
        if node not in self.node_ids:
            raise UnknownNodeError(f"no node {node} in graph")
        out = []
        for (i, j), s in self.edges.items():
            if i == node:
                out.append((j, s))
            elif j == node:
                out.append((i, s))
        return out


def pair_similarity(matches: MatchSet, tau: float = DEFAULT_TAU) -> float | None:
    """Mean confidence over matches with confidence strictly above tau.

    Returns None (absent) when no match survives the threshold.
    """
    surviving = matches.confidence[matches.confidence > tau]
    if surviving.size == 0:
        return None
    return float(min(1.0, surviving.mean()))


def build_graph(
    views: list[ViewRecord],
    matcher: Matcher,
    tau: float = DEFAULT_TAU,
) -> PerspectiveGraph:
    """Evaluate all view pairs and keep edges with a present similarity."""
    if len(views) < 2:
        raise InsufficientViewsError(f"graph needs >= 2 views, got {len(views)}")
    by_id = {v.view_id: v for v in views}
    ids = sorted(by_id)
    edges: dict[tuple[int, int], float] = {}
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            sim = pair_similarity(matcher.match(by_id[i], by_id[j]), tau)
            if sim is not None:
                edges[(i, j)] = sim
    return PerspectiveGraph(tuple(ids), edges, tau, by_id)


def k_nearest(graph: PerspectiveGraph, node: int, k: int = 8) -> list[int]:
    """Up to k neighbor ids by descending similarity; ties by ascending id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = sorted(graph.neighbors(node), key=lambda e: (-e[1], e[0]))
    return [nid for nid, _ in ranked[:k]]


# --- geometric surrogate matcher --------------------------------------------

@dataclass(frozen=True)
class GeometricSurrogateMatcher:
    """Pose-and-depth driven stand-in for a learned matcher.

    Samples a pixel grid in each view, warps the samples into the other
    view through the ground-truth depth, and emits confidence
    exp(-displacement / image diagonal) for samples that land in bounds
    and unoccluded.  Duplicated viewpoints therefore score 1.0 and the
    confidence decays smoothly with viewpoint separation.  Matching runs
    in both directions so the result is symmetric up to pair ordering.
    """

    grid_step: int = 8
    occlusion_rel_tol: float = 0.02

    def match(self, view_i: ViewRecord, view_j: ViewRecord) -> MatchSet:
        fwd = self._one_way(view_i, view_j)
        bwd = self._one_way(view_j, view_i).swapped()
        return MatchSet(
            np.concatenate([fwd.points_i, bwd.points_i]),
            np.concatenate([fwd.points_j, bwd.points_j]),
            np.concatenate([fwd.confidence, bwd.confidence]),
        )

    def _one_way(self, src: ViewRecord, dst: ViewRecord) -> MatchSet:
        if src.depth is None or dst.depth is None:
            raise ValueError(
                "GeometricSurrogateMatcher needs ground-truth depth on both views"
            )
        from .geometry import relative_matrix  # local import avoids cycle at module load

        h, w = src.image.height, src.image.width
        half = self.grid_step // 2
        vs, us = np.mgrid[half:h:self.grid_step, half:w:self.grid_step]
        us = us.ravel().astype(np.float64)
        vs = vs.ravel().astype(np.float64)
        d = src.depth.data[vs.astype(int), us.astype(int)].astype(np.float64)
        ok = d > 0
        us, vs, d = us[ok], vs[ok], d[ok]
        if us.size == 0:
            return MatchSet(np.empty((0, 2)), np.empty((0, 2)), np.empty(0))

        ki = src.camera.intrinsics
        x = (us - ki.cx) / ki.fx * d
        y = (vs - ki.cy) / ki.fy * d
        m = relative_matrix(src.camera.pose, dst.camera.pose)
        xb = m[0, 0] * x + m[0, 1] * y + m[0, 2] * d + m[0, 3]
        yb = m[1, 0] * x + m[1, 1] * y + m[1, 2] * d + m[1, 3]
        zb = m[2, 0] * x + m[2, 1] * y + m[2, 2] * d + m[2, 3]
        front = zb > 0
        us, vs, xb, yb, zb = us[front], vs[front], xb[front], yb[front], zb[front]
        kj = dst.camera.intrinsics
        uj = kj.fx * xb / zb + kj.cx
        vj = kj.fy * yb / zb + kj.cy
        inb = (uj >= 0) & (uj <= dst.image.width - 1) & (vj >= 0) & (vj <= dst.image.height - 1)
        us, vs, uj, vj, zb = us[inb], vs[inb], uj[inb], vj[inb], zb[inb]
        if us.size == 0:
            return MatchSet(np.empty((0, 2)), np.empty((0, 2)), np.empty(0))

        # Drop samples hidden behind closer destination geometry.
        dj = dst.depth.data[
            np.clip(np.round(vj).astype(int), 0, dst.image.height - 1),
            np.clip(np.round(uj).astype(int), 0, dst.image.width - 1),
        ].astype(np.float64)
        visible = (dj <= 0) | (zb <= dj * (1.0 + self.occlusion_rel_tol) + 1e-9)
        us, vs, uj, vj = us[visible], vs[visible], uj[visible], vj[visible]
        if us.size == 0:
            return MatchSet(np.empty((0, 2)), np.empty((0, 2)), np.empty(0))

        diag = float(np.hypot(dst.image.width, dst.image.height))
        disp = np.hypot(uj - us, vj - vs)
        conf = np.clip(np.exp(-disp / diag), 0.0, 1.0)
        return MatchSet(np.stack([us, vs], axis=1), np.stack([uj, vj], axis=1), conf)


# --- precomputed match files -------------------------------------------------
#
# Text format, one record per pair:
#
#     pair <i> <j>
#     <u_i> <v_i> <u_j> <v_j> <confidence>
#     ...
#
# Blank lines and '#' comments are ignored.

def save_matches(matches: dict[tuple[int, int], MatchSet], path: str | os.PathLike) -> None:
    path = os.fspath(path)
    lines = ["# match file v1: pair <i> <j>, then rows u_i v_i u_j v_j confidence"]
    for (i, j) in sorted(matches):
        ms = matches[(i, j)]
        lines.append(f"pair {i} {j}")
        for (ui, vi), (uj, vj), c in zip(ms.points_i, ms.points_j, ms.confidence):
            lines.append(
                f"{float(ui)!r} {float(vi)!r} {float(uj)!r} {float(vj)!r} {float(c)!r}"
            )
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write match file: {path}") from exc


def load_matches(path: str | os.PathLike) -> dict[tuple[int, int], MatchSet]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such match file: {path}")
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    out: dict[tuple[int, int], MatchSet] = {}
    current: tuple[int, int] | None = None
    rows: list[list[float]] = []

    def flush():
        if current is not None:
            arr = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
            out[current] = MatchSet(arr[:, 0:2], arr[:, 2:4], arr[:, 4])

    for ln in lines:
        head = re.fullmatch(r"pair\s+(\d+)\s+(\d+)", ln)
        if head:
            flush()
            current = (int(head.group(1)), int(head.group(2)))
            rows = []
        else:
            if current is None:
                raise FormatError(f"match row before any 'pair' header in {path}")
            vals = ln.split()
            if len(vals) != 5:
                raise FormatError(f"expected 5 columns, got {len(vals)} in {path}")
            rows.append([float(x) for x in vals])
    flush()
    return out


# --- graph cache files --------------------------------------------------------

def save_graph(graph: PerspectiveGraph, path: str | os.PathLike) -> None:
    """Serialize ids, tau, and edges; view records are not persisted."""
    path = os.fspath(path)
    lines = ["# perspective graph v1"]
    lines.append(f"tau {graph.tau!r}")
    lines.append("nodes " + " ".join(str(i) for i in graph.node_ids))
    for (i, j) in sorted(graph.edges):
        lines.append(f"edge {i} {j} {graph.edges[(i, j)]!r}")
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write graph file: {path}") from exc


def load_graph(path: str | os.PathLike, views: dict[int, ViewRecord] | None = None) -> PerspectiveGraph:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such graph file: {path}")
    tau = DEFAULT_TAU
    node_ids: tuple[int, ...] = ()
    edges: dict[tuple[int, int], float] = {}
    with open(path, "r", encoding="ascii") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split()
            if parts[0] == "tau":
                tau = float(parts[1])
            elif parts[0] == "nodes":
                node_ids = tuple(int(x) for x in parts[1:])
            elif parts[0] == "edge":
                edges[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                raise FormatError(f"unknown graph line {parts[0]!r} in {path}")
    if not node_ids:
        raise FormatError(f"graph file has no nodes: {path}")
    return PerspectiveGraph(node_ids, edges, tau, views or {})


@dataclass(frozen=True)
class FileMatcher:
    """Matcher backed by a precomputed match file (external matches)."""

    matches: dict[tuple[int, int], MatchSet]

    @staticmethod
    def from_file(path: str | os.PathLike) -> "FileMatcher":
        return FileMatcher(load_matches(path))

    def match(self, view_i: ViewRecord, view_j: ViewRecord) -> MatchSet:
        i, j = view_i.view_id, view_j.view_id
        if (i, j) in self.matches:
            return self.matches[(i, j)]
        if (j, i) in self.matches:
            return self.matches[(j, i)].swapped()
        return MatchSet(np.empty((0, 2)), np.empty((0, 2)), np.empty(0))
