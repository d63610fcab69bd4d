"""Dual-feature consistency verification of inpainted candidates.

Candidates are compared against the inpainted anchor inside the mask's
bounding-box crop, in two feature spaces: the RGB crop itself and a
colorized (turbo-mapped, per-crop min-max normalised) depth crop.  The
combined score is S = eta * S_rgb + (1 - eta) * S_depth.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Protocol, Sequence

import cv2
import numpy as np

from .errors import (
    EmptyMaskError,
    FormatError,
    IoError,
    LengthMismatchError,
    NoCandidatesError,
    ZeroVectorError,
)
from .imaging import DepthMap, Image, Mask, mask_bbox, require_same_size

DEFAULT_ETA = 0.7
CROP_PAD = 8


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Fixed-length numeric feature vector with its Euclidean norm cached."""

    values: np.ndarray
    norm: float = None  # type: ignore[assignment]  # computed in __post_init__

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise FormatError("feature vector contains non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "norm", float(np.linalg.norm(v)))

    def __len__(self) -> int:
        return self.values.size


class FeatureExtractor(Protocol):
    """Deterministic extractor: identical crops yield identical vectors."""

    def extract(self, region: np.ndarray) -> FeatureVector: ...


@dataclass(frozen=True)
class ConsistencyScore:
    """Combined texture/geometry consistency: s = eta*s_rgb + (1-eta)*s_depth."""

    s_rgb: float
    s_depth: float
    s: float
    eta: float
    candidate_depth_range: tuple[float, float] | None = None
    anchor_depth_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise FormatError(f"eta must lie in [0, 1], got {self.eta}")
        if self.s != self.eta * self.s_rgb + (1.0 - self.eta) * self.s_depth:
            raise FormatError("combined score must equal eta*s_rgb + (1-eta)*s_depth exactly")

    @staticmethod
    def combine(s_rgb: float, s_depth: float, eta: float, **ranges) -> "ConsistencyScore":
        return ConsistencyScore(s_rgb, s_depth, eta * s_rgb + (1.0 - eta) * s_depth, eta, **ranges)


def cosine(a: FeatureVector, b: FeatureVector) -> float:
    """Cosine similarity a.b / (|a||b|), clamped to [-1, 1]."""
    if len(a) != len(b):
        raise LengthMismatchError(f"feature lengths differ: {len(a)} vs {len(b)}")
    if a.norm == 0.0 or b.norm == 0.0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a.values, b.values) / (a.norm * b.norm), -1.0, 1.0))


# --- turbo-style depth colorization ------------------------------------------

# Quintic fit of the turbo color map; input t in [0, 1], output RGB in [0, 1].
_TURBO_R = (0.13572138, 4.61539260, -42.66032258, 132.13108234, -152.94239396, 59.28637943)
_TURBO_G = (0.09140261, 2.19418839, 4.84296658, -14.18503333, 4.27729857, 2.82956604)
_TURBO_B = (0.10667330, 12.64194608, -60.58204836, 110.36276771, -89.90310912, 27.34824973)


def turbo_colormap(t: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to (..., 3) turbo RGB."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    out = np.empty(t.shape + (3,), dtype=np.float64)
    for c, coeffs in enumerate((_TURBO_R, _TURBO_G, _TURBO_B)):
        acc = np.zeros_like(t)
        for k, a in enumerate(coeffs):
            acc += a * t**k
        out[..., c] = acc
    return np.clip(out, 0.0, 1.0)


def colorize_depth(depth_crop: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Min-max normalise a depth crop and turbo-map it to RGB.

    Returns (rgb array, (min, max)); a constant crop maps to mid-scale.
    """
    d = np.asarray(depth_crop, dtype=np.float64)
    lo, hi = float(d.min()), float(d.max())
    t = np.full_like(d, 0.5) if hi == lo else (d - lo) / (hi - lo)
    return turbo_colormap(t), (lo, hi)


# --- built-in extractor -------------------------------------------------------

@dataclass(frozen=True)
class PatchStatisticsExtractor:
    """Multi-scale patch statistics over a canonically resized crop.

    The crop is resized to `canon` x `canon`; for each grid in `grids`
    (coarsening spatial scales down to a global cell) the features are
    the per-cell per-channel mean and standard deviation plus the
    per-cell mean luminance gradient magnitude.  Blocks are concatenated
    raw: magnitude changes (noise, texture swaps) rotate the vector and
    lower the cosine, while viewpoint shifts over statistically
    stationary content barely move it.
    """

    canon: int = 64
    grids: tuple[int, ...] = (8, 4, 2, 1)
    contrast_weight: float = 6.0  # balances std/gradient blocks against means

    def extract(self, region: np.ndarray) -> FeatureVector:
        img = np.asarray(region, dtype=np.float64)
        if img.ndim != 3 or img.shape[2] != 3:
            raise FormatError(f"extractor expects (H, W, 3) region, got {img.shape}")
        img = cv2.resize(img, (self.canon, self.canon), interpolation=cv2.INTER_AREA)
        gray = img.mean(axis=2)
        gy, gx = np.gradient(gray)
        mag = np.hypot(gx, gy)
        w = self.contrast_weight
        feats = []
        for g in self.grids:
            cell = self.canon // g
            cells = img.reshape(g, cell, g, cell, 3)
            feats.append(cells.mean(axis=(1, 3)).ravel())
            feats.append(w * cells.std(axis=(1, 3)).ravel())
            feats.append(w * mag.reshape(g, cell, g, cell).mean(axis=(1, 3)).ravel())
        return FeatureVector(np.concatenate(feats))


# --- scoring ------------------------------------------------------------------

def _crop_bounds(mask: Mask, height: int, width: int) -> tuple[int, int, int, int]:
    try:
        r0, c0, r1, c1 = mask_bbox(mask)
    except ValueError as exc:
        raise EmptyMaskError("consistency scoring requires a nonempty mask") from exc
    return (
        max(0, r0 - CROP_PAD),
        max(0, c0 - CROP_PAD),
        min(height, r1 + CROP_PAD),
        min(width, c1 + CROP_PAD),
    )


def score_candidate(
    candidate: tuple[Image, DepthMap],
    anchor: tuple[Image, DepthMap],
    mask_region: Mask,
    extractor: FeatureExtractor,
    eta: float = DEFAULT_ETA,
) -> ConsistencyScore:
    """Score one candidate against the anchor inside the mask's bbox crop."""
    cand_img, cand_depth = candidate
    anch_img, anch_depth = anchor
    require_same_size(cand_img, anch_img, "candidate/anchor images")
    require_same_size(cand_img, mask_region, "candidate/mask")
    require_same_size(cand_img, cand_depth, "candidate image/depth")
    require_same_size(anch_img, anch_depth, "anchor image/depth")
    r0, c0, r1, c1 = _crop_bounds(mask_region, cand_img.height, cand_img.width)

    f_cand = extractor.extract(cand_img.data[r0:r1, c0:c1])
    f_anch = extractor.extract(anch_img.data[r0:r1, c0:c1])
    s_rgb = cosine(f_cand, f_anch)

    cand_rgbd, cand_range = colorize_depth(cand_depth.data[r0:r1, c0:c1])
    anch_rgbd, anch_range = colorize_depth(anch_depth.data[r0:r1, c0:c1])
    s_depth = cosine(extractor.extract(cand_rgbd), extractor.extract(anch_rgbd))

    return ConsistencyScore.combine(
        s_rgb,
        s_depth,
        eta,
        candidate_depth_range=cand_range,
        anchor_depth_range=anch_range,
    )


def select_candidate(
    candidates: Sequence[tuple[Image, DepthMap]],
    anchor: tuple[Image, DepthMap],
    mask_region: Mask,
    extractor: FeatureExtractor,
    eta: float = DEFAULT_ETA,
) -> tuple[int, ConsistencyScore]:
    """Pick the highest-scoring candidate; ties go to the lowest index."""
    if not candidates:
        raise NoCandidatesError("select_candidate needs at least one candidate")
    best_idx = 0
    best: ConsistencyScore | None = None
    for i, cand in enumerate(candidates):
        score = score_candidate(cand, anchor, mask_region, extractor, eta)
        if best is None or score.s > best.s:
            best_idx, best = i, score
    assert best is not None
    return best_idx, best


# --- precomputed feature files -------------------------------------------------
#
# Text format: one line per image id, `<id> <v0> <v1> ...`.

def save_features(features: dict[str, FeatureVector], path: str | os.PathLike) -> None:
    path = os.fspath(path)
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("# feature file v1: <id> <values...>\n")
            for key in sorted(features):
                vals = " ".join(repr(float(x)) for x in features[key].values)
                fh.write(f"{key} {vals}\n")
    except OSError as exc:
        raise IoError(f"cannot write feature file: {path}") from exc


def load_features(path: str | os.PathLike) -> dict[str, FeatureVector]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such feature file: {path}")
    out: dict[str, FeatureVector] = {}
    with open(path, "r", encoding="ascii") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split()
            if len(parts) < 2:
                raise FormatError(f"feature line needs an id and values: {path}")
            out[parts[0]] = FeatureVector(np.array([float(x) for x in parts[1:]]))
    return out
