"""Depth-based propagation of inpainted anchor content into masked views.

The inpainted anchor is forward-warped into the target camera; target
pixels inside the mask take the warped color where a source pixel landed,
and keep the render color where none did.  Pixels outside the mask are
never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .dataset import ViewRecord
from .errors import EstimatorError
from .geometry import Camera, warp_forward
from .imaging import DepthMap, Image, Mask, require_same_size


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Outcome of one anchor->target propagation."""

    image: Image     # target view after masked-region update
    filled: Mask     # masked pixels that received projected content
    coverage: float  # |filled| / |mask|, 0 when the mask is empty


def propagate(
    anchor_inpainted: Image,
    anchor_depth: DepthMap,
    anchor_cam: Camera,
    target_render: Image,
    target_mask: Mask,
    target_cam: Camera,
) -> PropagationResult:
    """Project anchor content into the target's masked region.

    Masked target pixels hit by the warp take the warped color; masked
    pixels missed by it retain the render color; unmasked pixels are
    byte-identical to the input render.
    """
    require_same_size(anchor_inpainted, anchor_depth, "anchor image/depth")
    require_same_size(target_render, target_mask, "target render/mask")
    warped, validity, _zbuf = warp_forward(anchor_inpainted, anchor_depth, anchor_cam, target_cam)
    require_same_size(warped, target_render, "warped/target render")

    filled = (target_mask.data == 1) & (validity.data == 1)
    out = target_render.data.copy()
    out[filled] = warped.data[filled]

    mask_count = int(target_mask.data.sum())
    coverage = float(filled.sum()) / mask_count if mask_count else 0.0
    return PropagationResult(Image(out), Mask(filled.astype(np.uint8)), coverage)


# --- depth estimation backends ------------------------------------------------

class DepthEstimator(Protocol):
    """Monocular depth backend: full-frame metric depth, 0 = invalid."""

    def estimate(self, image: Image, view: ViewRecord) -> DepthMap: ...


@dataclass(frozen=True)
class GroundTruthDepthEstimator:
    """Returns the dataset's exact depth for the view (oracle passthrough)."""

    depths: dict[int, DepthMap]

    def estimate(self, image: Image, view: ViewRecord) -> DepthMap:
        if view.view_id not in self.depths:
            raise KeyError(f"no ground-truth depth for view {view.view_id}")
        return self.depths[view.view_id]


@dataclass(frozen=True)
class ConstantDepthEstimator:
    """Flat scene at a fixed depth; useful as a degenerate baseline."""

    depth: float = 2.0

    def estimate(self, image: Image, view: ViewRecord) -> DepthMap:
        return DepthMap(np.full((image.height, image.width), self.depth, dtype=np.float32))


def depth_for(view: ViewRecord, estimator: DepthEstimator, image: Image | None = None) -> DepthMap:
    """Estimate depth for a view, wrapping backend failures in EstimatorError.

    `image` overrides the record's image (the estimator sees the inpainted
    frame, not the masked render).
    """
    target = image if image is not None else view.image
    try:
        depth = estimator.estimate(target, view)
    except EstimatorError:
        raise
    except Exception as exc:
        raise EstimatorError(f"depth estimator failed on view {view.view_id}: {exc}") from exc
    require_same_size(target, depth, f"view {view.view_id} image/estimated depth")
    return depth
