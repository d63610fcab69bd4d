"""Pluggable scene representation behind the iterative pipeline.

A SceneModel consumes weighted inpainted views and renders cameras.  The
reference ViewBankModel stores the latest image per view and renders a
known camera bit-identically; unknown cameras are served by warping the
nearest stored view (when its depth is available).  A real differentiable
3D backend plugs in by implementing the same three methods.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from .dataset import ViewRecord
from .errors import UnknownViewError
from .geometry import Camera, warp_forward
from .imaging import DepthMap, Image


class SceneModel(Protocol):
    """Behavioral contract for scene backends.

    update() may be called once per round with the complete inpainted set;
    render() at a camera present in the update set must reproduce that
    view's image up to the backend's documented fidelity.  render_depth()
    is optional and may raise NotImplementedError.
    """

    def update(self, views: Sequence[tuple[ViewRecord, float]]) -> None: ...

    def render(self, camera: Camera) -> Image: ...

    def render_depth(self, camera: Camera) -> DepthMap: ...


def _pose_distance(a: Camera, b: Camera) -> float:
    return float(np.linalg.norm(a.pose.camera_center() - b.pose.camera_center()))


def _same_camera(a: Camera, b: Camera, tol: float = 1e-12) -> bool:
    if (a.width, a.height) != (b.width, b.height):
        return False
    ka, kb = a.intrinsics, b.intrinsics
    if max(abs(ka.fx - kb.fx), abs(ka.fy - kb.fy), abs(ka.cx - kb.cx), abs(ka.cy - kb.cy)) > tol:
        return False
    return (
        np.abs(a.pose.rotation - b.pose.rotation).max() <= tol
        and np.abs(a.pose.translation - b.pose.translation).max() <= tol
    )


class ViewBankModel:
    """Reference SceneModel: a per-view store of the latest inpainted images.

    render(known camera) returns the stored image bit-identically; an
    unseen camera gets the nearest stored view forward-warped into it
    (holes stay black), or the nearest image itself when no depth is
    stored.  Updates are serialized by the caller; renders are pure reads.
    """

    def __init__(self):
        self._store: dict[int, tuple[ViewRecord, float]] = {}

    def update(self, views: Sequence[tuple[ViewRecord, float]]) -> None:
        for rec, weight in views:
            self._store[rec.view_id] = (rec, float(weight))

    def known_ids(self) -> list[int]:
        return sorted(self._store)

    def stored(self, view_id: int) -> ViewRecord:
        if view_id not in self._store:
            raise UnknownViewError(f"no stored view {view_id}")
        return self._store[view_id][0]

    def _nearest(self, camera: Camera) -> ViewRecord:
        if not self._store:
            raise UnknownViewError("empty view bank cannot render")
        best = min(
            self._store.values(),
            key=lambda e: (_pose_distance(e[0].camera, camera), e[0].view_id),
        )
        return best[0]

    def render(self, camera: Camera) -> Image:
        for rec, _ in self._store.values():
            if _same_camera(rec.camera, camera):
                return rec.image
        rec = self._nearest(camera)
        if rec.depth is None:
            return rec.image
        warped, _validity, _z = warp_forward(rec.image, rec.depth, rec.camera, camera)
        return warped

    def render_depth(self, camera: Camera) -> DepthMap:
        for rec, _ in self._store.values():
            if _same_camera(rec.camera, camera) and rec.depth is not None:
                return rec.depth
        rec = self._nearest(camera)
        if rec.depth is None:
            raise NotImplementedError("no stored depth to render from")
        _w, _v, zbuf = warp_forward(rec.image, rec.depth, rec.camera, camera)
        return zbuf
