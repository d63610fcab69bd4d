"""Pinhole camera model, SE(3) pose algebra, and cross-view warping.

Conventions, fixed across the package and its file formats:

- Poses are world->camera: x_cam = R @ x_world + t.
- Pixel (u, v) = (column, row); the sample position of integer pixel
  indices is exactly (u, v) in continuous image coordinates.
- Unprojection of pixel (u, v) at depth d gives
  ((u - cx) / fx * d, (v - cy) / fy * d, d); depth is the camera-frame z.
- Forward warping splats each source pixel to the nearest destination
  pixel (half-up rounding, floor(x + 0.5)) under a strict z-buffer:
  smaller depth wins, exact ties go to the lower source row-major index.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DimensionMismatchError,
    FormatError,
    InvalidDepthError,
    IoError,
)
from .imaging import DepthMap, Image, Mask

_ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Intrinsics:
    """Pinhole intrinsics: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise FormatError(f"focal lengths must be positive: fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


@dataclass(frozen=True, eq=False)
class Pose:
    """World->camera rigid transform: rotation (3x3) and translation (3,)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise FormatError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
            raise FormatError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise FormatError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous world->camera matrix."""
        m = np.eye(4, dtype=np.float64)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation))

    def camera_center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -(self.rotation.T @ self.translation)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class Camera:
    """A pinhole camera: intrinsics, world->camera pose, and image size."""

    intrinsics: Intrinsics
    pose: Pose
    width: int
    height: int

    def __post_init__(self):
        k = self.intrinsics
        if not (0.0 <= k.cx <= self.width and 0.0 <= k.cy <= self.height):
            raise FormatError(
                f"principal point ({k.cx}, {k.cy}) outside image {self.width}x{self.height}"
            )


def unproject(pixel: tuple[float, float], depth: float, intrinsics: Intrinsics) -> np.ndarray:
    """Lift pixel (u, v) at metric depth into the camera frame.

    Returns [x, y, z] with z equal to depth exactly.
    """
    u, v = float(pixel[0]), float(pixel[1])
    d = float(depth)
    if not (np.isfinite(d) and d > 0.0):
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    if not (np.isfinite(u) and np.isfinite(v)):
        raise InvalidDepthError(f"pixel coordinates must be finite, got {pixel}")
    x = (u - intrinsics.cx) / intrinsics.fx * d
    y = (v - intrinsics.cy) / intrinsics.fy * d
    return np.array([x, y, d], dtype=np.float64)


def project(point: np.ndarray, intrinsics: Intrinsics) -> tuple[tuple[float, float], float]:
    """Project a camera-frame point to ((u, v), depth); z must be positive."""
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    if z <= 0.0:
        raise BehindCameraError(f"point behind camera: z={z}")
    u = intrinsics.fx * x / z + intrinsics.cx
    v = intrinsics.fy * y / z + intrinsics.cy
    return (u, v), z


def relative_matrix(pose_a: Pose, pose_b: Pose) -> np.ndarray:
    """4x4 matrix taking frame-A camera coordinates to frame B: T_B @ T_A^-1."""
    return pose_b.matrix @ pose_a.inverse().matrix


def change_frame(point: np.ndarray, pose_a: Pose, pose_b: Pose) -> np.ndarray:
    """Re-express a camera-frame point of pose A in the frame of pose B.

    Applies T_B @ T_A^-1 in homogeneous coordinates and normalises by the
    homogeneous component (a no-op for rigid transforms, kept for fidelity
    with the general formulation).
    """
    m = relative_matrix(pose_a, pose_b)
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    xh = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
    yh = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
    zh = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    wh = m[3, 0] * x + m[3, 1] * y + m[3, 2] * z + m[3, 3]
    return np.array([xh / wh, yh / wh, zh / wh], dtype=np.float64)


def round_half_up(x: np.ndarray) -> np.ndarray:
    """Nearest-pixel rounding used by the warper: floor(x + 0.5)."""
    return np.floor(x + 0.5)


def warp_forward(
    src: Image,
    src_depth: DepthMap,
    src_cam: Camera,
    dst_cam: Camera,
) -> tuple[Image, Mask, DepthMap]:
    """Forward-splat a source view into a destination camera.

    Every source pixel with valid (positive) depth is unprojected, moved
    into the destination frame, projected, and rounded to the nearest
    destination pixel.  A strict per-pixel z-buffer keeps the smallest
    destination depth; exact depth ties are resolved toward the lower
    source row-major index, so the result is independent of evaluation
    order.  Pixels landing outside the destination bounds or behind the
    destination camera are dropped.

    Returns (warped image, validity mask, destination z-buffer); pixels
    never hit have color 0, validity 0, and z-buffer 0 (invalid).
    """
    if (src.height, src.width) != (src_depth.height, src_depth.width):
        raise DimensionMismatchError(
            f"image {src.height}x{src.width} vs depth {src_depth.height}x{src_depth.width}"
        )
    if (src_cam.height, src_cam.width) != (src.height, src.width):
        raise DimensionMismatchError(
            f"source camera {src_cam.height}x{src_cam.width} vs image {src.height}x{src.width}"
        )
    h, w = src.height, src.width
    dh, dw = dst_cam.height, dst_cam.width

    depth = src_depth.data.astype(np.float64)
    valid = depth > 0.0
    vs, us = np.nonzero(valid)
    src_index = vs * w + us  # row-major tie-break key
    d = depth[vs, us]

    ki = src_cam.intrinsics
    x = (us - ki.cx) / ki.fx * d
    y = (vs - ki.cy) / ki.fy * d
    z = d

    m = relative_matrix(src_cam.pose, dst_cam.pose)
    xh = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
    yh = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
    zh = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    wh = m[3, 0] * x + m[3, 1] * y + m[3, 2] * z + m[3, 3]
    xb, yb, zb = xh / wh, yh / wh, zh / wh

    front = zb > 0.0
    kd = dst_cam.intrinsics
    ub = np.full_like(zb, -1.0)
    vb = np.full_like(zb, -1.0)
    ub[front] = kd.fx * xb[front] / zb[front] + kd.cx
    vb[front] = kd.fy * yb[front] / zb[front] + kd.cy
    ui = round_half_up(ub)
    vi = round_half_up(vb)
    keep = front & (ui >= 0) & (ui < dw) & (vi >= 0) & (vi < dh)

    ui = ui[keep].astype(np.int64)
    vi = vi[keep].astype(np.int64)
    zk = zb[keep]
    idx = src_index[keep]
    colors = src.data[vs[keep], us[keep]]

    warped = np.zeros((dh, dw, 3), dtype=np.float32)
    validity = np.zeros((dh, dw), dtype=np.uint8)
    zbuffer = np.zeros((dh, dw), dtype=np.float32)

    if zk.size:
        dst_flat = vi * dw + ui
        # Sort by (destination pixel, depth, source index); the first entry
        # per destination pixel is the strict z-buffer winner.
        order = np.lexsort((idx, zk, dst_flat))
        dst_sorted = dst_flat[order]
        first = np.ones(dst_sorted.size, dtype=bool)
        first[1:] = dst_sorted[1:] != dst_sorted[:-1]
        win = order[first]
        wf = dst_flat[win]
        warped.reshape(-1, 3)[wf] = colors[win]
        validity.reshape(-1)[wf] = 1
        zbuffer.reshape(-1)[wf] = zk[win].astype(np.float32)

    return Image(warped), Mask(validity), DepthMap(zbuffer)


# --- camera file I/O --------------------------------------------------------
#
# Plain-text camera file, one block per view:
#
#     view <id>
#     <fx> <fy> <cx> <cy> <width> <height>
#     <4 rows of the 4x4 row-major world->camera matrix>
#
# Blank lines and '#' comments are ignored.

def save_cameras(cameras: dict[int, Camera], path: str | os.PathLike) -> None:
    path = os.fspath(path)
    lines = ["# cameras v1: fx fy cx cy width height, then 4x4 world->camera"]
    for vid in sorted(cameras):
        cam = cameras[vid]
        k = cam.intrinsics
        lines.append(f"view {vid}")
        lines.append(
            f"{float(k.fx)!r} {float(k.fy)!r} {float(k.cx)!r} {float(k.cy)!r} "
            f"{cam.width} {cam.height}"
        )
        for row in cam.pose.matrix:
            lines.append(" ".join(repr(float(x)) for x in row))
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write camera file: {path}") from exc


def load_cameras(path: str | os.PathLike) -> dict[int, Camera]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such camera file: {path}")
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    cameras: dict[int, Camera] = {}
    i = 0
    while i < len(lines):
        head = re.fullmatch(r"view\s+(\d+)", lines[i])
        if not head:
            raise FormatError(f"expected 'view <id>' at line {i + 1} of {path}")
        vid = int(head.group(1))
        if i + 5 >= len(lines):
            raise FormatError(f"truncated camera block for view {vid} in {path}")
        try:
            fx, fy, cx, cy, width, height = lines[i + 1].split()
            rows = [[float(x) for x in lines[i + 2 + r].split()] for r in range(4)]
        except ValueError as exc:
            raise FormatError(f"malformed camera block for view {vid} in {path}") from exc
        m = np.array(rows, dtype=np.float64)
        if m.shape != (4, 4):
            raise FormatError(f"camera matrix for view {vid} is not 4x4 in {path}")
        cameras[vid] = Camera(
            intrinsics=Intrinsics(float(fx), float(fy), float(cx), float(cy)),
            pose=Pose(m[:3, :3], m[:3, 3]),
            width=int(width),
            height=int(height),
        )
        i += 6
    return cameras


def look_at_pose(eye: np.ndarray, target: np.ndarray, up: np.ndarray) -> Pose:
    """World->camera pose for a camera at `eye` looking toward `target`.

    Camera axes: +z forward (toward target), +x right, +y down, matching
    the pixel convention (v grows downward).
    """
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(fwd)
    if norm == 0.0:
        raise FormatError("look_at_pose: eye and target coincide")
    fwd = fwd / norm
    upn = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, upn)
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise FormatError("look_at_pose: up parallel to view direction")
    right /= rn
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd])  # rows: camera axes in world coords
    return Pose(r, -(r @ eye))
