"""Shared fixtures: small synthetic scenes and camera builders."""

from __future__ import annotations

import numpy as np
import pytest

from painpaint import harness
from painpaint.dataset import ViewRecord
from painpaint.geometry import Camera, Intrinsics, Pose
from painpaint.imaging import Image


def make_camera(
    fx=80.0, fy=80.0, cx=None, cy=None, width=64, height=64, rotation=None, translation=None
) -> Camera:
    cx = (width - 1) / 2.0 if cx is None else cx
    cy = (height - 1) / 2.0 if cy is None else cy
    pose = Pose(
        np.eye(3) if rotation is None else rotation,
        np.zeros(3) if translation is None else translation,
    )
    return Camera(Intrinsics(fx, fy, cx, cy), pose, width, height)


def rotation_about_y(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_image(rng: np.random.Generator, h=64, w=64) -> Image:
    return Image(rng.random((h, w, 3)).astype(np.float32))


@pytest.fixture(scope="session")
def room16():
    """16-view prism-room orbit at 128 px with exact depth and ground truth."""
    spec = harness.room_orbit_spec(views=16, size=128)
    return harness.render_scene(spec, seed=3)


@pytest.fixture(scope="session")
def room16_records(room16):
    """ViewRecords whose image is the unmasked ground truth (for matching)."""
    return [ViewRecord(v.view_id, v.gt_image, v.mask, v.camera, v.depth) for v in room16]


@pytest.fixture(scope="session")
def room8_small():
    spec = harness.room_orbit_spec(views=8, size=96)
    return harness.render_scene(spec, seed=5)


def gt_record(v) -> ViewRecord:
    return ViewRecord(v.view_id, v.gt_image, v.mask, v.camera, v.depth)


def masked_record(v) -> ViewRecord:
    return ViewRecord(v.view_id, v.image, v.mask, v.camera, v.depth)
