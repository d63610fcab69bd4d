"""Multi-view dataset records and the on-disk directory layout.

A dataset directory holds:

    cameras.txt            camera file (see geometry.save_cameras)
    view_0000.png ...      per-view RGB renders (16-bit PNG)
    mask_0000.png ...      per-view masks (8-bit gray, >=128 -> 1)
    depth_0000.pfm ...     optional per-view metric depth (PFM)
    gt/view_0000.png ...   optional ground-truth renders

View indices are zero-padded to four digits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import IoError, UnknownViewError
from .geometry import Camera, load_cameras, save_cameras
from .imaging import (
    DepthMap,
    Image,
    Mask,
    load_depth,
    load_image,
    load_mask,
    require_same_size,
    save_depth,
    save_image,
    save_mask,
)


def view_filename(vid: int) -> str:
    return f"view_{vid:04d}.png"


def mask_filename(vid: int) -> str:
    return f"mask_{vid:04d}.png"


def depth_filename(vid: int) -> str:
    return f"depth_{vid:04d}.pfm"


@dataclass(frozen=True, eq=False)
class ViewRecord:
    """One viewpoint: image + mask + camera, optionally with metric depth."""

    view_id: int
    image: Image
    mask: Mask
    camera: Camera
    depth: DepthMap | None = None

    def __post_init__(self):
        require_same_size(self.image, self.mask, f"view {self.view_id} image/mask")
        if self.depth is not None:
            require_same_size(self.image, self.depth, f"view {self.view_id} image/depth")
        if (self.camera.height, self.camera.width) != (self.image.height, self.image.width):
            raise UnknownViewError(
                f"view {self.view_id}: camera size {self.camera.height}x{self.camera.width}"
                f" does not match image {self.image.height}x{self.image.width}"
            )


@dataclass(eq=False)
class Dataset:
    """A loaded dataset: view records plus optional ground-truth images."""

    root: str
    views: list[ViewRecord]
    gt: dict[int, Image] = field(default_factory=dict)

    def view_ids(self) -> list[int]:
        return [v.view_id for v in self.views]

    def view(self, vid: int) -> ViewRecord:
        for v in self.views:
            if v.view_id == vid:
                return v
        raise UnknownViewError(f"no view {vid} in dataset {self.root}")

    def cameras(self) -> dict[int, Camera]:
        return {v.view_id: v.camera for v in self.views}


def split_dataset(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition for single-round evaluation protocols.

    Returns (train, test) datasets sharing the same root; the test split
    holds the views whose cameras are excluded from optimization.
    """
    import numpy as np

    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    ids = sorted(v.view_id for v in dataset.views)
    rng = np.random.default_rng(seed)
    shuffled = list(rng.permutation(ids))
    n_train = max(1, min(len(ids) - 1, int(round(train_fraction * len(ids)))))
    train_ids = set(int(i) for i in shuffled[:n_train])
    train = [v for v in dataset.views if v.view_id in train_ids]
    test = [v for v in dataset.views if v.view_id not in train_ids]
    pick = lambda views: {v.view_id: dataset.gt[v.view_id] for v in views if v.view_id in dataset.gt}  # noqa: E731
    return (
        Dataset(dataset.root, train, pick(train)),
        Dataset(dataset.root, test, pick(test)),
    )


def load_dataset(root: str | os.PathLike) -> Dataset:
    """Load a dataset directory; depth and ground truth are optional."""
    root = os.fspath(root)
    cam_path = os.path.join(root, "cameras.txt")
    if not os.path.isfile(cam_path):
        raise IoError(f"no cameras.txt under {root}")
    cameras = load_cameras(cam_path)
    views = []
    gt: dict[int, Image] = {}
    for vid in sorted(cameras):
        image = load_image(os.path.join(root, view_filename(vid)))
        mask = load_mask(os.path.join(root, mask_filename(vid)))
        depth_path = os.path.join(root, depth_filename(vid))
        depth = load_depth(depth_path) if os.path.isfile(depth_path) else None
        views.append(ViewRecord(vid, image, mask, cameras[vid], depth))
        gt_path = os.path.join(root, "gt", view_filename(vid))
        if os.path.isfile(gt_path):
            gt[vid] = load_image(gt_path)
    return Dataset(root=root, views=views, gt=gt)


def save_dataset(
    root: str | os.PathLike,
    views: list[ViewRecord],
    gt: dict[int, Image] | None = None,
) -> None:
    """Write a dataset directory in the standard layout."""
    root = os.fspath(root)
    os.makedirs(root, exist_ok=True)
    save_cameras({v.view_id: v.camera for v in views}, os.path.join(root, "cameras.txt"))
    for v in views:
        save_image(v.image, os.path.join(root, view_filename(v.view_id)))
        save_mask(v.mask, os.path.join(root, mask_filename(v.view_id)))
        if v.depth is not None:
            save_depth(v.depth, os.path.join(root, depth_filename(v.view_id)))
    if gt:
        gt_dir = os.path.join(root, "gt")
        os.makedirs(gt_dir, exist_ok=True)
        for vid, image in gt.items():
            save_image(image, os.path.join(gt_dir, view_filename(vid)))
