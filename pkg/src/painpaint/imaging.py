"""Canonical raster types and lossless file I/O.

Images are RGB float32 in [0, 1], masks are binary uint8 (1 = missing /
to-inpaint), depth maps are metric float32 with 0 marking invalid pixels.
On disk: images and masks are PNG (images 16-bit for near-lossless round
trips, masks 8-bit grayscale), depth maps are little-endian PFM so the
round trip is bit-exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DimensionMismatchError, FormatError, IoError

MASK_THRESHOLD = 128  # 8-bit gray >= 128 decodes to 1


@dataclass(frozen=True, eq=False)
class Image:
    """RGB raster, row-major (H, W, 3) float32 with every sample in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise FormatError(f"image data must be (H, W, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError("image contains non-finite samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise FormatError("image samples must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary occupancy raster, (H, W) uint8 with values in {0, 1}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise FormatError(f"mask data must be (H, W), got {arr.shape}")
        arr = arr.astype(np.uint8)
        if not np.all((arr == 0) | (arr == 1)):
            raise FormatError("mask values must be 0 or 1")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Metric depth raster, (H, W) float32, scene units, 0 = invalid."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise FormatError(f"depth data must be (H, W), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError("depth contains non-finite values")
        if arr.min() < 0.0:
            raise FormatError("depth values must be >= 0")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# --- PNG image I/O ----------------------------------------------------------

def load_image(path: str | os.PathLike) -> Image:
    """Load an 8- or 16-bit RGB(A) raster and normalise samples to [0, 1].

    Alpha channels are dropped.  Raises IoError when the file is missing,
    FormatError when it cannot be decoded as an RGB(A) image.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such image file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"cannot decode image: {path}")
    if raw.ndim != 3 or raw.shape[2] not in (3, 4):
        raise FormatError(f"expected RGB(A) image, got shape {raw.shape}: {path}")
    raw = raw[:, :, :3][:, :, ::-1]  # BGR(A) -> RGB
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported sample type {raw.dtype}: {path}")
    return Image(raw.astype(np.float32) / np.float32(scale))


def save_image(image: Image, path: str | os.PathLike) -> None:
    """Write an Image as 16-bit PNG (round trip exact to 1/65535)."""
    path = os.fspath(path)
    quant = np.round(image.data.astype(np.float64) * 65535.0).astype(np.uint16)
    if not cv2.imwrite(path, quant[:, :, ::-1]):
        raise IoError(f"cannot write image: {path}")


def quantize_u16(image: Image) -> np.ndarray:
    """16-bit quantisation used by save_image; exposed for exact comparisons."""
    return np.round(image.data.astype(np.float64) * 65535.0).astype(np.uint16)


# --- PNG mask I/O -----------------------------------------------------------

def load_mask(path: str | os.PathLike) -> Mask:
    """Load an 8-bit grayscale PNG as a Mask (gray >= 128 -> 1)."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such mask file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"cannot decode mask: {path}")
    if raw.ndim == 3:
        raw = raw[:, :, 0]
    return Mask((raw >= MASK_THRESHOLD).astype(np.uint8))


def save_mask(mask: Mask, path: str | os.PathLike) -> None:
    """Write a Mask as 8-bit grayscale PNG (1 -> 255, 0 -> 0)."""
    path = os.fspath(path)
    if not cv2.imwrite(path, (mask.data * np.uint8(255))):
        raise IoError(f"cannot write mask: {path}")


# --- PFM depth I/O ----------------------------------------------------------

def load_depth(path: str | os.PathLike) -> DepthMap:
    """Load a PFM float raster (grayscale 'Pf') as a DepthMap, bit-exact."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise IoError(f"no such depth file: {path}")
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise FormatError(f"not a PFM file: {path}")
        if header == b"PF":
            raise FormatError(f"expected grayscale PFM, got color: {path}")
        try:
            dims = fh.readline().split()
            width, height = int(dims[0]), int(dims[1])
            scale = float(fh.readline().strip())
        except (ValueError, IndexError) as exc:
            raise FormatError(f"malformed PFM header: {path}") from exc
        endian = "<" if scale < 0 else ">"
        payload = fh.read(width * height * 4)
        if len(payload) != width * height * 4:
            raise FormatError(f"truncated PFM payload: {path}")
    data = np.frombuffer(payload, dtype=endian + "f4").reshape(height, width)
    data = data[::-1].astype(np.float32)  # PFM rows are stored bottom-up
    try:
        return DepthMap(data)
    except FormatError as exc:
        raise FormatError(f"invalid depth values in {path}: {exc}") from exc


def save_depth(depth: DepthMap, path: str | os.PathLike) -> None:
    """Write a DepthMap as little-endian grayscale PFM (scale -1.0)."""
    path = os.fspath(path)
    try:
        with open(path, "wb") as fh:
            fh.write(b"Pf\n")
            fh.write(f"{depth.width} {depth.height}\n".encode("ascii"))
            fh.write(b"-1.0\n")
            fh.write(depth.data[::-1].astype("<f4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write depth: {path}") from exc


# --- mask algebra -----------------------------------------------------------

def mask_ratio(mask: Mask) -> float:
    """Fraction of set pixels: (#ones) / (width * height)."""
    return float(mask.data.sum()) / float(mask.data.size)


def complement(mask: Mask) -> Mask:
    return Mask(np.uint8(1) - mask.data)


def mask_bbox(mask: Mask) -> tuple[int, int, int, int]:
    """Tight bounding box (row0, col0, row1, col1) of set pixels, exclusive ends.

    Raises ValueError when the mask is empty.
    """
    rows = np.any(mask.data, axis=1)
    cols = np.any(mask.data, axis=0)
    if not rows.any():
        raise ValueError("mask_bbox of an empty mask")
    r0, r1 = np.where(rows)[0][[0, -1]]
    c0, c1 = np.where(cols)[0][[0, -1]]
    return int(r0), int(c0), int(r1) + 1, int(c1) + 1


def require_same_size(a, b, what: str = "rasters") -> None:
    """Raise DimensionMismatchError unless the two rasters agree in H, W."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatchError(
            f"{what} disagree: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
