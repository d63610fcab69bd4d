"""Pluggable inpainting backends: oracle, corrupting oracle, HTTP service.

Every backend obeys one hard invariant: candidates equal the request
image outside the mask, exactly.  Built-in backends are deterministic in
the request seed.  The service client speaks a multipart POST protocol
and enforces the invariant on whatever the server returns.

Wire protocol (documented here and in the README):

    POST <endpoint>/inpaint  (multipart/form-data)
        image:     16-bit PNG of the request image
        mask:      8-bit gray PNG of the mask (255 = inpaint)
        reference: optional 16-bit PNG (inpainted anchor guidance)
        params:    JSON {"n_candidates": int, "seed": int,
                         "steps": int (default 20), "prompt": str|null}

    200 response: JSON manifest
        {"n_candidates": int, "seed": int, "candidates": [<base64 PNG>, ...]}

The client rejects: wrong candidate count or undecodable payloads
(ProtocolError), any candidate whose 16-bit quantisation differs from the
request image outside the mask (InvariantViolationError), transport
failures (NetworkError) and timeouts (ServiceTimeoutError).
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from typing import Protocol

import cv2
import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    FormatError,
    InvariantViolationError,
    NetworkError,
    ProtocolError,
    ServiceTimeoutError,
)
from .imaging import Image, Mask, quantize_u16, require_same_size

DEFAULT_CANDIDATES = 4
DEFAULT_DIFFUSION_STEPS = 20


@dataclass(frozen=True, eq=False)
class InpaintRequest:
    """One inpainting job: image + mask, optional anchor reference."""

    image: Image
    mask: Mask
    reference: Image | None = None
    n_candidates: int = DEFAULT_CANDIDATES
    seed: int = 0
    prompt: str | None = None
    view_id: int | None = None  # lets oracle backends find their ground truth

    def __post_init__(self):
        require_same_size(self.image, self.mask, "inpaint image/mask")
        if self.n_candidates < 1:
            raise FormatError(f"n_candidates must be >= 1, got {self.n_candidates}")


class Inpainter(Protocol):
    """Deterministic-for-fixed-seed candidate generator."""

    def inpaint(self, request: InpaintRequest) -> list[Image]: ...


def _compose(request: InpaintRequest, inside: np.ndarray) -> Image:
    """Request image outside the mask, `inside` content within it."""
    out = request.image.data.copy()
    sel = request.mask.data == 1
    out[sel] = inside[sel]
    return Image(out)


def _lookup_gt(ground_truth, request: InpaintRequest) -> Image:
    if isinstance(ground_truth, Image):
        gt = ground_truth
    else:
        if request.view_id is None or request.view_id not in ground_truth:
            raise DimensionMismatchError(
                f"oracle backend has no ground truth for view {request.view_id}"
            )
        gt = ground_truth[request.view_id]
    require_same_size(gt, request.image, "ground truth/request image")
    return gt


@dataclass(frozen=True, eq=False)
class OracleInpainter:
    """Fills the mask with ground truth; the perfect desk-scale backend."""

    ground_truth: "Image | dict[int, Image]"

    def inpaint(self, request: InpaintRequest) -> list[Image]:
        gt = _lookup_gt(self.ground_truth, request)
        candidate = _compose(request, gt.data)
        return [candidate for _ in range(request.n_candidates)]


@dataclass(frozen=True, eq=False)
class CorruptingInpainter:
    """Oracle with seeded corruption on chosen candidate indices.

    Kinds: "noise" adds Gaussian noise of the given magnitude inside the
    mask; "color-shift" adds a seeded constant color offset; and
    "texture-swap" blends the ground truth toward a seeded smooth random
    texture by the magnitude.  Magnitude 0 reduces every kind to the
    oracle.  Single-candidate requests (anchor inpainting, which bypasses
    verification) return oracle output unless `corrupt_single` is set.
    """

    ground_truth: "Image | dict[int, Image]"
    kind: str = "noise"
    magnitude: float = 0.2
    corrupt_indices: tuple[int, ...] = (0, 2, 3)
    corrupt_single: bool = False

    def __post_init__(self):
        if self.kind not in ("noise", "color-shift", "texture-swap"):
            raise FormatError(f"unknown corruption kind: {self.kind}")
        if self.magnitude < 0:
            raise FormatError("corruption magnitude must be >= 0")

    def inpaint(self, request: InpaintRequest) -> list[Image]:
        gt = _lookup_gt(self.ground_truth, request)
        out = []
        for idx in range(request.n_candidates):
            corrupt = idx in self.corrupt_indices and (
                request.n_candidates > 1 or self.corrupt_single
            )
            inside = self._corrupt(gt.data, request, idx) if corrupt else gt.data
            out.append(_compose(request, inside))
        return out

    def _corrupt(self, gt: np.ndarray, request: InpaintRequest, idx: int) -> np.ndarray:
        rng = np.random.default_rng((int(request.seed) & 0x7FFFFFFF, 31337, idx))
        g = gt.astype(np.float64)
        if self.kind == "noise":
            noisy = g + self.magnitude * rng.standard_normal(g.shape)
            return np.clip(noisy, 0.0, 1.0).astype(np.float32)
        if self.kind == "color-shift":
            direction = rng.uniform(-1.0, 1.0, size=3)
            norm = np.linalg.norm(direction)
            if norm > 0:
                direction /= norm
            return np.clip(g + self.magnitude * direction, 0.0, 1.0).astype(np.float32)
        coarse = rng.uniform(0.0, 1.0, size=(8, 8, 3))
        tex = cv2.resize(coarse, (gt.shape[1], gt.shape[0]), interpolation=cv2.INTER_LINEAR)
        return np.clip((1.0 - self.magnitude) * g + self.magnitude * tex, 0.0, 1.0).astype(np.float32)


# --- HTTP service client --------------------------------------------------------

@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str
    timeout: float = 30.0
    max_in_flight: int = 2
    steps: int = DEFAULT_DIFFUSION_STEPS


def _encode_png16(image: Image) -> bytes:
    ok, buf = cv2.imencode(".png", quantize_u16(image)[:, :, ::-1])
    if not ok:
        raise ProtocolError("cannot encode request image")
    return buf.tobytes()


def _encode_mask_png(mask: Mask) -> bytes:
    ok, buf = cv2.imencode(".png", mask.data * np.uint8(255))
    if not ok:
        raise ProtocolError("cannot encode request mask")
    return buf.tobytes()


def _decode_png16(payload: bytes) -> Image:
    raw = cv2.imdecode(np.frombuffer(payload, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None or raw.ndim != 3 or raw.shape[2] < 3:
        raise ProtocolError("candidate payload is not a decodable RGB PNG")
    raw = raw[:, :, :3][:, :, ::-1]
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    return Image(raw.astype(np.float32) / np.float32(scale))


@dataclass(eq=False)
class ServiceInpainter:
    """Client for an external diffusion inpainting service."""

    config: ServiceConfig
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._gate = threading.Semaphore(max(1, self.config.max_in_flight))

    def inpaint(self, request: InpaintRequest) -> list[Image]:
        params = {
            "n_candidates": request.n_candidates,
            "seed": request.seed,
            "steps": self.config.steps,
            "prompt": request.prompt,
        }
        files = {
            "image": ("image.png", _encode_png16(request.image), "image/png"),
            "mask": ("mask.png", _encode_mask_png(request.mask), "image/png"),
        }
        if request.reference is not None:
            files["reference"] = ("reference.png", _encode_png16(request.reference), "image/png")
        url = self.config.endpoint.rstrip("/") + "/inpaint"
        with self._gate:
            try:
                resp = requests.post(
                    url,
                    files=files,
                    data={"params": json.dumps(params)},
                    timeout=self.config.timeout,
                )
            except requests.Timeout as exc:
                raise ServiceTimeoutError(f"inpainting service timed out: {url}") from exc
            except requests.RequestException as exc:
                raise NetworkError(f"inpainting service unreachable: {url}: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"service returned HTTP {resp.status_code}")
        try:
            manifest = resp.json()
            payloads = [base64.b64decode(c) for c in manifest["candidates"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed service manifest: {exc}") from exc
        if len(payloads) != request.n_candidates:
            raise ProtocolError(
                f"requested {request.n_candidates} candidates, got {len(payloads)}"
            )
        candidates = [_decode_png16(p) for p in payloads]
        self._verify_outside_mask(request, candidates)
        return candidates

    @staticmethod
    def _verify_outside_mask(request: InpaintRequest, candidates: list[Image]) -> None:
        # Compare in the 16-bit wire quantisation: exact, codec-independent.
        expected = quantize_u16(request.image)
        outside = request.mask.data == 0
        for i, cand in enumerate(candidates):
            if (cand.height, cand.width) != (request.image.height, request.image.width):
                raise ProtocolError(
                    f"candidate {i} size {cand.height}x{cand.width} differs from request"
                )
            got = quantize_u16(cand)
            if not np.array_equal(got[outside], expected[outside]):
                raise InvariantViolationError(
                    f"candidate {i} altered pixels outside the mask"
                )
