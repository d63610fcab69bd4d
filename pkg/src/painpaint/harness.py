"""Synthetic multi-view dataset generation by ray-casting textured rectangles.

Scenes are lists of textured rectangles (boxes are six of them); cameras
come from orbit or grid rigs; masks follow one of four policies
(central-square, multi-region, object-silhouette, removal).  All textures
are procedural texel grids sampled with nearest lookup, so a rendered
color is an exact function of the hit point and renders double as warp
oracles.  Generation is a pure function of (spec, seed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .dataset import Dataset, ViewRecord, save_dataset, view_filename
from .errors import IoError, SpecError, UnknownViewError
from .geometry import Camera, Intrinsics, look_at_pose
from .imaging import DepthMap, Image, Mask, load_depth, load_image

TEXTURE_RES = 256


# --- textures ---------------------------------------------------------------

@dataclass(frozen=True)
class TextureSpec:
    """Procedural texture: a base color plus checker and/or smooth noise.

    `res` is the texel grid resolution; choose it so one texel roughly
    matches one rendered pixel on the surface, keeping nearest-lookup
    warp residuals small.
    """

    kind: str = "checker-noise"  # solid | checker | noise | checker-noise
    base: tuple[float, float, float] = (0.5, 0.5, 0.5)
    cells: int = 6
    contrast: float = 0.25
    noise_cells: int = 7
    noise_amp: float = 0.3
    res: int = TEXTURE_RES


def realize_texture(spec: TextureSpec, rng: np.random.Generator, res: int | None = None) -> np.ndarray:
    """Bake a TextureSpec into a (res, res, 3) float32 texel grid."""
    if spec.kind not in ("solid", "checker", "noise", "checker-noise"):
        raise SpecError(f"unknown texture kind: {spec.kind}")
    res = spec.res if res is None else res
    tex = np.broadcast_to(np.asarray(spec.base, dtype=np.float64), (res, res, 3)).copy()
    if spec.kind in ("checker", "checker-noise"):
        idx = np.arange(res)
        ci = (idx * spec.cells) // res
        parity = (ci[:, None] + ci[None, :]) % 2
        tex += (parity[:, :, None] - 0.5) * spec.contrast
    if spec.kind in ("noise", "checker-noise"):
        coarse = rng.uniform(-0.5, 0.5, size=(spec.noise_cells + 1, spec.noise_cells + 1, 3))
        smooth = cv2.resize(coarse, (res, res), interpolation=cv2.INTER_LINEAR)
        tex += smooth * spec.noise_amp
    return np.clip(tex, 0.0, 1.0).astype(np.float32)


def _sample_nearest(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    res = tex.shape[0]
    iu = np.clip((u * res).astype(np.int64), 0, res - 1)
    iv = np.clip((v * res).astype(np.int64), 0, res - 1)
    return tex[iv, iu]


# --- primitives and rigs ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Rectangle:
    """Finite textured plane: local (x, y) patch of `size` at `center`."""

    rotation: np.ndarray  # local->world, 3x3
    center: np.ndarray    # world position of the patch center
    size: tuple[float, float]
    texture: TextureSpec = field(default_factory=TextureSpec)
    group: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))


def make_box(
    center,
    half_extents,
    texture: TextureSpec = TextureSpec(),
    group: int = 0,
    face_tint: float = 0.0,
) -> list[Rectangle]:
    """Six rectangles forming an axis-aligned box.

    `face_tint` shifts each face's base color by a distinct amount so
    opposite walls stay distinguishable to feature matching.
    """
    cx, cy, cz = np.asarray(center, dtype=np.float64)
    hx, hy, hz = np.asarray(half_extents, dtype=np.float64)
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    faces = [
        (np.array([cx + hx, cy, cz]), np.stack([ey, ez, ex], axis=1), (2 * hy, 2 * hz)),
        (np.array([cx - hx, cy, cz]), np.stack([ey, ez, -ex], axis=1), (2 * hy, 2 * hz)),
        (np.array([cx, cy + hy, cz]), np.stack([ex, ez, ey], axis=1), (2 * hx, 2 * hz)),
        (np.array([cx, cy - hy, cz]), np.stack([ex, ez, -ey], axis=1), (2 * hx, 2 * hz)),
        (np.array([cx, cy, cz + hz]), np.stack([ex, ey, ez], axis=1), (2 * hx, 2 * hy)),
        (np.array([cx, cy, cz - hz]), np.stack([ex, ey, -ez], axis=1), (2 * hx, 2 * hy)),
    ]
    rects = []
    for i, (fc, rot, size) in enumerate(faces):
        tint = tuple(
            float(np.clip(b + face_tint * ((i % 3) - 1) + (0.05 * (i // 3)) * face_tint * 4, 0.05, 0.95))
            for b in texture.base
        )
        rects.append(Rectangle(rot, fc, size, replace(texture, base=tint), group))
    return rects


def make_prism(
    n_facets: int,
    circumradius: float,
    height: float,
    texture: TextureSpec,
    cap_texture: TextureSpec,
    group: int = 0,
) -> list[Rectangle]:
    """A closed vertical prism of `n_facets` wall rectangles plus caps.

    Viewed from inside this is a convex room: no interior viewpoint is
    ever occluded, and with n_facets a multiple of the camera count every
    orbit view sees an identical depth profile by rotational symmetry.
    """
    apothem = circumradius * np.cos(np.pi / n_facets)
    width = 2.0 * circumradius * np.sin(np.pi / n_facets)
    rects = []
    for k in range(n_facets):
        phi = 2.0 * np.pi * (k + 0.5) / n_facets
        tangent = np.array([-np.sin(phi), 0.0, np.cos(phi)])
        vertical = np.array([0.0, 1.0, 0.0])
        normal = np.array([np.cos(phi), 0.0, np.sin(phi)])
        base = tuple(
            float(np.clip(b + 0.03 * f(phi), 0.05, 0.95))
            for b, f in zip(texture.base, (np.cos, lambda p: np.cos(2 * p), np.sin))
        )
        rects.append(
            Rectangle(
                np.stack([tangent, vertical, normal], axis=1),
                apothem * np.array([np.cos(phi), 0.0, np.sin(phi)]),
                (width, height),
                replace(texture, base=base),
                group,
            )
        )
    cap_half = circumradius * 1.1
    for y, ny in ((height / 2.0, -1.0), (-height / 2.0, 1.0)):
        rot = np.stack(
            [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, ny, 0.0])],
            axis=1,
        )
        rects.append(
            Rectangle(rot, np.array([0.0, y, 0.0]), (2 * cap_half, 2 * cap_half), cap_texture, group)
        )
    return rects


@dataclass(frozen=True)
class OrbitRig:
    """Cameras on a circle in the x-z plane around `center`."""

    count: int
    radius: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    height: float = 0.0
    fov_deg: float = 70.0
    look_outward: bool = False  # True for room scenes (cameras look at the walls)

    def cameras(self, width: int, height: int) -> dict[int, Camera]:
        intr = _fov_intrinsics(self.fov_deg, width, height)
        center = np.asarray(self.center, dtype=np.float64)
        cams = {}
        for i in range(self.count):
            theta = 2.0 * np.pi * i / self.count
            offset = np.array([np.cos(theta), 0.0, np.sin(theta)]) * self.radius
            eye = center + offset + np.array([0.0, self.height, 0.0])
            target = center + offset * 2.0 if self.look_outward else center
            pose = look_at_pose(eye, target, np.array([0.0, 1.0, 0.0]))
            cams[i] = Camera(intr, pose, width, height)
        return cams


@dataclass(frozen=True)
class GridRig:
    """Cameras on an x-y grid at distance `standoff`, all looking at `center`."""

    nx: int
    ny: int
    extent: float
    standoff: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    fov_deg: float = 60.0

    @property
    def count(self) -> int:
        return self.nx * self.ny

    def cameras(self, width: int, height: int) -> dict[int, Camera]:
        intr = _fov_intrinsics(self.fov_deg, width, height)
        center = np.asarray(self.center, dtype=np.float64)
        xs = np.linspace(-self.extent / 2, self.extent / 2, self.nx)
        ys = np.linspace(-self.extent / 2, self.extent / 2, self.ny)
        cams = {}
        vid = 0
        for y in ys:
            for x in xs:
                eye = center + np.array([x, y, -self.standoff])
                pose = look_at_pose(eye, center, np.array([0.0, 1.0, 0.0]))
                cams[vid] = Camera(intr, pose, width, height)
                vid += 1
        return cams


def _fov_intrinsics(fov_deg: float, width: int, height: int) -> Intrinsics:
    f = float((width / 2.0) / np.tan(np.radians(fov_deg) / 2.0))
    return Intrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0)


# --- scene spec and mask policies -------------------------------------------

@dataclass(frozen=True)
class MaskPolicy:
    """One of the four masking scenarios.

    central-square: square of side `fraction * min(W, H)` in the frame center.
    multi-region:   `regions` seeded squares of side `region_fraction * min(W, H)`.
    object-silhouette: pixels whose visible hit belongs to `group`.
    removal:        silhouette of `group`; ground truth renders without it.
    """

    kind: str = "central-square"
    fraction: float = 0.375
    regions: int = 3
    region_fraction: float = 0.15
    group: int = 1


@dataclass(frozen=True, eq=False)
class SceneSpec:
    primitives: tuple[Rectangle, ...]
    rig: OrbitRig | GridRig
    width: int = 128
    height: int = 128
    mask: MaskPolicy = field(default_factory=MaskPolicy)
    background: tuple[float, float, float] = (0.06, 0.06, 0.09)

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if len(self.primitives) < 1:
            raise SpecError("scene needs at least one primitive")
        if self.rig.count < 2:
            raise SpecError("camera rig needs at least two cameras")
        if self.mask.kind not in ("central-square", "multi-region", "object-silhouette", "removal"):
            raise SpecError(f"unknown mask policy: {self.mask.kind}")
        if self.mask.kind in ("object-silhouette", "removal") and not any(
            r.group == self.mask.group for r in self.primitives
        ):
            raise SpecError(f"mask policy targets group {self.mask.group} but no primitive has it")


class SceneRenderer:
    """Ray caster for a SceneSpec with textures baked under a fixed seed."""

    def __init__(self, spec: SceneSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        self.textures = [
            realize_texture(rect.texture, np.random.default_rng((self.seed, 7919, i)))
            for i, rect in enumerate(spec.primitives)
        ]

    def cameras(self) -> dict[int, Camera]:
        return self.spec.rig.cameras(self.spec.width, self.spec.height)

    def render_points(
        self,
        camera: Camera,
        us: np.ndarray,
        vs: np.ndarray,
        exclude_groups: tuple[int, ...] = (),
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cast rays through continuous pixel coordinates (us, vs).

        Returns (colors (N, 3), depths (N,), groups (N,)); depth is the
        camera-frame z of the nearest hit, 0 where no primitive is hit,
        and group is -1 for background pixels.
        """
        us = np.asarray(us, dtype=np.float64).ravel()
        vs = np.asarray(vs, dtype=np.float64).ravel()
        k = camera.intrinsics
        dirs_cam = np.stack(
            [(us - k.cx) / k.fx, (vs - k.cy) / k.fy, np.ones_like(us)], axis=1
        )
        r_wc = camera.pose.rotation
        origin = camera.pose.camera_center()
        dirs_world = dirs_cam @ r_wc  # == (R^T @ d) per ray

        n = us.size
        best_t = np.full(n, np.inf)
        colors = np.tile(np.asarray(self.spec.background, dtype=np.float64), (n, 1))
        groups = np.full(n, -1, dtype=np.int64)

        for i, rect in enumerate(self.spec.primitives):
            if rect.group in exclude_groups:
                continue
            rl = rect.rotation  # local->world
            o_l = rl.T @ (origin - rect.center)
            d_l = dirs_world @ rl  # == R_l^T @ d per ray
            dz = d_l[:, 2]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = -o_l[2] / dz
            hit = (np.abs(dz) > 1e-12) & (t > 1e-9) & (t < best_t)
            if not hit.any():
                continue
            x = o_l[0] + t[hit] * d_l[hit, 0]
            y = o_l[1] + t[hit] * d_l[hit, 1]
            sx, sy = rect.size
            inside = (np.abs(x) <= sx / 2.0) & (np.abs(y) <= sy / 2.0)
            if not inside.any():
                continue
            sel = np.nonzero(hit)[0][inside]
            u_tex = x[inside] / sx + 0.5
            v_tex = y[inside] / sy + 0.5
            best_t[sel] = t[hit][inside]
            colors[sel] = _sample_nearest(self.textures[i], u_tex, v_tex)
            groups[sel] = rect.group

        depths = np.where(np.isfinite(best_t), best_t, 0.0)
        return colors, depths, groups

    def render_view(
        self, camera: Camera, exclude_groups: tuple[int, ...] = ()
    ) -> tuple[Image, DepthMap, np.ndarray]:
        h, w = camera.height, camera.width
        vs, us = np.mgrid[0:h, 0:w]
        colors, depths, groups = self.render_points(
            camera, us.ravel(), vs.ravel(), exclude_groups
        )
        return (
            Image(colors.reshape(h, w, 3).astype(np.float32)),
            DepthMap(depths.reshape(h, w).astype(np.float32)),
            groups.reshape(h, w),
        )


# --- mask construction ------------------------------------------------------

def _central_square_mask(h: int, w: int, fraction: float) -> Mask:
    side = int(round(fraction * min(w, h)))
    mask = np.zeros((h, w), dtype=np.uint8)
    r0 = (h - side) // 2
    c0 = (w - side) // 2
    mask[r0:r0 + side, c0:c0 + side] = 1
    return Mask(mask)


def _multi_region_mask(h: int, w: int, policy: MaskPolicy, rng: np.random.Generator) -> Mask:
    side = max(1, int(round(policy.region_fraction * min(w, h))))
    mask = np.zeros((h, w), dtype=np.uint8)
    placed: list[tuple[int, int]] = []
    for _ in range(policy.regions):
        for _attempt in range(100):
            r0 = int(rng.integers(0, h - side + 1))
            c0 = int(rng.integers(0, w - side + 1))
            if all(abs(r0 - pr) >= side or abs(c0 - pc) >= side for pr, pc in placed):
                break
        placed.append((r0, c0))
        mask[r0:r0 + side, c0:c0 + side] = 1
    return Mask(mask)


# --- generation -------------------------------------------------------------

@dataclass(eq=False)
class GeneratedView:
    view_id: int
    camera: Camera
    image: Image      # masked render fed to the pipeline (mask region blacked)
    mask: Mask
    depth: DepthMap   # exact ground-truth depth (of the target scene)
    gt_image: Image   # unmasked target render


def render_scene(spec: SceneSpec, seed: int) -> list[GeneratedView]:
    """Render every rig camera under `spec`; deterministic in (spec, seed)."""
    renderer = SceneRenderer(spec, seed)
    mask_rng = np.random.default_rng((int(seed), 104729))
    out = []
    for vid, camera in renderer.cameras().items():
        full_img, full_depth, groups = renderer.render_view(camera)
        policy = spec.mask
        if policy.kind == "central-square":
            mask = _central_square_mask(spec.height, spec.width, policy.fraction)
        elif policy.kind == "multi-region":
            mask = _multi_region_mask(spec.height, spec.width, policy, mask_rng)
        else:
            mask = Mask((groups == policy.group).astype(np.uint8))
        if policy.kind == "removal":
            gt_img, gt_depth, _ = renderer.render_view(camera, exclude_groups=(policy.group,))
        else:
            gt_img, gt_depth = full_img, full_depth
        masked = full_img.data.copy()
        masked[mask.data == 1] = 0.0
        out.append(
            GeneratedView(
                view_id=vid,
                camera=camera,
                image=Image(masked),
                mask=mask,
                depth=gt_depth,
                gt_image=gt_img,
            )
        )
    return out


def generate(spec: SceneSpec, seed: int, out_dir: str | os.PathLike) -> Dataset:
    """Generate and write a dataset directory; returns the loaded records."""
    views = render_scene(spec, seed)
    records = [
        ViewRecord(v.view_id, v.image, v.mask, v.camera, v.depth) for v in views
    ]
    gt = {v.view_id: v.gt_image for v in views}
    save_dataset(out_dir, records, gt)
    return Dataset(root=os.fspath(out_dir), views=records, gt=gt)


def ground_truth_view(dataset_root: str | os.PathLike, view_id: int) -> tuple[Image, DepthMap]:
    """Load the unmasked render and exact depth for one generated view."""
    root = os.fspath(dataset_root)
    gt_path = os.path.join(root, "gt", view_filename(view_id))
    depth_path = os.path.join(root, f"depth_{view_id:04d}.pfm")
    if not os.path.isfile(gt_path) or not os.path.isfile(depth_path):
        raise UnknownViewError(f"no ground truth for view {view_id} under {root}")
    try:
        return load_image(gt_path), load_depth(depth_path)
    except IoError as exc:
        raise UnknownViewError(str(exc)) from exc


# --- presets ----------------------------------------------------------------

def room_orbit_spec(
    views: int = 16,
    size: int = 128,
    mask: MaskPolicy | None = None,
    fov_deg: float = 85.0,
    circumradius: float = 4.3,
    orbit_radius: float = 0.6,
) -> SceneSpec:
    """Cameras inside a textured prism room looking outward at the walls.

    The room is convex, so no interior viewpoint occludes another: ideal
    for exercising warp, propagation, and graph ordering without
    disocclusion noise.  The facet count is a multiple of the view count,
    so every camera sees the same wall geometry; textures are fine-grained
    and statistically stationary, keeping patch statistics stable across
    nearby viewpoints yet sensitive to injected corruption.
    """
    n_facets = views * max(1, -(-12 // views))  # smallest multiple of views >= 12
    facet_width = 2.0 * circumradius * np.sin(np.pi / n_facets)
    walls = make_prism(
        n_facets,
        circumradius,
        height=2.0 * circumradius,
        texture=TextureSpec(
            kind="checker-noise",
            base=(0.55, 0.5, 0.45),
            cells=6,
            contrast=0.12,
            noise_cells=8,
            noise_amp=0.22,
            res=max(16, int(round(facet_width / 0.028))),
        ),
        cap_texture=TextureSpec(
            kind="noise", base=(0.42, 0.44, 0.5), noise_cells=10, noise_amp=0.2, res=192
        ),
    )
    rig = OrbitRig(count=views, radius=orbit_radius, fov_deg=fov_deg, look_outward=True)
    return SceneSpec(
        primitives=tuple(walls),
        rig=rig,
        width=size,
        height=size,
        mask=mask or MaskPolicy("central-square", fraction=0.375),
    )


def object_orbit_spec(
    views: int = 16,
    size: int = 128,
    mask: MaskPolicy | None = None,
    fov_deg: float = 45.0,
    radius: float = 5.0,
) -> SceneSpec:
    """Cameras orbiting a textured box above a ground plane."""
    obj = make_box(
        (0.0, 0.5, 0.0),
        (1.0, 1.0, 1.0),
        TextureSpec(kind="checker-noise", base=(0.6, 0.45, 0.35), cells=4, contrast=0.2, noise_amp=0.3),
        group=1,
        face_tint=0.06,
    )
    floor = Rectangle(
        rotation=np.stack(
            [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, -1.0, 0.0])],
            axis=1,
        ),
        center=np.array([0.0, -0.5, 0.0]),
        size=(16.0, 16.0),
        texture=TextureSpec(kind="noise", base=(0.35, 0.4, 0.45), noise_amp=0.25),
        group=0,
    )
    rig = OrbitRig(count=views, radius=radius, height=1.5, fov_deg=fov_deg, look_outward=False)
    return SceneSpec(
        primitives=tuple(obj) + (floor,),
        rig=rig,
        width=size,
        height=size,
        mask=mask or MaskPolicy("central-square", fraction=0.375),
    )
