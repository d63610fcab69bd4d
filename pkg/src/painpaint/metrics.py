"""Image quality metrics and the masked training objective.

SSIM follows the classic formulation: 11x11 Gaussian window with
sigma 1.5, C1 = 0.01^2 and C2 = 0.03^2 on a [0, 1] dynamic range,
channel-averaged, evaluated only where the full window fits.  PSNR is
10*log10(1/MSE) with infinity as the distinguished perfect value.  The
training objective combines L1 and structural dissimilarity:
(1 - lambda) * L1 + lambda * (1 - SSIM), with masked pixels excluded
from both terms (SSIM windows touching a masked pixel are dropped).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataset import ViewRecord
from .errors import AllExcludedError, DimensionMismatchError, IoError, TooSmallError
from .imaging import Image, Mask, require_same_size

PERFECT_PSNR = math.inf
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_C1 = 0.01**2
_C2 = 0.03**2
DEFAULT_LOSS_LAMBDA = 0.2


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()

_KERNEL = _gaussian_kernel()


def _ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-center local SSIM over valid window positions, (H-10, W-10, 3)."""
    half = SSIM_WINDOW // 2
    maps = []
    for c in range(3):
        x = a[:, :, c].astype(np.float64)
        y = b[:, :, c].astype(np.float64)
        mu_x = ndimage.correlate(x, _KERNEL, mode="constant")
        mu_y = ndimage.correlate(y, _KERNEL, mode="constant")
        xx = ndimage.correlate(x * x, _KERNEL, mode="constant")
        yy = ndimage.correlate(y * y, _KERNEL, mode="constant")
        xy = ndimage.correlate(x * y, _KERNEL, mode="constant")
        var_x = xx - mu_x * mu_x
        var_y = yy - mu_y * mu_y
        cov = xy - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
        den = (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
        maps.append((num / den)[half:-half, half:-half])
    return np.stack(maps, axis=2)


def ssim(a: Image, b: Image) -> float:
    """Mean local SSIM, channel-averaged; requires min dimension >= 11."""
    require_same_size(a, b, "ssim inputs")
    if min(a.height, a.width) < SSIM_WINDOW:
        raise TooSmallError(f"ssim needs images >= {SSIM_WINDOW} px per side")
    return float(_ssim_map(a.data, b.data).mean())


def psnr(a: Image, b: Image) -> float:
    """10*log10(1/MSE) on [0, 1] range; math.inf when the images match."""
    require_same_size(a, b, "psnr inputs")
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PERFECT_PSNR
    return 10.0 * math.log10(1.0 / mse)


@dataclass(frozen=True)
class LossReport:
    """Masked training objective: combined = (1-lambda)*l1 + lambda*dssim."""

    l1: float
    dssim: float
    combined: float
    lambda_: float
    counted_pixels: int

    @staticmethod
    def assemble(l1: float, dssim: float, lambda_: float, counted: int) -> "LossReport":
        return LossReport(l1, dssim, (1.0 - lambda_) * l1 + lambda_ * dssim, lambda_, counted)


def masked_loss(
    render: Image,
    target: Image,
    exclude: Mask,
    lambda_: float = DEFAULT_LOSS_LAMBDA,
) -> LossReport:
    """Eq.-style objective with excluded pixels removed from both terms.

    L1 averages |render - target| over non-excluded pixel samples; the
    SSIM term drops every window whose 11x11 support contains an excluded
    pixel.  Raises AllExcludedError when either aggregation is empty.
    """
    require_same_size(render, target, "loss inputs")
    require_same_size(render, exclude, "loss inputs/exclude mask")
    if min(render.height, render.width) < SSIM_WINDOW:
        raise TooSmallError(f"masked_loss needs images >= {SSIM_WINDOW} px per side")
    keep = exclude.data == 0
    counted = int(keep.sum())
    if counted == 0:
        raise AllExcludedError("every pixel is excluded from the loss")
    diff = np.abs(render.data.astype(np.float64) - target.data.astype(np.float64))
    l1 = float(diff[keep].mean())

    half = SSIM_WINDOW // 2
    ssim_map = _ssim_map(render.data, target.data)
    touched = ndimage.maximum_filter(exclude.data, size=SSIM_WINDOW, mode="constant")
    window_ok = touched[half:-half, half:-half] == 0
    if not window_ok.any():
        raise AllExcludedError("no SSIM window avoids the excluded region")
    dssim = float(1.0 - ssim_map[window_ok].mean())
    return LossReport.assemble(l1, dssim, lambda_, counted)


# --- scene evaluation ----------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    view_id: int
    psnr: float
    ssim: float
    psnr_masked: float | None = None
    ssim_masked: float | None = None


@dataclass(frozen=True)
class MetricTable:
    rows: tuple[MetricRow, ...]
    mean_psnr: float
    mean_ssim: float
    mean_psnr_masked: float | None = None
    mean_ssim_masked: float | None = None


def _masked_region_metrics(render: Image, target: Image, mask: Mask) -> tuple[float | None, float | None]:
    """PSNR over masked pixels and SSIM over windows fully inside the mask."""
    region = mask.data == 1
    if not region.any():
        return None, None
    diff = (render.data.astype(np.float64) - target.data.astype(np.float64)) ** 2
    mse = float(diff[region].mean())
    p = PERFECT_PSNR if mse == 0.0 else 10.0 * math.log10(1.0 / mse)
    if min(render.height, render.width) < SSIM_WINDOW:
        return p, None
    half = SSIM_WINDOW // 2
    inside = ndimage.minimum_filter(mask.data, size=SSIM_WINDOW, mode="constant")
    window_in = inside[half:-half, half:-half] == 1
    if not window_in.any():
        return p, None
    s = float(_ssim_map(render.data, target.data)[window_in].mean())
    return p, s


def evaluate_scene(model, heldout: list[ViewRecord]) -> MetricTable:
    """Render each held-out camera and compare against the record's image.

    The record's mask, when nonempty, marks the originally missing region;
    masked-region metrics are reported alongside full-frame ones.
    """
    if not heldout:
        raise DimensionMismatchError("evaluate_scene needs a nonempty held-out set")
    rows = []
    for rec in heldout:
        render = model.render(rec.camera)
        require_same_size(render, rec.image, f"render/target for view {rec.view_id}")
        pm, sm = _masked_region_metrics(render, rec.image, rec.mask)
        rows.append(
            MetricRow(
                view_id=rec.view_id,
                psnr=psnr(render, rec.image),
                ssim=ssim(render, rec.image),
                psnr_masked=pm,
                ssim_masked=sm,
            )
        )
    pm_vals = [r.psnr_masked for r in rows if r.psnr_masked is not None]
    sm_vals = [r.ssim_masked for r in rows if r.ssim_masked is not None]
    return MetricTable(
        rows=tuple(rows),
        mean_psnr=float(np.mean([r.psnr for r in rows])),
        mean_ssim=float(np.mean([r.ssim for r in rows])),
        mean_psnr_masked=float(np.mean(pm_vals)) if pm_vals else None,
        mean_ssim_masked=float(np.mean(sm_vals)) if sm_vals else None,
    )


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return f"{x:.6f}"


def write_metric_report(table: MetricTable, csv_path: str | os.PathLike, summary_path: str | os.PathLike) -> None:
    """Write the delimited per-view table plus a plain-text mean summary."""
    try:
        with open(os.fspath(csv_path), "w", encoding="ascii") as fh:
            fh.write("view_id,psnr,ssim,psnr_masked,ssim_masked\n")
            for r in table.rows:
                fh.write(
                    f"{r.view_id},{_fmt(r.psnr)},{_fmt(r.ssim)},{_fmt(r.psnr_masked)},{_fmt(r.ssim_masked)}\n"
                )
        with open(os.fspath(summary_path), "w", encoding="ascii") as fh:
            fh.write(f"views: {len(table.rows)}\n")
            mp = "Perfect" if math.isinf(table.mean_psnr) else f"{table.mean_psnr:.4f} dB"
            fh.write(f"mean_psnr: {mp}\n")
            fh.write(f"mean_ssim: {table.mean_ssim:.6f}\n")
            if table.mean_psnr_masked is not None:
                mpm = (
                    "Perfect"
                    if math.isinf(table.mean_psnr_masked)
                    else f"{table.mean_psnr_masked:.4f} dB"
                )
                fh.write(f"mean_psnr_masked: {mpm}\n")
            if table.mean_ssim_masked is not None:
                fh.write(f"mean_ssim_masked: {table.mean_ssim_masked:.6f}\n")
    except OSError as exc:
        raise IoError(f"cannot write metric report: {csv_path}") from exc
