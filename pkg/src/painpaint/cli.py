"""Command-line interface.

Subcommands: generate, build-graph, warp, propagate, verify, run, eval,
replay.  Exit codes: 0 success, 2 usage/config error, 3 data error,
4 backend error.  Errors are printed as one structured line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .config import PipelineConfig, load_config
from .consistency import PatchStatisticsExtractor, select_candidate
from .dataset import ViewRecord, load_dataset, view_filename
from .errors import BackendError, DataError, PainpaintError, UsageError
from .geometry import warp_forward
from .graph import k_nearest
from .imaging import DepthMap, load_depth, load_image, load_mask, save_depth, save_image, save_mask
from .metrics import evaluate_scene, write_metric_report
from .pipeline import build_graph_only, replay_run, run_pipeline
from .scene import ViewBankModel

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (overridden by env and flags)")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tau", type=float, help="match confidence threshold (default 0.4)")
    p.add_argument("--k", type=int, help="adjacent view count (default 8)")
    p.add_argument("--m", type=int, help="candidates per view (default 4)")
    p.add_argument("--eta", type=float, help="RGB/depth score weight (default 0.7)")
    p.add_argument("--t-s", dest="t_s", type=float, help="retirement threshold (default 0.9)")
    p.add_argument("--lambda", dest="lambda_", type=float, help="D-SSIM loss weight (default 0.2)")
    p.add_argument("--iters", help="round cap (default: 2x view count)")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--matcher", help="surrogate | file:<matches.txt>")
    p.add_argument("--depth-estimator", dest="depth_estimator", help="ground-truth | constant:<d>")
    p.add_argument("--inpainter", help="oracle | corrupting | service:<url>")
    p.add_argument("--no-verification", dest="verification", action="store_const", const=False)
    p.add_argument("--strict-min", dest="strict_min", action="store_const", const=True)
    p.add_argument("--corrupt-kind", dest="corrupt_kind")
    p.add_argument("--corrupt-magnitude", dest="corrupt_magnitude", type=float)
    p.add_argument("--corrupt-indices", dest="corrupt_indices")


_CONFIG_KEYS = (
    "dataset", "out", "tau", "k", "m", "eta", "t_s", "lambda_", "iters", "seed",
    "matcher", "depth_estimator", "inpainter", "verification", "strict_min",
    "corrupt_kind", "corrupt_magnitude", "corrupt_indices",
)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    return load_config(file_path=args.config, overrides=overrides)


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="painpaint", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--preset", choices=("room-orbit", "object-orbit"), default="room-orbit")
    g.add_argument("--views", type=int, default=16)
    g.add_argument("--size", type=int, default=128)
    g.add_argument(
        "--mask-policy",
        choices=("central-square", "multi-region", "object-silhouette", "removal"),
        default="central-square",
    )
    g.add_argument("--mask-fraction", type=float, default=0.375)
    g.add_argument("--regions", type=int, default=3)
    g.add_argument("--region-fraction", type=float, default=0.15)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    b = sub.add_parser("build-graph", help="build and cache the perspective graph")
    _add_config_flags(b)

    w = sub.add_parser("warp", help="warp one view into another camera")
    w.add_argument("--dataset", required=True)
    w.add_argument("--src", type=int, required=True)
    w.add_argument("--dst", type=int, required=True)
    w.add_argument("--out", required=True)

    pr = sub.add_parser("propagate", help="propagate an anchor into its adjacent views")
    _add_config_flags(pr)
    pr.add_argument("--anchor", type=int, required=True)
    pr.add_argument("--anchor-image", help="inpainted anchor image (default: dataset gt)")

    v = sub.add_parser("verify", help="score a directory of inpainting candidates")
    v.add_argument("--anchor", required=True, help="anchor image (PNG)")
    v.add_argument("--anchor-depth", help="anchor depth (PFM); default constant 1")
    v.add_argument("--mask", required=True, help="inpainting mask (PNG)")
    v.add_argument("--candidates", required=True, help="directory of candidate PNGs")
    v.add_argument("--candidate-depths", help="directory of candidate PFMs (same stem)")
    v.add_argument("--eta", type=float, default=0.7)

    r = sub.add_parser("run", help="run the full iterative pipeline")
    _add_config_flags(r)

    e = sub.add_parser("eval", help="evaluate rendered views against ground truth")
    e.add_argument("--dataset", required=True)
    e.add_argument("--rendered", required=True, help="directory of view_####.png renders")
    e.add_argument("--out", required=True)

    rp = sub.add_parser("replay", help="re-execute a run from its trajectory log")
    rp.add_argument("--run", required=True)
    rp.add_argument("--out", required=True)

    return top


def _cmd_generate(args) -> int:
    policy = harness.MaskPolicy(
        kind=args.mask_policy,
        fraction=args.mask_fraction,
        regions=args.regions,
        region_fraction=args.region_fraction,
        group=1,
    )
    if args.preset == "room-orbit":
        if args.mask_policy in ("object-silhouette", "removal"):
            raise UsageError("room-orbit has no object group; use the object-orbit preset")
        spec = harness.room_orbit_spec(views=args.views, size=args.size, mask=policy)
    else:
        spec = harness.object_orbit_spec(views=args.views, size=args.size, mask=policy)
    harness.generate(spec, args.seed, args.out)
    print(f"generated {args.views} views under {args.out}")
    return EXIT_OK


def _cmd_build_graph(args) -> int:
    config = _config_from_args(args)
    if not config.dataset or not config.out:
        raise UsageError("build-graph needs --dataset and --out")
    graph = build_graph_only(config)
    print(f"graph: {len(graph.node_ids)} nodes, {len(graph.edges)} edges -> {config.out}/graph.txt")
    return EXIT_OK


def _cmd_warp(args) -> int:
    ds = load_dataset(args.dataset)
    src = ds.view(args.src)
    dst = ds.view(args.dst)
    if src.depth is None:
        raise DataError(f"view {args.src} has no depth map")
    warped, validity, zbuf = warp_forward(src.image, src.depth, src.camera, dst.camera)
    os.makedirs(args.out, exist_ok=True)
    save_image(warped, os.path.join(args.out, f"warped_{args.src:04d}_to_{args.dst:04d}.png"))
    save_mask(validity, os.path.join(args.out, f"validity_{args.src:04d}_to_{args.dst:04d}.png"))
    save_depth(zbuf, os.path.join(args.out, f"zbuffer_{args.src:04d}_to_{args.dst:04d}.pfm"))
    print(f"warped view {args.src} into camera {args.dst}: validity {validity.count()} px")
    return EXIT_OK


def _cmd_propagate(args) -> int:
    from .propagation import propagate

    config = _config_from_args(args)
    if not config.dataset or not config.out:
        raise UsageError("propagate needs --dataset and --out")
    ds = load_dataset(config.dataset)
    anchor = ds.view(args.anchor)
    if anchor.depth is None:
        raise DataError(f"anchor view {args.anchor} has no depth map")
    if args.anchor_image:
        anchor_img = load_image(args.anchor_image)
    elif args.anchor in ds.gt:
        anchor_img = ds.gt[args.anchor]
    else:
        anchor_img = anchor.image
    graph = build_graph_only(config)
    os.makedirs(config.out, exist_ok=True)
    for vid in k_nearest(graph, args.anchor, config.k):
        rec = ds.view(vid)
        result = propagate(anchor_img, anchor.depth, anchor.camera, rec.image, rec.mask, rec.camera)
        save_image(result.image, os.path.join(config.out, f"propagated_{vid:04d}.png"))
        save_mask(result.filled, os.path.join(config.out, f"filled_{vid:04d}.png"))
        print(f"view {vid}: coverage {result.coverage:.4f}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    anchor_img = load_image(args.anchor)
    mask = load_mask(args.mask)
    if args.anchor_depth:
        anchor_depth = load_depth(args.anchor_depth)
    else:
        anchor_depth = DepthMap(np.ones((anchor_img.height, anchor_img.width), dtype=np.float32))
    names = sorted(n for n in os.listdir(args.candidates) if n.endswith(".png"))
    if not names:
        raise DataError(f"no candidate PNGs under {args.candidates}")
    candidates = []
    for n in names:
        img = load_image(os.path.join(args.candidates, n))
        if args.candidate_depths:
            depth = load_depth(os.path.join(args.candidate_depths, n[:-4] + ".pfm"))
        else:
            depth = DepthMap(np.ones((img.height, img.width), dtype=np.float32))
        candidates.append((img, depth))
    idx, score = select_candidate(
        candidates, (anchor_img, anchor_depth), mask, PatchStatisticsExtractor(), args.eta
    )
    for i, n in enumerate(names):
        marker = "*" if i == idx else " "
        print(f"{marker} {n}")
    print(f"selected {names[idx]} (s={score.s:.6f}, s_rgb={score.s_rgb:.6f}, s_depth={score.s_depth:.6f})")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    if not config.dataset or not config.out:
        raise UsageError("run needs --dataset and --out")
    result = run_pipeline(config)
    print(f"rounds: {len(result.reports)}; still masked: {result.masked_remaining}")
    if result.metrics is not None:
        mp = result.metrics.mean_psnr
        print(f"mean PSNR: {'Perfect' if mp == float('inf') else f'{mp:.4f} dB'}; "
              f"mean SSIM: {result.metrics.mean_ssim:.6f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    ds = load_dataset(args.dataset)
    if len(ds.gt) != len(ds.views):
        raise UsageError("eval needs ground truth (gt/view_*.png) for every view")
    bank = ViewBankModel()
    recs = []
    for v in ds.views:
        path = os.path.join(args.rendered, view_filename(v.view_id))
        rendered = load_image(path)
        bank.update([(ViewRecord(v.view_id, rendered, v.mask, v.camera, None), 1.0)])
        recs.append(ViewRecord(v.view_id, ds.gt[v.view_id], v.mask, v.camera, None))
    table = evaluate_scene(bank, recs)
    os.makedirs(args.out, exist_ok=True)
    write_metric_report(
        table,
        os.path.join(args.out, "metrics.csv"),
        os.path.join(args.out, "metrics_summary.txt"),
    )
    mp = table.mean_psnr
    print(f"mean PSNR: {'Perfect' if mp == float('inf') else f'{mp:.4f} dB'}; "
          f"mean SSIM: {table.mean_ssim:.6f}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    result = replay_run(args.run, args.out)
    print(f"replayed {len(result.reports)} rounds into {result.out_dir}")
    return EXIT_OK


_HANDLERS = {
    "generate": _cmd_generate,
    "build-graph": _cmd_build_graph,
    "warp": _cmd_warp,
    "propagate": _cmd_propagate,
    "verify": _cmd_verify,
    "run": _cmd_run,
    "eval": _cmd_eval,
    "replay": _cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"error[backend]: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PainpaintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
