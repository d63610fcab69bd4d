"""The iterative inpainting orchestrator and its run artifacts.

One run: build (or load) the perspective graph, then per round sample an
anchor, inpaint it, propagate its content into the still-masked adjacent
views, generate candidates per view, verify and select, and update the
scene model with the full inpainted set.  Rounds continue until the
masked set empties or the round cap is reached.  Under built-in backends
every output byte is a function of (dataset, config, seed).
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass

from .config import PipelineConfig, backend_spec, save_config
from .consistency import PatchStatisticsExtractor, score_candidate, select_candidate
from .dataset import Dataset, ViewRecord, load_dataset, view_filename
from .errors import AllExcludedError, ConfigError, IoError
from .graph import (
    FileMatcher,
    GeometricSurrogateMatcher,
    PerspectiveGraph,
    build_graph,
    load_graph,
    save_graph,
)
from .imaging import Image, save_image
from .inpaint import CorruptingInpainter, InpaintRequest, OracleInpainter, ServiceConfig, ServiceInpainter
from .metrics import MetricTable, evaluate_scene, masked_loss, write_metric_report
from .propagation import (
    ConstantDepthEstimator,
    GroundTruthDepthEstimator,
    depth_for,
    propagate,
)
from .sampler import append_trajectory, begin_round, init_sampler, next_anchor, record_round
from .scene import ViewBankModel

import numpy as np


@dataclass(eq=False)
class RoundReport:
    """Everything observable about one round; serialized to rounds.jsonl."""

    round_index: int
    anchor: int
    adjacent: list[int]
    neighbors: list[int]
    coverage: dict[int, float]
    selected: dict[int, int]
    scores: dict[int, float]
    retired: list[int]
    losses: dict[int, dict | None]
    wall_time: float

    def to_json(self) -> dict:
        return {
            "round": self.round_index,
            "anchor": self.anchor,
            "adjacent": self.adjacent,
            "neighbors": self.neighbors,
            "coverage": {str(k): v for k, v in self.coverage.items()},
            "selected": {str(k): v for k, v in self.selected.items()},
            "scores": {str(k): v for k, v in self.scores.items()},
            "retired": self.retired,
            "losses": {str(k): v for k, v in self.losses.items()},
            "wall_time": self.wall_time,
        }


@dataclass(eq=False)
class RunResult:
    out_dir: str
    reports: list[RoundReport]
    metrics: MetricTable | None
    final_images: dict[int, Image]
    masked_remaining: list[int]


def _derive_seed(seed: int, round_index: int, view_id: int) -> int:
    ss = np.random.SeedSequence((int(seed) & 0x7FFFFFFF, round_index, view_id))
    return int(ss.generate_state(1)[0])


def _build_matcher(config: PipelineConfig, ds: Dataset):
    kind, arg = backend_spec(config.matcher)
    if kind == "surrogate":
        if any(v.depth is None for v in ds.views):
            raise ConfigError("surrogate matcher needs per-view depth maps in the dataset")
        return GeometricSurrogateMatcher()
    if kind == "file":
        if not arg:
            raise ConfigError("file matcher needs a path: file:<matches.txt>")
        return FileMatcher.from_file(arg)
    raise ConfigError(f"unknown matcher backend: {config.matcher}")


def _build_estimator(config: PipelineConfig, ds: Dataset):
    kind, arg = backend_spec(config.depth_estimator)
    if kind == "ground-truth":
        depths = {v.view_id: v.depth for v in ds.views if v.depth is not None}
        if len(depths) != len(ds.views):
            raise ConfigError("ground-truth depth estimator needs depth for every view")
        return GroundTruthDepthEstimator(depths)
    if kind == "constant":
        return ConstantDepthEstimator(float(arg) if arg else 2.0)
    raise ConfigError(f"unknown depth estimator backend: {config.depth_estimator}")


def _build_inpainter(config: PipelineConfig, ds: Dataset):
    kind, arg = backend_spec(config.inpainter)
    if kind in ("oracle", "corrupting"):
        if len(ds.gt) != len(ds.views):
            raise ConfigError(f"{kind} inpainter needs ground truth for every view")
        if kind == "oracle":
            return OracleInpainter(ds.gt)
        return CorruptingInpainter(
            ds.gt,
            kind=config.corrupt_kind,
            magnitude=config.corrupt_magnitude,
            corrupt_indices=tuple(config.corrupt_indices),
        )
    if kind == "service":
        if not arg:
            raise ConfigError("service inpainter needs an endpoint: service:<url>")
        return ServiceInpainter(
            ServiceConfig(
                endpoint=arg,
                timeout=config.service_timeout,
                max_in_flight=config.service_max_in_flight,
            )
        )
    raise ConfigError(f"unknown inpainter backend: {config.inpainter}")


def _graph_for_run(config: PipelineConfig, ds: Dataset, out_dir: str) -> PerspectiveGraph:
    cache = os.path.join(out_dir, "graph.txt")
    views = {v.view_id: v for v in ds.views}
    if os.path.isfile(cache):
        cached = load_graph(cache, views)
        if cached.tau == config.tau and set(cached.node_ids) == set(views):
            return cached
    graph = build_graph(ds.views, _build_matcher(config, ds), config.tau)
    save_graph(graph, cache)
    return graph


def build_graph_only(config: PipelineConfig) -> PerspectiveGraph:
    """The `build-graph` staging step; `run` reuses its cache file."""
    ds = load_dataset(config.dataset)
    os.makedirs(config.out, exist_ok=True)
    return _graph_for_run(config, ds, config.out)


def run_pipeline(config: PipelineConfig, forced_anchors: list[int] | None = None) -> RunResult:
    """Execute the full iterative loop; see module docstring."""
    config.validate()
    if not config.dataset:
        raise ConfigError("config.dataset is required")
    if not config.out:
        raise ConfigError("config.out is required")
    ds = load_dataset(config.dataset)
    out_dir = os.fspath(config.out)
    os.makedirs(out_dir, exist_ok=True)
    save_config(config, os.path.join(out_dir, "config.json"))
    trajectory_path = os.path.join(out_dir, "trajectory.jsonl")
    rounds_path = os.path.join(out_dir, "rounds.jsonl")
    for stale in (trajectory_path, rounds_path):
        if os.path.isfile(stale):
            os.remove(stale)

    graph = _graph_for_run(config, ds, out_dir)
    estimator = _build_estimator(config, ds)
    inpainter = _build_inpainter(config, ds)
    extractor = PatchStatisticsExtractor()
    if config.scene_model != "view-bank":
        raise ConfigError(f"unknown scene model backend: {config.scene_model}")
    if config.extractor != "patch-stats":
        raise ConfigError(f"unknown feature extractor backend: {config.extractor}")
    scene = ViewBankModel()
    scene.update([(rec, 0.0) for rec in ds.views])

    records = {v.view_id: v for v in ds.views}
    latest: dict[int, ViewRecord] = {}
    latest_scores: dict[int, float] = {}
    iters = config.iters if config.iters is not None else 2 * len(ds.views)

    state = init_sampler(graph, config.seed, strict_min=config.strict_min)
    if forced_anchors is not None:
        state.current_anchor = forced_anchors[0] if forced_anchors else None
    reports: list[RoundReport] = []

    while state.current_anchor is not None and state.round < iters:
        t0 = time.monotonic()
        round_index = state.round
        anchor, adjacent = begin_round(state, graph, config.k)
        anchor_rec = records[anchor]

        render_a = scene.render(anchor_rec.camera)
        anchor_req = InpaintRequest(
            image=render_a,
            mask=anchor_rec.mask,
            n_candidates=1,  # the anchor bypasses verification
            seed=_derive_seed(config.seed, round_index, anchor),
            view_id=anchor,
        )
        anchor_img = inpainter.inpaint(anchor_req)[0]
        anchor_depth = depth_for(anchor_rec, estimator, image=anchor_img)
        latest[anchor] = ViewRecord(anchor, anchor_img, anchor_rec.mask, anchor_rec.camera, anchor_depth)
        latest_scores[anchor] = 1.0

        results: list[tuple[int, float]] = [(anchor, 1.0)]
        coverage: dict[int, float] = {}
        selected: dict[int, int] = {}
        scores: dict[int, float] = {anchor: 1.0}

        for vid in adjacent:
            if vid == anchor:
                continue
            rec = records[vid]
            render_v = scene.render(rec.camera)
            prop = propagate(
                anchor_img, anchor_depth, anchor_rec.camera, render_v, rec.mask, rec.camera
            )
            coverage[vid] = prop.coverage
            req = InpaintRequest(
                image=prop.image,
                mask=rec.mask,
                reference=anchor_img,
                n_candidates=config.m,
                seed=_derive_seed(config.seed, round_index, vid),
                view_id=vid,
            )
            candidates = inpainter.inpaint(req)
            cand_pairs = [
                (cand, depth_for(rec, estimator, image=cand)) for cand in candidates
            ]
            if config.verification:
                idx, score = select_candidate(
                    cand_pairs, (anchor_img, anchor_depth), rec.mask, extractor, config.eta
                )
            else:
                idx = 0
                score = score_candidate(
                    cand_pairs[0], (anchor_img, anchor_depth), rec.mask, extractor, config.eta
                )
            chosen_img, chosen_depth = cand_pairs[idx]
            latest[vid] = ViewRecord(vid, chosen_img, rec.mask, rec.camera, chosen_depth)
            latest_scores[vid] = score.s
            selected[vid] = idx
            scores[vid] = score.s
            results.append((vid, score.s))

        scene.update([(latest[v], latest_scores[v]) for v in sorted(latest)])
        retired = [vid for vid, s in results if s > config.t_s]
        record_round(state, results, config.t_s)

        losses: dict[int, dict | None] = {}
        for vid, _ in results:
            rec = latest[vid]
            try:
                rep = masked_loss(scene.render(rec.camera), rec.image, rec.mask, config.lambda_)
                losses[vid] = {
                    "l1": rep.l1,
                    "dssim": rep.dssim,
                    "combined": rep.combined,
                    "counted_pixels": rep.counted_pixels,
                }
            except AllExcludedError:
                losses[vid] = None

        append_trajectory(
            trajectory_path,
            round_index,
            anchor,
            state.last_neighbors,
            adjacent,
            scores,
            retired,
        )
        report = RoundReport(
            round_index=round_index,
            anchor=anchor,
            adjacent=adjacent,
            neighbors=list(state.last_neighbors),
            coverage=coverage,
            selected=selected,
            scores=scores,
            retired=retired,
            losses=losses,
            wall_time=time.monotonic() - t0,
        )
        reports.append(report)
        with open(rounds_path, "a", encoding="ascii") as fh:
            fh.write(json.dumps(report.to_json(), sort_keys=True) + "\n")

        if forced_anchors is not None:
            force = forced_anchors[state.round] if state.round < len(forced_anchors) else None
            if force is None:
                state.current_anchor = None
            else:
                next_anchor(state, graph, force=force)
        else:
            next_anchor(state, graph)

    final_images = {
        vid: (latest[vid].image if vid in latest else records[vid].image)
        for vid in sorted(records)
    }
    inp_dir = os.path.join(out_dir, "inpainted")
    os.makedirs(inp_dir, exist_ok=True)
    for vid, img in final_images.items():
        save_image(img, os.path.join(inp_dir, view_filename(vid)))

    metrics = None
    eval_records = [
        ViewRecord(v.view_id, ds.gt[v.view_id], v.mask, v.camera, None)
        for v in ds.views
        if v.view_id in ds.gt
    ]
    if eval_records:
        metrics = evaluate_scene(scene, eval_records)
        write_metric_report(
            metrics,
            os.path.join(out_dir, "metrics.csv"),
            os.path.join(out_dir, "metrics_summary.txt"),
        )

    return RunResult(
        out_dir=out_dir,
        reports=reports,
        metrics=metrics,
        final_images=final_images,
        masked_remaining=sorted(state.masked),
    )


def replay_run(run_dir: str | os.PathLike, out_dir: str | os.PathLike) -> RunResult:
    """Re-execute a finished run from its saved config and trajectory log.

    The anchor sequence is forced from the log; all other computation is
    re-derived, so built-in backends reproduce the original artifacts
    byte for byte (inpainted images, trajectory, metrics).
    """
    from .config import load_config
    from .sampler import load_trajectory

    run_dir = os.fspath(run_dir)
    config_path = os.path.join(run_dir, "config.json")
    trajectory_path = os.path.join(run_dir, "trajectory.jsonl")
    if not os.path.isfile(config_path) or not os.path.isfile(trajectory_path):
        raise IoError(f"not a completed run directory: {run_dir}")
    config = load_config(config_path, env={})
    anchors = [rec["anchor"] for rec in load_trajectory(trajectory_path)]
    config.out = os.fspath(out_dir)
    return run_pipeline(config, forced_anchors=anchors)
