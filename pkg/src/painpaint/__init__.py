"""Perspective-aware multi-view inpainting toolkit.

Library layout:

- imaging:     Image / Mask / DepthMap types, PNG + PFM I/O, mask algebra
- geometry:    pinhole cameras, SE(3) poses, unproject/project, forward warp
- dataset:     view records and the dataset directory layout
- graph:       perspective graph construction and k-NN queries
- propagation: anchor-content propagation into masked views
- consistency: dual-feature candidate verification
- sampler:     adaptive anchor sampling state machine
- metrics:     PSNR / SSIM and the masked training objective
- scene:       SceneModel interface and the ViewBankModel reference backend
- inpaint:     oracle, corrupting, and HTTP-service inpainting backends
- harness:     synthetic ray-cast dataset generation
- pipeline:    the iterative orchestrator; config + CLI wrappers around it
"""

from .config import PipelineConfig, load_config
from .consistency import (
    ConsistencyScore,
    FeatureVector,
    PatchStatisticsExtractor,
    cosine,
    score_candidate,
    select_candidate,
)
from .dataset import Dataset, ViewRecord, load_dataset, save_dataset
from .geometry import Camera, Intrinsics, Pose, change_frame, project, unproject, warp_forward
from .graph import (
    GeometricSurrogateMatcher,
    MatchSet,
    PerspectiveGraph,
    build_graph,
    k_nearest,
    pair_similarity,
)
from .imaging import (
    DepthMap,
    Image,
    Mask,
    complement,
    load_depth,
    load_image,
    load_mask,
    mask_ratio,
    save_depth,
    save_image,
    save_mask,
)
from .inpaint import CorruptingInpainter, InpaintRequest, OracleInpainter, ServiceInpainter
from .metrics import LossReport, evaluate_scene, masked_loss, psnr, ssim
from .pipeline import RoundReport, RunResult, replay_run, run_pipeline
from .propagation import PropagationResult, depth_for, propagate
from .sampler import SamplerState, begin_round, init_sampler, next_anchor, record_round
from .scene import SceneModel, ViewBankModel

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "ConsistencyScore",
    "CorruptingInpainter",
    "Dataset",
    "DepthMap",
    "FeatureVector",
    "GeometricSurrogateMatcher",
    "Image",
    "InpaintRequest",
    "Intrinsics",
    "LossReport",
    "Mask",
    "MatchSet",
    "OracleInpainter",
    "PatchStatisticsExtractor",
    "PerspectiveGraph",
    "PipelineConfig",
    "Pose",
    "PropagationResult",
    "RoundReport",
    "RunResult",
    "SamplerState",
    "SceneModel",
    "ServiceInpainter",
    "ViewBankModel",
    "ViewRecord",
    "begin_round",
    "build_graph",
    "change_frame",
    "complement",
    "cosine",
    "depth_for",
    "evaluate_scene",
    "init_sampler",
    "k_nearest",
    "load_config",
    "load_dataset",
    "load_depth",
    "load_image",
    "load_mask",
    "mask_ratio",
    "masked_loss",
    "next_anchor",
    "pair_similarity",
    "project",
    "propagate",
    "psnr",
    "record_round",
    "replay_run",
    "run_pipeline",
    "save_dataset",
    "save_depth",
    "save_image",
    "save_mask",
    "score_candidate",
    "select_candidate",
    "ssim",
    "unproject",
    "warp_forward",
]
