"""Pipeline configuration: JSON file, PAINPAINT_* environment, CLI flags.

Precedence is CLI > environment > file > defaults.  The default
hyperparameters (tau 0.4, k 8, m 4, eta 0.7, retirement threshold 0.9,
loss lambda 0.2) are the method's standard operating point and are
pinned by the acceptance suite.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields

from .errors import ConfigError, IoError

ENV_PREFIX = "PAINPAINT_"


@dataclass
class PipelineConfig:
    dataset: str = ""
    out: str = ""
    tau: float = 0.4
    k: int = 8
    m: int = 4
    eta: float = 0.7
    t_s: float = 0.9
    lambda_: float = 0.2
    iters: int | None = None  # round cap; None = 2 * number of views
    seed: int = 0
    matcher: str = "surrogate"          # surrogate | file:<path>
    depth_estimator: str = "ground-truth"  # ground-truth | constant:<depth>
    inpainter: str = "oracle"           # oracle | corrupting | service:<url>
    scene_model: str = "view-bank"
    extractor: str = "patch-stats"
    verification: bool = True
    strict_min: bool = False
    corrupt_kind: str = "noise"
    corrupt_magnitude: float = 0.2
    corrupt_indices: tuple[int, ...] = (0, 2, 3)
    service_timeout: float = 30.0
    service_max_in_flight: int = 2

    def validate(self) -> "PipelineConfig":
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if not (0.0 <= self.eta <= 1.0):
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if not (-1.0 <= self.t_s <= 1.0):
            raise ConfigError(f"retirement threshold must lie in [-1, 1], got {self.t_s}")
        if not (0.0 <= self.lambda_ <= 1.0):
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.iters is not None and self.iters < 0:
            raise ConfigError(f"iters must be >= 0, got {self.iters}")
        for name in ("matcher", "depth_estimator", "inpainter"):
            _parse_backend(name, getattr(self, name))
        return self


_BACKEND_KINDS = {
    "matcher": ("surrogate", "file"),
    "depth_estimator": ("ground-truth", "constant"),
    "inpainter": ("oracle", "corrupting", "service"),
}


def _parse_backend(field_name: str, value: str) -> tuple[str, str | None]:
    kind, _, arg = value.partition(":")
    if kind not in _BACKEND_KINDS[field_name]:
        raise ConfigError(
            f"unknown {field_name} backend {value!r}; expected one of {_BACKEND_KINDS[field_name]}"
        )
    return kind, (arg or None)


def backend_spec(value: str) -> tuple[str, str | None]:
    """Split 'kind' or 'kind:argument' backend selectors."""
    kind, _, arg = value.partition(":")
    return kind, (arg or None)


def _coerce(name: str, raw, target_type) -> object:
    if target_type is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {name}={raw!r}")
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return str(raw)
        if name == "iters":
            return None if raw in (None, "", "none", "None") else int(raw)
        if name == "corrupt_indices":
            if isinstance(raw, (list, tuple)):
                return tuple(int(x) for x in raw)
            return tuple(int(x) for x in str(raw).split(",") if x.strip() != "")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {name}={raw!r}: {exc}") from exc
    return raw


_FIELD_TYPES = {
    "dataset": str, "out": str, "tau": float, "k": int, "m": int, "eta": float,
    "t_s": float, "lambda_": float, "iters": "iters", "seed": int,
    "matcher": str, "depth_estimator": str, "inpainter": str, "scene_model": str,
    "extractor": str, "verification": bool, "strict_min": bool,
    "corrupt_kind": str, "corrupt_magnitude": float, "corrupt_indices": "corrupt_indices",
    "service_timeout": float, "service_max_in_flight": int,
}


def load_config(
    file_path: str | os.PathLike | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> PipelineConfig:
    """Merge file, environment, and explicit overrides into a validated config."""
    values: dict = {}
    if file_path is not None:
        file_path = os.fspath(file_path)
        if not os.path.isfile(file_path):
            raise IoError(f"no such config file: {file_path}")
        try:
            with open(file_path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {file_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file must hold a JSON object: {file_path}")
        values.update(loaded)

    env = os.environ if env is None else env
    for f in fields(PipelineConfig):
        key = ENV_PREFIX + f.name.rstrip("_").upper()
        if key in env:
            values[f.name] = env[key]

    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    coerced = {
        name: _coerce(name, raw, _FIELD_TYPES[name]) for name, raw in values.items()
    }
    return PipelineConfig(**coerced).validate()


def save_config(config: PipelineConfig, path: str | os.PathLike) -> None:
    """Persist the resolved configuration (replay input)."""
    payload = dataclasses.asdict(config)
    payload["corrupt_indices"] = list(config.corrupt_indices)
    try:
        with open(os.fspath(path), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write config: {path}") from exc
