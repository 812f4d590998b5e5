"""Experiment configuration loaded from YAML (or JSON)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .neural.model import TrainConfig
from .signal_core import StftConfig

MODES = ("baseline_kmeans", "proposed", "oracle:ibm", "oracle:iam", "oracle:ipsm")


@dataclass
class SceneConfig:
    n_scenes: int = 60
    duration: float = 2.0
    seed: int = 0
    sample_rate_hz: int = 8000
    room_dims: tuple = (6.0, 5.0, 3.0)
    rt60: float = 0.16
    max_image_order: int = 10
    mic_spacings: tuple = (0.04, 0.08, 0.04)
    array_jitter: float = 0.5
    min_separation_deg: float = 45.0
    mean_distance: float = 1.0
    distance_spread: float = 0.2
    snr_range_db: tuple = (-5.0, 5.0)
    f0_bands: tuple = ((110.0, 190.0), (260.0, 420.0))
    source_kinds: tuple = ("harmonic", "chirp")
    fractional_delay: bool = False
    wav_format: str = "float32"

    def __post_init__(self):
        self.room_dims = tuple(float(x) for x in self.room_dims)
        self.mic_spacings = tuple(float(x) for x in self.mic_spacings)
        self.snr_range_db = tuple(float(x) for x in self.snr_range_db)
        self.f0_bands = tuple(tuple(float(v) for v in b) for b in self.f0_bands)
        self.source_kinds = tuple(self.source_kinds)
        if self.n_scenes < 1 or self.duration <= 0:
            raise ValueError("n_scenes and duration must be positive")
        if len(self.f0_bands) < 2:
            raise ValueError("need one f0 band per source (at least 2)")
        if self.wav_format not in ("float32", "pcm16"):
            raise ValueError("wav_format must be float32 or pcm16")

    @property
    def n_mics(self) -> int:
        return len(self.mic_spacings) + 1


@dataclass
class PathsConfig:
    dataset_dir: str = "runs/data"
    checkpoint: str = "runs/model.npz"
    report_dir: str = "runs/report"
    separated_dir: str = "runs/separated"


@dataclass
class ExperimentConfig:
    scenes: SceneConfig = field(default_factory=SceneConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    model: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    modes: tuple = ("baseline_kmeans", "proposed", "oracle:ibm", "oracle:iam", "oracle:ipsm")
    kmeans_restarts: int = 5

    def __post_init__(self):
        self.modes = tuple(self.modes)
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}; choose from {MODES}")
        if self.model.n_bins != self.stft.n_bins:
            raise ValueError("model.n_bins must equal stft fft_size/2 + 1")
        if self.model.n_mics != self.scenes.n_mics:
            raise ValueError("model.n_mics must match the array size")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modes"] = list(self.modes)
        return d


def _build(cls, data, where):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    unknown = set(data) - {"scenes", "stft", "model", "paths", "modes", "kmeans_restarts"}
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    stft_cfg = _build(StftConfig, data.get("stft"), "stft")
    model = dict(data.get("model") or {})
    model.setdefault("n_bins", stft_cfg.n_bins)
    scenes = _build(SceneConfig, data.get("scenes"), "scenes")
    model.setdefault("n_mics", scenes.n_mics)
    kwargs = dict(
        scenes=scenes,
        stft=stft_cfg,
        model=TrainConfig.from_dict(model),
        paths=_build(PathsConfig, data.get("paths"), "paths"),
    )
    if "modes" in data:
        kwargs["modes"] = data["modes"]
    if "kmeans_restarts" in data:
        kwargs["kmeans_restarts"] = int(data["kmeans_restarts"])
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    cfg = config_from_dict(data)
    # relative paths resolve against the config file's directory
    base = Path(path).resolve().parent
    for f in fields(PathsConfig):
        p = Path(getattr(cfg.paths, f.name))
        if not p.is_absolute():
            setattr(cfg.paths, f.name, str((base / p).resolve()))
    return cfg
