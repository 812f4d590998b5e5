"""Seeded synthetic dataset: scene sampling, train/valid/test splits, WAV and
manifest I/O, and conversion of stored scenes into training examples."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .config import SceneConfig
from .features import assemble_input
from .neural.model import TrainConfig, make_targets
from .neural.train import Example
from .signal_core import MultichannelWaveform, StftConfig, Waveform, stft
from .spatializer import (
    ArrayGeometry,
    RoomSpec,
    SceneSpec,
    build_scene,
    linear_array,
    sample_source_positions,
    synth_source,
)

SPLITS = ("train", "valid", "test")
SPLIT_SEED_OFFSET = {"train": 0, "valid": 100_000, "test": 200_000}
N_STRIPES = 12  # f0 bands are cut into stripes; stripe j belongs to split j % 6
MANIFEST_NAME = "manifest.jsonl"


def split_counts(n_scenes: int) -> dict:
    n_valid = n_scenes // 6
    n_test = n_scenes // 6
    return {"train": n_scenes - n_valid - n_test, "valid": n_valid, "test": n_test}


def scene_seed(base_seed: int, split: str, index: int) -> int:
    return base_seed * 1_000_003 + SPLIT_SEED_OFFSET[split] + index


def _split_stripes(split: str) -> list:
    members = {"train": (0, 1, 2, 3), "valid": (4,), "test": (5,)}[split]
    return [j for j in range(N_STRIPES) if j % 6 in members]


def draw_f0(band, split: str, rng: np.random.Generator) -> float:
    lo, hi = band
    width = (hi - lo) / N_STRIPES
    stripe = rng.choice(_split_stripes(split))
    return float(lo + width * (stripe + rng.uniform()))


def sample_scene(cfg: SceneConfig, split: str, index: int):
    """Returns (scene_id, SceneSpec, info) for one seeded scene."""
    seed = scene_seed(cfg.seed, split, index)
    rng = np.random.default_rng(seed)
    room = RoomSpec(cfg.room_dims, cfg.rt60, max_image_order=cfg.max_image_order)
    center = np.array(cfg.room_dims) / 2.0
    center[:2] += rng.uniform(-cfg.array_jitter, cfg.array_jitter, size=2)
    center[2] = min(1.5, cfg.room_dims[2] / 2.0)
    array = ArrayGeometry(linear_array(center, cfg.mic_spacings), 0)
    n_src = len(cfg.f0_bands)
    positions = sample_source_positions(
        array, room, rng, n_src, cfg.min_separation_deg,
        cfg.mean_distance, cfg.distance_spread,
    )
    kinds = [str(rng.choice(cfg.source_kinds)) for _ in range(n_src)]
    f0s = [draw_f0(band, split, rng) for band in cfg.f0_bands]
    src_seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=n_src)]
    snr = float(rng.uniform(*cfg.snr_range_db))
    signals = [
        synth_source(k, f, cfg.duration, s, cfg.sample_rate_hz)
        for k, f, s in zip(kinds, f0s, src_seeds)
    ]
    spec = SceneSpec(
        room, array, positions, signals, snr_db=snr, seed=seed,
        min_separation_deg=cfg.min_separation_deg, fractional_delay=cfg.fractional_delay,
    )
    scene_id = f"{split}_{index:04d}"
    info = {"kinds": kinds, "f0_hz": f0s, "source_seeds": src_seeds}
    return scene_id, spec, info


def write_wav(path, samples: np.ndarray, sample_rate_hz: int, fmt: str = "float32") -> None:
    """``samples`` is (n_samples,) or (n_channels, n_samples)."""
    data = np.asarray(samples, dtype=np.float64)
    if data.ndim == 2:
        data = data.T
    if fmt == "pcm16":
        out = np.round(np.clip(data, -1.0, 1.0) * 32767.0).astype(np.int16)
    else:
        out = data.astype(np.float32)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), sample_rate_hz, out)


def read_wav(path):
    """Returns (samples as (n_channels, n_samples) float64, sample_rate)."""
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32767.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    return data.T.copy(), int(rate)


def scene_record(scene_id: str, split: str, spec: SceneSpec, info: dict) -> dict:
    n_src = len(spec.source_signals)
    return {
        "id": scene_id,
        "split": split,
        "seed": spec.seed,
        "mixture": f"{split}/{scene_id}/mixture.wav",
        "images": [f"{split}/{scene_id}/image{s}.wav" for s in range(n_src)],
        "source_positions": [[round(float(v), 12) for v in p] for p in spec.source_positions],
        "azimuths_deg": [round(a, 12) for a in spec.azimuths_deg],
        "mic_positions": [[round(float(v), 12) for v in m] for m in spec.array.mic_positions],
        "room_dims": list(spec.room.dims),
        "rt60": spec.room.rt60,
        "snr_db": round(spec.snr_db, 12),
        "kinds": info["kinds"],
        "f0_hz": [round(f, 12) for f in info["f0_hz"]],
    }


def manifest_text(records: list) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def read_manifest(dataset_dir) -> list:
    path = Path(dataset_dir) / MANIFEST_NAME
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def plan_dataset(cfg: SceneConfig):
    """All (scene_id, split, spec, info) tuples for a config, in manifest order."""
    plan = []
    for split, n in split_counts(cfg.n_scenes).items():
        for k in range(n):
            scene_id, spec, info = sample_scene(cfg, split, k)
            plan.append((scene_id, split, spec, info))
    return plan


def simulate_dataset(cfg: SceneConfig, dataset_dir, log=None) -> list:
    """Synthesize every scene and write WAVs plus the manifest.

    A manifest already on disk is never overwritten: if it matches the
    config the call is a no-op, otherwise it raises.
    """
    dataset_dir = Path(dataset_dir)
    plan = plan_dataset(cfg)
    records = [scene_record(sid, split, spec, info) for sid, split, spec, info in plan]
    text = manifest_text(records)
    manifest = dataset_dir / MANIFEST_NAME
    if manifest.exists():
        if manifest.read_text() == text and all(
            (dataset_dir / p).exists() for r in records for p in [r["mixture"], *r["images"]]
        ):
            if log:
                log.info("dataset at %s already matches config; nothing to do", dataset_dir)
            return records
        raise FileExistsError(
            f"{manifest} exists and differs from this config; refusing to overwrite"
        )
    dataset_dir.mkdir(parents=True, exist_ok=True)
    for (sid, split, spec, info), rec in zip(plan, records):
        scene = build_scene(spec)
        fs = scene.mixture.sample_rate_hz
        write_wav(dataset_dir / rec["mixture"], scene.mixture.samples, fs, cfg.wav_format)
        for img, rel in zip(scene.images, rec["images"]):
            write_wav(dataset_dir / rel, img.samples, fs, cfg.wav_format)
        if log:
            log.debug("wrote scene %s", sid)
    manifest.write_text(text)
    return records


def load_scene_audio(record: dict, dataset_dir):
    """Returns (mixture MultichannelWaveform, list of image MultichannelWaveform)."""
    dataset_dir = Path(dataset_dir)
    mix, fs = read_wav(dataset_dir / record["mixture"])
    images = []
    for rel in record["images"]:
        img, fs_i = read_wav(dataset_dir / rel)
        if fs_i != fs or img.shape != mix.shape:
            raise ValueError(f"image {rel} does not match its mixture")
        images.append(MultichannelWaveform(img, fs))
    return MultichannelWaveform(mix, fs), images


def load_example(record: dict, dataset_dir, stft_cfg: StftConfig, model_cfg: TrainConfig,
                 reference_index: int = 0) -> Example:
    mixture, images = load_scene_audio(record, dataset_dir)
    features = assemble_input(
        mixture, stft_cfg, reference_index, model_cfg.log_magnitude, model_cfg.standardize
    )
    src_refs = [stft(img.channel(reference_index), stft_cfg) for img in images]
    targets = make_targets(features.mixture_specs[reference_index], src_refs, model_cfg)
    return Example(record["id"], features, targets)


def load_examples(records: list, dataset_dir, stft_cfg, model_cfg) -> list:
    return [load_example(r, dataset_dir, stft_cfg, model_cfg) for r in records]


def reference_signals(record: dict, dataset_dir, reference_index: int = 0):
    """(mixture reference channel, list of reverberant image references) as Waveforms."""
    mixture, images = load_scene_audio(record, dataset_dir)
    return mixture.channel(reference_index), [img.channel(reference_index) for img in images]


def pad_to(w: Waveform, length: int) -> Waveform:
    x = w.samples
    if x.size >= length:
        return Waveform(x[:length], w.sample_rate_hz)
    return Waveform(np.concatenate([x, np.zeros(length - x.size)]), w.sample_rate_hz)

