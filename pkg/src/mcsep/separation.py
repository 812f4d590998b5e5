"""Mask estimation for each separation mode and resynthesis at the reference mic."""

from __future__ import annotations

import numpy as np

from .clustering import cluster_masks
from .features import FeatureSet
from .masks import MaskTensor, apply_mask, oracle_masks
from .neural.losses import dc_weights
from .neural.model import TrainConfig, forward_full
from .signal_core import ComplexSpectrogram


def proposed_masks(features: FeatureSet, params: dict, config: TrainConfig) -> MaskTensor:
    return forward_full(features, params, config).masks


def baseline_masks(
    features: FeatureSet, params: dict, config: TrainConfig, reference_index: int = 0,
    restarts: int = 5, seed: int = 0,
) -> MaskTensor:
    """Cluster the stacked pair embeddings into S binary masks."""
    out = forward_full(features, params, config)
    mix_mag = features.mixture_specs[reference_index].magnitude
    weights = dc_weights(mix_mag, config.dc_threshold_db)
    _, masks = cluster_masks(
        out.stacked, config.n_sources, mix_mag.shape,
        restarts=restarts, seed=seed, bin_weights=weights,
    )
    return masks


def estimate_masks(mode: str, features: FeatureSet, src_refs=None, params=None,
                   config: TrainConfig | None = None, reference_index: int = 0,
                   restarts: int = 5, seed: int = 0) -> MaskTensor:
    mix_ref = features.mixture_specs[reference_index]
    if mode.startswith("oracle:"):
        if src_refs is None:
            raise ValueError("oracle modes need the source image spectrograms")
        return oracle_masks(mode.split(":", 1)[1], mix_ref, src_refs)
    if params is None or config is None:
        raise ValueError(f"mode {mode!r} needs trained parameters")
    if mode == "proposed":
        return proposed_masks(features, params, config)
    if mode == "baseline_kmeans":
        return baseline_masks(features, params, config, reference_index, restarts, seed)
    raise ValueError(f"unknown mode {mode!r}")


def resynthesize(mix_ref: ComplexSpectrogram, masks: MaskTensor) -> list:
    return [apply_mask(mix_ref, np.asarray(m)) for m in masks.values]
