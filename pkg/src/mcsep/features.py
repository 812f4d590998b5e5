"""Network input features: reference magnitude plus cos/sin interchannel phase
differences for each (reference, other) microphone pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_core import ComplexSpectrogram, MultichannelWaveform, StftConfig, stft

MAG_FLOOR = 1e-10


@dataclass
class FeatureSet:
    spectral: np.ndarray  # T x F
    ipd_cos: np.ndarray  # P x T x F
    ipd_sin: np.ndarray  # P x T x F
    pair_map: list
    mixture_specs: list = None  # per-channel ComplexSpectrogram, kept for resynthesis

    @property
    def n_pairs(self) -> int:
        return len(self.pair_map)

    @property
    def shape(self):
        return self.spectral.shape

    def spatial_input(self) -> np.ndarray:
        """P x T x 2F, cos features followed by sin features."""
        return np.concatenate([self.ipd_cos, self.ipd_sin], axis=-1)


def compute_ipd(spec_ref: ComplexSpectrogram, spec_other: ComplexSpectrogram):
    if spec_ref.shape != spec_other.shape or spec_ref.config != spec_other.config:
        raise ValueError("spectrograms must share shape and STFT config")
    ref, other = spec_ref.data, spec_other.data
    cross = other * np.conj(ref)
    mag = np.abs(cross)
    live = (np.abs(ref) >= MAG_FLOOR) & (np.abs(other) >= MAG_FLOOR)
    unit = np.where(live, cross / np.where(live, mag, 1.0), 1.0 + 0.0j)
    return unit.real.copy(), unit.imag.copy()


def assemble_input(
    scene_mixture: MultichannelWaveform,
    config: StftConfig = StftConfig(),
    reference_index: int = 0,
    log_magnitude: bool = False,
    standardize: bool = False,
) -> FeatureSet:
    if scene_mixture.n_channels < 2:
        raise ValueError("need at least 2 channels for phase-difference features")
    specs = [stft(scene_mixture.channel(c), config) for c in range(scene_mixture.n_channels)]
    ref = specs[reference_index]
    spectral = ref.magnitude
    if log_magnitude:
        spectral = np.log(spectral + 1e-8)
    if standardize:
        spectral = (spectral - spectral.mean()) / (spectral.std() + 1e-8)

    pairs, cos_l, sin_l = [], [], []
    for c in range(scene_mixture.n_channels):
        if c == reference_index:
            continue
        ic, is_ = compute_ipd(ref, specs[c])
        pairs.append((reference_index, c))
        cos_l.append(ic)
        sin_l.append(is_)
    return FeatureSet(spectral, np.stack(cos_l), np.stack(sin_l), pairs, specs)


def export_plane_csv(plane: np.ndarray, path) -> None:
    """Write a T x F feature plane as CSV, one frame per row."""
    np.savetxt(path, np.asarray(plane), delimiter=",", fmt="%.10g")
