"""Oracle masks, the deep-clustering membership matrix, and masked resynthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_core import ComplexSpectrogram, Waveform, istft

MASK_KINDS = ("binary", "ratio", "psm", "estimated")
MAG_FLOOR = 1e-10


@dataclass
class MaskTensor:
    values: np.ndarray  # S x T x F
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        if self.values.ndim != 3:
            raise ValueError("mask tensor must be S x T x F")

    @property
    def n_sources(self) -> int:
        return self.values.shape[0]


@dataclass
class MembershipMatrix:
    values: np.ndarray  # TF x S, one-hot rows

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or not np.all(v.sum(axis=1) == 1.0):
            raise ValueError("membership rows must be one-hot")
        self.values = v


def _check_same_shape(specs):
    shapes = {s.shape for s in specs}
    if len(shapes) != 1:
        raise ValueError(f"spectrogram shapes differ: {sorted(shapes)}")


def ibm(refs: list) -> tuple:
    """Binary argmax mask; ties go to the lower source index."""
    if len(refs) < 2:
        raise ValueError("need at least two sources")
    _check_same_shape(refs)
    mags = np.stack([r.magnitude for r in refs])
    winner = np.argmax(mags, axis=0)  # argmax returns the first maximum
    S = len(refs)
    masks = (winner[None, :, :] == np.arange(S)[:, None, None]).astype(np.float64)
    B = masks.reshape(S, -1).T.copy()
    return MaskTensor(masks, "binary"), MembershipMatrix(B)


def iam(ref_mix: ComplexSpectrogram, ref_src: ComplexSpectrogram) -> np.ndarray:
    _check_same_shape([ref_mix, ref_src])
    mix = ref_mix.magnitude
    live = mix >= MAG_FLOOR
    ratio = np.where(live, ref_src.magnitude / np.where(live, mix, 1.0), 0.0)
    return np.clip(ratio, 0.0, 2.0)


def psm_target(ref_mix: ComplexSpectrogram, ref_src: ComplexSpectrogram) -> np.ndarray:
    """Unclipped |X_s| cos(theta_y - theta_s), the regression target of the PIT loss."""
    return ref_src.magnitude * np.cos(ref_mix.phase - ref_src.phase)


def ipsm(ref_mix: ComplexSpectrogram, ref_src: ComplexSpectrogram) -> np.ndarray:
    _check_same_shape([ref_mix, ref_src])
    mix = ref_mix.magnitude
    live = mix >= MAG_FLOOR
    target = psm_target(ref_mix, ref_src)
    ratio = np.where(live, target / np.where(live, mix, 1.0), 0.0)
    return np.clip(ratio, 0.0, 1.0)


def oracle_masks(kind: str, ref_mix: ComplexSpectrogram, refs: list) -> MaskTensor:
    if kind == "ibm":
        return ibm(refs)[0]
    if kind == "iam":
        return MaskTensor(np.stack([iam(ref_mix, r) for r in refs]), "ratio")
    if kind == "ipsm":
        return MaskTensor(np.stack([ipsm(ref_mix, r) for r in refs]), "psm")
    raise ValueError(f"unknown oracle mask {kind!r}")


def apply_mask(mix_ref: ComplexSpectrogram, mask: np.ndarray) -> Waveform:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != mix_ref.shape:
        raise ValueError(f"mask shape {mask.shape} != spectrogram shape {mix_ref.shape}")
    if not np.all(np.isfinite(mask)) or np.any(mask < 0):
        raise ValueError("mask must be finite and non-negative")
    masked = ComplexSpectrogram(mask * mix_ref.data, mix_ref.config, mix_ref.sample_rate_hz)
    return istft(masked)
