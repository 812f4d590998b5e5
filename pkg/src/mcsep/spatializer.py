"""Reverberant multi-microphone scene synthesis.

Room impulse responses come from an image-source model whose uniform wall
reflection coefficient is calibrated to a target RT60 with Sabine's formula.
Source signals are synthetic stand-ins for speech.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .signal_core import MultichannelWaveform, Waveform

SABINE_CONSTANT = 0.161


@dataclass
class RoomSpec:
    dims: tuple = (6.0, 5.0, 3.0)
    rt60: float = 0.16
    speed_of_sound: float = 343.0
    max_image_order: int = 10

    def __post_init__(self):
        self.dims = tuple(float(d) for d in self.dims)
        if len(self.dims) != 3 or min(self.dims) <= 0:
            raise ValueError("room dims must be three positive lengths")
        if self.rt60 <= 0:
            raise ValueError("rt60 must be positive")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > 0) and np.all(p < np.asarray(self.dims)))


def linear_array(center, spacings=(0.04, 0.08, 0.04)) -> list:
    """Collinear mics along x, centered on ``center``."""
    offsets = np.concatenate([[0.0], np.cumsum(spacings)])
    offsets -= offsets.mean()
    c = np.asarray(center, dtype=float)
    return [c + np.array([o, 0.0, 0.0]) for o in offsets]


@dataclass
class ArrayGeometry:
    mic_positions: list = field(default_factory=lambda: linear_array((3.0, 2.5, 1.5)))
    reference_index: int = 0

    def __post_init__(self):
        self.mic_positions = [np.asarray(m, dtype=float) for m in self.mic_positions]
        if len(self.mic_positions) < 2:
            raise ValueError("an array needs at least 2 microphones")
        if not 0 <= self.reference_index < len(self.mic_positions):
            raise ValueError("reference_index out of range")

    @property
    def n_mics(self) -> int:
        return len(self.mic_positions)

    @property
    def center(self) -> np.ndarray:
        return np.mean(self.mic_positions, axis=0)


@dataclass
class SceneSpec:
    room: RoomSpec
    array: ArrayGeometry
    source_positions: list
    source_signals: list
    snr_db: float = 0.0
    seed: int = 0
    min_separation_deg: float = 45.0
    fractional_delay: bool = False

    def __post_init__(self):
        self.source_positions = [np.asarray(p, dtype=float) for p in self.source_positions]
        if len(self.source_positions) != len(self.source_signals):
            raise ValueError("one position per source signal required")
        for p in list(self.source_positions) + list(self.array.mic_positions):
            if not self.room.contains(p):
                raise ValueError(f"position {p} lies outside the room")

    @property
    def azimuths_deg(self) -> list:
        return [azimuth_deg(p, self.array.center) for p in self.source_positions]


@dataclass
class SceneData:
    """``images[s]`` are the already-scaled source images; mixture is their sum."""

    mixture: MultichannelWaveform
    images: list
    metadata: dict


def azimuth_deg(point, center) -> float:
    d = np.asarray(point, dtype=float) - np.asarray(center, dtype=float)
    return math.degrees(math.atan2(d[1], d[0])) % 360.0


def angular_gap_deg(a: float, b: float) -> float:
    gap = abs(a - b) % 360.0
    return min(gap, 360.0 - gap)


def rt60_to_reflection(room: RoomSpec) -> float:
    lx, ly, lz = room.dims
    volume = lx * ly * lz
    area = 2.0 * (lx * ly + lx * lz + ly * lz)
    absorption = SABINE_CONSTANT * volume / (area * room.rt60)
    if absorption >= 1.0:
        raise ValueError("room too small for requested RT60")
    return math.sqrt(1.0 - absorption)


def _image_sources(room: RoomSpec, src: np.ndarray):
    """Positions and reflection counts of all images up to ``max_image_order``."""
    order = room.max_image_order
    L = np.asarray(room.dims)
    m = np.arange(-order, order + 1)
    q = np.array([0, 1])
    # per-axis candidates: position = (1 - 2q) s + 2 m L, reflections |m - q| + |m|
    pos_axes, refl_axes = [], []
    for ax in range(3):
        mm, qq = np.meshgrid(m, q, indexing="ij")
        mm, qq = mm.ravel(), qq.ravel()
        pos_axes.append((1 - 2 * qq) * src[ax] + 2 * mm * L[ax])
        refl_axes.append(np.abs(mm - qq) + np.abs(mm))
    px, py, pz = np.meshgrid(*pos_axes, indexing="ij")
    rx, ry, rz = np.meshgrid(*refl_axes, indexing="ij")
    refl = (rx + ry + rz).ravel()
    keep = refl <= order
    positions = np.stack([px.ravel(), py.ravel(), pz.ravel()], axis=1)[keep]
    return positions, refl[keep]


def _sinc_kernel(frac: np.ndarray, half_width: int = 40) -> np.ndarray:
    """Hann-windowed sinc taps for fractional delays, one row per image."""
    n = np.arange(-half_width, half_width + 1)
    arg = n[None, :] - frac[:, None]
    window = 0.5 * (1.0 + np.cos(np.pi * arg / (half_width + 1)))
    return window * np.sinc(arg)


def generate_rir(
    room: RoomSpec,
    src,
    mic,
    sample_rate_hz: int = 8000,
    fractional_delay: bool = False,
) -> Waveform:
    src = np.asarray(src, dtype=float)
    mic = np.asarray(mic, dtype=float)
    if np.linalg.norm(src - mic) < 1e-9:
        raise ValueError("source and microphone coincide")
    if not (room.contains(src) and room.contains(mic)):
        raise ValueError("source and microphone must lie inside the room")

    beta = rt60_to_reflection(room)
    positions, refl = _image_sources(room, src)
    dist = np.linalg.norm(positions - mic, axis=1)
    amp = beta**refl / (4.0 * np.pi * dist)
    delay = sample_rate_hz * dist / room.speed_of_sound

    length = int(math.ceil(1.5 * room.rt60 * sample_rate_hz))
    h = np.zeros(length)
    if fractional_delay:
        half = 40
        base = np.floor(delay).astype(int)
        taps = _sinc_kernel(delay - base, half) * amp[:, None]
        idx = base[:, None] + np.arange(-half, half + 1)[None, :]
        ok = (idx >= 0) & (idx < length)
        np.add.at(h, idx[ok], taps[ok])
    else:
        idx = np.rint(delay).astype(int)
        ok = idx < length
        np.add.at(h, idx[ok], amp[ok])
    return Waveform(h, sample_rate_hz)


def apply_rir(x: Waveform, h: Waveform) -> Waveform:
    if x.sample_rate_hz != h.sample_rate_hz:
        raise ValueError("sample rates differ")
    y = fftconvolve(x.samples, h.samples)[: len(x)]
    return Waveform(y, x.sample_rate_hz)


def schroeder_rt60(h: Waveform, fit_db=(-5.0, -25.0)) -> float:
    """RT60 extrapolated from a linear fit to the backward-integrated energy decay."""
    energy = h.samples**2
    edc = np.cumsum(energy[::-1])[::-1]
    edc_db = 10.0 * np.log10(edc / edc[0] + 1e-300)
    hi, lo = fit_db
    sel = (edc_db <= hi) & (edc_db >= lo)
    if sel.sum() < 2:
        raise ValueError("decay curve does not span the fit range")
    t = np.arange(h.samples.size)[sel] / h.sample_rate_hz
    slope, _ = np.polyfit(t, edc_db[sel], 1)
    return -60.0 / slope


def mix_at_snr(
    img_a: MultichannelWaveform,
    img_b: MultichannelWaveform,
    snr_db: float,
    ref_index: int = 0,
):
    """Scale ``img_b`` so the reference-channel SNR of a over b is ``snr_db``."""
    if img_a.samples.shape != img_b.samples.shape:
        raise ValueError("images must have equal channel counts and lengths")
    e_a = float(np.sum(img_a.samples[ref_index] ** 2))
    e_b = float(np.sum(img_b.samples[ref_index] ** 2))
    if e_a == 0.0 or e_b == 0.0:
        raise ValueError("zero-energy source image")
    scale_b = math.sqrt(e_a / (e_b * 10.0 ** (snr_db / 10.0)))
    mixture = img_a.samples + scale_b * img_b.samples
    return MultichannelWaveform(mixture, img_a.sample_rate_hz), scale_b


SOURCE_KINDS = ("harmonic", "chirp", "mod_noise")


def synth_source(
    kind: str,
    f0: float,
    duration: float,
    seed: int,
    sample_rate_hz: int = 8000,
    rms: float = 0.1,
) -> Waveform:
    """Deterministic speech stand-in normalized to the given RMS.

    harmonic: four equal partials at k*f0 with random phases under a slow
    syllable-rate envelope. chirp: linear sweep from f0 to 2*f0. mod_noise:
    white noise with 4 Hz amplitude modulation.
    """
    if not 0.0 < f0 < sample_rate_hz / 2.0:
        raise ValueError(f"f0 must lie in (0, {sample_rate_hz / 2}) Hz")
    if kind not in SOURCE_KINDS:
        raise ValueError(f"unknown source kind {kind!r}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz

    if kind == "harmonic":
        phases = rng.uniform(0.0, 2.0 * np.pi, size=4)
        x = sum(np.sin(2 * np.pi * k * f0 * t + phases[k - 1]) for k in range(1, 5))
        rate = rng.uniform(2.0, 5.0)
        env_phase = rng.uniform(0.0, 2.0 * np.pi)
        x = x * (0.6 + 0.4 * np.sin(2 * np.pi * rate * t + env_phase))
    elif kind == "chirp":
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        # instantaneous frequency f0 + f0 * t / duration
        x = np.sin(2 * np.pi * (f0 * t + 0.5 * f0 * t**2 / duration) + phase0)
    else:
        x = rng.standard_normal(n) * (0.5 + 0.5 * np.sin(2 * np.pi * 4.0 * t))

    x = x * (rms / np.sqrt(np.mean(x**2)))
    return Waveform(x, sample_rate_hz)


def sample_source_positions(
    array: ArrayGeometry,
    room: RoomSpec,
    rng: np.random.Generator,
    n_sources: int = 2,
    min_separation_deg: float = 45.0,
    mean_distance: float = 1.0,
    distance_spread: float = 0.2,
    max_draws: int = 1000,
) -> list:
    """Rejection-sample source positions on the array plane.

    Azimuths are drawn over the half plane in front of the linear array,
    distances uniformly within ``mean_distance +/- distance_spread``.
    """
    center = array.center
    for _ in range(max_draws):
        az = rng.uniform(0.0, 180.0, size=n_sources)
        dist = rng.uniform(
            mean_distance - distance_spread, mean_distance + distance_spread, size=n_sources
        )
        gaps_ok = all(
            angular_gap_deg(az[i], az[j]) >= min_separation_deg
            for i in range(n_sources)
            for j in range(i + 1, n_sources)
        )
        if not gaps_ok:
            continue
        rad = np.radians(az)
        pos = [
            center + np.array([d * math.cos(a), d * math.sin(a), 0.0])
            for a, d in zip(rad, dist)
        ]
        if all(room.contains(p) for p in pos):
            return pos
    raise ValueError("could not satisfy the angular separation constraint after 1000 draws")


def build_scene(spec: SceneSpec, max_draws: int = 1000) -> SceneData:
    """Convolve every source with every mic's RIR and mix at the reference mic.

    If the given positions violate the angular constraint, positions are
    redrawn from ``spec.seed`` until it holds.
    """
    room, array = spec.room, spec.array
    positions = list(spec.source_positions)
    azimuths = [azimuth_deg(p, array.center) for p in positions]
    n_src = len(positions)
    ok = all(
        angular_gap_deg(azimuths[i], azimuths[j]) >= spec.min_separation_deg
        for i in range(n_src)
        for j in range(i + 1, n_src)
    )
    if not ok:
        rng = np.random.default_rng(spec.seed)
        positions = sample_source_positions(
            array, room, rng, n_src, spec.min_separation_deg, max_draws=max_draws
        )
        azimuths = [azimuth_deg(p, array.center) for p in positions]

    fs = spec.source_signals[0].sample_rate_hz
    raw_images = []
    for pos, sig in zip(positions, spec.source_signals):
        chans = [
            apply_rir(sig, generate_rir(room, pos, mic, fs, spec.fractional_delay)).samples
            for mic in array.mic_positions
        ]
        raw_images.append(MultichannelWaveform(np.stack(chans), fs))

    ref = array.reference_index
    if n_src == 2:
        mixture, scale_b = mix_at_snr(raw_images[0], raw_images[1], spec.snr_db, ref)
        scales = [1.0, scale_b]
    else:
        # more than two sources: each scaled to the first at the same SNR
        scales = [1.0]
        for img in raw_images[1:]:
            _, s = mix_at_snr(raw_images[0], img, spec.snr_db, ref)
            scales.append(s)
    images = [
        MultichannelWaveform(s * img.samples, fs) for s, img in zip(scales, raw_images)
    ]
    mixture = images[0].samples.copy()
    for img in images[1:]:
        mixture = mixture + img.samples
    meta = {
        "room_dims": list(room.dims),
        "rt60": room.rt60,
        "speed_of_sound": room.speed_of_sound,
        "max_image_order": room.max_image_order,
        "mic_positions": [m.tolist() for m in array.mic_positions],
        "reference_index": ref,
        "source_positions": [p.tolist() for p in positions],
        "azimuths_deg": azimuths,
        "snr_db": spec.snr_db,
        "scales": scales,
        "seed": spec.seed,
    }
    return SceneData(MultichannelWaveform(mixture, fs), images, meta)
