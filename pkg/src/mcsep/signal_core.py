"""Short-time Fourier analysis and weighted overlap-add resynthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size


@dataclass
class MultichannelWaveform:
    """Channels stacked along axis 0, shape (n_channels, n_samples)."""

    samples: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[1] < 1:
            raise ValueError("multichannel waveform must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    def channel(self, index: int) -> Waveform:
        return Waveform(self.samples[index], self.sample_rate_hz)


@dataclass(frozen=True)
class StftConfig:
    win_len: int = 256
    hop: int = 64
    fft_size: int = 256
    window_kind: str = "hamming_periodic"

    def __post_init__(self):
        if self.win_len <= 0 or self.hop <= 0:
            raise ValueError("win_len and hop must be positive")
        if self.win_len % self.hop != 0:
            raise ValueError("hop must divide win_len")
        if self.fft_size < self.win_len:
            raise ValueError("fft_size must be >= win_len")
        if self.window_kind != "hamming_periodic":
            raise ValueError(f"unsupported window kind {self.window_kind!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.win_len) // self.hop + 1


@dataclass
class ComplexSpectrogram:
    """T x F one-sided STFT of a single channel."""

    data: np.ndarray
    config: StftConfig
    sample_rate_hz: int = 8000

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2 or self.data.shape[1] != self.config.n_bins:
            raise ValueError(
                f"spectrogram must be T x {self.config.n_bins}, got {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite entries")

    @property
    def shape(self):
        return self.data.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.data)


def make_window(config: StftConfig) -> np.ndarray:
    n = np.arange(config.win_len)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / config.win_len)


def _frame(x: np.ndarray, win_len: int, hop: int) -> np.ndarray:
    n_frames = (x.shape[-1] - win_len) // hop + 1
    idx = np.arange(win_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[..., idx]


def stft(x: Waveform, config: StftConfig = StftConfig()) -> ComplexSpectrogram:
    samples = x.samples
    if samples.size < config.win_len:
        raise ValueError("signal too short")
    frames = _frame(samples, config.win_len, config.hop) * make_window(config)
    data = np.fft.rfft(frames, n=config.fft_size, axis=-1)
    return ComplexSpectrogram(data, config, x.sample_rate_hz)


def istft(S: ComplexSpectrogram) -> Waveform:
    """Weighted overlap-add, normalized by the running sum of squared windows."""
    cfg = S.config
    n_frames = S.data.shape[0]
    length = (n_frames - 1) * cfg.hop + cfg.win_len
    window = make_window(cfg)
    frames = np.fft.irfft(S.data, n=cfg.fft_size, axis=-1)[:, : cfg.win_len] * window

    out = np.zeros(length)
    norm = np.zeros(length)
    for t in range(n_frames):
        start = t * cfg.hop
        out[start : start + cfg.win_len] += frames[t]
        norm[start : start + cfg.win_len] += window**2
    valid = norm >= 1e-8
    out[valid] /= norm[valid]
    out[~valid] = 0.0
    return Waveform(out, S.sample_rate_hz)
