"""Separation scoring: scale-invariant SDR, STOI, and best-assignment evaluation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import resample_poly

from .signal_core import Waveform

SDR_CAP_DB = 60.0

# STOI constants (Taal et al.)
STOI_FS = 10000
STOI_FRAME = 256
STOI_NFFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEGMENT = 30  # frames, 384 ms
STOI_BETA_DB = -15.0
STOI_DYN_RANGE_DB = 40.0


def _samples(x):
    return x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)


def sdr(est, ref) -> float:
    """SI-SDR in dB, clipped to +/-60."""
    est, ref = _samples(est), _samples(ref)
    if est.shape != ref.shape:
        raise ValueError("estimate and reference lengths differ")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference is silent")
    if not np.any(est):
        return -SDR_CAP_DB
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    num, den = float(np.dot(target, target)), float(np.dot(residual, residual))
    if den == 0.0:
        return SDR_CAP_DB
    if num == 0.0:
        return -SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SDR_CAP_DB, SDR_CAP_DB))


def _third_octave_matrix(fs, nfft, n_bands, min_freq):
    freqs = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(n_bands)
    lo = min_freq * 2.0 ** ((2 * k - 1) / 6.0)
    hi = min_freq * 2.0 ** ((2 * k + 1) / 6.0)
    obm = np.zeros((n_bands, freqs.size))
    for b in range(n_bands):
        lo_bin = np.argmin(np.abs(freqs - lo[b]))
        hi_bin = np.argmin(np.abs(freqs - hi[b]))
        obm[b, lo_bin:hi_bin] = 1.0
    return obm


def _stoi_window():
    return np.hanning(STOI_FRAME + 2)[1:-1]


def _remove_silent_frames(x, y):
    hop = STOI_FRAME // 2
    w = _stoi_window()
    starts = range(0, len(x) - STOI_FRAME, hop)
    xf = np.array([w * x[i : i + STOI_FRAME] for i in starts])
    yf = np.array([w * y[i : i + STOI_FRAME] for i in starts])
    energy = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(float).eps)
    keep = energy > energy.max() - STOI_DYN_RANGE_DB
    xf, yf = xf[keep], yf[keep]
    n = (len(xf) - 1) * hop + STOI_FRAME
    xs, ys = np.zeros(n), np.zeros(n)
    for i in range(len(xf)):
        xs[i * hop : i * hop + STOI_FRAME] += xf[i]
        ys[i * hop : i * hop + STOI_FRAME] += yf[i]
    return xs, ys


def _stoi_spectrogram(x):
    hop = STOI_FRAME // 2
    w = _stoi_window()
    frames = np.array(
        [w * x[i : i + STOI_FRAME] for i in range(0, len(x) - STOI_FRAME + 1, hop)]
    )
    return np.fft.rfft(frames, n=STOI_NFFT, axis=1).T  # bins x frames


def stoi(est, ref, sample_rate_hz: int = 8000) -> float:
    """Short-time objective intelligibility of ``est`` against clean ``ref``."""
    est, ref = _samples(est), _samples(ref)
    if est.shape != ref.shape:
        raise ValueError("estimate and reference lengths differ")
    if ref.size < sample_rate_hz:
        raise ValueError("signals must be at least 1 s long")
    if sample_rate_hz != STOI_FS:
        g = np.gcd(STOI_FS, sample_rate_hz)
        ref = resample_poly(ref, STOI_FS // g, sample_rate_hz // g)
        est = resample_poly(est, STOI_FS // g, sample_rate_hz // g)

    ref, est = _remove_silent_frames(ref, est)
    obm = _third_octave_matrix(STOI_FS, STOI_NFFT, STOI_BANDS, STOI_MIN_FREQ)
    X = np.sqrt(obm @ np.abs(_stoi_spectrogram(ref)) ** 2)
    Y = np.sqrt(obm @ np.abs(_stoi_spectrogram(est)) ** 2)
    n_frames = X.shape[1]
    if n_frames < STOI_SEGMENT:
        raise ValueError("not enough non-silent frames for STOI")

    clip = 10.0 ** (-STOI_BETA_DB / 20.0)
    eps = np.finfo(float).eps
    scores = []
    for m in range(STOI_SEGMENT, n_frames + 1):
        xs = X[:, m - STOI_SEGMENT : m]
        ys = Y[:, m - STOI_SEGMENT : m]
        alpha = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + eps
        )
        yp = np.minimum(alpha * ys, xs * (1.0 + clip))
        xc = xs - xs.mean(axis=1, keepdims=True)
        yc = yp - yp.mean(axis=1, keepdims=True)
        num = np.sum(xc * yc, axis=1)
        den = np.linalg.norm(xc, axis=1) * np.linalg.norm(yc, axis=1) + eps
        scores.append(num / den)
    return float(np.clip(np.mean(scores), 0.0, 1.0))


@dataclass
class EvalReport:
    scene_id: str
    permutation: tuple
    sdr_db: list
    sdr_i_db: list
    stoi: list
    pesq: list = field(default_factory=list)  # reserved, never computed

    @property
    def mean_sdr(self) -> float:
        return float(np.mean(self.sdr_db))


def evaluate_scene(
    est_sources: list,
    ref_sources: list,
    mixture_ref,
    scene_id: str = "",
    sample_rate_hz: int = 8000,
    with_stoi: bool = True,
) -> EvalReport:
    """Score estimates under the assignment that maximizes mean SDR.

    ``permutation[s]`` is the index of the estimate assigned to reference s.
    """
    S = len(ref_sources)
    if len(est_sources) != S:
        raise ValueError(f"{len(est_sources)} estimates for {S} references")
    ests = [_samples(e) for e in est_sources]
    refs = [_samples(r) for r in ref_sources]
    mix = _samples(mixture_ref)

    pair_sdr = np.array([[sdr(ests[e], refs[r]) for e in range(S)] for r in range(S)])
    best, best_score = None, -np.inf
    for perm in itertools.permutations(range(S)):
        score = np.mean([pair_sdr[r, perm[r]] for r in range(S)])
        if score > best_score:
            best, best_score = perm, score

    sdrs = [float(pair_sdr[r, best[r]]) for r in range(S)]
    base = [sdr(mix, refs[r]) for r in range(S)]
    stois = (
        [stoi(ests[best[r]], refs[r], sample_rate_hz) for r in range(S)]
        if with_stoi
        else [float("nan")] * S
    )
    return EvalReport(
        scene_id=scene_id,
        permutation=tuple(int(p) for p in best),
        sdr_db=sdrs,
        sdr_i_db=[s - b for s, b in zip(sdrs, base)],
        stoi=stois,
        pesq=[None] * S,
    )
