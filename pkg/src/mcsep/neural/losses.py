"""Training objectives and their gradients."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..masks import MaskTensor, psm_target

MAX_PIT_SOURCES = 6


@dataclass
class PermutationResult:
    """``best_perm[s]`` is the output index assigned to source s."""

    best_perm: tuple
    best_cost: float
    all_costs: dict


def dc_weights(mix_mag: np.ndarray, threshold_db: float | None = 40.0) -> np.ndarray:
    """Binary weights dropping bins more than ``threshold_db`` below the peak."""
    flat = np.asarray(mix_mag, dtype=np.float64).ravel()
    if threshold_db is None:
        return np.ones_like(flat)
    floor = flat.max() * 10.0 ** (-threshold_db / 20.0)
    return (flat >= floor).astype(np.float64)


def _dc_prepare(V, B, bin_weights):
    V = np.asarray(V, dtype=np.float64)
    B = np.asarray(getattr(B, "values", B), dtype=np.float64)
    if V.shape[0] != B.shape[0]:
        raise ValueError(f"embedding rows {V.shape[0]} != membership rows {B.shape[0]}")
    w = np.ones(V.shape[0]) if bin_weights is None else np.asarray(bin_weights, float)
    if w.shape != (V.shape[0],):
        raise ValueError("one bin weight per row required")
    return V, B, w


def dc_loss(V, B, bin_weights=None) -> float:
    """Weighted ||VV^T - BB^T||_F^2 / (sum w)^2 through the D x D expansion."""
    return dc_loss_grad(V, B, bin_weights)[0]


def dc_loss_grad(V, B, bin_weights=None):
    V, B, w = _dc_prepare(V, B, bin_weights)
    total = w.sum()
    if total == 0:
        return 0.0, np.zeros_like(V)
    sw = np.sqrt(w)[:, None]
    Vw, Bw = V * sw, B * sw
    VtV = Vw.T @ Vw
    VtB = Vw.T @ Bw
    BtB = Bw.T @ Bw
    norm = total**2
    loss = (np.sum(VtV**2) - 2.0 * np.sum(VtB**2) + np.sum(BtB**2)) / norm
    dVw = 4.0 * (Vw @ VtV - Bw @ VtB.T) / norm
    return float(loss), dVw * sw


def dc_loss_dense(V, B, bin_weights=None) -> float:
    """Reference form materializing the TF x TF affinities. Small inputs only."""
    V, B, w = _dc_prepare(V, B, bin_weights)
    sw = np.sqrt(w)[:, None]
    Vw, Bw = V * sw, B * sw
    return float(np.sum((Vw @ Vw.T - Bw @ Bw.T) ** 2) / w.sum() ** 2)


def pit_cost_matrix(masks: np.ndarray, mix_mag: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """C[o, s] = || |Y| * M_o - target_s ||^2 / (S T F)."""
    S = masks.shape[0]
    est = masks * mix_mag[None]
    diff = est[:, None] - targets[None, :]
    return np.sum(diff**2, axis=(2, 3)) / (S * mix_mag.size)


def permutation_search(C: np.ndarray) -> PermutationResult:
    S = C.shape[0]
    if S > MAX_PIT_SOURCES:
        raise ValueError("permutation search too large")
    all_costs = {}
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(S)):
        cost = float(sum(C[perm[s], s] for s in range(S)))
        all_costs[perm] = cost
        if cost < best_cost:
            best, best_cost = perm, cost
    return PermutationResult(best, best_cost, all_costs)


def upit_psm_loss(masks, mix_ref, src_refs) -> PermutationResult:
    """Utterance-level PIT over phase-sensitive targets (targets left unclipped)."""
    M = np.asarray(getattr(masks, "values", masks), dtype=np.float64)
    if len(src_refs) > MAX_PIT_SOURCES:
        raise ValueError("permutation search too large")
    if M.shape[0] != len(src_refs) or M.shape[1:] != mix_ref.shape:
        raise ValueError("mask tensor does not match mixture/sources")
    targets = np.stack([psm_target(mix_ref, s) for s in src_refs])
    return permutation_search(pit_cost_matrix(M, mix_ref.magnitude, targets))


def dl_loss(perm: PermutationResult, alpha_dl: float) -> float:
    others = sum(c for p, c in perm.all_costs.items() if p != perm.best_perm)
    if alpha_dl == 0:
        return perm.best_cost
    return perm.best_cost - alpha_dl * others


def dl_grad_masks(masks, mix_mag, targets, perm: PermutationResult, alpha_dl: float):
    """d J_DL / d masks, S x T x F."""
    S = masks.shape[0]
    K = np.zeros((S, S))  # K[o, s]: summed coefficient of pairing output o with source s
    for p in perm.all_costs:
        coef = 1.0 if p == perm.best_perm else -alpha_dl
        for s in range(S):
            K[p[s], s] += coef
    est = masks * mix_mag[None]
    resid = K.sum(axis=1)[:, None, None] * est - np.einsum("os,stf->otf", K, targets)
    return 2.0 * mix_mag[None] * resid / (S * mix_mag.size)


def joint_loss(j_dc: float, j_dl: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if lam == 1.0:
        return j_dc
    if lam == 0.0:
        return j_dl
    return lam * j_dc + (1.0 - lam) * j_dl


__all__ = [
    "MaskTensor",
    "PermutationResult",
    "dc_loss",
    "dc_loss_dense",
    "dc_loss_grad",
    "dc_weights",
    "dl_grad_masks",
    "dl_loss",
    "joint_loss",
    "permutation_search",
    "pit_cost_matrix",
    "upit_psm_loss",
]
