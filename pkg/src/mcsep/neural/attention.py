"""Spectral-spatial attention fusion.

Scores are dot products between the spectral representation at frame t and
the spatial representation at frame t'; a row softmax over t' weights the
spatial frames into a per-frame context vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AttentionState:
    r_y: np.ndarray  # T x R
    r_theta: np.ndarray  # P x T x R
    d: np.ndarray  # P x T x T
    alpha_att: np.ndarray  # P x T x T, rows sum to 1
    c: np.ndarray  # P x T x R


def row_softmax(d: np.ndarray) -> np.ndarray:
    e = np.exp(d - d.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attention_forward(r_y: np.ndarray, r_theta: np.ndarray) -> AttentionState:
    """Batched over pairs: r_y is T x R, r_theta is P x T x R."""
    if r_y.shape[-1] != r_theta.shape[-1]:
        raise ValueError("spectral and spatial representations must share a width")
    d = np.einsum("tr,psr->pts", r_y, r_theta)
    alpha = row_softmax(d)
    c = alpha @ r_theta
    return AttentionState(r_y, r_theta, d, alpha, c)


def attention_backward(dc: np.ndarray, state: AttentionState):
    """Gradients of the context vectors pushed back into r_y and r_theta."""
    alpha, r_y, r_theta = state.alpha_att, state.r_y, state.r_theta
    dalpha = dc @ r_theta.transpose(0, 2, 1)
    dr_theta = alpha.transpose(0, 2, 1) @ dc
    dd = alpha * (dalpha - np.sum(dalpha * alpha, axis=-1, keepdims=True))
    dr_y = np.einsum("pts,psr->tr", dd, r_theta)
    dr_theta += dd.transpose(0, 2, 1) @ r_y
    return dr_y, dr_theta


def attention_fuse(r_y: np.ndarray, r_theta_i: np.ndarray):
    """Single-pair form: returns (alpha_att T x T, context T x H)."""
    state = attention_forward(np.asarray(r_y, float), np.asarray(r_theta_i, float)[None])
    return state.alpha_att[0], state.c[0]
