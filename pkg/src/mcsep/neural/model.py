"""Attention-fusion embedding network with a PIT mask head.

Pipeline per utterance: a spectral BLSTM stack encodes |Y|; a spatial BLSTM
stack encodes each pair's (cos, sin) phase differences; attention fuses the
two per pair; a DC BLSTM stack plus tanh projection yields unit-norm
per-bin embeddings; the pair embeddings are stacked and fed to a PIT BLSTM
stack whose sigmoid head gives one mask per source.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..features import FeatureSet
from ..masks import MaskTensor, psm_target
from .attention import AttentionState, attention_backward, attention_forward
from .layers import (
    blstm_backward,
    blstm_forward,
    init_linear,
    init_lstm,
    linear_backward,
    linear_forward,
)
from .losses import (
    dc_loss_grad,
    dc_weights,
    dl_grad_masks,
    dl_loss,
    joint_loss,
    permutation_search,
    pit_cost_matrix,
)

NORM_FLOOR = 1e-12


@dataclass
class TrainConfig:
    hidden_units: int = 32
    layers: dict = field(
        default_factory=lambda: {"spectral": 1, "spatial": 1, "dc": 1, "upit": 2}
    )
    embed_dim: int = 8
    lam: float = 0.01
    alpha_dl: float = 0.1
    learning_rate: float = 1e-3
    clip_norm: float | None = None
    epochs: int = 30
    seed: int = 0
    n_sources: int = 2
    n_mics: int = 4
    n_bins: int = 129
    share_spatial: bool = True
    dc_threshold_db: float | None = 40.0
    log_magnitude: bool = False
    standardize: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.alpha_dl < 0:
            raise ValueError("alpha_dl must be >= 0")
        if self.embed_dim < 1 or self.hidden_units < 1:
            raise ValueError("embed_dim and hidden_units must be >= 1")
        if self.n_mics < 2 or self.n_sources < 2:
            raise ValueError("need at least 2 mics and 2 sources")
        layers = {"spectral": 1, "spatial": 1, "dc": 1, "upit": 2}
        layers.update(self.layers or {})
        if any(int(v) < 1 for v in layers.values()):
            raise ValueError("every BLSTM stack needs at least one layer")
        self.layers = {k: int(v) for k, v in layers.items()}

    @property
    def n_pairs(self) -> int:
        return self.n_mics - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Targets:
    membership: np.ndarray  # TF x S
    bin_weights: np.ndarray  # TF
    mix_mag: np.ndarray  # T x F, raw reference-mic magnitude
    psm: np.ndarray  # S x T x F, unclipped |X_s| cos(theta_y - theta_s)


@dataclass
class ForwardOutput:
    attention: AttentionState
    V: np.ndarray  # P x T x F x D, unit rows
    stacked: np.ndarray  # TF x (P D), unit rows
    masks: MaskTensor
    cache: dict = field(repr=False, default=None)

    @property
    def embeddings_per_pair(self) -> list:
        P, T, F, D = self.V.shape
        return [self.V[p].reshape(T * F, D) for p in range(P)]


def make_targets(mix_ref, src_refs, config: TrainConfig) -> Targets:
    from ..masks import ibm

    _, B = ibm(src_refs)
    mix_mag = mix_ref.magnitude
    psm = np.stack([psm_target(mix_ref, s) for s in src_refs])
    return Targets(B.values, dc_weights(mix_mag, config.dc_threshold_db), mix_mag, psm)


def _stack_names(config: TrainConfig, stack: str, pair: int | None = None):
    prefix = stack if pair is None else f"{stack}{pair}_"
    return [f"{prefix}{k}" for k in range(config.layers[stack])]


def _spatial_names(config, pair):
    return _stack_names(config, "spatial", None if config.share_spatial else pair)


def init_params(config: TrainConfig, seed: int | None = None) -> dict:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    H, R = config.hidden_units, 2 * config.hidden_units
    F, D, P, S = config.n_bins, config.embed_dim, config.n_pairs, config.n_sources
    params = {}

    def add_stack(names, din):
        for k, name in enumerate(names):
            width = din if k == 0 else R
            params[f"{name}.fwd"] = init_lstm(rng, width, H)
            params[f"{name}.bwd"] = init_lstm(rng, width, H)

    add_stack(_stack_names(config, "spectral"), F)
    if config.share_spatial:
        add_stack(_spatial_names(config, 0), 2 * F)
    else:
        for p in range(P):
            add_stack(_spatial_names(config, p), 2 * F)
    add_stack(_stack_names(config, "dc"), 3 * R)
    params["embed"] = init_linear(rng, R, F * D)
    add_stack(_stack_names(config, "upit"), F * D * P)
    params["mask"] = init_linear(rng, R, S * F)
    return params


def _run_stack(x, params, names):
    caches = []
    for name in names:
        x, c = blstm_forward(x, params[f"{name}.fwd"], params[f"{name}.bwd"])
        caches.append(c)
    return x, caches


def _back_stack(dx, caches, names, grads):
    for name, c in zip(reversed(names), reversed(caches)):
        dx, dWf, dWb = blstm_backward(dx, c)
        grads[f"{name}.fwd"] = grads.get(f"{name}.fwd", 0) + dWf
        grads[f"{name}.bwd"] = grads.get(f"{name}.bwd", 0) + dWb
    return dx


def forward_full(features: FeatureSet, params: dict, config: TrainConfig) -> ForwardOutput:
    X = np.asarray(features.spectral, dtype=np.float64)
    T, F = X.shape
    P, D, S = features.n_pairs, config.embed_dim, config.n_sources
    if F != config.n_bins or P != config.n_pairs:
        raise ValueError(
            f"features (F={F}, pairs={P}) do not match config "
            f"(F={config.n_bins}, pairs={config.n_pairs})"
        )
    spatial_in = features.spatial_input()  # P x T x 2F

    r_y, c_spec = _run_stack(X[None], params, _stack_names(config, "spectral"))
    r_y = r_y[0]
    if config.share_spatial:
        r_theta, c_spat = _run_stack(spatial_in, params, _spatial_names(config, 0))
        c_spat = [c_spat]
    else:
        outs, c_spat = [], []
        for p in range(P):
            o, c = _run_stack(spatial_in[p : p + 1], params, _spatial_names(config, p))
            outs.append(o[0])
            c_spat.append(c)
        r_theta = np.stack(outs)

    att = attention_forward(r_y, r_theta)
    fused = np.concatenate([np.broadcast_to(r_y, r_theta.shape), att.c, r_theta], axis=-1)
    h_dc, c_dc = _run_stack(fused, params, _stack_names(config, "dc"))

    U = np.tanh(linear_forward(h_dc, params["embed"])).reshape(P, T, F, D)
    norm = np.maximum(np.sqrt(np.sum(U * U, axis=-1, keepdims=True)), NORM_FLOOR)
    V = U / norm
    stacked = V.transpose(1, 2, 0, 3).reshape(T, F, P * D) / np.sqrt(P)

    h_u, c_up = _run_stack(stacked.reshape(1, T, F * P * D), params, _stack_names(config, "upit"))
    logits = linear_forward(h_u[0], params["mask"])  # T x S F
    M = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
    masks = M.reshape(T, S, F).transpose(1, 0, 2)

    cache = dict(
        c_spec=c_spec, c_spat=c_spat, c_dc=c_dc, c_up=c_up, h_dc=h_dc, h_u=h_u,
        U=U, norm=norm, M=M, T=T, F=F,
    )
    return ForwardOutput(att, V, stacked.reshape(T * F, P * D), MaskTensor(masks, "estimated"), cache)


def backward_full(
    out: ForwardOutput, params: dict, config: TrainConfig, d_stacked: np.ndarray, d_masks: np.ndarray
) -> dict:
    """Parameter gradients given upstream gradients on the stacked embedding
    (TF x PD) and on the masks (S x T x F)."""
    cache = out.cache
    T, F = cache["T"], cache["F"]
    P, D, S = config.n_pairs, config.embed_dim, config.n_sources
    R = 2 * config.hidden_units
    grads = {}

    M = cache["M"]
    d_logits = d_masks.transpose(1, 0, 2).reshape(T, S * F) * M * (1.0 - M)
    dh_u, grads["mask"] = linear_backward(d_logits, cache["h_u"][0], params["mask"])
    d_up_in = _back_stack(dh_u[None], cache["c_up"], _stack_names(config, "upit"), grads)

    d_st = d_up_in.reshape(T, F, P * D) + d_stacked.reshape(T, F, P * D)
    dV = (d_st / np.sqrt(P)).reshape(T, F, P, D).transpose(2, 0, 1, 3)
    V, U, norm = out.V, cache["U"], cache["norm"]
    dU = (dV - V * np.sum(V * dV, axis=-1, keepdims=True)) / norm
    dz = (dU * (1.0 - U * U)).reshape(P, T, F * D)
    dh_dc, grads["embed"] = linear_backward(dz, cache["h_dc"], params["embed"])

    d_fused = _back_stack(dh_dc, cache["c_dc"], _stack_names(config, "dc"), grads)
    dr_y = d_fused[..., :R].sum(axis=0)
    dc = d_fused[..., R : 2 * R]
    dr_theta = d_fused[..., 2 * R :]
    dr_y_att, dr_theta_att = attention_backward(dc, out.attention)
    dr_y = dr_y + dr_y_att
    dr_theta = dr_theta + dr_theta_att

    if config.share_spatial:
        _back_stack(dr_theta, cache["c_spat"][0], _spatial_names(config, 0), grads)
    else:
        for p in range(P):
            _back_stack(dr_theta[p : p + 1], cache["c_spat"][p], _spatial_names(config, p), grads)
    _back_stack(dr_y[None], cache["c_spec"], _stack_names(config, "spectral"), grads)
    return grads


@dataclass
class LossBreakdown:
    j_dc: float
    j_dl: float
    j: float
    best_perm: tuple


def compute_loss(out: ForwardOutput, targets: Targets, config: TrainConfig, need_grad=False):
    j_dc, d_stacked = dc_loss_grad(out.stacked, targets.membership, targets.bin_weights)
    masks = out.masks.values
    perm = permutation_search(pit_cost_matrix(masks, targets.mix_mag, targets.psm))
    j_dl = dl_loss(perm, config.alpha_dl)
    j = joint_loss(j_dc, j_dl, config.lam)
    breakdown = LossBreakdown(j_dc, j_dl, j, perm.best_perm)
    if not need_grad:
        return breakdown
    lam = config.lam
    d_masks = (1.0 - lam) * dl_grad_masks(masks, targets.mix_mag, targets.psm, perm, config.alpha_dl)
    return breakdown, lam * d_stacked, d_masks


def loss_and_grad(params: dict, features: FeatureSet, targets: Targets, config: TrainConfig):
    out = forward_full(features, params, config)
    breakdown, d_stacked, d_masks = compute_loss(out, targets, config, need_grad=True)
    grads = backward_full(out, params, config, d_stacked, d_masks)
    return breakdown, grads


def loss_only(params: dict, features: FeatureSet, targets: Targets, config: TrainConfig) -> float:
    return compute_loss(forward_full(features, params, config), targets, config).j
