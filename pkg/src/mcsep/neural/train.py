"""Per-utterance Adam training and the finite-difference gradient harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import TrainConfig, loss_and_grad, loss_only

CHECKPOINT_VERSION = 1


@dataclass
class Example:
    scene_id: str
    features: object  # FeatureSet
    targets: object  # Targets


@dataclass
class Adam:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        self.step_count += 1
        t = self.step_count
        lr_t = self.learning_rate * np.sqrt(1.0 - self.beta2**t) / (1.0 - self.beta1**t)
        for name in sorted(params):
            g = grads.get(name)
            if g is None:
                continue
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            params[name] -= lr_t * self.m[name] / (np.sqrt(self.v[name]) + self.eps)


def clip_gradients(grads: dict, max_norm: float | None) -> float:
    total = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def train_epoch(examples: list, params: dict, config: TrainConfig, optimizer: Adam, epoch: int):
    """One pass over ``examples`` in a seeded shuffle order.

    Returns (params, {"j_dc", "j_dl", "j"} epoch means). ``params`` is
    updated in place and also returned.
    """
    if not examples:
        raise ValueError("empty training set")
    order = np.random.default_rng([config.seed, epoch]).permutation(len(examples))
    totals = np.zeros(3)
    for idx in order:
        ex = examples[idx]
        breakdown, grads = loss_and_grad(params, ex.features, ex.targets, config)
        clip_gradients(grads, config.clip_norm)
        optimizer.step(params, grads)
        totals += (breakdown.j_dc, breakdown.j_dl, breakdown.j)
    means = totals / len(examples)
    return params, {"j_dc": float(means[0]), "j_dl": float(means[1]), "j": float(means[2])}


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    params: dict,
    features,
    targets,
    config: TrainConfig,
    epsilon: float = 1e-4,
    n_samples: int = 200,
    seed: int = 0,
    loss_fn=None,
    grad_fn=None,
) -> dict:
    """Central-difference check on up to ``n_samples`` entries of every block.

    Returns {block name: max relative error}. ``loss_fn(params)`` and
    ``grad_fn(params)`` default to the joint loss of the full model.
    """
    if loss_fn is None:
        loss_fn = lambda p: loss_only(p, features, targets, config)  # noqa: E731
    if grad_fn is None:
        grad_fn = lambda p: loss_and_grad(p, features, targets, config)[1]  # noqa: E731
    grads = grad_fn(params)
    rng = np.random.default_rng(seed)
    report = {}
    for name in sorted(params):
        W = params[name]
        flat = W.reshape(-1)
        g = np.asarray(grads[name]).reshape(-1)
        k = min(n_samples, flat.size)
        picks = rng.choice(flat.size, size=k, replace=False)
        worst = 0.0
        for i in picks:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_fn(params)
            flat[i] = orig - epsilon
            down = loss_fn(params)
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            worst = max(worst, relative_error(g[i], numeric))
        report[name] = worst
    return report


def save_checkpoint(path, params: dict, config: TrainConfig, optimizer: Adam, epoch: int, history: list):
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "epoch": epoch,
        "adam": {
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "step_count": optimizer.step_count,
        },
        "history": history,
        "blocks": {name: list(params[name].shape) for name in sorted(params)},
    }
    arrays = {f"param/{k}": v for k, v in params.items()}
    arrays.update({f"adam_m/{k}": v for k, v in optimizer.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in optimizer.v.items()})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    tmp.replace(path)


def load_checkpoint(path):
    """Returns (params, config, optimizer, epoch, history)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        params, m, v = {}, {}, {}
        for key in data.files:
            if key.startswith("param/"):
                params[key[6:]] = data[key].copy()
            elif key.startswith("adam_m/"):
                m[key[7:]] = data[key].copy()
            elif key.startswith("adam_v/"):
                v[key[7:]] = data[key].copy()
    config = TrainConfig.from_dict(meta["config"])
    a = meta["adam"]
    opt = Adam(a["learning_rate"], a["beta1"], a["beta2"], a["eps"], a["step_count"], m, v)
    return params, config, opt, meta["epoch"], meta["history"]
