"""Command line entry point: ``mcsep simulate | train | separate | evaluate``.

Exit codes are 0 on success, 1 for usage or config errors and 2 for
runtime failures (missing inputs, unwritable outputs, bad checkpoints).
Set ``MCSEP_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) to change verbosity.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import MODES, ExperimentConfig, config_from_dict, load_config
from .dataset import (
    SPLITS,
    load_example,
    pad_to,
    read_manifest,
    read_wav,
    reference_signals,
    simulate_dataset,
    write_wav,
)
from .metrics import evaluate_scene, sdr, stoi
from .neural.model import init_params
from .neural.train import Adam, load_checkpoint, save_checkpoint, train_epoch
from .separation import estimate_masks, resynthesize
from .signal_core import Waveform, stft

log = logging.getLogger("mcsep")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def mode_dirname(mode: str) -> str:
    return mode.replace(":", "_")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    model = cfg.model
    scenes = cfg.scenes
    if getattr(args, "seed", None) is not None:
        scenes = dataclasses.replace(scenes, seed=args.seed)
        model = dataclasses.replace(model, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        model = dataclasses.replace(model, epochs=args.epochs)
    if getattr(args, "lam", None) is not None:
        model = dataclasses.replace(model, lam=args.lam)
    return dataclasses.replace(cfg, scenes=scenes, model=model)


def _load(args) -> ExperimentConfig:
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        return _apply_overrides(cfg, args)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {exc.filename}") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def _manifest(dataset_dir) -> list:
    try:
        return read_manifest(dataset_dir)
    except FileNotFoundError as exc:
        raise RuntimeFailure(f"no manifest in {dataset_dir}; run `mcsep simulate` first") from exc


def _select(records: list, split: str, scene: str | None) -> list:
    if scene:
        chosen = [r for r in records if r["id"] == scene]
        if not chosen:
            raise RuntimeFailure(f"scene {scene} not in manifest")
        return chosen
    chosen = [r for r in records if r["split"] == split]
    if not chosen:
        raise RuntimeFailure(f"split {split} is empty")
    return chosen


def _modes(cfg: ExperimentConfig, args) -> tuple:
    return (args.mode,) if args.mode else cfg.modes


# -- simulate ---------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out or cfg.paths.dataset_dir)
    try:
        records = simulate_dataset(cfg.scenes, out, log)
    except FileExistsError as exc:
        raise RuntimeFailure(str(exc)) from exc
    counts = {s: sum(r["split"] == s for r in records) for s in SPLITS}
    log.info("dataset at %s: %s", out, counts)


# -- train ------------------------------------------------------------------

def _write_loss_csv(path: Path, history: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "j_dc", "j_dl", "j"])
        for row in history:
            w.writerow([row["epoch"], *(f"{row[k]:.10g}" for k in ("j_dc", "j_dl", "j"))])


def cmd_train(cfg: ExperimentConfig, args) -> None:
    from .plotting import plot_loss_curve

    records = [r for r in _manifest(cfg.paths.dataset_dir) if r["split"] == "train"]
    if not records:
        raise RuntimeFailure("manifest has no training scenes")
    ckpt = Path(args.out or cfg.paths.checkpoint)
    model_cfg = cfg.model
    if args.resume and ckpt.exists():
        params, saved_cfg, opt, start, history = load_checkpoint(ckpt)
        if dataclasses.replace(saved_cfg, epochs=model_cfg.epochs) != model_cfg:
            raise RuntimeFailure(f"{ckpt} was trained with a different model config")
        log.info("resuming from %s at epoch %d", ckpt, start)
    else:
        params, opt, start, history = init_params(model_cfg), Adam(model_cfg.learning_rate), 0, []
    try:
        examples = [load_example(r, cfg.paths.dataset_dir, cfg.stft, model_cfg) for r in records]
    except (OSError, ValueError) as exc:
        raise RuntimeFailure(f"cannot read training scenes: {exc}") from exc

    report_dir = Path(cfg.paths.report_dir)
    try:
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        report_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeFailure(f"cannot create output directory: {exc}") from exc
    for epoch in range(start, model_cfg.epochs):
        params, metrics = train_epoch(examples, params, model_cfg, opt, epoch)
        history.append({"epoch": epoch, **metrics})
        log.info("epoch %d  J_DC %.5g  J_DL %.5g  J %.5g", epoch, metrics["j_dc"], metrics["j_dl"], metrics["j"])
        try:
            save_checkpoint(ckpt, params, model_cfg, opt, epoch + 1, history)
        except OSError as exc:
            raise RuntimeFailure(f"cannot write checkpoint {ckpt}: {exc}") from exc
    try:
        save_checkpoint(ckpt, params, model_cfg, opt, max(start, model_cfg.epochs), history)
    except OSError as exc:
        raise RuntimeFailure(f"cannot write checkpoint {ckpt}: {exc}") from exc
    _write_loss_csv(report_dir / "train_loss.csv", history)
    if history:
        plot_loss_curve(history, report_dir / "train_loss.png")
    log.info("checkpoint written to %s", ckpt)


# -- separate ---------------------------------------------------------------

def _load_model(path):
    path = Path(path)
    if not path.exists():
        raise RuntimeFailure(f"checkpoint {path} not found; run `mcsep train` or pick an oracle mode")
    try:
        params, model_cfg, *_ = load_checkpoint(path)
    except (OSError, ValueError, KeyError) as exc:
        raise RuntimeFailure(f"cannot read checkpoint {path}: {exc}") from exc
    return params, model_cfg


def cmd_separate(cfg: ExperimentConfig, args) -> None:
    modes = _modes(cfg, args)
    records = _select(_manifest(cfg.paths.dataset_dir), args.split, args.scene)
    params, model_cfg = None, cfg.model
    if any(not m.startswith("oracle:") for m in modes):
        params, model_cfg = _load_model(cfg.paths.checkpoint)
    out_dir = Path(args.out or cfg.paths.separated_dir)
    for rec in records:
        try:
            example = load_example(rec, cfg.paths.dataset_dir, cfg.stft, model_cfg)
            mixture, refs = reference_signals(rec, cfg.paths.dataset_dir)
        except (OSError, ValueError) as exc:
            raise RuntimeFailure(f"cannot read scene {rec['id']}: {exc}") from exc
        src_refs = [stft(x, cfg.stft) for x in refs]
        for mode in modes:
            try:
                masks = estimate_masks(
                    mode, example.features, src_refs, params, model_cfg,
                    restarts=cfg.kmeans_restarts, seed=model_cfg.seed,
                )
            except ValueError as exc:
                raise RuntimeFailure(f"{mode} failed on {rec['id']}: {exc}") from exc
            estimates = resynthesize(example.features.mixture_specs[0], masks)
            for s, est in enumerate(estimates):
                path = out_dir / mode_dirname(mode) / rec["id"] / f"est{s}.wav"
                try:
                    write_wav(path, pad_to(est, len(mixture)).samples, mixture.sample_rate_hz)
                except OSError as exc:
                    raise RuntimeFailure(f"cannot write {path}: {exc}") from exc
        log.debug("separated %s", rec["id"])
    log.info("wrote %d scenes x %d modes under %s", len(records), len(modes), out_dir)


# -- evaluate ---------------------------------------------------------------

ROW_FIELDS = ["method", "scene_id", "source_id", "permutation", "sdr_db", "sdr_i_db", "stoi", "pesq"]
SUMMARY_FIELDS = ["method", "n_rows", "mean_sdr_db", "mean_sdr_i_db", "mean_stoi"]


def _fmt(x: float) -> str:
    # shortest round-trip repr: deterministic and lossless
    return repr(float(x))


def summarize(rows: list) -> list:
    """One summary dict per method in first-seen order."""
    order, groups = [], {}
    for r in rows:
        if r["method"] not in groups:
            order.append(r["method"])
            groups[r["method"]] = []
        groups[r["method"]].append(r)
    return [
        {
            "method": m,
            "n_rows": len(groups[m]),
            "mean_sdr_db": float(np.mean([r["sdr_db"] for r in groups[m]])),
            "mean_sdr_i_db": float(np.mean([r["sdr_i_db"] for r in groups[m]])),
            "mean_stoi": float(np.mean([r["stoi"] for r in groups[m]])),
        }
        for m in order
    ]


def _write_rows(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([
                r["method"], r["scene_id"], r["source_id"], r["permutation"],
                _fmt(r["sdr_db"]), _fmt(r["sdr_i_db"]), _fmt(r["stoi"]), "",
            ])


def _write_summary(path: Path, summary: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for s in summary:
            w.writerow([s["method"], s["n_rows"], *(_fmt(s[k]) for k in SUMMARY_FIELDS[2:])])


def _estimate_paths(out_dir: Path, mode: str, rec: dict) -> list:
    return [out_dir / mode_dirname(mode) / rec["id"] / f"est{s}.wav" for s in range(len(rec["images"]))]


def cmd_evaluate(cfg: ExperimentConfig, args) -> None:
    from .plotting import plot_method_summary, plot_spectrograms

    modes = _modes(cfg, args)
    records = _select(_manifest(cfg.paths.dataset_dir), args.split, args.scene)
    est_dir = Path(cfg.paths.separated_dir)
    dataset_dir = Path(cfg.paths.dataset_dir)
    missing = [
        str(p)
        for rec in records
        for p in [dataset_dir / rec["mixture"], *(dataset_dir / i for i in rec["images"])]
        + [q for m in modes for q in _estimate_paths(est_dir, m, rec)]
        if not p.exists()
    ]
    if missing:
        raise RuntimeFailure("missing files:\n  " + "\n  ".join(missing))

    rows, first_scene = [], None
    for rec in records:
        mixture, refs = reference_signals(rec, dataset_dir)
        fs = mixture.sample_rate_hz
        # STOI needs at least a second of audio; shorter clips report nan
        with_stoi = len(mixture) >= fs
        if not with_stoi and first_scene is None:
            log.warning("clips shorter than 1 s: STOI is reported as nan")
        for s, ref in enumerate(refs):
            rows.append({
                "method": "mixture", "scene_id": rec["id"], "source_id": s, "permutation": "",
                "sdr_db": sdr(mixture, ref), "sdr_i_db": 0.0,
                "stoi": stoi(mixture, ref, fs) if with_stoi else float("nan"),
            })
        per_mode = {}
        for mode in modes:
            ests = [Waveform(read_wav(p)[0][0], fs) for p in _estimate_paths(est_dir, mode, rec)]
            per_mode[mode] = ests
            report = evaluate_scene(ests, refs, mixture, rec["id"], fs, with_stoi)
            for s in range(len(refs)):
                rows.append({
                    "method": mode, "scene_id": rec["id"], "source_id": s,
                    "permutation": report.permutation[s], "sdr_db": report.sdr_db[s],
                    "sdr_i_db": report.sdr_i_db[s], "stoi": report.stoi[s],
                })
        if first_scene is None:
            first_scene = (rec["id"], mixture, refs, per_mode)

    out = Path(args.out or cfg.paths.report_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        tag = args.scene or args.split
        _write_rows(out / f"eval_{tag}.csv", rows)
        summary = summarize(rows)
        _write_summary(out / f"summary_{tag}.csv", summary)
        plot_method_summary(summary, out / f"summary_{tag}.png")
        sid, mixture, refs, per_mode = first_scene
        panels = [("mixture", stft(mixture, cfg.stft).magnitude)]
        panels += [(f"reference {s}", stft(r, cfg.stft).magnitude) for s, r in enumerate(refs)]
        for mode, ests in per_mode.items():
            panels += [(f"{mode} est {s}", stft(e, cfg.stft).magnitude) for s, e in enumerate(ests)]
        plot_spectrograms(panels, mixture.sample_rate_hz, cfg.stft.hop, out / f"spectrograms_{sid}.png")
    except OSError as exc:
        raise RuntimeFailure(f"cannot write report to {out}: {exc}") from exc
    for s in summary:
        log.info("%-16s SDR %7.2f dB  SDRi %7.2f dB  STOI %.3f",
                 s["method"], s["mean_sdr_db"], s["mean_sdr_i_db"], s["mean_stoi"])


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment YAML file (defaults are used when omitted)")
    common.add_argument("--seed", type=int, help="override the scene and model seeds")
    common.add_argument("--out", help="output location for this command")

    parser = _Parser(prog="mcsep", description="Multichannel speech separation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="synthesize the scene dataset (--out: dataset dir)")

    p = sub.add_parser("train", parents=[common], help="train the model (--out: checkpoint path)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="weight of the deep clustering loss")
    p.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")

    for name, text in (("separate", "write separated WAVs (--out: separated dir)"),
                       ("evaluate", "score separated WAVs (--out: report dir)")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--mode", choices=MODES, help="single mode (default: all modes in the config)")
        p.add_argument("--split", choices=SPLITS, default="test")
        p.add_argument("--scene", help="a single scene id instead of a whole split")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "separate": cmd_separate,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    level = os.environ.get("MCSEP_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        log.error("%s failed: %s", args.command, exc)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
