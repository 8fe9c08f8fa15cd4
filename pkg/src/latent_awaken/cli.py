"""Command-line interface: train, animate, ablate, diagnose.

Artifacts are deterministic: given the same config, seed and inputs, every
file a command writes is byte-identical across reruns.  Wall-clock timings
are therefore kept out of result files and go to a separate ``run.log``.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .diffusion import Condition, VideoLatent
from .metrics import diagnose_video
from .numerics import read_ltn1, write_ltn1
from .pipeline import AblationReport, PipelineVariant, animate, parse_variant, run_ablation
from .proxy import FileProvider, SyntheticProvider, load_proxy, write_pgm
from .rng import stream
from .toydenoiser import ToyDenoiser, generate_dataset, label_id, load_checkpoint, save_checkpoint, train
from .vsds import WeightCurve, parse_curve_kind

THREADS_ENV = "LATENT_AWAKEN_THREADS"


def _max_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _write_log(out_dir: Path, lines: list[str]) -> None:
    # Timings and timestamps live here, never in the deterministic artifacts.
    stamp = time.strftime("%Y-%m-%d %H:%M:%S")
    (out_dir / "run.log").write_text("\n".join([f"[{stamp}]"] + lines) + "\n")


def _load_model(ckpt: str) -> tuple[ToyDenoiser, dict]:
    ckpt_path = Path(ckpt)
    if not ckpt_path.exists():
        raise ConfigError(f"checkpoint not found: {ckpt_path}")
    return load_checkpoint(ckpt_path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    params = cfg.dataset_params()
    sched = cfg.schedule()
    dataset = generate_dataset(cfg["dataset.n"], params, seed=stream(cfg.seed, "dataset/train"))
    model = ToyDenoiser(
        frames=params.frames,
        channels=params.channels,
        height=params.height,
        width=params.width,
        hidden=cfg["denoiser.hidden"],
        t_embed=cfg["denoiser.t_embed"],
        seed=cfg.seed,
    )
    t0 = time.perf_counter()
    model, result = train(
        model, dataset, sched,
        epochs=cfg["train.epochs"], lr=cfg["train.lr"], seed=cfg.seed, batch_size=cfg["train.batch"],
    )
    elapsed = time.perf_counter() - t0

    save_checkpoint(
        model, out_dir, dataset_params=params, sched=sched,
        extra={"config_hash": cfg.config_hash(), "final_loss": result.final_loss},
    )
    loss_rows = [f"{epoch + 1},{float(loss)!r}" for epoch, loss in enumerate(result.losses)]
    (out_dir / "loss.csv").write_text("epoch,loss\n" + "\n".join(loss_rows) + "\n")
    _write_log(out_dir, [f"train: {elapsed:.2f}s for {cfg['train.epochs']} epochs over {len(dataset)} samples"])
    print(f"checkpoint written to {out_dir} (final loss {result.final_loss:.3f})")
    return 0


def cmd_animate(args) -> int:
    cfg = load_config(args.config)
    model, _ = _load_model(args.ckpt)
    image_path = Path(args.image)
    if not image_path.exists():
        raise ConfigError(f"input image not found: {image_path}")
    image = load_proxy(image_path, expected_shape=(model.channels, model.height, model.width))
    cond = Condition(image, label_id(args.label))
    variant = parse_variant(args.variant)
    provider = FileProvider(args.proxy) if args.proxy else SyntheticProvider(cfg.proxy_params())

    run = animate(
        image, cond, variant, model, cfg.schedule(),
        vsds_cfg=cfg.vsds_config(), fusion_cfg=cfg.fusion_config(),
        proxy_provider=provider, seed=cfg.seed, resume_from=cfg.resume_from,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ltn1(out_dir / "video.ltn1", run.output.frames)
    frame_files = []
    for l in range(run.output.frame_count):
        name = f"frame_{l:02d}.pgm"
        write_pgm(out_dir / name, run.output.frame(l))
        frame_files.append(name)
    result = {
        "variant": variant.value,
        "label": args.label,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": run.config,
        "frames": run.output.frame_count,
        "video": "video.ltn1",
        "frame_files": frame_files,
    }
    (out_dir / "result.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    _write_log(out_dir, [f"{name}: {secs:.3f}s" for name, secs in run.timing.items()])
    print(f"wrote {out_dir / 'video.ltn1'} and {len(frame_files)} frames")
    return 0


def _sweep_rows(cfg: ExperimentConfig, model, benchmark, reference, threads: int) -> AblationReport:
    """Run the configured sweep and collect one report with labeled rows."""
    sched = cfg.schedule()
    common = dict(
        denoiser=model,
        sched=sched,
        fusion_cfg=cfg.fusion_config(),
        proxy_provider=SyntheticProvider(cfg.proxy_params()),
        base_seed=cfg.seed,
        resume_from=cfg.resume_from,
        reference_videos=reference,
        threads=threads,
    )
    sweep = cfg["ablate.sweep"]
    if sweep == "variants":
        return run_ablation(benchmark, cfg.variants(), vsds_cfg=cfg.vsds_config(), **common)

    base_vsds = cfg.vsds_config()
    merged = None
    if sweep == "curves":
        keys_and_cfgs = [
            (name, replace(base_vsds, curve=WeightCurve(parse_curve_kind(name), base_vsds.curve.w_hi, base_vsds.curve.w_lo)))
            for name in cfg["ablate.curve_grid"]
        ]
    else:  # p sweep
        keys_and_cfgs = [(repr(p), replace(base_vsds, p=p)) for p in cfg["ablate.p_grid"]]
    for key, vsds_cfg in keys_and_cfgs:
        report = run_ablation(benchmark, [PipelineVariant.VS], vsds_cfg=vsds_cfg, **common)
        row = report.rows[0]
        row.key = key
        if merged is None:
            merged = report
            merged.rows = [row]
        else:
            merged.rows.append(row)
            merged.failures.extend(report.failures)
    return merged


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    model, _ = _load_model(args.ckpt)
    threads = _max_threads()

    bench = generate_dataset(args.n, cfg.dataset_params(), seed=stream(cfg.seed, "ablate/bench"))
    benchmark = [(s.cond.image, s.cond) for s in bench.samples]
    reference = [s.video for s in bench.samples]

    t0 = time.perf_counter()
    report = _sweep_rows(cfg, model, benchmark, reference, threads)
    elapsed = time.perf_counter() - t0

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.csv").write_text(report.to_csv())
    (out_dir / "ablation.json").write_text(
        report.to_json(extra={"config_hash": cfg.config_hash(), "sweep": cfg["ablate.sweep"], "seed": cfg.seed})
    )
    _write_log(out_dir, [f"ablate: {elapsed:.2f}s over {args.n} items, {threads} thread(s)"])
    print(f"wrote {out_dir / 'ablation.csv'} ({len(report.rows)} rows)")
    return 0


def cmd_diagnose(args) -> int:
    video_path = Path(args.video)
    if not video_path.exists():
        raise ConfigError(f"video file not found: {video_path}")
    video = VideoLatent(read_ltn1(video_path))
    if args.image:
        reference = load_proxy(args.image, expected_shape=video.frame_shape)
    else:
        reference = None
    cond = Condition(reference if reference is not None else video.frame(0), label_id(args.label))
    report = diagnose_video(video, cond, reference)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-awaken", description="Animate still images at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the toy denoiser on procedural videos")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", default="runs/train", help="checkpoint output directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("animate", help="generate a video latent from one image")
    p.add_argument("--config", required=True)
    p.add_argument("--ckpt", required=True, help="checkpoint directory from `train`")
    p.add_argument("--image", required=True, help="input image (PGM or LTN1)")
    p.add_argument("--label", required=True, help="motion label (static/right/left/up/down/grow)")
    p.add_argument("--variant", default="VS", help="pipeline variant (Baseline/V/S/VU/VS)")
    p.add_argument("--proxy", default=None, help="optional pre-rendered proxy image (PGM or LTN1)")
    p.add_argument("--out", default="runs/animate")
    p.set_defaults(fn=cmd_animate)

    p = sub.add_parser("ablate", help="score pipeline variants over a procedural benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--n", type=int, default=16, help="benchmark size")
    p.add_argument("--out", default="runs/ablate")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("diagnose", help="print metrics for a stored video latent")
    p.add_argument("--video", required=True, help="LTN1 video latent")
    p.add_argument("--label", required=True)
    p.add_argument("--image", default=None, help="optional reference image for fidelity")
    p.set_defaults(fn=cmd_diagnose)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failure boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
