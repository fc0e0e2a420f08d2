"""Command-line surface: eval, track, plan, train-token, sample-dr, serve, ingest."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", choices=["paper", "desk"], default=None, help="config profile")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)


def _config(args):
    from .config import load_config

    return load_config(args.config, profile=args.profile, seed=args.seed)


def cmd_eval(args) -> int:
    from .clips import load_clip
    from .metrics import SuccessMode, aggregate, evaluate_pairs, write_report_csv

    pairs = []
    with open(args.manifest, encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        ref = load_clip(row["ref"])
        actual = load_clip(row["actual"])
        pairs.append((row.get("name") or Path(row["actual"]).stem, ref, actual))
    mode = SuccessMode.STRICT if args.mode == "strict" else SuccessMode.RELAXED
    results = evaluate_pairs(pairs, mode=mode, workers=args.workers)
    write_report_csv(args.out, results)
    summary = aggregate(results)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_track(args) -> int:
    from .clips import load_clip, save_clip
    from .domain_rand import push_schedule, sample_dr
    from .runtime import KinematicFollower, TokenPolicy, measure_latency, track_clip

    cfg = _config(args)
    clip = load_clip(args.clip, allow_resample=args.resample)
    rng = np.random.default_rng(cfg.seed)
    dr = None
    pushes = None
    if args.randomize:
        dr = sample_dr(cfg.dr, rng, clip.skeleton.joint_count)
        pushes = push_schedule(cfg.dr, clip.duration, rng)
    if args.policy == "follower":
        policy = KinematicFollower()
    else:
        from .fsq import FsqSpec
        from .tokens import make_token_params

        params = make_token_params(clip.skeleton, cfg.fsq, cfg.mlp, np.random.default_rng(cfg.seed))
        if args.params:
            params.load_into(args.params)
        policy = TokenPolicy(params)
    run = track_clip(clip, policy, dr=dr, pushes=pushes, threads=args.threads,
                     early_stop=args.early_stop)
    if run.report is None:
        print(f"aborted: {run.aborted}", file=sys.stderr)
        return 1
    if args.out:
        save_clip(run.realized, args.out)
    if args.trace:
        run.trace.to_csv(args.trace)
    latency = measure_latency(run.trace)
    print(json.dumps({
        "success": run.report.success,
        "failure_time": run.report.failure_time,
        "failure_reason": run.report.failure_reason.value,
        "mpjpe_mm": run.report.mpjpe_mm,
        "e_vel_mm_per_frame": run.report.e_vel_mm_per_frame,
        "e_acc_mm_per_frame2": run.report.e_acc_mm_per_frame2,
        "latency_mean_ms": latency.mean_ms,
        "latency_p95_ms": latency.p95_ms,
        "tick_counts": run.tick_counts,
    }, indent=2))
    return 0 if run.report.success else 2


def cmd_plan(args) -> int:
    from .clips import MotionClip, load_clip, save_clip
    from .codec import MotionCodec
    from .fsq import FsqSpec
    from .library import ingest_dataset, synthetic_library
    from .planner import (
        NavCommand,
        PlanRequest,
        RetrievalPredictor,
        SkillCommand,
        build_segment_library,
        plan,
    )

    cfg = _config(args)
    skeleton = cfg.skeleton()
    if args.library:
        library, report = ingest_dataset(args.library, skeleton)
        if report.rejected:
            print(f"rejected clips: {report.rejected}", file=sys.stderr)
    else:
        library = synthetic_library(skeleton, seed=cfg.seed)
    codec = MotionCodec(skeleton=skeleton,
                        key_spec=FsqSpec(cfg.planner.codec_key_dims, cfg.planner.codec_key_levels))
    rng = np.random.default_rng(cfg.seed)
    seg_lib = build_segment_library(library.all_clips(), codec,
                                    segments_per_clip=cfg.planner.segments_per_clip, rng=rng)
    predictor = RetrievalPredictor(seg_lib)

    if args.context:
        ctx_clip = load_clip(args.context)
    else:
        ctx_clip = library.entries["idle"].clip if "idle" in library.entries else library.all_clips()[0]
    context = tuple(ctx_clip.frame(i) for i in range(4))

    spec = json.loads(args.command)
    mode = spec.get("mode", "walk")
    if mode in ("squat", "kneel"):
        command = SkillCommand(skill=mode, height=float(spec.get("height", 0.5)))
    elif mode == "crawl":
        command = SkillCommand(skill="crawl", speed=float(spec.get("velocity", 0.2)),
                               direction=np.deg2rad(float(spec.get("direction_deg", 0.0))))
    else:
        command = NavCommand(speed=float(spec.get("velocity", 1.0)),
                             direction=np.deg2rad(float(spec.get("direction_deg", 0.0))),
                             style=spec.get("style", mode))
    request = PlanRequest(context_keyframes=context, command=command)
    segment = plan(request, library, predictor, codec, rng, cfg.planner.max_iterations)
    out_clip = MotionClip.from_frames(skeleton, 50.0, segment.frames, name="plan")
    save_clip(out_clip, args.out)
    print(json.dumps({
        "duration_s": segment.duration,
        "frames": len(segment.frames),
        "tokens": int(segment.tokens.shape[0]),
        "spring_target": None if segment.spring_target is None else
        [segment.spring_target.x, segment.spring_target.y, segment.spring_target.heading],
        "out": str(args.out),
    }, indent=2))
    return 0


def cmd_train_token(args) -> int:
    from .clips import load_clip
    from .synth import sine_walk_clip
    from .tokens import make_token_params, reconstruction_mse, train_alignment

    cfg = _config(args)
    skeleton = cfg.skeleton()
    clip = load_clip(args.clip) if args.clip else sine_walk_clip(skeleton, duration=4.0, speed=0.4)
    params = make_token_params(skeleton, cfg.fsq, cfg.mlp, np.random.default_rng(cfg.seed))
    eval_times = np.linspace(0.0, clip.end_time, 16)
    before = reconstruction_mse(clip, params, eval_times)
    history = train_alignment(clip, params, iterations=args.iterations, lr=args.lr, seed=cfg.seed)
    after = reconstruction_mse(clip, params, eval_times)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=list(history[0].keys()))
        w.writeheader()
        w.writerows(history)
    if args.params:
        params.save(args.params)
    print(json.dumps({"mse_before": before, "mse_after": after, "loss_csv": args.out}, indent=2))
    return 0


def cmd_sample_dr(args) -> int:
    from .domain_rand import sample_dr

    cfg = _config(args)
    rng = np.random.default_rng(cfg.seed)
    skeleton = cfg.skeleton()
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = None
        for _ in range(args.n):
            row = sample_dr(cfg.dr, rng, skeleton.joint_count).as_dict()
            if w is None:
                w = csv.DictWriter(f, fieldnames=list(row.keys()))
                w.writeheader()
            w.writerow(row)
    print(json.dumps({"samples": args.n, "out": args.out}, indent=2))
    return 0


def cmd_serve(args) -> int:
    from dataclasses import replace

    from .config import verify_paper_profile
    from .server import serve

    cfg = _config(args)
    server_cfg = cfg.server
    if args.port is not None:
        server_cfg = replace(server_cfg, port=args.port)
    if args.ws_port is not None:
        server_cfg = replace(server_cfg, ws_port=args.ws_port)
    if args.clock:
        server_cfg = replace(server_cfg, clock=args.clock)
    if args.pace is not None:
        server_cfg = replace(server_cfg, pace=None if args.pace <= 0 else args.pace)
    cfg = replace(cfg, server=server_cfg)
    if cfg.profile == "paper":
        verify_paper_profile(cfg)
    server = serve(cfg, run_for_s=args.duration, block=False)
    print(json.dumps({"listening": server.bound_port, "ws": server.bound_ws_port}), flush=True)
    try:
        import time

        while not server._stop.is_set():
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def cmd_ingest(args) -> int:
    from .library import ingest_dataset

    cfg = _config(args)
    library, report = ingest_dataset(args.dir, cfg.skeleton(), allow_resample=args.resample)
    if not library.entries:
        print("warning: directory yielded an empty library", file=sys.stderr)
    print(json.dumps({
        "accepted": report.accepted,
        "rejected": report.rejected,
        "styles": sorted(library.styles()),
        "manifest": report.manifest_path,
    }, indent=2))
    return 0 if not report.rejected else 3


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MOTIONKIT_LOG", "WARNING").upper())
    parser = argparse.ArgumentParser(prog="motionkit", description="Humanoid motion tracking stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score (reference, actual) clip pairs from a CSV manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True, help="CSV with columns ref,actual[,name]")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--mode", choices=["strict", "relaxed"], default="strict")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("track", help="run the closed tracking loop over a clip")
    _add_common(p)
    p.add_argument("--clip", required=True)
    p.add_argument("--policy", choices=["follower", "token"], default="follower")
    p.add_argument("--params", default=None, help="token policy checkpoint")
    p.add_argument("--out", default=None, help="save the realized clip here")
    p.add_argument("--trace", default=None, help="export the event trace CSV")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--randomize", action="store_true", help="sample DR and a push schedule")
    p.add_argument("--early-stop", action="store_true")
    p.add_argument("--resample", action="store_true")
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("plan", help="generate one plan segment from a command")
    _add_common(p)
    p.add_argument("--command", required=True, help='JSON, e.g. {"mode":"walk","velocity":1.0}')
    p.add_argument("--library", default=None, help="clip library directory (default: built-in)")
    p.add_argument("--context", default=None, help="clip supplying the 4 context keyframes")
    p.add_argument("--out", required=True, help="output clip path")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("train-token", help="toy alignment training; emits a loss CSV")
    _add_common(p)
    p.add_argument("--clip", default=None, help="training clip (default: synthetic walk)")
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--out", required=True, help="loss curve CSV")
    p.add_argument("--params", default=None, help="save trained checkpoint here")
    p.set_defaults(fn=cmd_train_token)

    p = sub.add_parser("sample-dr", help="emit domain randomization samples as CSV")
    _add_common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample_dr)

    p = sub.add_parser("serve", help="run the interactive steering service")
    _add_common(p)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ws-port", type=int, default=None)
    p.add_argument("--clock", choices=["virtual", "wall"], default=None)
    p.add_argument("--pace", type=float, default=None, help="virtual s per wall s; <=0 unthrottled")
    p.add_argument("--duration", type=float, default=3600.0, help="virtual-clock run length")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("ingest", help="validate a clip directory and write its manifest")
    _add_common(p)
    p.add_argument("--dir", required=True)
    p.add_argument("--resample", action="store_true")
    p.set_defaults(fn=cmd_ingest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
