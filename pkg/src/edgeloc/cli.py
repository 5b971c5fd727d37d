"""
Command-line interface.

    edgeloc synth --scene scene.ini --out run/
    edgeloc localize-doorway --input run/synth.wav --out run/
    edgeloc localize-edge --input clap1.wav clap2.wav --scene edge.ini
    edgeloc curves --theta 5,10,15,20,25,30,35 --delta-theta 25

``--scene`` also accepts ``preset:doorway`` and ``preset:edge``. The output
directory defaults to ``$EDGELOC_OUT`` or the current directory.

Exit codes: 0 success, 1 configuration or validation error, 2 measurement
rejected by the pipeline.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import forward, kedge
from .config import SceneConfig, load_scene_config, read_recording, write_recording
from .errors import LocalizationError, SceneError
from .localize import (DoorwayConfig, EdgeConfig, localize_doorway, localize_edge,
                       localize_edge_position)
from .scene import DoorwayScene, EdgeScene, SourceGroundTruth, doorway_preset, edge_preset

OUT_ENV = "EDGELOC_OUT"


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (1), not pipeline rejections (2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi in hertz") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("band needs 0 < lo < hi")
    return lo, hi


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _source(text: str) -> SourceGroundTruth:
    vals = _floats(text)
    if len(vals) not in (3, 4):
        raise argparse.ArgumentTypeError("expected r1,theta,z0[,t0]")
    return SourceGroundTruth(*vals)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgeloc", description="Acoustic localization of a hidden source "
                "around a doorway or a single edge.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scene_required=False):
        sp.add_argument("--scene", required=scene_required,
                        help="scene INI file, or preset:doorway / preset:edge")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")

    s = sub.add_parser("synth", help="synthesize a recording from a scene and source")
    common(s, scene_required=True)
    s.add_argument("--source", type=_source, help="ground truth r1,theta,z0[,t0]")
    s.add_argument("--seed", type=int)
    s.add_argument("--snr-db", type=float)
    s.add_argument("--reverb-density", type=float)
    s.add_argument("--duration-ms", type=_positive)
    s.add_argument("--name", default="synth", help="output file stem")

    def pipeline(sp):
        common(sp)
        sp.add_argument("--band", type=_band, help="analysis band lo:hi in Hz")
        sp.add_argument("--k", type=_positive, help="detection threshold factor")
        sp.add_argument("--noise-window-ms", type=_positive)
        sp.add_argument("--max-rmse-ms", type=_positive, help="fit rejection threshold")
        sp.add_argument("--min-peak-snr", type=_positive)

    d = sub.add_parser("localize-doorway", help="doorway pipeline (heatmap)")
    d.add_argument("--input", required=True)
    pipeline(d)
    d.add_argument("--gate-ms", type=_positive)
    d.add_argument("--grid-step-m", type=_positive)
    d.add_argument("--max-range-m", type=_positive)
    d.add_argument("--method", choices=("envelope", "das"))
    d.add_argument("--full-3d", action="store_true", help="search heights on a grid too")

    e = sub.add_parser("localize-edge", help="single-edge pipeline (spectral ratio)")
    e.add_argument("--input", required=True, nargs="+",
                   help="one recording, or several of the same position to pool")
    pipeline(e)
    e.add_argument("--window-ms", type=_positive)
    e.add_argument("--fit-band", type=_band)

    c = sub.add_parser("curves", help="theoretical loss and ratio curves")
    c.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    c.add_argument("--theta", type=_floats, default=[5, 10, 15, 20, 25, 30, 35],
                   help="comma-separated azimuths in degrees")
    c.add_argument("--delta-theta", type=float, default=25.0)
    c.add_argument("--d1", type=_positive, default=3.2)
    c.add_argument("--d2", type=_positive, default=0.8)
    c.add_argument("--c", type=_positive, default=343.0)
    c.add_argument("--fmin", type=float, default=100.0)
    c.add_argument("--fmax", type=float, default=10000.0)
    c.add_argument("--fstep", type=_positive, default=100.0)
    return p


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scene_config(spec: str | None) -> SceneConfig | None:
    if spec is None:
        return None
    if spec == "preset:doorway":
        return SceneConfig(doorway_preset())
    if spec == "preset:edge":
        return SceneConfig(edge_preset())
    if spec.startswith("preset:"):
        raise SceneError(f"unknown preset {spec!r} (use preset:doorway or preset:edge)")
    return load_scene_config(spec)


def cmd_synth(args) -> int:
    cfg = _scene_config(args.scene)
    if args.source is not None:
        cfg = replace(cfg, source=args.source)
    if cfg.source is None:
        raise SceneError("synth needs a source: add a [source] section or --source")
    noise = cfg.noise
    if args.seed is not None:
        noise = replace(noise, seed=args.seed)
    if args.snr_db is not None:
        noise = replace(noise, snr_db=args.snr_db)
    if args.reverb_density is not None:
        noise = replace(noise, reverb_density=args.reverb_density)
    synth = cfg.synth
    if args.duration_ms is not None:
        synth = replace(synth, duration=args.duration_ms * 1e-3)
    cfg = replace(cfg, noise=noise, synth=synth)
    cfg.validate()

    if isinstance(cfg.scene, DoorwayScene):
        traces = forward.synthesize_doorway(cfg.scene, cfg.source, cfg.emission, cfg.noise,
                                            cfg.physics, synth.duration, synth.t_start,
                                            synth.reflection)
    else:
        traces = forward.synthesize_edge(cfg.scene, cfg.source, cfg.emission, cfg.noise,
                                         cfg.physics, synth.duration, synth.t_start)
    wav = _out_dir(args) / f"{args.name}.wav"
    side = write_recording(wav, traces, cfg)
    print(f"wrote {wav} ({traces.n_channels} channels, {traces.fs:g} Hz) and {side}")
    return 0


def _pipeline_overrides(args, base):
    kw = {}
    if args.band is not None:
        kw["band"] = args.band
    if args.k is not None:
        kw["k"] = args.k
    if args.noise_window_ms is not None:
        kw["noise_window"] = args.noise_window_ms * 1e-3
    if args.max_rmse_ms is not None:
        kw["max_rmse"] = args.max_rmse_ms * 1e-3
    if args.min_peak_snr is not None:
        kw["min_peak_snr"] = args.min_peak_snr
    return replace(base, **kw)


def _summary(res, truth: SourceGroundTruth | None) -> None:
    print(f"r1 = {res.r1:.3f} m, theta = {res.theta:.2f} deg, z0 = {res.z0:.3f} m")
    if truth is not None:
        print(f"errors: r1 {100 * (res.r1 - truth.r1) / truth.r1:+.2f} %, "
              f"theta {res.theta - truth.theta:+.2f} deg, "
              f"z0 {100 * (res.z0 - truth.z0):+.1f} cm")


def cmd_localize_doorway(args) -> int:
    traces, cfg, truth = read_recording(args.input, _scene_config(args.scene))
    if not isinstance(cfg.scene, DoorwayScene):
        raise SceneError("localize-doorway needs a doorway scene")
    conf = _pipeline_overrides(args, DoorwayConfig())
    kw = {}
    if args.gate_ms is not None:
        kw["gate"] = args.gate_ms * 1e-3
    if args.grid_step_m is not None:
        kw["grid_step"] = args.grid_step_m
    if args.max_range_m is not None:
        kw["max_range"] = args.max_range_m
    if args.method is not None:
        kw["method"] = args.method
    if args.full_3d:
        kw["full_3d"] = True
    conf = replace(conf, **kw)
    out = _out_dir(args)
    res = localize_doorway(traces, cfg.scene, cfg.physics, conf)
    res.heatmap.to_csv(out / "heatmap.csv")
    res.heatmap.to_pgm(out / "heatmap.pgm")
    res.to_csv(out / "result.csv")
    res.envelopes[0].to_csv(out / "envelope.csv")
    _summary(res, truth)
    return 0


def _write_objective(path, thetas, obj) -> None:
    with open(path, "w") as fh:
        fh.write("theta_deg,objective_db2\n")
        for t, v in zip(thetas, obj):
            fh.write(f"{t:.6g},{v:.9g}\n")


def _write_ratio(path, curve) -> None:
    with open(path, "w") as fh:
        fh.write("freq_hz,ratio_db\n")
        for f, v in zip(curve.freqs, curve.ratio_db):
            fh.write(f"{f:.6g},{v:.9g}\n")


def cmd_localize_edge(args) -> int:
    scene_cfg = _scene_config(args.scene)
    loaded = [read_recording(p, scene_cfg) for p in args.input]
    cfg = loaded[0][1]
    traces = [t for t, _, _ in loaded]
    truth = loaded[0][2]
    if not isinstance(cfg.scene, EdgeScene):
        raise SceneError("edge localization requires two arrays; the scene is a "
                         "single-array doorway")
    conf = _pipeline_overrides(args, EdgeConfig())
    kw = {}
    if args.window_ms is not None:
        kw["window"] = args.window_ms * 1e-3
    if args.fit_band is not None:
        kw["fit_band"] = args.fit_band
    conf = replace(conf, **kw)
    out = _out_dir(args)

    if len(traces) == 1:
        res = localize_edge(traces[0], cfg.scene, cfg.physics, conf)
        ratio, objective = res.ratio, res.objective
        envs = res.envelopes
    else:
        pos = localize_edge_position(traces, cfg.scene, cfg.physics, conf)
        for reason in pos.rejected:
            print(f"rejected: {reason}", file=sys.stderr)
        ratio, objective = pos.ratio, pos.objective
        res = replace(pos.accepted[0], r1=pos.r1, z0=pos.z0, theta=pos.theta,
                      rmse=max(r.rmse for r in pos.accepted),
                      peak_metric=float(np.min(pos.objective[1])))
        envs = pos.accepted[0].envelopes
        print(f"accepted {len(pos.accepted)} of {len(traces)} measurements")
    _write_objective(out / "objective.csv", *objective)
    _write_ratio(out / "ratio.csv", ratio)
    res.to_csv(out / "result.csv")
    for array, env in zip(cfg.scene.arrays, envs):
        env.to_csv(out / f"envelope_{array.id}.csv")
    _summary(res, truth)
    return 0


def cmd_curves(args) -> int:
    if not args.theta:
        print("warning: empty azimuth list; no curves written", file=sys.stderr)
        return 0
    if not 0 <= args.fmin <= args.fmax:
        raise SceneError("frequency range needs 0 <= fmin <= fmax")
    freqs = np.arange(args.fmin, args.fmax + 0.5 * args.fstep, args.fstep)
    out = _out_dir(args)
    header = (f"# d1_m={args.d1:g} d2_m={args.d2:g} c_mps={args.c:g} "
              f"delta_theta_deg={args.delta_theta:g}\n")
    loss = [kedge.loss_curve(t, args.d1, args.d2, freqs, args.c) for t in args.theta]
    ratio = [kedge.ratio_curve(t, args.delta_theta, args.d1, args.d2, freqs, args.c)
             for t in args.theta]
    for name, curves, values in (("loss.csv", loss, lambda cv: cv.loss),
                                 ("loss_db.csv", loss, lambda cv: cv.loss_db),
                                 ("ratio.csv", ratio, lambda cv: cv.ratio_db)):
        with open(out / name, "w") as fh:
            fh.write(header)
            fh.write("freq_hz," + ",".join(f"theta_{t:g}" for t in args.theta) + "\n")
            cols = np.column_stack([values(cv) for cv in curves])
            for f, row in zip(freqs, cols):
                fh.write(f"{f:.6g}," + ",".join(f"{v:.9g}" for v in row) + "\n")
    print(f"wrote loss.csv, loss_db.csv, ratio.csv for {len(args.theta)} azimuths to {out}")
    return 0


COMMANDS = {"synth": cmd_synth, "localize-doorway": cmd_localize_doorway,
            "localize-edge": cmd_localize_edge, "curves": cmd_curves}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except LocalizationError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return exc.exit_code
    except (SceneError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
