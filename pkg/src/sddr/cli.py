"""Command-line entry point: ``sddr <command> ...``.

Every command reads its inputs from files and writes results to files; only
diagnostics go to stderr. Reruns with identical arguments are byte-identical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as sio
from .cube import DEFAULT_SIGMAS, DEFAULT_VALIDITY_FLOOR, WINDOWS, adc_to_cube, cube_to_sddr, soften
from .eve import (DEFAULT_ITERATIONS, DEFAULT_THRESHOLD, DopplerObservations, doppler_surface,
                  eve_ransac, eve_wls, observations_from_sddr)
from .metrics import DEFAULT_TAU, MetricParams, evaluate
from .pipeline import mask_eve, refine
from .radar import RadarConfig
from .render import bev, ppm_bytes
from .schedule import Schedule, build_schedule
from .simulate import DEFAULT_NOISE_FLOOR, Scene, ghost_count, ground_truth, inject_ghosts, synthesize_adc



class CliError(Exception):
    pass


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_config(path) -> RadarConfig:
    try:
        return RadarConfig.from_dict(_read_json(path))
    except TypeError as exc:
        raise CliError(f"{path}: {exc}") from None


def _write_json(path, doc):
    Path(path).write_text(sio.dumps_json(doc))


# -- commands -------------------------------------------------------------------------

def cmd_simulate(args):
    cfg = _load_config(args.config)
    try:
        scene = Scene.from_dict(_read_json(args.scene))
    except ValueError as exc:
        raise CliError(f"{args.scene}: {exc}") from None
    n_real = len(scene.real)
    if args.ghost_fraction > 0 and n_real:
        scene = inject_ghosts(scene, args.ghost_fraction, args.seed, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    adc = synthesize_adc(scene, cfg, args.seed, args.noise_floor)
    truth_cloud, truth_sddr = ground_truth(scene, cfg)
    sio.save_adc(out / "adc.tensor", adc, cfg)
    sio.write_cloud(out / "truth.csv", truth_cloud)
    sio.save_sddr(out / "truth_sddr.tensor", truth_sddr)
    manifest = {
        "command": "simulate",
        "seed": args.seed,
        "noise_floor": args.noise_floor,
        "ghost_fraction": args.ghost_fraction,
        "n_real": n_real,
        "n_ghosts": len(scene.ghosts),
        "scene": scene.to_dict(),
        "truth_cells": [list(cfg.cell_of(s.position)) for s in scene.real],
        "files": {name: _sha256(out / name) for name in ("adc.tensor", "truth.csv", "truth_sddr.tensor")},
    }
    _write_json(out / "manifest.json", manifest)


def cmd_encode(args):
    adc, cfg = sio.load_adc(args.adc)
    cube = adc_to_cube(adc, cfg, args.window)
    sddr = cube_to_sddr(cube, args.validity_floor)
    if args.cube:
        sio.save_cube(args.cube, cube)
    sio.save_sddr(args.out, sddr, {"window": args.window, "validity_floor": args.validity_floor})


def _schedule_from_args(args) -> Schedule:
    if args.schedule:
        try:
            return Schedule.from_json(Path(args.schedule).read_text())
        except (KeyError, json.JSONDecodeError) as exc:
            raise CliError(f"{args.schedule}: malformed schedule ({exc})") from None
    if args.lam == 0:
        from .schedule import from_arrays
        ab = np.linspace(args.alpha_bar_data, args.alpha_bar_prior, args.T) if args.T > 1 else [args.alpha_bar_data]
        return from_arrays(ab, 0.0)
    return build_schedule(args.T, args.alpha_bar_data, args.alpha_bar_prior, args.lam)


def cmd_diffuse(args):
    sddr = sio.load_sddr(args.sddr)
    s = _schedule_from_args(args)
    truth = None
    if args.denoiser == "oracle":
        if not args.truth:
            raise CliError("--denoiser oracle requires --truth")
        truth = sio.load_sddr(args.truth).u
        if truth.shape != sddr.u.shape:
            raise CliError("truth and input SDDR dimensions differ")
        if args.soften:
            truth = soften(truth, DEFAULT_SIGMAS)
    res = refine(sddr, s, args.seed, args.denoiser, truth)
    extra = {"denoiser": args.denoiser, "seed": args.seed, "schedule": json.loads(s.to_json())}
    if res.ego_history:
        extra["ego_velocity"] = [float(x) for x in res.ego_history[-1]]
    sio.save_volume(args.out, res.occupancy, sddr.cfg, "occupancy", extra)


def cmd_eve(args):
    src = Path(args.input)
    if src.suffix.lower() == ".csv":
        obs = DopplerObservations.from_csv(src.read_text())
        sddr = None
    else:
        sddr = sio.load_sddr(src)
        obs = observations_from_sddr(sddr)
    report = {"method": args.method, "n_observations": len(obs)}
    if args.occupancy:
        if sddr is None:
            raise CliError("--occupancy needs an SDDR input")
        occ, _ = sio.load_volume(args.occupancy, "occupancy")
        v = mask_eve(sddr, occ)
        report.update(method="mask-wls", velocity=[float(x) for x in v])
    elif args.method == "wls":
        report["velocity"] = [float(x) for x in eve_wls(obs)]
    else:
        res = eve_ransac(obs, args.threshold, args.iterations, args.seed)
        report.update(res.to_dict(), threshold=args.threshold, iterations=args.iterations, seed=args.seed)
    _write_json(args.out, report)


def cmd_eval(args):
    pred = sio.read_cloud(args.pred)
    truth = sio.read_cloud(args.truth)
    if len(pred) == 0 or len(truth) == 0:
        raise CliError("metrics are undefined for an empty point cloud")
    doc = evaluate(pred, truth, MetricParams(args.tau1, args.tau2), args.emd_mode, args.seed)
    _write_json(args.out, doc)


def cmd_surface(args):
    cfg = _load_config(args.config)
    az = np.arcsin(np.clip(cfg.wy_centers(), -1, 1))
    el = np.arcsin(np.clip(cfg.wz_centers(), -1, 1))
    surf = doppler_surface(args.velocity, az, el)
    sio.save_volume(args.out, surf, cfg, "surface",
                    {"velocity": [float(x) for x in args.velocity],
                     "azimuth": [float(x) for x in az], "elevation": [float(x) for x in el]})


def cmd_render(args):
    arr, calib = sio.read_tensor(args.input)
    kind = calib.get("kind")
    if args.view == "bev":
        if kind == "sddr":
            vol = arr[..., 0]
        elif kind == "occupancy":
            vol = arr
        else:
            raise CliError(f"bev view needs an SDDR or occupancy tensor, got {kind!r}")
        img = bev(vol)
    else:
        if kind != "surface":
            raise CliError(f"doppler-surface view needs a surface tensor, got {kind!r}")
        img = np.asarray(arr, dtype=float).T[::-1]  # rows: elevation (top = highest), cols: azimuth
    Path(args.out).write_bytes(ppm_bytes(img, args.scale))


def cmd_schedule(args):
    Path(args.out).write_text(_schedule_from_args(args).to_json() + "\n")


def cmd_demo(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("demo_scene.json", "demo_config.json"):
        (out / name).write_text(resources.files("sddr").joinpath("data", name).read_text())


# -- parser ---------------------------------------------------------------------------

def _add_schedule_args(p):
    p.add_argument("--schedule", help="schedule JSON (overrides the flags below)")
    p.add_argument("--T", type=int, default=20, help="number of diffusion steps")
    p.add_argument("--alpha-bar-data", type=float, default=0.99, help="alpha_bar at t=1")
    p.add_argument("--alpha-bar-prior", type=float, default=0.01, help="alpha_bar at t=T")
    p.add_argument("--lam", type=float, default=0.1, help="per-step noise scale (0 = noiseless chain)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sddr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize an ADC frame plus ground truth")
    p.add_argument("scene", help="scene JSON")
    p.add_argument("config", help="radar config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ghost-fraction", type=float, default=0.0)
    p.add_argument("--noise-floor", type=float, default=DEFAULT_NOISE_FLOOR)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("encode", help="ADC tensor -> radar cube -> SDDR")
    p.add_argument("adc")
    p.add_argument("--window", choices=WINDOWS, default="none")
    p.add_argument("--validity-floor", type=float, default=DEFAULT_VALIDITY_FLOOR)
    p.add_argument("--cube", help="also write the 4-D cube here")
    p.add_argument("--out", required=True, help="SDDR tensor path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("diffuse", help="refine SDDR occupancy with the reverse chain")
    p.add_argument("sddr")
    _add_schedule_args(p)
    p.add_argument("--denoiser", choices=("oracle", "shrinkage"), default="shrinkage")
    p.add_argument("--truth", help="truth SDDR tensor (oracle denoiser)")
    p.add_argument("--soften", action="store_true", help="Gaussian-soften the truth occupancy first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("eve", help="estimate ego velocity")
    p.add_argument("input", help="SDDR tensor or observations CSV (a,e,v_r[,w])")
    p.add_argument("--method", choices=("wls", "ransac"), default="ransac")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="inlier residual, m/s")
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    p.add_argument("--occupancy", help="refined occupancy tensor; use soft-mask weighted WLS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eve)

    p = sub.add_parser("eval", help="point-cloud metrics (CD, EMD, VPR, SRL, EGD)")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--tau1", type=float, default=DEFAULT_TAU, help="clutter distance, m")
    p.add_argument("--tau2", type=float, default=DEFAULT_TAU, help="shot distance, m")
    p.add_argument("--emd-mode", choices=("exact", "approximate"), default="exact")
    p.add_argument("--seed", type=int, default=0, help="resampling seed for unequal sizes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("surface", help="Doppler surface of an ego velocity over the bearing grid")
    p.add_argument("--velocity", type=float, nargs=3, required=True, metavar=("VX", "VY", "VZ"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("render", help="render a tensor to a PPM image")
    p.add_argument("input")
    p.add_argument("--view", choices=("bev", "doppler-surface"), default="bev")
    p.add_argument("--scale", type=int, default=8, help="pixels per cell")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("schedule", help="write a schedule JSON")
    _add_schedule_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("demo", help="write the shipped demo scene and config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sddr {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
