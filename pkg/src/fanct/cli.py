"""Command-line interface: ``fanct <command> ...``.

Exit codes: 0 success, 1 validation error, 2 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .baselines import BaselineError, com_offset, xcorr_offset
from .config import ConfigError, RunConfig, format_geometry, load_config, parse_config, parse_geometry
from .diagnostics import chain_stats
from .geometry import GeometryError, check, check_offset
from .plots import acf_plot, histogram_plot, trace_plot
from .projector import FanBeamProjector
from .sampler import run_gibbs, tune_step_size, with_start
from .simulate import NoiseSpec, make_phantom, simulate_sinogram
from .solver import SolverError, map_reconstruct

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class ValidationError(ValueError):
    pass


def _stem(path):
    root, _ = os.path.splitext(path)
    return root


def _geometry_for(rc: RunConfig, sinogram_path: str, sino: np.ndarray):
    sidecar = sinogram_path + ".geom"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            geom = parse_geometry(fh.read())
    else:
        geom = rc.geometry()
    check(geom)
    if sino.shape != geom.sinogram_shape:
        raise ValidationError(f"sinogram shape {sino.shape} does not match geometry {geom.sinogram_shape}")
    return geom


def _write_recon(path, img):
    io.write_image(path, img)
    io.write_pgm(_stem(path) + ".pgm", img)


# -- commands -------------------------------------------------------------


def cmd_phantom(args, rc: RunConfig):
    if args.size is not None:
        if args.size < 1:
            raise ValidationError("--size must be >= 1")
        rc.override("geometry.image_size", args.size)
    img = make_phantom(rc.phantom_spec())
    io.write_image(args.output, img)
    io.write_pgm(_stem(args.output) + ".pgm", img)
    print(f"wrote {args.output} ({img.shape[0]}x{img.shape[1]})")


def cmd_simulate(args, rc: RunConfig):
    if args.angular_range is not None:
        if not 0 < args.angular_range <= 360:
            raise ValidationError("--angular-range must be in (0, 360]")
        rc.override("geometry.angular_range", args.angular_range)
    if args.c_true is not None:
        rc.override("simulate.c_true", args.c_true)
    if args.noiseless:
        rc.override("noise.enabled", False)
    rc.validate()
    geom = rc.geometry()
    if args.phantom is None:
        # rasterize the configured disks directly on the refined grid
        x = rc.phantom_spec()
    else:
        x = io.read_image(args.phantom)
        if x.shape != geom.image_shape:
            raise ValidationError(f"phantom shape {x.shape} does not match geometry {geom.image_shape}")
    c_true = rc["simulate.c_true"]
    ss = rc["simulate.supersample"]
    clean = simulate_sinogram(x, geom, c_true, NoiseSpec(enabled=False), ss)
    noise = rc.noise_spec(clean)
    sino = clean if not noise.enabled else simulate_sinogram(x, geom, c_true, noise, ss)
    io.write_sinogram(args.output, sino)
    with open(args.output + ".geom", "w") as fh:
        fh.write(format_geometry(geom))
    lam = "inf" if not noise.enabled else f"{noise.lambda_true:.17g}"
    print(f"wrote {args.output} ({geom.n_angles} angles x {geom.n_detector} detectors) c_true={c_true} lambda_true={lam}")


def _alpha_from_chain(path, burn_in):
    recs = io.read_chain(path)
    if burn_in is None:
        meta = os.path.join(os.path.dirname(path), "meta.txt")
        burn_in = _read_meta(meta)["sampler.burn_in"] if os.path.exists(meta) else len(recs) // 2
    if not 0 <= burn_in < len(recs):
        raise ValidationError(f"burn-in {burn_in} outside chain of length {len(recs)}")
    return float(np.mean(recs.delta[burn_in:]) / np.mean(recs.lam[burn_in:]))


def cmd_reconstruct(args, rc: RunConfig):
    sino = io.read_sinogram(args.sinogram)
    geom = _geometry_for(rc, args.sinogram, sino)
    if args.c_list is not None:
        cs = [float(v) for v in args.c_list.split(",") if v.strip()]
    else:
        cs = [args.c if args.c is not None else 0.0]
    for c in cs:
        check_offset(geom, c)
    if args.from_chain is not None:
        alpha = _alpha_from_chain(args.from_chain, args.burn_in)
    else:
        alpha = args.alpha if args.alpha is not None else rc["solver.alpha"]
    if alpha < 0:
        raise ValidationError("--alpha must be >= 0")
    nonneg = rc["solver.nonneg"] if args.nonneg is None else args.nonneg
    k_fista = args.k_fista or rc["solver.k_fista"]
    proj = FanBeamProjector(geom)
    norm_sq = proj.norm_squared(cs[0])[0]
    for c in cs:
        img = map_reconstruct(sino, geom, c, alpha, nonneg, k_fista, projector=proj, norm_sq_a=norm_sq)
        out = args.output if len(cs) == 1 else f"{_stem(args.output)}_c{c:g}.ctim"
        _write_recon(out, img)
        print(f"wrote {out} c={c:g} alpha={alpha:.6g}")


def _summary_text(summary, chain, cfg, step_size):
    lines = [f"samples_after_burn_in = {summary.n_samples}", f"burn_in = {summary.burn_in}",
             f"{'param':<8}{'mean':>16}{'sd':>16}{'q2.5':>16}{'q97.5':>16}{'ess':>10}"]
    for name in ("lambda", "delta", "c"):
        p = summary[name]
        lines.append(f"{name:<8}{p.mean:>16.8g}{p.sd:>16.8g}{p.q025:>16.8g}{p.q975:>16.8g}{p.ess:>10.1f}")
    expected = cfg.k_gibbs * (2 * cfg.k_fista + cfg.k_metro)
    lines += [
        f"mh_acceptance_rate = {summary.acceptance_rate:.6f}",
        f"mh_step_size = {step_size:.8g}",
        f"forward_projection_cost = {chain.cost}",
        f"cost_model k_gibbs*(2*k_fista+k_metro) = {expected}",
        f"out_of_grid_proposals = {chain.n_out_of_grid}",
        f"setup_projections = {chain.setup_cost}",
    ]
    return "\n".join(lines) + "\n"


def _write_meta(path, cfg, step_size):
    with open(path, "w") as fh:
        fh.write(f"sampler.k_gibbs = {cfg.k_gibbs}\nsampler.k_metro = {cfg.k_metro}\n"
                 f"sampler.k_fista = {cfg.k_fista}\nsampler.burn_in = {cfg.burn_in}\n"
                 f"sampler.mh_step_size = {step_size!r}\nseed = {cfg.seed}\n")


def _read_meta(path):
    with open(path) as fh:
        return parse_config(fh.read(), path)


def cmd_sample(args, rc: RunConfig):
    if args.seed is not None:
        rc.override("seed", args.seed)
    if args.k_gibbs is not None:
        rc.override("sampler.k_gibbs", args.k_gibbs)
    if args.burn_in is not None:
        rc.override("sampler.burn_in", args.burn_in)
    if args.step_size is not None:
        rc.override("sampler.mh_step_size", args.step_size)
    rc.validate()
    sino = io.read_sinogram(args.sinogram)
    geom = _geometry_for(rc, args.sinogram, sino)
    cfg = rc.sampler_config()
    check_offset(geom, cfg.c0)
    proj = FanBeamProjector(geom, parallel=rc["sampler.parallel"])
    norm_sq = proj.norm_squared(cfg.c0, seed=cfg.seed)[0]
    tune = not args.no_tune and rc["sampler.tune"]
    if tune:
        tr = tune_step_size(sino, geom, cfg, n_pilot=rc["sampler.n_pilot"], projector=proj, norm_sq_a=norm_sq)
        cfg = with_start(cfg, tr)
        print("pilot step sizes/acceptance: " + ", ".join(f"{s:.4g}:{r:.2f}" for s, r in tr.history))
    os.makedirs(args.output, exist_ok=True)
    _write_meta(os.path.join(args.output, "meta.txt"), cfg, cfg.mh_step_size)
    chain = run_gibbs(sino, geom, cfg, projector=proj, out_dir=args.output)
    io.write_image(os.path.join(args.output, "final.ctim"), chain.final_image)
    io.write_pgm(os.path.join(args.output, "mean.pgm"), chain.mean_image)
    io.write_pgm(os.path.join(args.output, "std.pgm"), chain.std_image)
    summary = chain_stats(chain, cfg.burn_in)
    text = _summary_text(summary, chain, cfg, cfg.mh_step_size)
    with open(os.path.join(args.output, "summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


def cmd_correct(args, rc: RunConfig):
    sino = io.read_sinogram(args.sinogram)
    geom = _geometry_for(rc, args.sinogram, sino)
    est = (com_offset if args.method == "com" else xcorr_offset)(sino, geom)
    note = " (partial rotation: estimate unreliable)" if est.warning else ""
    print(f"{args.method.upper()} center-of-rotation offset: {est.c_hat:.4f} px{note}")
    print(est.line())


def cmd_report(args, rc: RunConfig):
    chain_path = os.path.join(args.directory, "chain.csv")
    recs = io.read_chain(chain_path)
    if len(recs) == 0:
        raise io.FormatError(f"{chain_path}: chain has no rows")
    meta_path = os.path.join(args.directory, "meta.txt")
    meta = _read_meta(meta_path) if os.path.exists(meta_path) else parse_config("")
    k_metro = meta["sampler.k_metro"]
    burn_in = args.burn_in if args.burn_in is not None else min(meta["sampler.burn_in"], len(recs) - 1)
    summary = chain_stats(recs, burn_in, k_metro=k_metro, max_lag=args.max_lag)
    lines = [f"chain = {chain_path}", f"records = {len(recs)}", f"burn_in = {burn_in}",
             f"{'param':<8}{'mean':>16}{'sd':>16}{'q2.5':>16}{'q97.5':>16}{'ess':>10}"]
    series = {"lambda": recs.lam, "delta": recs.delta, "c": recs.c}
    for name, values in series.items():
        p = summary[name]
        lines.append(f"{name:<8}{p.mean:>16.8g}{p.sd:>16.8g}{p.q025:>16.8g}{p.q975:>16.8g}{p.ess:>10.1f}")
        io.write_pgm(os.path.join(args.directory, f"trace_{name}.pgm"), trace_plot(values), scale=False)
        io.write_pgm(os.path.join(args.directory, f"trace_post_{name}.pgm"), trace_plot(values[burn_in:]),
                     scale=False)
        io.write_pgm(os.path.join(args.directory, f"hist_{name}.pgm"), histogram_plot(values[burn_in:]),
                     scale=False)
        io.write_pgm(os.path.join(args.directory, f"acf_{name}.pgm"), acf_plot(p.acf), scale=False)
    lines.append(f"mh_acceptance_rate = {summary.acceptance_rate:.6f}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.directory, "report.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fanct", description="Fan-beam CT with uncertain center of rotation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", help="config file (section.key = value)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.set_defaults(func=func)
        return p

    p = add("phantom", cmd_phantom, "write the configured phantom")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--size", type=int)

    p = add("simulate", cmd_simulate, "simulate a noisy sinogram from a phantom")
    p.add_argument("phantom", nargs="?",
                   help="phantom image (CTIM); if omitted the configured phantom is rasterized "
                        "on the supersampled grid")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--angular-range", type=float, help="keep angles in [0, DEG] degrees")
    p.add_argument("--c-true", type=float)

    p = add("reconstruct", cmd_reconstruct, "Tikhonov (MAP) reconstruction at fixed offset(s)")
    p.add_argument("sinogram")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--c", type=float)
    p.add_argument("--c-list", help="comma-separated offsets, one reconstruction each")
    p.add_argument("--alpha", type=float)
    p.add_argument("--from-chain", help="chain CSV; alpha = mean(delta)/mean(lambda) after burn-in")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--nonneg", dest="nonneg", action="store_true", default=None)
    p.add_argument("--no-nonneg", dest="nonneg", action="store_false")
    p.add_argument("--k-fista", type=int)

    p = add("sample", cmd_sample, "run the Metropolis-within-Gibbs sampler")
    p.add_argument("sinogram")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--k-gibbs", type=int)
    p.add_argument("--step-size", type=float)
    p.add_argument("--no-tune", action="store_true")

    p = add("correct", cmd_correct, "sinogram-only offset estimate (COM or XCORR)")
    p.add_argument("method", choices=["com", "xcorr"])
    p.add_argument("sinogram")

    p = add("report", cmd_report, "text report and PGM plots from a sample directory")
    p.add_argument("directory")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--max-lag", type=int, default=50)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = load_config(args.config)
        if args.seed is not None:
            rc.override("seed", args.seed)
        args.func(args, rc)
    except (io.FormatError, OSError, SolverError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, GeometryError, ValidationError, BaselineError, ValueError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
