"""Command-line front end.

Subcommands: generate, sample, fit-gm, reconstruct, evaluate, repro.
Every run writes a manifest JSON with the fully resolved configuration next
to its outputs.  Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys
import time

import numpy as np

from . import __version__
from .bspline import BSplineKernel
from .gmfit import GMCoefficients, build_gm_objective, load_asset, solve_gm
from .metrics import evaluate_reconstruction, psnr_binary
from .poly2d import (
    BivariatePolynomial,
    ImagePlane,
    read_pgm,
    render_shape,
    write_pgm,
    zero_set_distance,
)
from .recover import PipelineOptions, run_pipeline
from .sampler import SampleGrid, add_noise, sample_raster, sample_shape, sample_snr
from .shapegen import (
    gen_bezier_shape,
    gen_bounded_quartic,
    gen_conic,
    gen_unbounded_quartic,
)

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def _write_manifest(out_stem: pathlib.Path, command: str, config: dict, outputs: list[str]):
    manifest = {
        "tool": "algshape",
        "version": __version__,
        "command": command,
        "config": config,
        "outputs": outputs,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path = out_stem.with_suffix(".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return path


def _parse_points(text: str) -> list[tuple[float, float]]:
    pts = []
    for chunk in text.split(";"):
        x, y = chunk.split(",")
        pts.append((float(x), float(y)))
    return pts


def cmd_generate(args) -> int:
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    outputs = []
    if args.kind == "conic":
        if args.circle is not None:
            p = gen_conic(axes=(args.circle, args.circle))
        else:
            p = gen_conic(tuple(args.center), tuple(args.axes), args.angle)
        p.save(out)
        outputs.append(str(out))
    elif args.kind == "bounded-quartic":
        p = gen_bounded_quartic(args.seed, args.half_width)
        p.save(out)
        outputs.append(str(out))
    elif args.kind == "unbounded-quartic":
        p = gen_unbounded_quartic(args.seed, args.half_width)
        p.save(out)
        outputs.append(str(out))
    elif args.kind == "bezier":
        if args.points is None:
            raise ValueError("--points is required for kind bezier")
        plane = ImagePlane(args.half_width, 1.0)
        raster, poly = gen_bezier_shape(
            _parse_points(args.points), plane, args.resolution
        )
        write_pgm(raster, out)
        poly_path = out.with_suffix(".boundary.csv")
        np.savetxt(poly_path, poly, delimiter=",")
        outputs += [str(out), str(poly_path)]
    else:
        raise ValueError(f"unknown kind {args.kind!r}")
    _write_manifest(out, "generate", config, outputs)
    return 0


def _load_shape(path: str):
    p = pathlib.Path(path)
    if p.suffix == ".pgm":
        return read_pgm(p)
    return BivariatePolynomial.load(p)


def cmd_sample(args) -> int:
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    shape = _load_shape(args.shape)
    plane = ImagePlane(args.half_width, args.period)
    kernel = BSplineKernel(args.m)
    if isinstance(shape, BivariatePolynomial):
        grid = sample_shape(shape, plane, kernel, subcells_per_unit=args.subcells)
    else:
        grid = sample_raster(shape, plane, kernel)
    if args.snr is not None:
        grid = add_noise(grid, args.snr, args.seed)
    csv_path = out.with_suffix(".csv")
    sidecar = out.with_suffix(".json")
    grid.save(csv_path, sidecar)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    _write_manifest(out, "sample", config, [str(csv_path), str(sidecar)])
    return 0


def cmd_fit_gm(args) -> int:
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    problem = build_gm_objective(BSplineKernel(args.m), args.max_order, args.radius)
    coefs = solve_gm(problem)
    coefs.save(out)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    config["objective"] = coefs.objective
    _write_manifest(out, "fit-gm", config, [str(out)])
    return 0


def _load_grid(stem: str) -> SampleGrid:
    p = pathlib.Path(stem)
    if p.suffix == ".csv":
        p = p.with_suffix("")
    return SampleGrid.load(p.with_suffix(".csv"), p.with_suffix(".json"))


def _resolve_coefs(args, grid: SampleGrid) -> GMCoefficients | None:
    if args.mode != "generalized":
        return None
    if args.coefs and args.coefs != "auto":
        return GMCoefficients.load(args.coefs)
    radius = args.gm_radius
    if radius is None:
        raise ValueError("generalized mode needs --coefs or --gm-radius")
    return load_asset(grid.kernel_order, radius)


def cmd_reconstruct(args) -> int:
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    grid = _load_grid(args.samples)
    coefs = _resolve_coefs(args, grid)
    options = PipelineOptions(
        rs_policy=args.rs_policy,
        epsilon=args.epsilon,
        margin=args.margin,
        sign_qp=args.sign_qp,
        consistency=args.consistency,
        max_iter=args.max_iter,
        window_stride=args.window_stride,
    )
    t0 = time.time()
    result = run_pipeline(grid, args.degree, args.mode, coefs, options)
    result.diagnostics["elapsed_s"] = time.time() - t0
    json_path = out.with_suffix(".json")
    result.save(json_path)
    raster = render_shape(result.polynomial("final"), grid.plane, args.resolution)
    pgm_path = out.with_suffix(".pgm")
    write_pgm(raster, pgm_path)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    _write_manifest(out, "reconstruct", config, [str(json_path), str(pgm_path)])
    return 0


def cmd_evaluate(args) -> int:
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    plane = ImagePlane(args.half_width, 1.0)
    truth = _load_shape(args.truth)
    recon_path = pathlib.Path(args.recon)
    metrics: dict = {}
    if recon_path.suffix == ".json":
        with open(recon_path) as fh:
            data = json.load(fh)
        if "a_final" in data:
            degree = int(data["degree"])
            for stage in ("a_ls", "a_qp", "a_final"):
                if data.get(stage) is None:
                    continue
                poly = BivariatePolynomial(degree, np.asarray(data[stage]))
                rep = evaluate_reconstruction(truth, poly, plane, args.resolution)
                metrics[stage.replace("a_", "")] = rep
        else:
            poly = BivariatePolynomial.from_json_dict(data)
            metrics["final"] = evaluate_reconstruction(truth, poly, plane, args.resolution)
    elif recon_path.suffix == ".pgm":
        rec = read_pgm(recon_path)
        if isinstance(truth, BivariatePolynomial):
            truth_raster = render_shape(truth, plane, args.resolution)
        else:
            truth_raster = truth
        if truth_raster.shape != rec.shape:
            raise ValueError("truth and reconstruction rasters differ in size")
        metrics["final"] = {
            "psnr_db": psnr_binary(truth_raster, rec),
            "resolution": args.resolution,
            "n_diff": int(np.count_nonzero(truth_raster != rec)),
        }
    else:
        raise ValueError("reconstruction must be a .json or .pgm file")
    for rep in metrics.values():
        if rep.get("psnr_db") == float("inf"):
            rep["psnr_db"] = "inf"
            rep["identical"] = True
    with open(out, "w") as fh:
        json.dump(metrics, fh, indent=2, default=str)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    _write_manifest(out, "evaluate", config, [str(out)])
    return 0


# Named end-to-end scenarios.  Grid sizes follow size = 2 L + m + 1.
SCENARIOS = {
    "noiseless-quartic": dict(
        shape=("bounded-quartic", 0), L=2, m=6, snr=None, degree=4,
        mode="conventional", subcells=256,
    ),
    "noisy-17db": dict(
        shape=("bounded-quartic", 0), L=11, m=6, snr=17.0, degree=4,
        mode="generalized", gm_radius=13,
    ),
    "noisy-22db": dict(
        shape=("bounded-quartic", 0), L=11, m=6, snr=22.0, degree=4,
        mode="generalized", gm_radius=13,
    ),
    "kernel-comparison": dict(
        shape=("bounded-quartic", 0), variants=[(2, 15, 14), (4, 13, 14), (6, 11, 13)],
        snr=27.0, degree=4, mode="generalized",
    ),
    "unbounded": dict(
        shape=("unbounded-quartic", 1), L=18, m=2, snr=25.0, degree=4,
        mode="generalized", gm_radius=16, window_stride=2,
    ),
    "overfit-ellipse": dict(
        shape=("ellipse", None), L=2, m=12, snr=None, degree=4,
        mode="conventional", rs_policy="full", subcells=256,
        sign_qp="off", consistency="on",
    ),
    "spline-boundary": dict(
        shape=("bezier", None), L=6, m=2, snr=None, degree=4,
        mode="generalized", gm_radius=7,
        sign_qp="on", consistency="on",
    ),
}

BEZIER_FIXTURE = [(-2.0, -1.5), (2.2, -1.8), (1.8, 2.0), (-1.7, 1.6)]


def _scenario_shape(kind, seed, L):
    """Shape for sampling plus the truth reference for 256 px/unit evaluation."""
    if kind == "bounded-quartic":
        p = gen_bounded_quartic(seed, L)
        return p, p
    if kind == "unbounded-quartic":
        p = gen_unbounded_quartic(seed, L)
        return p, p
    if kind == "ellipse":
        p = gen_conic(center=(0.8, -0.5), axes=(0.45 * L, 0.3 * L), angle=0.5)
        return p, p
    if kind == "bezier":
        plane = ImagePlane(L, 1.0)
        raster, _ = gen_bezier_shape(BEZIER_FIXTURE, plane, 64)
        truth, _ = gen_bezier_shape(BEZIER_FIXTURE, plane, 256)
        return raster, truth
    raise ValueError(f"unknown scenario shape {kind!r}")


def _run_one(shape, L, m, snr, seed, degree, mode, gm_radius=None,
             window_stride=1, sign_qp="auto", consistency="auto", subcells=64,
             rs_policy="balanced"):
    plane = ImagePlane(L, 1.0)
    kernel = BSplineKernel(m)
    if isinstance(shape, BivariatePolynomial):
        grid = sample_shape(shape, plane, kernel, subcells_per_unit=subcells)
    else:
        grid = sample_raster(shape, plane, kernel)
    if snr is not None:
        grid = add_noise(grid, snr, seed)
    coefs = load_asset(m, gm_radius) if mode == "generalized" else None
    options = PipelineOptions(
        rs_policy=rs_policy, window_stride=window_stride,
        sign_qp=sign_qp, consistency=consistency,
    )
    result = run_pipeline(grid, degree, mode, coefs, options)
    return grid, result


def cmd_repro(args) -> int:
    if args.scenario not in SCENARIOS:
        raise ValueError(
            f"unknown scenario {args.scenario!r}; choose from {sorted(SCENARIOS)}"
        )
    cfg = dict(SCENARIOS[args.scenario])
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind, shape_seed = cfg.pop("shape")
    variants = cfg.pop("variants", None)
    if variants is None:
        variants = [(cfg.pop("m"), cfg.pop("L"), cfg.pop("gm_radius", None))]
    report = {"scenario": args.scenario, "seed": args.seed, "runs": []}
    outputs = []
    for m, L, gm_radius in variants:
        shape, truth = _scenario_shape(kind, shape_seed, L)
        grid, result = _run_one(
            shape, L, m, cfg.get("snr"), args.seed, cfg["degree"], cfg["mode"],
            gm_radius=gm_radius, window_stride=cfg.get("window_stride", 1),
            sign_qp=cfg.get("sign_qp", "auto"),
            consistency=cfg.get("consistency", "auto"),
            subcells=cfg.get("subcells", 64),
            rs_policy=cfg.get("rs_policy", "balanced"),
        )
        plane = grid.plane
        stem = out_dir / f"{args.scenario}_m{m}"
        result.save(stem.with_suffix(".json"))
        raster = render_shape(result.polynomial("final"), plane, 256)
        write_pgm(raster, stem.with_suffix(".pgm"))
        run_report = {"m": m, "L": L, "stages": {}}
        for stage in ("ls", "qp", "final"):
            try:
                poly = result.polynomial(stage)
            except ValueError:
                continue
            rep = evaluate_reconstruction(truth, poly, plane, 256)
            if rep.get("psnr_db") == float("inf"):
                rep["psnr_db"] = "inf"
            run_report["stages"][stage] = rep
        report["runs"].append(run_report)
        outputs += [str(stem.with_suffix(".json")), str(stem.with_suffix(".pgm"))]
    report_path = out_dir / f"{args.scenario}_report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, default=str)
    outputs.append(str(report_path))
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    _write_manifest(out_dir / args.scenario, "repro", config, outputs)
    print(json.dumps(report["runs"], indent=2, default=str))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algshape",
        description="Sampling and reconstruction of shapes with algebraic boundaries",
    )
    parser.add_argument(
        "--config", help="JSON file of option defaults for the subcommand"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a test shape fixture")
    g.add_argument("--kind", required=True,
                   choices=["conic", "bounded-quartic", "unbounded-quartic", "bezier"])
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--half-width", type=float, default=1.0)
    g.add_argument("--circle", type=float, help="circle radius shortcut for conic")
    g.add_argument("--center", type=float, nargs=2, default=[0.0, 0.0])
    g.add_argument("--axes", type=float, nargs=2, default=[1.0, 1.0])
    g.add_argument("--angle", type=float, default=0.0)
    g.add_argument("--points", help="bezier control points 'x1,y1;...;x4,y4'")
    g.add_argument("--resolution", type=int, default=256)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", help="sample a shape through a B-spline kernel")
    s.add_argument("--shape", required=True, help="polynomial JSON or PGM raster")
    s.add_argument("--out", required=True)
    s.add_argument("--m", type=int, required=True, help="kernel order")
    s.add_argument("--half-width", type=float, required=True)
    s.add_argument("--period", type=float, default=1.0)
    s.add_argument("--subcells", type=int, default=64)
    s.add_argument("--snr", type=float, help="add noise at this sample SNR (dB)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sample)

    f = sub.add_parser("fit-gm", help="fit generalized-moment coefficient sets")
    f.add_argument("--m", type=int, required=True)
    f.add_argument("--max-order", type=int, default=6)
    f.add_argument("--radius", type=int, required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit_gm)

    r = sub.add_parser("reconstruct", help="recover a polynomial from samples")
    r.add_argument("--samples", required=True, help="sample CSV stem")
    r.add_argument("--out", required=True)
    r.add_argument("--degree", type=int, required=True)
    r.add_argument("--mode", choices=["conventional", "generalized"],
                   default="conventional")
    r.add_argument("--coefs", help="GM coefficient JSON, or 'auto' for bundled")
    r.add_argument("--gm-radius", type=int)
    r.add_argument("--rs-policy", choices=["balanced", "full"], default="balanced")
    r.add_argument("--epsilon", type=float, default=0.2)
    r.add_argument("--margin", type=float, default=1e-3)
    r.add_argument("--sign-qp", choices=["auto", "on", "off"], default="auto")
    r.add_argument("--consistency", choices=["auto", "on", "off"], default="auto")
    r.add_argument("--max-iter", type=int, default=10)
    r.add_argument("--window-stride", type=int, default=1)
    r.add_argument("--resolution", type=int, default=256)
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="compare a reconstruction against truth")
    e.add_argument("--truth", required=True)
    e.add_argument("--recon", required=True)
    e.add_argument("--half-width", type=float, required=True)
    e.add_argument("--resolution", type=int, default=256)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("repro", help="run a named end-to-end scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # resolve --config before the final parse so file values act as defaults
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            with open(argv[idx + 1]) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError, IndexError) as ex:
            print(f"error: cannot read config: {ex}", file=sys.stderr)
            return EXIT_INPUT_ERROR
        for action in parser._subparsers._group_actions:
            for sp in getattr(action, "choices", {}).values():
                sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, TypeError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
