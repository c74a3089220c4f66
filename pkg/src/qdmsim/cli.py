"""Command-line entry points.

Every command is deterministic given (inputs, seed).  Exit codes:
0 success, 2 configuration error, 3 data error, 4 fit-failure threshold
exceeded.
"""
import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (ac_maps, detuning_error_curve, fit_rabi,
                       moment_series, susceptibility)
from .constants import GAMMA_E, TWO_PI
from .instrument import synth_ac_datacube, synth_dc_stack, synth_rabi_trace
from .io import (ConfigError, DataError, FitFailureError, RunConfig,
                 read_cube, read_map, write_cube, write_map, write_table)
from .io.heatmap import write_heatmap
from .spin import xyn_kappa


def _parse_fields(text):
    """Comma-separated fields with unit suffixes, e.g. '1mT,2mT,3mT'."""
    from .io.config import _parse_value
    out = []
    for item in text.split(","):
        item = item.strip()
        for i, ch in enumerate(item):
            if not (ch.isdigit() or ch in ".-+e"):
                num, unit = item[:i], item[i:]
                break
        else:
            num, unit = item, ""
        out.append(_parse_value("experiment", "b_dc", f"{num} {unit}",
                                "--applied"))
    return out


def _load(args, seed=None):
    if args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig.parse("", name="<defaults>")
    seed = args.seed if args.seed is not None else seed
    return cfg, cfg.scene(), cfg.experiment(seed=seed)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth_dc(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    applied = _parse_fields(args.applied)
    maps = synth_dc_stack(scene, exp, applied)
    rows = []
    for i, (b, fmap) in enumerate(zip(applied, maps)):
        path = out / f"dc_{i:03d}.qdm"
        write_map(path, fmap)
        rows.append([str(path.name), b])
    write_table(out / "dc_manifest.csv", ["file", "applied"], ["-", "T"],
                rows)
    print(f"wrote {len(maps)} DC maps to {out}")
    return 0


def cmd_synth_ac(args):
    cfg, scene, exp = _load(args)
    if args.no_detuning:
        exp.detuning_enabled = False
    if args.no_sample:
        scene.magnets = []
    out = _outdir(args)
    data = synth_ac_datacube(scene, exp, cfg.delta_grid())
    path = out / "ac_cube.qdc"
    write_cube(path, data["cube"], data["delta"], exp.pixel_size,
               exp.standoff,
               meta={"ac_amplitude": exp.ac.amplitude,
                     "ac_frequency": exp.ac.frequency,
                     "n_pulses": exp.sequence.n_pulses,
                     "order": exp.sequence.order,
                     "tau": exp.sequence.tau,
                     "contrast": data["contrast"],
                     "seed": exp.seed,
                     "detuning": exp.detuning_enabled})
    print(f"wrote cube {path} ({data['cube'].shape[0]} frames)")
    return 0


def cmd_analyze_dc(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    from .io.report import read_table
    manifest = Path(args.maps) / "dc_manifest.csv"
    if not manifest.exists():
        raise DataError(f"missing DC manifest {manifest}")
    _, _, rows = read_table(manifest)
    maps = [read_map(Path(args.maps) / row[0]) for row in rows]
    applied = [row[1] for row in rows]
    layout = [tuple(m.center[:2]) for m in scene.magnets]
    diameter = cfg[("scene", "diameter")]
    thickness = cfg[("scene", "thickness")]
    series = moment_series(
        maps, applied, diameter, thickness,
        bg_kernel=cfg[("analysis", "bg_kernel")],
        cut_half_span=cfg[("analysis", "cut_half_span")], layout=layout)
    rows = [[b, m, p] for b, m, p in zip(series.applied_fields,
                                         series.moments, series.pkpk)]
    write_table(out / "moments.csv", ["applied", "moment", "pkpk"],
                ["T", "J/T", "m"], rows)
    chi = susceptibility(
        series.slope * 1e-3 * 1.0,  # moment change per mT as delta_m ref
        1e-3, cfg[("scene", "response_volume")])
    write_table(out / "moment_fit.csv",
                ["slope", "intercept", "standoff", "chi_v"],
                ["J/T/T", "J/T", "m", "-"],
                [[series.slope, series.intercept, series.standoff,
                  chi.chi_v]])
    from .analysis import background_subtract
    for i, fmap in enumerate(maps):
        sub = background_subtract(fmap, kernel=cfg[("analysis",
                                                    "bg_kernel")])
        write_map(out / f"dc_sample_{i:03d}.qdm", sub)
        write_heatmap(out / f"dc_sample_{i:03d}.pgm", sub.values)
    print(f"moment slope {series.slope:.6g} J/T/T, "
          f"intercept {series.intercept:.6g} J/T, "
          f"standoff {series.standoff * 1e6:.3f} um")
    return 0


def cmd_analyze_ac(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    cube, delta, meta = read_cube(args.cube)
    maps = ac_maps(cube, delta, exp.sequence,
                   pixel_size=meta["pixel_size"], standoff=meta["standoff"],
                   bg_kernel=cfg[("analysis", "bg_kernel")])
    frac_failed = maps.n_failed / maps.failed.size
    write_map(out / "ac_amplitude.qdm", maps.amplitude)
    write_map(out / "ac_sample.qdm", maps.amplitude_sample)
    write_heatmap(out / "ac_amplitude.pgm", maps.amplitude.values)
    write_heatmap(out / "ac_sample.pgm", maps.amplitude_sample.values)
    write_heatmap(out / "ac_phase.pgm", np.degrees(maps.phase))
    kappa = xyn_kappa(exp.sequence.n_pulses, exp.sequence.tau)
    with np.errstate(divide="ignore"):
        dbmin = np.where(maps.contrast > 0,
                         maps.residual_sigma / np.clip(maps.contrast,
                                                       1e-12, None) / kappa,
                         np.inf)
    from .magnetics import FieldMap
    write_map(out / "ac_dbmin.qdm",
              FieldMap(np.nan_to_num(dbmin, posinf=0.0),
                       meta["pixel_size"], meta["standoff"], "nv"))
    stats = [np.mean(maps.amplitude.values), np.std(maps.amplitude.values),
             np.degrees(np.std(maps.phase)), frac_failed]
    write_table(out / "ac_summary.csv",
                ["amp_mean", "amp_sigma", "phase_scatter", "fit_failed"],
                ["T", "T", "deg", "-"], [stats])
    if scene.magnets:
        from .analysis import ac_moments
        layout = [tuple(m.center[:2]) for m in scene.magnets]
        dms = ac_moments(maps, layout, cfg[("scene", "diameter")],
                         cfg[("scene", "thickness")], meta["standoff"],
                         bg_kernel=cfg[("analysis", "bg_kernel")],
                         cut_half_span=cfg[("analysis", "cut_half_span")])
        amp = float(meta.get("ac_amplitude", exp.ac.amplitude))
        rows = []
        for (cx, cy), dm in zip(layout, dms):
            chi = susceptibility(dm, amp, cfg[("scene", "response_volume")],
                                 frequency=float(meta.get("ac_frequency",
                                                          exp.ac.frequency)))
            rows.append([cx, cy, dm, chi.chi_v])
        write_table(out / "ac_moments.csv",
                    ["x", "y", "delta_m", "chi_v"],
                    ["m", "m", "J/T", "-"], rows)
    print(f"amplitude mean {stats[0]:.6g} T, sigma {stats[1]:.6g} T, "
          f"phase scatter {stats[2]:.3g} deg, failed {frac_failed:.2%}")
    if frac_failed > cfg[("analysis", "fit_failure_limit")]:
        raise FitFailureError(
            f"{frac_failed:.2%} pixel fits failed "
            f"(limit {cfg[('analysis', 'fit_failure_limit')]:.2%})")
    return 0


def cmd_rabi(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    detuning = TWO_PI * args.detuning_mhz * 1e6
    t = np.linspace(0.0, args.span_us * 1e-6, args.points)
    trace = synth_rabi_trace(exp, detuning, t,
                             hyperfine=not args.no_hyperfine)
    fit = fit_rabi(trace)
    write_table(out / "rabi_trace.csv", ["time", "population"],
                ["s", "-"], np.column_stack([trace.times,
                                             trace.population]))
    write_table(out / "rabi_fit.csv",
                ["a1", "a2", "f1", "f2", "t1", "t2", "fallback"],
                ["-", "-", "Hz", "Hz", "s", "s", "-"],
                [[fit.a1, fit.a2, fit.omega1 / TWO_PI, fit.omega2 / TWO_PI,
                  fit.t1_decay, fit.t2_decay, fit.flags.fallback or "none"]])
    print(f"fitted f1 {fit.omega1 / TWO_PI / 1e6:.4f} MHz, "
          f"f2 {fit.omega2 / TWO_PI / 1e6:.4f} MHz")
    return 0


def cmd_error_curve(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    dets = TWO_PI * 1e6 * np.linspace(args.min_mhz, args.max_mhz,
                                      args.points)
    errors = detuning_error_curve(dets, exp.rabi_omega, exp.sequence,
                                  exp.ac.amplitude,
                                  delta_grid=cfg.delta_grid(),
                                  pulse_model=exp.pulse_model,
                                  ac_during_pulses=exp.ac_during_pulses)
    rows = np.column_stack([dets / TWO_PI, errors * 100.0])
    write_table(out / "error_curve.csv", ["detuning", "error"],
                ["Hz", "%"], rows)
    print(f"wrote error curve over [{args.min_mhz}, {args.max_mhz}] MHz "
          f"to {out / 'error_curve.csv'}")
    return 0


def cmd_report(args):
    cfg, scene, exp = _load(args)
    out = _outdir(args)
    fmap = read_map(args.dbmin)
    vals = fmap.values[fmap.values > 0]
    if vals.size == 0:
        raise DataError(f"{args.dbmin}: no valid sensitivity pixels")
    stats = [np.median(vals), np.percentile(vals, 10),
             np.percentile(vals, 90)]
    write_table(out / "sensitivity_report.csv",
                ["median", "p10", "p90"], ["T", "T", "T"], [stats])
    write_heatmap(out / "dbmin.pgm", fmap.values)
    print(f"min detectable field: median {stats[0] * 1e9:.1f} nT, "
          f"10th {stats[1] * 1e9:.1f} nT, 90th {stats[2] * 1e9:.1f} nT")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="qdmsim",
        description="Widefield NV AC susceptometry simulator and analysis")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the configured RNG seed")
    p.add_argument("--out", default="qdmsim_out", help="output directory")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("QDM_THREADS", "1")),
                   help="worker hint; results are identical for any value")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-dc", help="synthesize DC field maps")
    s.add_argument("--applied", default="1mT,2mT,3mT",
                   help="comma-separated applied fields")
    s.set_defaults(func=cmd_synth_dc)

    s = sub.add_parser("synth-ac", help="synthesize an AC phase-sweep cube")
    s.add_argument("--no-detuning", action="store_true",
                   help="disable the stray-field detuning")
    s.add_argument("--no-sample", action="store_true",
                   help="synthesize the empty-substrate scene")
    s.set_defaults(func=cmd_synth_ac)

    s = sub.add_parser("analyze-dc", help="moment series from DC maps")
    s.add_argument("--maps", required=True,
                   help="directory with dc_manifest.csv from synth-dc")
    s.set_defaults(func=cmd_analyze_dc)

    s = sub.add_parser("analyze-ac", help="AC maps from a phase-sweep cube")
    s.add_argument("--cube", required=True, help="cube file from synth-ac")
    s.set_defaults(func=cmd_analyze_ac)

    s = sub.add_parser("rabi", help="synthesize and fit a Rabi trace")
    s.add_argument("--detuning-mhz", type=float, default=0.0)
    s.add_argument("--span-us", type=float, default=2.0)
    s.add_argument("--points", type=int, default=401)
    s.add_argument("--no-hyperfine", action="store_true")
    s.set_defaults(func=cmd_rabi)

    s = sub.add_parser("error-curve", help="detuning error curve")
    s.add_argument("--min-mhz", type=float, default=0.0)
    s.add_argument("--max-mhz", type=float, default=2.0)
    s.add_argument("--points", type=int, default=9)
    s.set_defaults(func=cmd_error_curve)

    s = sub.add_parser("report", help="sensitivity statistics")
    s.add_argument("--dbmin", required=True,
                   help="ac_dbmin.qdm from analyze-ac")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, matching the config code
        return int(exc.code) if exc.code else 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FitFailureError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
