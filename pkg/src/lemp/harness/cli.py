"""Command-line interface.

Exit codes: 0 thresholds met, 1 thresholds violated (or run fault), 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..fdtd import solver
from ..groundfx import apply_chain
from ..reffields import pec_fields
from ..waveform import read_csv, write_csv
from .bench import InsufficientMemoryError, bench
from .experiments import PRESETS, ExperimentError, _wave_name, grid_info, run_experiment
from .metrics import compare
from .scenario import ScenarioError, grid_spec, load_scenario, pml_profile, save_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("lemp")


class UsageError(Exception):
    pass


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_reference(args) -> int:
    s = load_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(s, out / "scenario.json")
    written = []
    for o in s.observers:
        above = o.z >= 0
        # underground observers start from the surface field and go through weyl
        point = o if above else type(o)(o.r, 0.0)
        fields = pec_fields(point, s.mtle, s.timebase, scenario_id=s.id)
        if s.ground.is_pec:
            waves = list(fields.values())
        elif above:
            waves = [apply_chain(fields["Ez"], "attenuation", s.ground),
                     apply_chain(fields["Ez"], "attenuation,wave_tilt", s.ground)]
        else:
            waves = [apply_chain(fields["Ez"], f"attenuation,wave_tilt,weyl:{-o.z:g}", s.ground)]
        for w in waves:
            written.append(str(write_csv(w, out / _wave_name("reference", w))))
    _dump({"scenario_id": s.id, "files": written}, out / "manifest.json")
    return EXIT_OK


def cmd_filter(args) -> int:
    s = load_scenario(args.scenario)
    w = read_csv(args.inp)
    hphi = read_csv(args.hphi) if args.hphi else None
    out = apply_chain(w, args.chain, s.ground, pad_factor=args.pad, hphi=hphi)
    write_csv(out, args.out)
    return EXIT_OK


def cmd_fdtd(args) -> int:
    s = load_scenario(args.scenario)
    grid = grid_spec(s, args.grid, dx_m=args.dx)
    pml = pml_profile(s.pml)
    probes = []
    for o in s.observers:
        if o.z >= grid.dx:
            probes.append(solver.Probe("Ez", o.r, o.z))
        probes += [solver.Probe("Er", o.r, o.z), solver.Probe("Hphi", o.r, o.z)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(s, out / "scenario.json")
    state = solver.build(s, grid, pml, probes, precision=args.precision)
    t0 = time.perf_counter()
    status = EXIT_OK
    fault = None
    try:
        waves = solver.run(state, progress=500)
    except solver.DivergenceError as exc:
        fault = str(exc)
        log.error("%s", exc)
        waves = solver.probe_waveforms(state)
        status = EXIT_FAIL
    elapsed = time.perf_counter() - t0
    files = [str(write_csv(w, out / _wave_name("fdtd", w))) for w in waves.values()]
    info = grid_info(grid, pml, state, elapsed if state.step_count else None)
    info.update({"scenario_id": s.id, "files": files, "steps_run": state.step_count,
                 "solve_time_s": elapsed, "divergence": fault, "precision": args.precision,
                 "growth_flag": solver.stability_report(state).growth_flag})
    _dump(info, out / "manifest.json")
    return status


def _window(text):
    if text is None:
        return None
    try:
        t0, t1 = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--window expects 't0,t1' in seconds, got {text!r}") from None
    return t0, t1


def cmd_compare(args) -> int:
    a, b = read_csv(args.a), read_csv(args.b)
    rep = compare(a, b, _window(args.window))
    d = rep.to_dict()
    ok = True
    if args.max_nrmse is not None:
        ok &= rep.nrmse < args.max_nrmse
    if args.max_peak_error is not None:
        ok &= rep.peak_relative_error < args.max_peak_error
    d["thresholds_met"] = bool(ok)
    _dump(d, args.report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    s = load_scenario(args.scenario)
    grid = grid_spec(s, args.grid, dx_m=args.dx)
    try:
        rep = bench(grid, pml_profile(s.pml), s, args.iterations, warmup=args.warmup,
                    precision=args.precision)
    except InsufficientMemoryError as exc:
        _dump({"refused": str(exc), "memory_estimate": exc.estimate, "available": exc.available},
              args.report)
        return EXIT_FAIL
    _dump(rep.to_dict(), args.report)
    return EXIT_OK


def cmd_experiment(args) -> int:
    scenario = load_scenario(args.scenario) if args.scenario else None
    res = run_experiment(args.preset, args.out, scenario)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} {c.op} {c.limit:g}")
    return EXIT_OK if res.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lemp", description="Lightning return-stroke field toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reference", help="dipole-sum reference fields (+ ground filters)")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reference)

    f = sub.add_parser("filter", help="apply a ground-filter chain to a waveform CSV")
    f.add_argument("--in", dest="inp", required=True)
    f.add_argument("--scenario", required=True)
    f.add_argument("--chain", required=True, help="e.g. attenuation,wave_tilt,weyl:10")
    f.add_argument("--hphi", help="PEC Hphi CSV (cooray_rubinstein only)")
    f.add_argument("--pad", type=int, default=4)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_filter)

    d = sub.add_parser("fdtd", help="run the FDTD solver for a scenario")
    d.add_argument("--scenario", required=True)
    d.add_argument("--grid", choices=("axi2d", "cart3d"), default="axi2d")
    d.add_argument("--dx", type=float)
    d.add_argument("--precision", choices=("single", "double"), default="single")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_fdtd)

    c = sub.add_parser("compare", help="compare two waveform CSVs (a is the reference)")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--window", help="t0,t1 in seconds")
    c.add_argument("--report")
    c.add_argument("--max-nrmse", type=float)
    c.add_argument("--max-peak-error", type=float)
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="time FDTD iterations")
    b.add_argument("--scenario", required=True)
    b.add_argument("--grid", choices=("axi2d", "cart3d"), default="axi2d")
    b.add_argument("--dx", type=float)
    b.add_argument("--iterations", type=int, default=20)
    b.add_argument("--warmup", type=int, default=3)
    b.add_argument("--precision", choices=("single", "double"), default="single")
    b.add_argument("--report")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("experiment", help=f"run a preset: {', '.join(PRESETS)}")
    e.add_argument("preset")
    e.add_argument("--out", required=True)
    e.add_argument("--scenario")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
