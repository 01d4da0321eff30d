"""Named validation experiments: reference vs FDTD at desk scale.

Every acceptance threshold lives in ``THRESHOLDS`` so it can be audited in
one place. Each run writes into its own directory:

    scenario.json        the scenario actually used
    reference/*.csv      reference-engine waveforms
    fdtd/*.csv           FDTD probe waveforms
    reports/*.json       ComparisonReports and derived checks
    bundle_*.csv         plot-ready columns (t_s plus one column per series)
    manifest.json        grids, PML, cell counts, memory, timings and verdicts
"""

from __future__ import annotations

import contextlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..channel import MtleModel
from ..fdtd import solver
from ..fdtd.grid import AXI2D, CART3D, GridSpec
from ..groundfx import GroundModel, apply_chain
from ..reffields import pec_fields
from ..waveform import FieldWaveform, ObservationPoint, Timebase, _fmt, write_csv
from .metrics import compare, oscillation_index, rise_time
from .scenario import Scenario, grid_spec, pml_profile, scenario_to_dict

log = logging.getLogger(__name__)

US = 1e-6

THRESHOLDS = {
    "fig2_pec_1km": {"nrmse": 0.05, "peak_relative_error": 0.03},
    "fig3_lossy_10km": {"nrmse": 0.10, "peak_relative_error": 0.15},
    "fig4_pml_sweep_scaled": {"deviation_thickest": 0.05},
    "fig5_dispersion_scaled": {"oscillation_ratio": 3.0},
    "cfl_divergence": {"max_steps": 2000},
}


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


@dataclass
class Check:
    name: str
    value: float
    op: str
    limit: float

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return {"<": self.value < self.limit, ">": self.value > self.limit,
                ">=": self.value >= self.limit, "<=": self.value <= self.limit}[self.op]

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


@dataclass
class ExperimentResult:
    name: str
    directory: Path
    checks: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    waveforms: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)


@contextlib.contextmanager
def _stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise ExperimentError(name, exc) from exc


def _json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _wave_name(kind: str, w: FieldWaveform, tag: str = "") -> str:
    tag = f"_{tag}" if tag else ""
    return f"{kind}{tag}_{w.component}_r{w.point.r:g}_z{w.point.z:g}.csv"


def write_bundle(path: Path, columns: dict, dt: float) -> Path:
    """Plot-ready CSV: t_s followed by one column per series (same dt, zero padded)."""
    n = max(len(v) for v in columns.values())
    names = list(columns)
    data = np.zeros((n, len(names)))
    for j, k in enumerate(names):
        data[: len(columns[k]), j] = columns[k]
    lines = ["t_s," + ",".join(names)]
    for i in range(n):
        lines.append(",".join([_fmt(i * dt)] + [_fmt(x) for x in data[i]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def grid_info(grid: GridSpec, pml, state=None, elapsed: float | None = None) -> dict:
    info = {
        "dimensionality": grid.dimensionality, "dx_m": grid.dx, "dt_s": grid.dt,
        "extents_m": list(grid.extents), "shape": list(grid.shape), "cells": grid.cells,
        "ground_depth_m": grid.ground_depth, "cfl_factor": grid.cfl_factor,
        "cfl_dims": grid.cfl_dims or grid.ndim, "n_steps": grid.n_steps,
        "pml": {**asdict(pml)},
        "memory_estimate_bytes": solver.memory_estimate(grid, pml),
    }
    if state is not None:
        info["init_time_s"] = state.init_time
    if elapsed is not None and grid.n_steps:
        info["seconds_per_iteration"] = elapsed / grid.n_steps
    return info


def run_fdtd(scenario: Scenario, grid: GridSpec, pml, probes, mirror_source: bool = False):
    """Build and run one FDTD simulation; returns (waveforms by probe name, info)."""
    state = solver.build(scenario, grid, pml, probes, mirror_source=mirror_source)
    t0 = time.perf_counter()
    out = solver.run(state)
    elapsed = time.perf_counter() - t0
    info = grid_info(grid, pml, state, elapsed)
    info["solve_time_s"] = elapsed
    info["growth_flag"] = solver.stability_report(state).growth_flag
    return out, info


def reference_timebase(grid: GridSpec) -> Timebase:
    return Timebase(grid.dt, grid.n_steps + 1)


# --------------------------------------------------------------------------- presets

def _timebase(dt: float, t_end: float) -> Timebase:
    return Timebase(dt, int(math.ceil(t_end / dt - 1e-9)) + 1)


def fig2_scenario() -> Scenario:
    dx = 5.0
    grid = {"dimensionality": AXI2D, "dx_m": dx, "extents_m": [4000.0, 8000.0],
            "ground_depth_m": 0.0, "cfl_factor": 0.9, "cfl_dims": 3, "t_end_s": 50 * US}
    dt = GridSpec(AXI2D, dx, (4000.0, 8000.0), cfl_dims=3).dt
    return Scenario(id="fig2_pec_1km", mtle=MtleModel(), ground=GroundModel.pec(),
                    observers=(ObservationPoint(1000.0, dx),), timebase=_timebase(dt, 50 * US),
                    grid=grid)


def fig3_scenario() -> Scenario:
    dx = 10.0
    grid = {"dimensionality": AXI2D, "dx_m": dx, "extents_m": [11000.0, 8400.0],
            "ground_depth_m": 400.0, "cfl_factor": 0.9, "cfl_dims": 3, "t_end_s": 60 * US}
    dt = GridSpec(AXI2D, dx, (11000.0, 8400.0), ground_depth=400.0, cfl_dims=3).dt
    return Scenario(id="fig3_lossy_10km", mtle=MtleModel(), ground=GroundModel("lossy", 1e-3, 10.0),
                    observers=(ObservationPoint(10000.0, 0.0), ObservationPoint(10000.0, -10.0)),
                    timebase=_timebase(dt, 60 * US), grid=grid)


def fig4_scenario() -> Scenario:
    dx = 50.0
    grid = {"dimensionality": CART3D, "dx_m": dx, "ground_depth_m": 750.0, "cfl_factor": 0.9,
            "t_end_s": 100 * US, "channel_x_m": 1000.0}
    dt = GridSpec(CART3D, dx, (dx, dx, 2 * dx)).dt
    return Scenario(id="fig4_pml_sweep_scaled",
                    mtle=MtleModel(channel_height=5000.0), ground=GroundModel("lossy", 1e-3, 10.0),
                    observers=(ObservationPoint(20000.0, 0.0),), timebase=_timebase(dt, 100 * US),
                    # a zero CFS shift keeps the corridor walls absorbing down to the
                    # slow late-time tail the comparison window reaches
                    grid=grid, pml={"thickness_cells": 10, "alpha_max": 0.0})


def fig5_scenario() -> Scenario:
    grid = {"dimensionality": AXI2D, "ground_depth_m": 500.0, "cfl_factor": 0.9, "cfl_dims": 3,
            "t_end_s": 130 * US}
    dt = GridSpec(AXI2D, 12.5, (12.5, 12.5), cfl_dims=3).dt
    return Scenario(id="fig5_dispersion_scaled", mtle=MtleModel(),
                    ground=GroundModel("lossy", 3e-3, 10.0),
                    observers=(ObservationPoint(30000.0, 50.0),), timebase=_timebase(dt, 130 * US),
                    grid=grid)


def cfl_scenario() -> Scenario:
    grid = {"dimensionality": AXI2D, "dx_m": 25.0, "extents_m": [2000.0, 1500.0],
            "ground_depth_m": 0.0}
    dt = GridSpec(AXI2D, 25.0, (25.0, 25.0)).dt
    return Scenario(id="cfl_divergence", mtle=MtleModel(channel_height=1000.0),
                    ground=GroundModel.pec(), observers=(ObservationPoint(500.0, 25.0),),
                    timebase=Timebase(dt, 2001), grid=grid)


def _fdtd_stage(res: ExperimentResult, out: Path, scenario, grid, pml, probes, tag, **kw):
    with _stage(f"fdtd[{tag}]"):
        waves, info = run_fdtd(scenario, grid, pml, probes, **kw)
        res.info.setdefault("runs", {})[tag] = info
        for w in waves.values():
            write_csv(w, out / "fdtd" / _wave_name("fdtd", w, tag))
    return waves


def _report(res: ExperimentResult, out: Path, key: str, ref, fd, window, **kw):
    with _stage(f"compare[{key}]"):
        rep = compare(ref, fd, window, **kw)
        res.reports[key] = rep
        _json(out / "reports" / f"{key}.json", rep.to_dict())
        n = min(ref.values.size, fd.values.size)
        write_bundle(out / f"bundle_{key}.csv",
                     {"reference": ref.values[:n], "fdtd": fd.values[:n]}, ref.timebase.dt)
    return rep


def _run_fig2(s: Scenario, out: Path, res: ExperimentResult, overrides: dict):
    th = THRESHOLDS["fig2_pec_1km"]
    grid = grid_spec(s, **overrides)
    pml = pml_profile(s.pml)
    obs = s.observers[0]
    obs = replace(obs, z=max(obs.z, grid.dx))
    probes = [solver.Probe("Ez", obs.r, obs.z), solver.Probe("Hphi", obs.r, obs.z)]
    with _stage("reference"):
        ref = pec_fields(obs, s.mtle, reference_timebase(grid), components=("Ez", "Hphi"),
                         scenario_id=s.id)
        for w in ref.values():
            write_csv(w, out / "reference" / _wave_name("reference", w))
    waves = _fdtd_stage(res, out, s, grid, pml, probes, "axi2d")
    t_end = grid.n_steps * grid.dt
    for p in probes:
        fd = waves[p.name]
        rep = _report(res, out, p.component, ref[p.component], fd, (0.0, t_end))
        res.checks.append(Check(f"nrmse_{p.component}", rep.nrmse, "<", th["nrmse"]))
        res.checks.append(Check(f"peak_error_{p.component}", rep.peak_relative_error, "<",
                                th["peak_relative_error"]))
        res.waveforms[("reference", p.component)] = ref[p.component]
        res.waveforms[("fdtd", p.component)] = fd
    ez = res.waveforms[("fdtd", "Ez")]
    late = abs(np.interp(min(50 * US, t_end), ez.times, ez.values))
    early = abs(np.interp(20 * US, ez.times, ez.values))
    res.checks.append(Check("ez_late_over_early", float(late / early) if early else math.inf, ">", 1.0))


def _run_fig3(s: Scenario, out: Path, res: ExperimentResult, overrides: dict):
    th = THRESHOLDS["fig3_lossy_10km"]
    grid = grid_spec(s, **overrides)
    pml = pml_profile(s.pml)
    surface = s.observers[0]
    probes = [solver.Probe("Er", o.r, o.z) for o in s.observers]
    probes.append(solver.Probe("Ez", surface.r, grid.dx))
    with _stage("reference"):
        tb = reference_timebase(grid)
        ez_pec = pec_fields(ObservationPoint(surface.r, 0.0), s.mtle, tb, components=("Ez",),
                            scenario_id=s.id)["Ez"]
        refs = {}
        for o in s.observers:
            chain = "attenuation,wave_tilt" + (f",weyl:{-o.z:g}" if o.z < 0 else "")
            refs[o] = apply_chain(ez_pec, chain, s.ground)
        ez_lossy = apply_chain(ez_pec, "attenuation", s.ground)
        for w in list(refs.values()) + [ez_lossy]:
            write_csv(w, out / "reference" / _wave_name("reference", w))
    waves = _fdtd_stage(res, out, s, grid, pml, probes, "axi2d")
    t_end = grid.n_steps * grid.dt
    for o, p in zip(s.observers, probes):
        fd = waves[p.name]
        fd = fd.with_values(fd.values, component="Ex")
        key = f"Ex_z{o.z:g}"
        rep = _report(res, out, key, refs[o], fd, (0.0, t_end))
        res.checks.append(Check(f"nrmse_{key}", rep.nrmse, "<", th["nrmse"]))
        res.checks.append(Check(f"peak_error_{key}", rep.peak_relative_error, "<",
                                th["peak_relative_error"]))
        res.waveforms[("reference", key)] = refs[o]
        res.waveforms[("fdtd", key)] = fd
    # vertical field one cell up, reported without a threshold
    _report(res, out, "Ez_informative", ez_lossy, waves[probes[-1].name], (0.0, t_end))


def post_peak_deviation(oracle: FieldWaveform, test: FieldWaveform) -> float:
    """max |test - oracle| after the oracle's peak, relative to that peak."""
    n = min(oracle.values.size, test.values.size)
    a, b = oracle.values[:n], test.values[:n]
    ip = int(np.argmax(np.abs(a)))
    return float(np.max(np.abs(b[ip:] - a[ip:])) / abs(a[ip]))


FIG4_THICKNESSES = (4, 8, 16)
FIG4_CORRIDOR = 2000.0


def _run_fig4(s: Scenario, out: Path, res: ExperimentResult, overrides: dict):
    th = THRESHOLDS["fig4_pml_sweep_scaled"]
    g = dict(s.grid or {})
    g.update(overrides)
    dx = float(g.get("dx_m", 50.0))
    thicknesses = tuple(g.pop("thicknesses", FIG4_THICKNESSES))
    corridor = float(g.pop("corridor_m", FIG4_CORRIDOR))
    base = pml_profile(s.pml)
    n_pml = base.thickness_cells
    obs = s.observers[0]
    depth = float(g.get("ground_depth_m", 750.0))
    t_end = float(g.get("t_end_s", s.timebase.duration))
    margin = 10 * dx
    z_ext = depth + _ceil(s.mtle.channel_height + margin + n_pml * dx, dx)
    probe = solver.Probe("Hphi", obs.r, obs.z)
    # axisymmetric oracle: same dx and dt, radial boundary far beyond the probe
    oracle_grid = GridSpec(AXI2D, dx, (_ceil(obs.r + 2 * margin + n_pml * dx, dx), z_ext),
                           ground_depth=depth, cfl_factor=g.get("cfl_factor", 0.9), cfl_dims=3)
    oracle_grid = replace(oracle_grid, n_steps=oracle_grid.steps_for(t_end))
    oracle = _fdtd_stage(res, out, s, oracle_grid, base, [probe], "oracle_axi2d")[probe.name]
    res.waveforms[("oracle", "Hphi")] = oracle
    ch_x = float(g.get("channel_x_m", margin + n_pml * dx))
    devs = []
    for n in thicknesses:
        y_ext = corridor + 2 * n * dx
        grid = GridSpec(CART3D, dx, (_ceil(ch_x + obs.r + margin + n_pml * dx, dx), y_ext, z_ext),
                        ground_depth=depth, cfl_factor=g.get("cfl_factor", 0.9), channel_x=ch_x)
        grid = replace(grid, n_steps=grid.steps_for(t_end))
        pml = replace(base, faces={**base.faces, "y_min": n, "y_max": n})
        fd = _fdtd_stage(res, out, s, grid, pml, [probe], f"cart3d_pml{n}")[probe.name]
        rep = _report(res, out, f"Hphi_pml{n}", oracle, fd, (0.0, t_end))
        dev = post_peak_deviation(oracle, fd)
        devs.append(dev)
        res.info.setdefault("deviation", {})[n] = dev
        res.reports[f"Hphi_pml{n}"] = rep
        res.waveforms[("fdtd", f"pml{n}")] = fd
    _json(out / "reports" / "pml_sweep.json",
          {"thickness_cells": list(thicknesses), "post_peak_deviation": devs,
           "corridor_m": corridor})
    mono = all(b < a for a, b in zip(devs, devs[1:]))
    res.checks.append(Check("deviation_monotone", 1.0 if mono else 0.0, ">=", 1.0))
    res.checks.append(Check("deviation_thickest", devs[-1], "<", th["deviation_thickest"]))


FIG5_DX = (12.5, 25.0, 50.0)
FIG5_WINDOW = (-10 * US, 30 * US)      # relative to the light-speed arrival


def _ceil(x: float, dx: float) -> float:
    return float(math.ceil(round(x / dx, 6)) * dx)


def _run_fig5(s: Scenario, out: Path, res: ExperimentResult, overrides: dict):
    th = THRESHOLDS["fig5_dispersion_scaled"]
    g = dict(s.grid or {})
    g.update(overrides)
    dxs = tuple(g.pop("dx_list", FIG5_DX))
    obs = s.observers[0]
    t_end = float(g.get("t_end_s", s.timebase.duration))
    pml = pml_profile(s.pml)
    arrival = obs.r / 299792458.0
    window = (arrival + FIG5_WINDOW[0], min(arrival + FIG5_WINDOW[1], t_end))
    indices = {}
    ref = None
    for dx in dxs:
        margin = 20 * dx
        depth = max(float(g.get("ground_depth_m", 500.0)), (pml.thickness("z_min") + 10) * dx)
        grid = GridSpec(AXI2D, dx, (_ceil(obs.r + margin + pml.thickness_cells * dx, dx),
                                    depth + _ceil(s.mtle.channel_height + margin
                                                  + pml.thickness_cells * dx, dx)),
                        ground_depth=depth, cfl_factor=g.get("cfl_factor", 0.9), cfl_dims=3)
        grid = replace(grid, n_steps=grid.steps_for(t_end))
        probe = solver.Probe("Ez", obs.r, obs.z)
        fd = _fdtd_stage(res, out, s, grid, pml, [probe], f"dx{dx:g}")[probe.name]
        if ref is None:
            with _stage("reference"):
                ez_pec = pec_fields(obs, s.mtle, reference_timebase(grid), components=("Ez",),
                                    scenario_id=s.id)["Ez"]
                ref = apply_chain(ez_pec, "attenuation", s.ground)
                write_csv(ref, out / "reference" / _wave_name("reference", ref))
                res.waveforms[("reference", "Ez")] = ref
                # the ground removes the source's high band before the wave reaches the
                # observer, so the cutoff follows the rise time of the attenuated front
                f_cutoff = 1.0 / (2.0 * rise_time(ref))
        with _stage(f"oscillation[dx{dx:g}]"):
            i0, i1 = (int(round(t / grid.dt)) for t in window)
            seg = FieldWaveform("Ez", fd.values[i0:i1 + 1], Timebase(grid.dt, i1 - i0 + 1),
                                fd.point, fd.scenario_id)
            indices[dx] = oscillation_index(seg, f_cutoff)
        _report(res, out, f"Ez_dx{dx:g}", ref, fd, window, f_cutoff=f_cutoff)
        res.waveforms[("fdtd", f"dx{dx:g}")] = fd
    res.info["oscillation_index"] = indices
    res.info["f_cutoff_hz"] = f_cutoff
    _json(out / "reports" / "dispersion.json",
          {"dx_m": list(indices), "oscillation_index": list(indices.values()),
           "window_s": list(window), "f_cutoff_hz": f_cutoff})
    ratio = indices[max(dxs)] / indices[min(dxs)] if indices[min(dxs)] > 0 else math.inf
    res.checks.append(Check("oscillation_ratio", ratio, ">=", th["oscillation_ratio"]))


def _run_cfl(s: Scenario, out: Path, res: ExperimentResult, overrides: dict):
    th = THRESHOLDS["cfl_divergence"]
    pml = pml_profile(s.pml)
    obs = s.observers[0]
    probe = solver.Probe("Ez", obs.r, obs.z)
    g = dict(s.grid or {})
    g.update(overrides)
    with _stage("grid"):
        base = GridSpec(g.get("dimensionality", AXI2D), float(g["dx_m"]), tuple(g["extents_m"]),
                        ground_depth=float(g.get("ground_depth_m", 0.0)),
                        cfl_dims=g.get("cfl_dims"))
    n_max = int(g.get("max_steps", th["max_steps"]))
    stable = replace(base, cfl_factor=0.9, n_steps=n_max)
    _fdtd_stage(res, out, s, stable, pml, [probe], "cfl0.9")
    res.checks.append(Check("stable_steps_completed", float(n_max), ">=", n_max))
    unstable = replace(base, cfl_factor=1.05, unsafe_cfl=True, n_steps=n_max)
    fault_step, flag_step = math.inf, None
    with _stage("fdtd[cfl1.05]"):
        state = solver.build(s, unstable, pml, [probe])
        try:
            solver.run(state)
        except solver.DivergenceError as exc:
            fault_step = exc.step
        flag_step = state.growth_step
    res.info["divergence"] = {"fault_step": fault_step, "growth_flag_step": flag_step}
    _json(out / "reports" / "cfl.json", res.info["divergence"])
    res.checks.append(Check("divergence_step", float(fault_step), "<=", n_max))
    flagged_first = flag_step is not None and flag_step < fault_step
    res.checks.append(Check("growth_flag_before_fault", 1.0 if flagged_first else 0.0, ">=", 1.0))


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    scenario: callable
    runner: callable


PRESETS = {p.name: p for p in (
    Preset("fig2_pec_1km", "Axi2D PEC ground, Ez and Hphi at 1 km vs dipole-sum reference",
           fig2_scenario, _run_fig2),
    Preset("fig3_lossy_10km", "Axi2D lossy ground, surface and 10 m-depth Ex at 10 km vs filter chain",
           fig3_scenario, _run_fig3),
    Preset("fig4_pml_sweep_scaled", "Cart3D 2 km corridor, lateral CPML 4/8/16 cells vs Axi2D oracle",
           fig4_scenario, _run_fig4),
    Preset("fig5_dispersion_scaled", "Axi2D sigma = 3 mS/m at 30 km, oscillation index vs dx",
           fig5_scenario, _run_fig5),
    Preset("cfl_divergence", "cfl_factor 0.9 stays bounded, 1.05 trips the divergence fault",
           cfl_scenario, _run_cfl),
)}


def preset_scenario(name: str) -> Scenario:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESETS[name].scenario()


def run_experiment(name: str, out_dir, scenario: Scenario | None = None,
                   overrides: dict | None = None) -> ExperimentResult:
    """Run a named preset and write its artifact directory.

    ``overrides`` patches grid keys (e.g. ``{"dx_m": 25}``) for quick runs.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    preset = PRESETS[name]
    out = Path(out_dir)
    for sub in ("reference", "fdtd", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    scenario = scenario or preset.scenario()
    overrides = dict(overrides or {})
    res = ExperimentResult(name, out)
    _json(out / "scenario.json", scenario_to_dict(scenario))
    t0 = time.perf_counter()
    preset.runner(scenario, out, res, overrides)
    manifest = {
        "preset": name,
        "description": preset.description,
        "scenario_id": scenario.id,
        "thresholds": THRESHOLDS[name],
        "overrides": overrides,
        "checks": [c.to_dict() for c in res.checks],
        "passed": res.passed,
        "runs": res.info.get("runs", {}),
        "wall_time_s": time.perf_counter() - t0,
    }
    for k, v in res.info.items():
        if k != "runs":
            manifest[k] = {str(a): b for a, b in v.items()} if isinstance(v, dict) else v
    _json(out / "manifest.json", manifest)
    return res
