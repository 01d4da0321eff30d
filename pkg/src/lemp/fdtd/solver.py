"""FDTD simulation state, construction and time stepping."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..channel import MtleModel, mtle_current
from ..constants import ETA0
from ..groundfx import GroundModel
from ..waveform import COMPONENT_ALIASES, FieldWaveform, ObservationPoint, Timebase
from . import kernels
from .grid import AXI2D, CART3D, CpmlProfile, GridSpec, axis_profile, h_coeff, material_coeffs

log = logging.getLogger(__name__)

DIVERGENCE_RATIO = 1e6
DIVERGENCE_LAG = 100
GROWTH_WINDOW = 5
GROWTH_RATIO = 5.0
GROWTH_START = 20

DTYPES = {"single": np.float32, "double": np.float64}


class DivergenceError(RuntimeError):
    def __init__(self, step: int, value: float, reference: float):
        self.step = step
        self.value = value
        self.reference = reference
        super().__init__(f"FDTD diverged at step {step}: max field {value:.3e} "
                         f"vs reference scale {reference:.3e}")


@dataclass(frozen=True)
class Probe:
    """Field sampling point. For Cartesian grids (r, z) is measured along +x from the channel."""

    component: str
    r: float
    z: float
    label: str = ""

    def __post_init__(self):
        comp = {"Ex": "Er"}.get(self.component, COMPONENT_ALIASES.get(self.component))
        if comp is None:
            raise ValueError(f"unknown probe component {self.component!r}")
        object.__setattr__(self, "component", comp)

    @property
    def name(self) -> str:
        return self.label or f"{self.component}_r{self.r:g}_z{self.z:g}"


@dataclass
class _ProbeTap:
    probe: Probe
    array: str
    index: tuple          # tuple of index arrays
    weights: np.ndarray
    values: np.ndarray
    last: float = 0.0


@dataclass
class StabilityReport:
    max_e: np.ndarray
    max_h: np.ndarray
    energy: np.ndarray
    growth_flag: bool
    growth_step: int | None


@dataclass
class SimulationState:
    grid: GridSpec
    pml: CpmlProfile
    model: MtleModel
    ground: GroundModel
    precision: str
    fields: dict
    coeffs: dict
    psi: dict
    profiles: dict
    source_index: tuple
    source_coef: np.ndarray
    source_z: np.ndarray
    taps: list
    scenario_id: str = ""
    step_count: int = 0
    max_e: list = field(default_factory=list)
    max_h: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    running_max: list = field(default_factory=list)
    growth_step: int | None = None
    init_time: float = 0.0

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def time(self) -> float:
        return self.step_count * self.grid.dt

    def allocated_bytes(self) -> int:
        arrays = list(self.fields.values()) + list(self.coeffs.values()) + list(self.psi.values())
        return int(sum(a.nbytes for a in arrays))


# --------------------------------------------------------------------------- layout

def _face_layers(grid: GridSpec, pml: CpmlProfile) -> dict:
    layers = {f: pml.thickness(f) for f in
              (("r_max", "z_max", "z_min") if grid.dimensionality == AXI2D else
               ("x_min", "x_max", "y_min", "y_max", "z_max", "z_min"))}
    if grid.ground_level_index == 0:
        layers["z_min"] = 0
    return layers


def array_shapes(grid: GridSpec, pml: CpmlProfile) -> dict:
    """Shapes of every field, coefficient and CPML array the solver allocates."""
    L = _face_layers(grid, pml)
    if grid.dimensionality == AXI2D:
        nr, nz = grid.shape
        sr, sz = L["r_max"], L["z_max"] + L["z_min"]
        return {
            "ez": (nr + 1, nz), "er": (nr, nz + 1), "hp": (nr, nz),
            "ca_ez": (nr + 1, nz), "cb_ez": (nr + 1, nz),
            "ca_er": (nr, nz + 1), "cb_er": (nr, nz + 1),
            "da_hp": (nr, nz), "db_hp": (nr, nz),
            "psi_hp_r": (sr, nz), "psi_hp_z": (nr, sz),
            "psi_ez_r": (sr, nz), "psi_er_z": (nr, sz),
        }
    nx, ny, nz = grid.shape
    sx = L["x_min"] + L["x_max"]
    sy = L["y_min"] + L["y_max"]
    sz = L["z_max"] + L["z_min"]
    f = {"ex": (nx, ny + 1, nz + 1), "ey": (nx + 1, ny, nz + 1), "ez": (nx + 1, ny + 1, nz),
         "hx": (nx + 1, ny, nz), "hy": (nx, ny + 1, nz), "hz": (nx, ny, nz + 1)}
    shapes = dict(f)
    for c in ("ex", "ey", "ez"):
        shapes["ca_" + c] = shapes["cb_" + c] = f[c]
    for c in ("hx", "hy", "hz"):
        shapes["da_" + c] = shapes["db_" + c] = f[c]
    shapes.update({
        "p_hx_y": (nx + 1, sy, nz), "p_hx_z": (nx + 1, ny, sz),
        "p_hy_z": (nx, ny + 1, sz), "p_hy_x": (sx, ny + 1, nz),
        "p_hz_x": (sx, ny, nz + 1), "p_hz_y": (nx, sy, nz + 1),
        "p_ex_y": (nx, sy, nz + 1), "p_ex_z": (nx, ny + 1, sz),
        "p_ey_z": (nx + 1, ny, sz), "p_ey_x": (sx, ny, nz + 1),
        "p_ez_x": (sx, ny + 1, nz), "p_ez_y": (nx + 1, sy, nz),
    })
    return shapes


def memory_estimate(grid: GridSpec, pml: CpmlProfile, precision: str = "single") -> int:
    """Bytes needed for fields, material coefficients and CPML memory (no allocation)."""
    item = np.dtype(DTYPES[precision]).itemsize
    return int(sum(math.prod(s) for s in array_shapes(grid, pml).values()) * item)


# --------------------------------------------------------------------------- build

def _node_material(zc, k0_z, ground: GroundModel):
    """(sigma, eps_r) arrays for nodes at heights zc (interface nodes averaged)."""
    sigma = np.zeros(zc.size)
    eps = np.ones(zc.size)
    if ground.is_pec:
        return sigma, eps
    below = zc < -1e-9
    at = np.abs(zc) <= 1e-9
    sigma[below] = ground.sigma
    eps[below] = ground.eps_r
    sigma[at] = 0.5 * ground.sigma
    eps[at] = 0.5 * (1.0 + ground.eps_r)
    return sigma, eps


def build(scenario, grid: GridSpec, pml: CpmlProfile | None = None, probes=(),
          precision: str = "single", mirror_source: bool = False) -> SimulationState:
    """Allocate and initialise a simulation for ``scenario`` (needs .mtle, .ground, .id).

    With ``mirror_source`` the channel is reflected below z = 0 (image
    current), which in free space reproduces the PEC-ground problem.
    """
    t0 = time.perf_counter()
    pml = pml or CpmlProfile()
    model: MtleModel = scenario.mtle
    ground: GroundModel = scenario.ground
    dtype = DTYPES[precision]
    dx, dt = grid.dx, grid.dt
    k0 = grid.ground_level_index
    if ground.is_pec and k0 != 0:
        raise ValueError("PEC ground is the lower wall; set ground_depth = 0")
    if not ground.is_pec and k0 == 0:
        raise ValueError("lossy ground needs ground_depth > 0")
    L = _face_layers(grid, pml)
    z_bottom = -grid.ground_depth
    z_top = grid.extents[-1] + z_bottom
    if model.channel_height > z_top - L["z_max"] * dx + 1e-9:
        raise ValueError(f"channel height {model.channel_height} m does not fit below the "
                         f"top CPML (air column {z_top - L['z_max'] * dx} m)")
    if mirror_source and model.channel_height > -z_bottom - L["z_min"] * dx + 1e-9:
        raise ValueError("mirrored channel does not fit above the bottom CPML")

    shapes = array_shapes(grid, pml)
    fields, coeffs, psi = {}, {}, {}
    for name, shape in shapes.items():
        arr = np.zeros(shape, dtype=dtype)
        if name.startswith(("ca_", "cb_", "da_", "db_")):
            coeffs[name] = arr
        elif name.startswith(("psi_", "p_")):
            psi[name] = arr
        else:
            fields[name] = arr

    nz_cells = grid.shape[-1]
    z_int = z_bottom + np.arange(nz_cells + 1) * dx
    z_half = z_bottom + (np.arange(nz_cells) + 0.5) * dx
    hcoef = h_coeff(dt, dx)
    eps_low = 1.0 if ground.is_pec else ground.eps_r

    if grid.dimensionality == AXI2D:
        s_half, e_half = _node_material(z_half, k0, ground)
        s_int, e_int = _node_material(z_int, k0, ground)
        ca, cb = material_coeffs(s_half, e_half, dt, dx)
        coeffs["ca_ez"][:] = ca[None, :]
        coeffs["cb_ez"][:] = cb[None, :]
        ca, cb = material_coeffs(s_int, e_int, dt, dx)
        coeffs["ca_er"][:] = ca[None, :]
        coeffs["cb_er"][:] = cb[None, :]
        coeffs["da_hp"][:] = 1.0
        coeffs["db_hp"][:] = hcoef
        nr, nz = grid.shape
        profiles = {
            "r": axis_profile(nr, 0, L["r_max"], pml, dt, dx, dtype=dtype),
            "z": axis_profile(nz, L["z_min"], L["z_max"], pml, dt, dx, eps_low=eps_low, dtype=dtype),
        }
        area = math.pi * (dx / 2.0) ** 2
        src_i = np.zeros(0, dtype=np.int64)
    else:
        nx, ny, nz = grid.shape
        s_half, e_half = _node_material(z_half, k0, ground)
        s_int, e_int = _node_material(z_int, k0, ground)
        for c, (s, e) in (("ex", (s_int, e_int)), ("ey", (s_int, e_int)), ("ez", (s_half, e_half))):
            ca, cb = material_coeffs(s, e, dt, dx)
            coeffs["ca_" + c][:] = ca[None, None, :]
            coeffs["cb_" + c][:] = cb[None, None, :]
        for c in ("hx", "hy", "hz"):
            coeffs["da_" + c][:] = 1.0
            coeffs["db_" + c][:] = hcoef
        profiles = {
            "x": axis_profile(nx, L["x_min"], L["x_max"], pml, dt, dx, dtype=dtype),
            "y": axis_profile(ny, L["y_min"], L["y_max"], pml, dt, dx, dtype=dtype),
            "z": axis_profile(nz, L["z_min"], L["z_max"], pml, dt, dx, eps_low=eps_low, dtype=dtype),
        }
        area = dx * dx

    # source rows: axis Ez cells whose centre lies on the channel
    H = model.channel_height
    rows = np.flatnonzero((z_half >= 0) & (z_half <= H))
    src_z = z_half[rows]
    if mirror_source:
        mrows = np.flatnonzero((z_half < 0) & (z_half >= -H))
        rows = np.concatenate([mrows, rows])
        src_z = np.abs(z_half[rows])
    if grid.dimensionality == AXI2D:
        index = (np.zeros(rows.size, dtype=np.int64), rows)
    else:
        ic, jc = _channel_cell(grid, L)
        index = (np.full(rows.size, ic), np.full(rows.size, jc), rows)
    src_coef = (coeffs["cb_ez"][index].astype(float) * dx / area)

    state = SimulationState(grid=grid, pml=pml, model=model, ground=ground, precision=precision,
                            fields=fields, coeffs=coeffs, psi=psi, profiles=profiles,
                            source_index=index, source_coef=src_coef, source_z=src_z, taps=[],
                            scenario_id=getattr(scenario, "id", ""))
    for p in probes:
        state.taps.append(_make_tap(state, p, L))
    state.init_time = time.perf_counter() - t0
    return state


def _channel_cell(grid: GridSpec, L: dict) -> tuple:
    nx, ny, _ = grid.shape
    x = grid.channel_x if grid.channel_x is not None else (L["x_min"] + 10) * grid.dx
    ic = int(round(x / grid.dx))
    if ic <= L["x_min"] or ic >= nx - L["x_max"]:
        raise ValueError("channel lies inside the x CPML")
    if ny % 2:
        raise ValueError("Cartesian grids need an even cell count along y (centred channel)")
    return ic, ny // 2


_AXI_ARRAYS = {"Ez": ("ez", 0.0, 0.5), "Er": ("er", 0.5, 0.0), "Hphi": ("hp", 0.5, 0.5)}
_CART_ARRAYS = {"Ez": ("ez", 0.0, 0.5), "Er": ("ex", 0.5, 0.0), "Hphi": ("hy", 0.5, 0.5)}


def _axis_weights(pos: float, n_nodes: int):
    i0 = int(math.floor(pos + 1e-9))
    w = pos - i0
    if abs(w) < 1e-9:
        return [i0], [1.0]
    if i0 < 0 or i0 + 1 >= n_nodes:
        raise ValueError("probe lies outside the grid")
    return [i0, i0 + 1], [1.0 - w, w]


def _make_tap(state: SimulationState, probe: Probe, L: dict) -> _ProbeTap:
    grid = state.grid
    dx = grid.dx
    z_bottom = -grid.ground_depth
    k0 = grid.ground_level_index
    if probe.component == "Ez" and probe.z < dx - 1e-9:
        raise ValueError(f"Ez probes must sit at least one cell (dx={dx} m) above ground")
    if grid.dimensionality == AXI2D:
        name, r_off, z_off = _AXI_ARRAYS[probe.component]
        x_pos = probe.r / dx - r_off
        n_x = grid.shape[0]
        x_lo, x_hi = 0, n_x - L["r_max"]
    else:
        name, r_off, z_off = _CART_ARRAYS[probe.component]
        ic, jc = _channel_cell(grid, L)
        x_pos = ic + probe.r / dx - r_off
        n_x = grid.shape[0]
        x_lo, x_hi = L["x_min"], n_x - L["x_max"]
        if L["y_min"] >= jc or L["y_max"] >= grid.shape[1] - jc:
            raise ValueError("probe line lies inside the y CPML")
    z_pos = (probe.z - z_bottom) / dx - z_off
    shape = state.fields[name].shape
    xs, wx = _axis_weights(x_pos, shape[0])
    zs, wz = _axis_weights(z_pos, shape[-1])
    nz = grid.shape[-1]
    z_lo = L["z_min"]
    z_hi = nz - L["z_max"]
    if min(xs) < x_lo or max(xs) + r_off > x_hi or min(zs) + z_off < z_lo or max(zs) + z_off > z_hi:
        raise ValueError(f"probe {probe.name} touches the CPML region")
    if probe.component == "Ez" and min(zs) < k0:
        raise ValueError("Ez probe stencil reaches into the ground")
    ii, kk, ww = [], [], []
    for a, wa in zip(xs, wx):
        for b, wb in zip(zs, wz):
            ii.append(a)
            kk.append(b)
            ww.append(wa * wb)
    if grid.dimensionality == AXI2D:
        index = (np.array(ii), np.array(kk))
    else:
        index = (np.array(ii), np.full(len(ii), jc), np.array(kk))
    n = grid.n_steps + 1
    return _ProbeTap(probe, name, index, np.array(ww), np.zeros(n))


# --------------------------------------------------------------------------- stepping

def inject_source(state: SimulationState, model: MtleModel | None, t: float) -> None:
    """Impressed channel current at time t subtracted from the axis Ez update."""
    model = model or state.model
    if state.source_z.size == 0:
        return
    current = mtle_current(state.source_z, t, model)
    ez = state.fields["ez"]
    ez[state.source_index] -= (state.source_coef * current).astype(ez.dtype)


def injected_charge(state: SimulationState, n_steps: int, row: int = 0) -> float:
    """Charge the source pushes through one channel row over n_steps (bookkeeping check)."""
    t = (np.arange(n_steps) + 0.5) * state.dt
    z = np.full(t.size, state.source_z[row])
    return float(np.sum(mtle_current(z, t, state.model)) * state.dt)


def _update(state: SimulationState) -> None:
    f, c, p, pr = state.fields, state.coeffs, state.psi, state.profiles
    if state.grid.dimensionality == AXI2D:
        r, z = pr["r"], pr["z"]
        kernels.axi_update_h(f["hp"], f["ez"], f["er"], c["da_hp"], c["db_hp"],
                             r.kinv_half, r.b_half, r.a_half, r.slot_half, p["psi_hp_r"],
                             z.kinv_half, z.b_half, z.a_half, z.slot_half, p["psi_hp_z"])
        kernels.axi_update_e(f["ez"], f["er"], f["hp"], c["ca_ez"], c["cb_ez"], c["ca_er"], c["cb_er"],
                             r.kinv_int, r.b_int, r.a_int, r.slot_int, p["psi_ez_r"],
                             z.kinv_int, z.b_int, z.a_int, z.slot_int, p["psi_er_z"])
    else:
        x, y, z = pr["x"], pr["y"], pr["z"]
        kernels.cart_update_h(
            f["hx"], f["hy"], f["hz"], f["ex"], f["ey"], f["ez"],
            c["da_hx"], c["db_hx"], c["da_hy"], c["db_hy"], c["da_hz"], c["db_hz"],
            x.kinv_half, x.b_half, x.a_half, x.slot_half,
            y.kinv_half, y.b_half, y.a_half, y.slot_half,
            z.kinv_half, z.b_half, z.a_half, z.slot_half,
            p["p_hx_y"], p["p_hx_z"], p["p_hy_z"], p["p_hy_x"], p["p_hz_x"], p["p_hz_y"])
        kernels.cart_update_e(
            f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"],
            c["ca_ex"], c["cb_ex"], c["ca_ey"], c["cb_ey"], c["ca_ez"], c["cb_ez"],
            x.kinv_int, x.b_int, x.a_int, x.slot_int,
            y.kinv_int, y.b_int, y.a_int, y.slot_int,
            z.kinv_int, z.b_int, z.a_int, z.slot_int,
            p["p_ex_y"], p["p_ex_z"], p["p_ey_z"], p["p_ey_x"], p["p_ez_x"], p["p_ez_y"])


def _monitor(state: SimulationState):
    f = state.fields
    if state.grid.dimensionality == AXI2D:
        return kernels.axi_monitor(f["ez"], f["er"], f["hp"], state.grid.dx)
    return kernels.cart_monitor(f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"], state.grid.dx)


def _record(state: SimulationState) -> None:
    n = state.step_count
    for tap in state.taps:
        arr = state.fields[tap.array]
        v = float(np.dot(arr[tap.index].astype(float), tap.weights))
        if tap.array in ("hp", "hx", "hy", "hz"):
            # H lives at t_{n-1/2}; average neighbours onto the E time grid
            if n - 1 < tap.values.size:
                tap.values[n - 1] = 0.5 * (tap.last + v)
            tap.last = v
        elif n < tap.values.size:
            tap.values[n] = v


def step(state: SimulationState) -> None:
    """Advance one Yee cycle: H to t+dt/2, E to t+dt with the source at t+dt/2."""
    _update(state)
    inject_source(state, None, (state.step_count + 0.5) * state.dt)
    state.step_count += 1
    _record(state)
    e, h, w = _monitor(state)
    n = state.step_count
    state.max_e.append(e)
    state.max_h.append(h)
    state.energy.append(w)
    mag = max(e, ETA0 * h)
    prev = state.running_max[-1] if state.running_max else 0.0
    state.running_max.append(max(prev, mag) if math.isfinite(mag) else math.inf)
    if state.growth_step is None and _growing(state):
        state.growth_step = n
        log.warning("exponential field growth detected at step %d", n)
    ref = state.running_max[n - 1 - DIVERGENCE_LAG] if n > DIVERGENCE_LAG else 0.0
    if not math.isfinite(mag) or (ref > 0 and mag > DIVERGENCE_RATIO * ref):
        raise DivergenceError(n, mag, ref)


def _growing(state: SimulationState) -> bool:
    n = len(state.max_e)
    w = GROWTH_WINDOW
    if n < max(GROWTH_START, 2 * w + 1):
        return False
    m = state.max_e
    a, b, c = m[-1], m[-1 - w], m[-1 - 2 * w]
    if not math.isfinite(a):
        return True
    return c > 0 and b > GROWTH_RATIO * c and a > GROWTH_RATIO * b


def run(state: SimulationState, n_steps: int | None = None, progress: int = 0) -> dict:
    """Advance ``n_steps`` (default grid.n_steps) and return probe waveforms by name."""
    n_steps = state.grid.n_steps if n_steps is None else n_steps
    needed = state.step_count + n_steps + 1
    for tap in state.taps:
        if tap.values.size < needed:
            tap.values = np.concatenate([tap.values, np.zeros(needed - tap.values.size)])
    t0 = time.perf_counter()
    for i in range(n_steps):
        step(state)
        if progress and (i + 1) % progress == 0:
            el = time.perf_counter() - t0
            log.info("step %d/%d  %.1f ms/step", i + 1, n_steps, 1e3 * el / (i + 1))
    return probe_waveforms(state)


def probe_waveforms(state: SimulationState) -> dict:
    n = state.step_count + 1
    tb = Timebase(state.dt, n)
    out = {}
    for tap in state.taps:
        vals = tap.values[:n].copy()
        if tap.array in ("hp", "hx", "hy", "hz") and n >= 2:
            vals[n - 1] = tap.last
        out[tap.probe.name] = FieldWaveform(
            tap.probe.component, vals, tb, ObservationPoint(tap.probe.r, tap.probe.z),
            state.scenario_id, meta={"solver": state.grid.dimensionality, "dx": state.grid.dx})
    return out


def stability_report(state: SimulationState) -> StabilityReport:
    return StabilityReport(np.array(state.max_e), np.array(state.max_h), np.array(state.energy),
                           state.growth_step is not None, state.growth_step)
