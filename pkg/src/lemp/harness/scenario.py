"""Scenario files: a JSON key tree shared by the reference engine and the FDTD solver.

Layout (all sections except ``id``, ``observers`` and ``timebase`` optional)::

    {
      "id": "fig2_pec_1km",
      "mtle": {"lambda_m": 2000, "v_mps": 1.5e8, "height_m": 7500,
               "heidler": {"i1_a": ..., "tau11_s": ..., "tau12_s": ..., "n1": ...,
                           "i2_a": ..., "tau21_s": ..., "tau22_s": ..., "n2": ...}},
      "ground": {"kind": "lossy", "sigma_spm": 1e-3, "eps_r": 10},
      "observers": [{"r_m": 1000, "z_m": 5}],
      "timebase": {"dt_s": 8.66e-9, "n": 5771},
      "grid": {...},
      "pml": {...}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..channel import HeidlerParams, MtleModel
from ..fdtd.grid import AXI2D, CART3D, FACES, CpmlProfile, GridSpec
from ..groundfx import GroundModel
from ..waveform import ObservationPoint, Timebase


class ScenarioError(ValueError):
    """Invalid scenario content; ``path`` is the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


_HEIDLER_KEYS = {"i1_a": "i1", "tau11_s": "tau11", "tau12_s": "tau12", "n1": "n1",
                 "i2_a": "i2", "tau21_s": "tau21", "tau22_s": "tau22", "n2": "n2"}
_MTLE_KEYS = {"lambda_m": "lambda_decay", "v_mps": "v_front", "height_m": "channel_height"}
_GRID_KEYS = {"dimensionality", "dx_m", "extents_m", "ground_depth_m", "cfl_factor",
              "cfl_dims", "t_end_s", "n_steps", "channel_x_m"}
_PML_KEYS = {"thickness_cells": "thickness_cells", "m_order": "m_order",
             "kappa_max": "kappa_max", "alpha_max": "alpha_max", "sigma_ratio": "sigma_ratio",
             "faces": "faces"}


@dataclass(frozen=True)
class Scenario:
    id: str
    observers: tuple
    timebase: Timebase
    mtle: MtleModel = field(default_factory=MtleModel)
    ground: GroundModel = field(default_factory=GroundModel)
    grid: dict | None = None
    pml: dict | None = None

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("id", "must be a non-empty string")
        object.__setattr__(self, "observers", tuple(self.observers))


def _number(tree: dict, key: str, path: str, *, integer: bool = False):
    v = tree[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ScenarioError(f"{path}.{key}", f"expected an integer, got {v!r}")
    return int(v) if integer else float(v)


def _section(tree: dict, key: str, path: str) -> dict:
    v = tree.get(key)
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ScenarioError(f"{path}{key}", "expected an object")
    return v


def _reject_unknown(tree: dict, allowed, path: str):
    for k in tree:
        if k not in allowed:
            raise ScenarioError(f"{path}{k}", "unknown key")


def _build(path: str, ctor, **kwargs):
    try:
        return ctor(**kwargs)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def _parse_mtle(tree: dict) -> MtleModel:
    _reject_unknown(tree, set(_MTLE_KEYS) | {"heidler"}, "mtle.")
    h = _section(tree, "heidler", "mtle.")
    _reject_unknown(h, _HEIDLER_KEYS, "mtle.heidler.")
    hkw = {_HEIDLER_KEYS[k]: _number(h, k, "mtle.heidler") for k in h}
    base = _build("mtle.heidler", HeidlerParams, **hkw)
    mkw = {_MTLE_KEYS[k]: _number(tree, k, "mtle") for k in tree if k != "heidler"}
    return _build("mtle", MtleModel, base=base, **mkw)


def _parse_ground(tree: dict) -> GroundModel:
    _reject_unknown(tree, {"kind", "sigma_spm", "eps_r"}, "ground.")
    kind = tree.get("kind", "lossy")
    if kind not in ("pec", "lossy"):
        raise ScenarioError("ground.kind", f"expected 'pec' or 'lossy', got {kind!r}")
    if kind == "pec":
        for k in ("sigma_spm", "eps_r"):
            if k in tree:
                raise ScenarioError(f"ground.{k}", "not allowed with kind 'pec' (contradictory)")
        return GroundModel.pec()
    kw = {}
    if "sigma_spm" in tree:
        kw["sigma"] = _number(tree, "sigma_spm", "ground")
    if "eps_r" in tree:
        kw["eps_r"] = _number(tree, "eps_r", "ground")
    return _build("ground", GroundModel, kind="lossy", **kw)


def _parse_observers(items) -> tuple:
    if not isinstance(items, list) or not items:
        raise ScenarioError("observers", "expected a non-empty list")
    out = []
    for i, o in enumerate(items):
        path = f"observers[{i}]"
        if not isinstance(o, dict):
            raise ScenarioError(path, "expected an object")
        _reject_unknown(o, {"r_m", "z_m"}, path + ".")
        if "r_m" not in o:
            raise ScenarioError(path + ".r_m", "missing required field")
        r = _number(o, "r_m", path)
        if r <= 0:
            raise ScenarioError(path + ".r_m", "must be > 0")
        z = _number(o, "z_m", path) if "z_m" in o else 0.0
        out.append(ObservationPoint(r, z))
    return tuple(out)


def _parse_timebase(tree: dict) -> Timebase:
    _reject_unknown(tree, {"dt_s", "n"}, "timebase.")
    for k in ("dt_s", "n"):
        if k not in tree:
            raise ScenarioError(f"timebase.{k}", "missing required field")
    return _build("timebase", Timebase, dt=_number(tree, "dt_s", "timebase"),
                  n_samples=_number(tree, "n", "timebase", integer=True))


def _check_grid(tree: dict) -> dict:
    _reject_unknown(tree, _GRID_KEYS, "grid.")
    dim = tree.get("dimensionality")
    if dim is not None and dim not in (AXI2D, CART3D):
        raise ScenarioError("grid.dimensionality", f"expected {AXI2D!r} or {CART3D!r}")
    for k in tree:
        if k in ("dimensionality", "extents_m"):
            continue
        _number(tree, k, "grid", integer=k in ("cfl_dims", "n_steps"))
    if "extents_m" in tree:
        ext = tree["extents_m"]
        if not isinstance(ext, list) or not all(isinstance(e, (int, float)) for e in ext):
            raise ScenarioError("grid.extents_m", "expected a list of numbers")
    return dict(tree)


def _check_pml(tree: dict) -> dict:
    _reject_unknown(tree, _PML_KEYS, "pml.")
    faces = tree.get("faces", {})
    if not isinstance(faces, dict):
        raise ScenarioError("pml.faces", "expected an object")
    all_faces = set(FACES[AXI2D]) | set(FACES[CART3D])
    for k in faces:
        if k not in all_faces:
            raise ScenarioError(f"pml.faces.{k}", "unknown face")
    try:
        pml_profile(tree)
    except ValueError as exc:
        raise ScenarioError("pml", str(exc)) from None
    return dict(tree)


def parse_scenario(tree: dict) -> Scenario:
    """Validate a scenario key tree, applying the default channel and ground."""
    if not isinstance(tree, dict):
        raise ScenarioError("$", "scenario must be an object")
    _reject_unknown(tree, {"id", "mtle", "ground", "observers", "timebase", "grid", "pml"}, "")
    for k in ("id", "observers", "timebase"):
        if k not in tree:
            raise ScenarioError(k, "missing required field")
    if not isinstance(tree["id"], str) or not tree["id"]:
        raise ScenarioError("id", "expected a non-empty string")
    grid = _check_grid(_section(tree, "grid", "")) if "grid" in tree else None
    pml = _check_pml(_section(tree, "pml", "")) if "pml" in tree else None
    return Scenario(
        id=tree["id"],
        mtle=_parse_mtle(_section(tree, "mtle", "")),
        ground=_parse_ground(_section(tree, "ground", "")),
        observers=_parse_observers(tree["observers"]),
        timebase=_parse_timebase(_section(tree, "timebase", "")),
        grid=grid,
        pml=pml,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        tree = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"not valid JSON: {exc}") from None
    return parse_scenario(tree)


def scenario_to_dict(s: Scenario) -> dict:
    """Full key tree (defaults written out) that parses back to an equal Scenario."""
    h = s.mtle.base
    tree = {
        "id": s.id,
        "mtle": {
            "lambda_m": s.mtle.lambda_decay, "v_mps": s.mtle.v_front,
            "height_m": s.mtle.channel_height,
            "heidler": {k: getattr(h, a) for k, a in _HEIDLER_KEYS.items()},
        },
        "ground": ({"kind": "pec"} if s.ground.is_pec else
                   {"kind": "lossy", "sigma_spm": s.ground.sigma, "eps_r": s.ground.eps_r}),
        "observers": [{"r_m": o.r, "z_m": o.z} for o in s.observers],
        "timebase": {"dt_s": s.timebase.dt, "n": s.timebase.n_samples},
    }
    if s.grid is not None:
        tree["grid"] = dict(s.grid)
    if s.pml is not None:
        tree["pml"] = dict(s.pml)
    return tree


def save_scenario(s: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n", encoding="utf-8")
    return path


def pml_profile(tree: dict | None) -> CpmlProfile:
    kw = {_PML_KEYS[k]: v for k, v in (tree or {}).items()}
    if "faces" in kw:
        kw["faces"] = dict(kw["faces"])
    return CpmlProfile(**kw)


def grid_spec(s: Scenario, dimensionality: str | None = None, **overrides) -> GridSpec:
    """GridSpec from the scenario's grid section, keyword overrides and sizing defaults.

    Missing extents are sized to hold every observer and the channel with a
    margin of 20 cells plus the default 10-cell CPML on each absorbing face.
    """
    tree = dict(s.grid or {})
    tree.update({k: v for k, v in overrides.items() if v is not None})
    dim = dimensionality or tree.get("dimensionality", AXI2D)
    dx = float(tree.get("dx_m", 10.0))
    pad = 30 * dx
    ground_depth = float(tree.get("ground_depth_m", 0.0 if s.ground.is_pec else 40 * dx))
    r_max = max(o.r for o in s.observers)
    z_top = _ceil_to(s.mtle.channel_height + pad, dx)
    channel_x = tree.get("channel_x_m")
    if "extents_m" in tree:
        extents = tuple(tree["extents_m"])
    elif dim == AXI2D:
        extents = (_ceil_to(r_max + pad, dx), z_top + ground_depth)
    else:
        channel_x = channel_x if channel_x is not None else pad
        extents = (_ceil_to(channel_x + r_max + pad, dx), 2 * _ceil_to(pad, dx),
                   z_top + ground_depth)
    kw = dict(dimensionality=dim, dx=dx, extents=extents, ground_depth=ground_depth,
              cfl_factor=float(tree.get("cfl_factor", 0.9)), cfl_dims=tree.get("cfl_dims"),
              channel_x=channel_x)
    try:
        g = GridSpec(**kw)
        t_end = tree.get("t_end_s", s.timebase.duration)
        n_steps = int(tree.get("n_steps", g.steps_for(t_end)))
        return GridSpec(**kw, n_steps=n_steps)
    except ValueError as exc:
        raise ScenarioError("grid", str(exc)) from None


def _ceil_to(x: float, dx: float) -> float:
    return float(-(-round(x / dx, 6) // 1) * dx)
