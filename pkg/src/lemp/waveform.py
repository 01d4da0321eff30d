"""Sampled field waveforms and their CSV representation.

CSV layout (UTF-8, LF line endings)::

    # scenario_id=fig2_pec_1km
    # component=Ez
    # unit=V/m
    # dt_s=1.00000000e-08
    # r_m=1.00000000e+03
    # z_m=5.00000000e+00
    t_s,value
    0.00000000e+00,0.00000000e+00
    ...

Numbers use scientific notation with 9 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

UNITS = {"Ez": "V/m", "Ex": "V/m", "Er": "V/m", "Hphi": "A/m"}
COMPONENT_ALIASES = {"Hy": "Hphi", "Ex": "Ex", "Er": "Er", "Ez": "Ez", "Hphi": "Hphi"}


def _fmt(x: float) -> str:
    return f"{x:.8e}"


@dataclass(frozen=True)
class Timebase:
    dt: float
    n_samples: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_samples < 2:
            raise ValueError(f"need at least 2 samples, got {self.n_samples}")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @classmethod
    def from_times(cls, t, rtol: float = 1e-3) -> "Timebase":
        t = np.asarray(t, dtype=float)
        if t.size < 2:
            raise ValueError("need at least 2 samples")
        steps = np.diff(t)
        dt = (t[-1] - t[0]) / (t.size - 1)
        if abs(t[0]) > rtol * dt or np.any(np.abs(steps - dt) > rtol * dt):
            raise ValueError("time axis is not uniform starting at t=0")
        return cls(dt, t.size)


@dataclass(frozen=True)
class ObservationPoint:
    """Horizontal distance ``r`` from the channel and height ``z`` (negative below ground)."""

    r: float
    z: float = 0.0


@dataclass(frozen=True, eq=False)
class FieldWaveform:
    component: str
    values: np.ndarray
    timebase: Timebase
    point: ObservationPoint
    scenario_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        comp = COMPONENT_ALIASES.get(self.component)
        if comp is None:
            raise ValueError(f"unknown component {self.component!r}")
        object.__setattr__(self, "component", comp)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.timebase.n_samples,):
            raise ValueError(f"expected {self.timebase.n_samples} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "values", values)

    @property
    def unit(self) -> str:
        return UNITS[self.component]

    @property
    def times(self) -> np.ndarray:
        return self.timebase.times

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values, **changes) -> "FieldWaveform":
        return replace(self, values=values, **changes)

    def resampled(self, tb: Timebase) -> "FieldWaveform":
        """Linear interpolation onto another timebase (zero beyond the record)."""
        v = np.interp(tb.times, self.times, self.values, left=0.0, right=0.0)
        return replace(self, values=v, timebase=tb)

    def truncated(self, n_samples: int) -> "FieldWaveform":
        tb = Timebase(self.timebase.dt, n_samples)
        return replace(self, values=self.values[:n_samples], timebase=tb)


def write_csv(w: FieldWaveform, path) -> Path:
    path = Path(path)
    lines = [
        f"# scenario_id={w.scenario_id}",
        f"# component={w.component}",
        f"# unit={w.unit}",
        f"# dt_s={_fmt(w.timebase.dt)}",
        f"# r_m={_fmt(w.point.r)}",
        f"# z_m={_fmt(w.point.z)}",
        "t_s,value",
    ]
    lines.extend(f"{_fmt(t)},{_fmt(v)}" for t, v in zip(w.times, w.values))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path) -> FieldWaveform:
    meta = {}
    t, v = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line == "t_s,value" or not line:
                continue
            else:
                a, b = line.split(",")
                t.append(float(a))
                v.append(float(b))
    for key in ("component", "dt_s", "r_m", "z_m"):
        if key not in meta:
            raise ValueError(f"{path}: missing metadata line '# {key}=...'")
    tb = Timebase.from_times(t)
    return FieldWaveform(
        component=meta["component"],
        values=np.array(v),
        timebase=Timebase(float(meta["dt_s"]), tb.n_samples),
        point=ObservationPoint(float(meta["r_m"]), float(meta["z_m"])),
        scenario_id=meta.get("scenario_id", ""),
    )
