"""1-D normal-incidence reflection test for a CPML profile.

A Gaussian pulse travels toward the boundary of a short line. The field
scattered back to a probe is isolated by subtracting an incident-only run
on a line long enough that nothing returns in time. Its energy is compared
with the same measurement for a PEC wall at the same location.
"""

from __future__ import annotations

import numpy as np

from ..constants import EPS0, MU0
from .grid import CpmlProfile, cfl_timestep, cpml_coeffs


def _line(n_cells: int, layer: int, profile: CpmlProfile | None, dx: float, dt: float,
          n_steps: int, src: int, probe: int, width: float) -> np.ndarray:
    ez = np.zeros(n_cells + 1)
    hy = np.zeros(n_cells)

    def coeffs(pos):
        xi = np.clip((pos - (n_cells - layer)) / max(layer, 1), 0.0, 1.0)
        if profile is None or layer == 0:
            return np.ones(pos.size), np.zeros(pos.size), np.ones(pos.size)
        b, a, k = cpml_coeffs(profile, xi, dt, dx)
        inside = xi > 0
        return np.where(inside, b, 1.0), np.where(inside, a, 0.0), np.where(inside, k, 1.0)

    be, ae, ke = coeffs(np.arange(n_cells + 1, dtype=float))
    bh, ah, kh = coeffs(np.arange(n_cells, dtype=float) + 0.5)
    pe = np.zeros(n_cells + 1)
    ph = np.zeros(n_cells)
    t0, tw = 4 * width * dx / 299792458.0, width * dx / 299792458.0
    rec = np.empty(n_steps)
    for n in range(n_steps):
        d = (ez[1:] - ez[:-1]) / dx
        ph = bh * ph + ah * d
        hy += dt / MU0 * (d / kh + ph)
        d = np.zeros(n_cells + 1)
        d[1:-1] = (hy[1:] - hy[:-1]) / dx
        pe = be * pe + ae * d
        ez += dt / EPS0 * (d / ke + pe)
        ez[src] -= dt / EPS0 * np.exp(-(((n + 0.5) * dt - t0) / tw) ** 2) / dx
        rec[n] = ez[probe]
    return rec


def reflection_db(profile: CpmlProfile | None = None, dx: float = 5.0, width_cells: float = 20.0,
                  n_cells: int = 400, n_steps: int = 2500) -> float:
    """Reflected energy of a CPML-terminated line relative to a PEC wall, in dB."""
    profile = profile or CpmlProfile()
    layer = profile.thickness_cells
    dt = cfl_timestep(dx, 1, 0.9)
    src, probe = n_cells // 4, n_cells // 2
    args = (dx, dt, n_steps, src, probe, width_cells)
    long_line = n_cells + 2 * n_steps
    incident = _line(long_line, 0, None, *args)
    pec = _line(n_cells, 0, None, *args) - incident
    cpml = _line(n_cells, layer, profile, *args) - incident
    return float(10.0 * np.log10(np.sum(cpml ** 2) / np.sum(pec ** 2)))
