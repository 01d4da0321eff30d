"""Grid, time step, material and CPML coefficient definitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..constants import C0, EPS0, MU0

AXI2D = "axi2d"
CART3D = "cart3d"

FACES = {
    AXI2D: ("r_max", "z_max", "z_min"),
    CART3D: ("x_min", "x_max", "y_min", "y_max", "z_max", "z_min"),
}


def cfl_timestep(dx: float, dims: int, cfl_factor: float, unsafe: bool = False) -> float:
    """dt = cfl_factor * dx / (c0 * sqrt(dims))."""
    if not cfl_factor > 0:
        raise ValueError("cfl_factor must be > 0")
    if cfl_factor > 1 and not unsafe:
        raise ValueError(f"cfl_factor={cfl_factor} exceeds the stability bound; "
                         "pass unsafe=True to force it")
    if dims not in (1, 2, 3):
        raise ValueError("dims must be 1, 2 or 3")
    return cfl_factor * dx / (C0 * math.sqrt(dims))


@dataclass(frozen=True)
class GridSpec:
    """Uniform FDTD lattice.

    ``extents`` is the full domain size per axis, PML and ground included:
    (r, z) for the axisymmetric grid and (x, y, z) for the Cartesian one.
    ``ground_depth`` is the thickness of soil below the interface; it is 0
    for PEC ground, whose surface is then the lower domain wall.
    ``cfl_dims`` overrides the dimension count used in the CFL bound (the
    full-scale presets use 3 on the axisymmetric grid to reproduce the 3-D
    solvers' time step). ``channel_x`` places the Cartesian channel at that
    distance from the x_min wall; y is always centred.
    """

    dimensionality: str
    dx: float
    extents: tuple
    ground_depth: float = 0.0
    cfl_factor: float = 0.9
    cfl_dims: int | None = None
    n_steps: int = 0
    channel_x: float | None = None
    unsafe_cfl: bool = False

    def __post_init__(self):
        kind = self.dimensionality.lower()
        if kind not in FACES:
            raise ValueError(f"unknown grid kind {self.dimensionality!r}")
        object.__setattr__(self, "dimensionality", kind)
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        if len(self.extents) != self.ndim:
            raise ValueError(f"{kind} needs {self.ndim} extents, got {len(self.extents)}")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        for e in self.extents + (self.ground_depth,):
            n = e / self.dx
            if abs(n - round(n)) > 1e-6 or e < 0:
                raise ValueError(f"extent {e} m is not a non-negative multiple of dx={self.dx}")
        if self.ground_depth >= self.extents[-1]:
            raise ValueError("ground depth must be smaller than the vertical extent")
        # evaluating dt validates the CFL factor
        self.dt

    @property
    def ndim(self) -> int:
        return 2 if self.dimensionality == AXI2D else 3

    @property
    def dt(self) -> float:
        return cfl_timestep(self.dx, self.cfl_dims or self.ndim, self.cfl_factor,
                            unsafe=self.unsafe_cfl)

    @property
    def shape(self) -> tuple:
        return tuple(int(round(e / self.dx)) for e in self.extents)

    @property
    def cells(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def ground_level_index(self) -> int:
        return int(round(self.ground_depth / self.dx))

    def steps_for(self, t_end: float) -> int:
        return int(math.ceil(t_end / self.dt - 1e-9))


@dataclass(frozen=True)
class CpmlProfile:
    """Polynomially graded CPML.

    ``alpha_max`` is expressed in units of eps0*c0/dx, so the
    complex-frequency shift per cell transit does not depend on the cell
    size. ``faces`` overrides the thickness of individual faces; a value of
    0 turns that face into a plain PEC wall.
    """

    thickness_cells: int = 10
    m_order: float = 3.0
    kappa_max: float = 5.0
    alpha_max: float = 0.05
    sigma_ratio: float = 1.0
    faces: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.thickness_cells < 1:
            raise ValueError("thickness_cells must be >= 1")
        if not 2 <= self.m_order <= 4:
            raise ValueError("m_order must lie in [2, 4]")
        if self.kappa_max < 1:
            raise ValueError("kappa_max must be >= 1")
        if self.alpha_max < 0 or self.sigma_ratio < 0:
            raise ValueError("alpha_max and sigma_ratio must be >= 0")
        for face, n in self.faces.items():
            if int(n) != n or n < 0:
                raise ValueError(f"face {face}: thickness must be a non-negative integer")

    def thickness(self, face: str) -> int:
        return int(self.faces.get(face, self.thickness_cells))

    def sigma_max(self, dx: float, eps_r: float = 1.0) -> float:
        return self.sigma_ratio * (self.m_order + 1) / (150.0 * math.pi * dx * math.sqrt(eps_r))


def cpml_coeffs(profile: CpmlProfile, depth_fraction, dt: float, dx: float, eps_r: float = 1.0):
    """Recursive-convolution coefficients (b, a, kappa) at a depth fraction in [0, 1].

    0 is the inner edge of the layer and 1 the outer wall.
    """
    xi = np.clip(np.asarray(depth_fraction, dtype=float), 0.0, 1.0)
    grade = xi ** profile.m_order
    sigma = profile.sigma_max(dx, eps_r) * grade
    kappa = 1.0 + (profile.kappa_max - 1.0) * grade
    alpha = profile.alpha_max * EPS0 * C0 / dx * (1.0 - xi)
    b = np.exp(-(sigma / kappa + alpha) * dt / EPS0)
    den = sigma * kappa + kappa * kappa * alpha
    a = np.divide(sigma, den, out=np.zeros_like(sigma), where=sigma > 0) * (b - 1.0)
    return b, a, kappa


def material_coeffs(sigma, eps_r, dt: float, dx: float):
    """Semi-implicit lossy-medium E update coefficients (Ca, Cb)."""
    sigma = np.asarray(sigma, dtype=float)
    eps = EPS0 * np.asarray(eps_r, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("conductivity must be >= 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        q = sigma * dt / (2.0 * eps)
        ca = np.where(np.isinf(q), -1.0, (1.0 - q) / (1.0 + q))
        cb = np.where(np.isinf(q), 0.0, dt / (eps * dx) / (1.0 + q))
    return ca, cb


def h_coeff(dt: float, dx: float) -> float:
    return dt / (MU0 * dx)


@dataclass(frozen=True)
class AxisProfile:
    """CPML data along one axis, at integer and half-integer node positions."""

    kinv_int: np.ndarray
    b_int: np.ndarray
    a_int: np.ndarray
    slot_int: np.ndarray
    kinv_half: np.ndarray
    b_half: np.ndarray
    a_half: np.ndarray
    slot_half: np.ndarray

    @property
    def n_slots_int(self) -> int:
        return int(self.slot_int.max() + 1) if self.slot_int.size else 0

    @property
    def n_slots_half(self) -> int:
        return int(self.slot_half.max() + 1) if self.slot_half.size else 0


def axis_profile(n_cells: int, low: int, high: int, profile: CpmlProfile, dt: float, dx: float,
                 eps_low: float = 1.0, eps_high: float = 1.0, dtype=np.float64) -> AxisProfile:
    """Build the per-node CPML arrays for an axis with ``low``/``high`` layer cells."""

    def at(pos):
        b = np.ones(pos.size)
        a = np.zeros(pos.size)
        kappa = np.ones(pos.size)
        inside = np.zeros(pos.size, dtype=bool)
        for n_layer, xi, eps_r in ((low, (low - pos) / max(low, 1), eps_low),
                                   (high, (pos - (n_cells - high)) / max(high, 1), eps_high)):
            if n_layer <= 0:
                continue
            sel = xi > 1e-12
            bb, aa, kk = cpml_coeffs(profile, xi[sel], dt, dx, eps_r)
            b[sel], a[sel], kappa[sel] = bb, aa, kk
            inside |= sel
        slot = np.full(pos.size, -1, dtype=np.int64)
        slot[inside] = np.arange(int(inside.sum()))
        return (1.0 / kappa).astype(dtype), b.astype(dtype), a.astype(dtype), slot

    ki, bi, ai, si = at(np.arange(n_cells + 1, dtype=float))
    kh, bh, ah, sh = at(np.arange(n_cells, dtype=float) + 0.5)
    return AxisProfile(ki, bi, ai, si, kh, bh, ah, sh)
