"""Reference fields of an MTLE return stroke over perfectly conducting ground.

The channel is cut into short vertical current dipoles; each dipole and its
image below the ground plane contributes electrostatic, induction and
radiation terms at the observation point (r, z):

    dEz = dz'/(4 pi eps0) [ A/R^5 * Q + A/(c R^4) * i - r^2/(c^2 R^3) * di/dt ]
    dEr = dz'/(4 pi eps0) [ B/R^5 * Q + B/(c R^4) * i + r(z-z')/(c^2 R^3) * di/dt ]
    dHphi = dz'/(4 pi) [ r/R^3 * i + r/(c R^2) * di/dt ]

with A = 2(z-z')^2 - r^2, B = 3r(z-z'), R = sqrt(r^2 + (z-z')^2) and Q the
running time integral of the retarded current. The image term uses z' -> -z'
with the same current.

The base current, its derivative and its running integral are tabulated on a
fine grid once (dt/8) and linearly interpolated at the retarded times. Segment
contributions are accumulated in a fixed order so results are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import MtleModel, heidler_current, heidler_derivative
from .constants import C0, FOUR_PI_EPS0
from .waveform import FieldWaveform, ObservationPoint, Timebase

_TABLE_REFINE = 8
_CHUNK = 64


@dataclass(frozen=True)
class SegmentLayout:
    dz: float
    midpoints: np.ndarray

    @property
    def count(self) -> int:
        return self.midpoints.size


def quadrature_spec(model: MtleModel, tb: Timebase, dz_seg: float | None = None) -> SegmentLayout:
    """Midpoint segmentation of the channel [0, H].

    The default segment length is min(lambda/50, v*dt), rounded down so that
    an integer number of segments tiles the channel.
    """
    H = model.channel_height
    if dz_seg is None:
        dz_seg = min(model.lambda_decay / 50.0, model.v_front * tb.dt)
    if not dz_seg > 0:
        raise ValueError("segment length must be positive")
    if dz_seg >= H:
        raise ValueError(f"segment length {dz_seg} m must be shorter than the channel ({H} m)")
    n = int(math.ceil(H / dz_seg - 1e-9))
    dz = H / n
    return SegmentLayout(dz, (np.arange(n) + 0.5) * dz)


class _BaseTables:
    """Fine-grid tables of I(0,t), dI/dt and the running charge integral."""

    def __init__(self, model: MtleModel, tb: Timebase, t_max: float):
        self.h = tb.dt / _TABLE_REFINE
        n = int(math.ceil(t_max / self.h)) + 2
        self.s = np.arange(n) * self.h
        self.i = heidler_current(self.s, model.base)
        self.di = heidler_derivative(self.s, model.base)
        q = np.empty(n)
        q[0] = 0.0
        np.cumsum(0.5 * (self.i[1:] + self.i[:-1]) * self.h, out=q[1:])
        self.q = q

    def lookup(self, tau):
        kw = dict(left=0.0)
        return (np.interp(tau, self.s, self.i, **kw),
                np.interp(tau, self.s, self.di, **kw),
                np.interp(tau, self.s, self.q, **kw))


def pec_fields(point: ObservationPoint, model: MtleModel, tb: Timebase,
               dz_seg: float | None = None, image: bool = True,
               components=("Ez", "Er", "Hphi"), scenario_id: str = "") -> dict:
    """Ez, Er and Hphi at ``point`` above a perfectly conducting ground.

    With ``image=False`` only the direct channel contributes (free space).
    Returns a dict mapping component name to FieldWaveform.
    """
    r, z = float(point.r), float(point.z)
    if not r > 0:
        raise ValueError("field is singular on the channel axis (r must be > 0)")
    if z < 0:
        raise ValueError("reference fields are defined above ground only (z >= 0)")
    layout = quadrature_spec(model, tb, dz_seg)
    t = tb.times
    tables = _BaseTables(model, tb, tb.duration)

    acc = {c: np.zeros(tb.n_samples) for c in ("Ez", "Er", "Hphi")}
    sources = [+1.0, -1.0] if image else [+1.0]
    zp_all = layout.midpoints
    for start in range(0, zp_all.size, _CHUNK):
        zp = zp_all[start:start + _CHUNK]
        decay = np.exp(-zp / model.lambda_decay) * layout.dz
        for sgn in sources:
            dzv = z - sgn * zp
            R = np.hypot(r, dzv)
            delay = R / C0 + zp / model.v_front
            first = int(np.searchsorted(t, delay.min(), side="left"))
            if first >= t.size:
                continue
            tau = t[None, first:] - delay[:, None]
            i, di, q = tables.lookup(tau)
            i *= decay[:, None]
            di *= decay[:, None]
            q *= decay[:, None]
            R = R[:, None]
            dzc = dzv[:, None]
            A = 2.0 * dzc ** 2 - r * r
            B = 3.0 * r * dzc
            R2 = R * R
            R3 = R2 * R
            acc["Ez"][first:] += np.sum(A / (R3 * R2) * q + A / (C0 * R2 * R2) * i
                                        - r * r / (C0 * C0 * R3) * di, axis=0)
            acc["Er"][first:] += np.sum(B / (R3 * R2) * q + B / (C0 * R2 * R2) * i
                                        + r * dzc / (C0 * C0 * R3) * di, axis=0)
            acc["Hphi"][first:] += np.sum(r / R3 * i + r / (C0 * R2) * di, axis=0)

    scale = {"Ez": 1.0 / FOUR_PI_EPS0, "Er": 1.0 / FOUR_PI_EPS0, "Hphi": 1.0 / (4.0 * math.pi)}
    return {c: FieldWaveform(c, acc[c] * scale[c], tb, point, scenario_id,
                             meta={"dz_seg": layout.dz, "image": image})
            for c in components}


def ez_pec(point: ObservationPoint, model: MtleModel, tb: Timebase, **kw) -> FieldWaveform:
    return pec_fields(point, model, tb, components=("Ez",), **kw)["Ez"]


def er_pec(point: ObservationPoint, model: MtleModel, tb: Timebase, **kw) -> FieldWaveform:
    return pec_fields(point, model, tb, components=("Er",), **kw)["Er"]


def hphi_pec(point: ObservationPoint, model: MtleModel, tb: Timebase, **kw) -> FieldWaveform:
    return pec_fields(point, model, tb, components=("Hphi",), **kw)["Hphi"]
