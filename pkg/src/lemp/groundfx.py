"""Ground-loss filters applied to PEC-ground reference fields.

Everything here works on one-sided spectra with the exp(+j omega t) time
convention (numpy's forward FFT kernel exp(-j omega t)), so the complex
relative permittivity of the soil is

    eps_c(f) = eps_r - j sigma / (2 pi f eps0).

Filters are per-bin multiplications:

* attenuation   Ez_lossy = F(p) Ez_pec, Norton attenuation function
                F(p) = 1 - j sqrt(pi p) exp(-p) erfc(j sqrt(p)),
                p = -j (omega r / 2c) / eps_c
* wave_tilt     Ex = Ez / sqrt(eps_c)                    (DC -> 0)
* cooray_rubinstein  Er = Er_pec - eta0 Hphi_pec / sqrt(eps_c)
* weyl          Ex(depth) = Ex(0) exp(-gamma depth),
                gamma = sqrt(j omega mu0 (sigma + j omega eps0 eps_r))

Except for wave tilt, the DC bin passes unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import wofz

from .constants import C0, EPS0, ETA0, MU0
from .waveform import FieldWaveform

CONVENTION = "exp(+jwt)"
ASYMPTOTIC_THRESHOLD = 25.0
WEYL_MIN_SIGMA = 1e-3


@dataclass(frozen=True)
class GroundModel:
    kind: str = "lossy"
    sigma: float = 1e-3
    eps_r: float = 10.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("pec", "lossy"):
            raise ValueError(f"ground kind must be 'pec' or 'lossy', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "lossy":
            if self.sigma < 0:
                raise ValueError("sigma must be >= 0")
            if self.eps_r < 1:
                raise ValueError("eps_r must be >= 1")

    @property
    def is_pec(self) -> bool:
        return self.kind == "pec"

    @classmethod
    def pec(cls) -> "GroundModel":
        return cls("pec", math.inf, 1.0)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided spectrum of a zero-padded waveform.

    ``values[0]`` is the DC bin; ``n_fft`` is the padded record length and
    ``source`` the waveform the spectrum came from (for metadata and the
    inverse transform's output length).
    """

    values: np.ndarray
    df: float
    n_fft: int
    source: FieldWaveform
    component: str
    convention: str = CONVENTION
    meta: dict = field(default_factory=dict)

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.values.size) * self.df

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * math.pi * self.freqs

    def same_grid(self, other: "Spectrum") -> bool:
        return self.n_fft == other.n_fft and math.isclose(self.df, other.df, rel_tol=1e-12)

    def multiplied(self, factor, component: str | None = None) -> "Spectrum":
        return replace(self, values=self.values * factor, component=component or self.component)


def _tail(last: float, n: int) -> np.ndarray:
    """Hold ``last`` for half of ``n`` samples, then a raised-cosine fall to zero."""
    hold = n // 2
    k = np.arange(n - hold)
    fall = 0.5 * (1.0 + np.cos(np.pi * (k + 1) / (n - hold)))
    return last * np.concatenate([np.ones(hold), fall])


def to_spectrum(w: FieldWaveform, pad_factor: int = 4, tail: str = "zero") -> Spectrum:
    """One-sided spectrum of ``w`` padded to ``pad_factor`` times its length.

    ``tail="zero"`` pads with zeros (exact Parseval). ``tail="hold"`` continues
    the last sample and tapers it smoothly to zero, so a record that ends on a
    nonzero value (a late-time ramp) has no step for a filter to ring on.
    Either way the inverse transform returns the original samples.
    """
    if int(pad_factor) != pad_factor or pad_factor < 2:
        raise ValueError(f"pad_factor must be an integer >= 2, got {pad_factor}")
    if tail not in ("zero", "hold"):
        raise ValueError(f"tail must be 'zero' or 'hold', got {tail!r}")
    n_src = w.timebase.n_samples
    n = n_src * int(pad_factor)
    x = w.values
    if tail == "hold":
        x = np.concatenate([x, _tail(x[-1], n - n_src)])
    X = np.fft.rfft(x, n)
    return Spectrum(X, 1.0 / (n * w.timebase.dt), n, w, w.component, meta={"tail": tail})


def to_waveform(s: Spectrum) -> FieldWaveform:
    x = np.fft.irfft(s.values, s.n_fft)[: s.source.timebase.n_samples]
    return replace(s.source, component=s.component, values=x)


def waveform_energy(w: FieldWaveform) -> float:
    return float(np.sum(w.values ** 2) * w.timebase.dt)


def spectral_energy(s: Spectrum) -> float:
    """Parseval counterpart of :func:`waveform_energy`."""
    p = np.abs(s.values) ** 2
    weights = np.full(p.size, 2.0)
    weights[0] = 1.0
    if s.n_fft % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(weights * p) / s.n_fft * s.source.timebase.dt)


def complex_permittivity(g: GroundModel, f) -> np.ndarray:
    if g.is_pec:
        raise ValueError("complex permittivity is undefined for PEC ground")
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0 (DC handled separately by each filter)")
    return g.eps_r - 1j * g.sigma / (2.0 * math.pi * f * EPS0)


def numerical_distance(f, r: float, g: GroundModel) -> np.ndarray:
    """Norton numerical distance p = -j (omega r / 2c) / eps_c (large |eps_c| form)."""
    f = np.asarray(f, dtype=float)
    return -1j * (2.0 * math.pi * f * r / (2.0 * C0)) / complex_permittivity(g, f)


def _attenuation_series(p, terms: int = 60) -> np.ndarray:
    """Asymptotic expansion F ~ -sum_{k>=1} (2k-1)!! / (2p)^k, optimally truncated."""
    p = np.asarray(p, dtype=complex)
    total = np.zeros_like(p)
    term = np.ones_like(p)
    prev_mag = np.full(p.shape, np.inf)
    active = np.ones(p.shape, dtype=bool)
    for k in range(1, terms + 1):
        term = term * (2 * k - 1) / (2.0 * p)
        mag = np.abs(term)
        active &= mag < prev_mag
        total = np.where(active, total - term, total)
        prev_mag = mag
    return total


def _attenuation_faddeeva(p) -> np.ndarray:
    # exp(-p) erfc(j sqrt p) = w(-sqrt p), with w the Faddeeva function.
    sp = np.sqrt(np.asarray(p, dtype=complex))
    return 1.0 - 1j * math.sqrt(math.pi) * sp * wofz(-sp)


def norton_attenuation(p) -> np.ndarray:
    """Ground-wave attenuation function F(p).

    Uses the Faddeeva-function form for |p| <= 25 and the asymptotic series
    beyond; any bin where the closed form is not finite also falls back to
    the series.
    """
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    out = np.ones_like(p)
    big = np.abs(p) > ASYMPTOTIC_THRESHOLD
    small = ~big & (p != 0)
    if small.any():
        out[small] = _attenuation_faddeeva(p[small])
    bad = small & ~np.isfinite(out)
    if big.any() or bad.any():
        sel = big | bad
        out[sel] = _attenuation_series(p[sel])
    return out


def attenuation_filter(s: Spectrum, r: float, g: GroundModel) -> Spectrum:
    if not r > 0:
        raise ValueError("r must be > 0")
    if g.is_pec:
        return s.multiplied(1.0)
    factor = np.ones(s.values.size, dtype=complex)
    f = s.freqs[1:]
    factor[1:] = norton_attenuation(numerical_distance(f, r, g))
    return s.multiplied(factor)


def _inv_sqrt_eps(s: Spectrum, g: GroundModel) -> np.ndarray:
    k = np.zeros(s.values.size, dtype=complex)
    if not g.is_pec:
        k[1:] = 1.0 / np.sqrt(complex_permittivity(g, s.freqs[1:]))
    return k


def wave_tilt(s: Spectrum, g: GroundModel) -> Spectrum:
    """Horizontal surface field from the vertical one over lossy ground."""
    return s.multiplied(_inv_sqrt_eps(s, g), component="Ex")


def cooray_rubinstein(s_er: Spectrum, s_h: Spectrum, g: GroundModel) -> Spectrum:
    if not s_er.same_grid(s_h):
        raise ValueError("Er and Hphi spectra must share the same frequency grid")
    corr = ETA0 * s_h.values * _inv_sqrt_eps(s_h, g)
    return replace(s_er, values=s_er.values - corr, component="Er")


def propagation_constant(g: GroundModel, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return np.sqrt(1j * omega * MU0 * (g.sigma + 1j * omega * EPS0 * g.eps_r))


def weyl_underground(s: Spectrum, depth: float, g: GroundModel) -> Spectrum:
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if g.is_pec:
        raise ValueError("no field penetrates a PEC ground")
    if g.sigma < WEYL_MIN_SIGMA:
        warnings.warn(f"Weyl underground filter is an approximation valid for sigma >= "
                      f"{WEYL_MIN_SIGMA} S/m (got {g.sigma})", stacklevel=2)
    factor = np.ones(s.values.size, dtype=complex)
    factor[1:] = np.exp(-propagation_constant(g, s.omega[1:]) * depth)
    return s.multiplied(factor)


def parse_chain(chain) -> list:
    """Normalise a chain given as ``"attenuation,wave_tilt,weyl:10"`` or a list.

    Returns a list of ``(name, arg)`` tuples and validates the ordering.
    """
    if isinstance(chain, str):
        chain = [c for c in chain.split(",") if c.strip()]
    steps = []
    for item in chain:
        if isinstance(item, (tuple, list)):
            name, arg = item[0], (item[1] if len(item) > 1 else None)
        else:
            name, _, rest = str(item).strip().partition(":")
            arg = float(rest) if rest else None
        name = name.strip().lower()
        if name not in ("attenuation", "wave_tilt", "cooray_rubinstein", "weyl"):
            raise ValueError(f"unknown filter step {name!r}")
        if name == "weyl" and arg is None:
            raise ValueError("weyl step needs a depth, e.g. 'weyl:10'")
        steps.append((name, arg))

    names = [n for n, _ in steps]
    if len(set(names)) != len(names):
        raise ValueError(f"repeated filter step in {names}")
    pos = {n: i for i, n in enumerate(names)}
    if "wave_tilt" in pos and "cooray_rubinstein" in pos:
        raise ValueError("wave_tilt and cooray_rubinstein are alternative paths; use one")
    horizontal = pos.get("wave_tilt", pos.get("cooray_rubinstein"))
    if "weyl" in pos and (horizontal is None or pos["weyl"] < horizontal):
        raise ValueError("weyl must follow wave_tilt or cooray_rubinstein")
    if "attenuation" in pos:
        if "cooray_rubinstein" in pos:
            raise ValueError("cooray_rubinstein works on PEC fields; drop attenuation")
        if horizontal is not None and pos["attenuation"] > horizontal:
            raise ValueError("attenuation must precede wave_tilt")
    return steps


def _first_arrival(w: FieldWaveform) -> int:
    nz = np.flatnonzero(w.values)
    return int(nz[0]) if nz.size else w.timebase.n_samples


def apply_chain(w: FieldWaveform, steps, g: GroundModel, pad_factor: int = 4,
                r: float | None = None, hphi: FieldWaveform | None = None) -> FieldWaveform:
    """Run a PEC-ground waveform through an ordered list of ground filters.

    ``hphi`` (the PEC-ground magnetic field at the surface) is required for
    the cooray_rubinstein step. Records are extended with a held, tapered
    tail before the transform (see :func:`to_spectrum`). Samples before the
    input's first arrival are zeroed in the output so that wrap-around of
    long filter tails cannot leak ahead of the wavefront.
    """
    steps = parse_chain(steps)
    if not steps:
        return to_waveform(to_spectrum(w, pad_factor))
    if g.is_pec:
        raise ValueError("ground filters need a lossy ground model")
    r = w.point.r if r is None else r
    s = to_spectrum(w, pad_factor, tail="hold")
    for name, arg in steps:
        if name == "attenuation":
            if s.component != "Ez":
                raise ValueError("attenuation applies to the vertical field Ez")
            s = attenuation_filter(s, r, g)
        elif name == "wave_tilt":
            if s.component != "Ez":
                raise ValueError("wave_tilt applies to the vertical field Ez")
            s = wave_tilt(s, g)
        elif name == "cooray_rubinstein":
            if hphi is None:
                raise ValueError("cooray_rubinstein needs the PEC Hphi waveform")
            if s.component != "Er":
                raise ValueError("cooray_rubinstein applies to the PEC radial field Er")
            s = cooray_rubinstein(s, to_spectrum(hphi, pad_factor, tail="hold"), g)
        elif name == "weyl":
            s = weyl_underground(s, arg, g)
    out = to_waveform(s)
    first = _first_arrival(w)
    if hphi is not None:
        first = min(first, _first_arrival(hphi))
    values = out.values.copy()
    values[:first] = 0.0
    depth = sum(a for n, a in steps if n == "weyl")
    point = replace(w.point, z=-depth) if depth else w.point
    return out.with_values(values, point=point)
