"""Waveform comparison metrics and the numerical-dispersion oscillation index."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.signal import find_peaks

from ..waveform import FieldWaveform, Timebase

SOURCE_RISE_TIME = 0.33e-6
DEFAULT_CUTOFF = 1.0 / (2.0 * SOURCE_RISE_TIME)
PEAK_PROMINENCE = 0.1


@dataclass(frozen=True)
class ComparisonReport:
    component: str
    peak_relative_error: float
    rise_time_a: float
    rise_time_b: float
    nrmse: float
    oscillation_index_a: float | None
    oscillation_index_b: float | None
    window: tuple
    dt: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def first_peak_index(values) -> int:
    """Index of the first prominent extremum of |values| (falls back to the global one)."""
    a = np.abs(np.asarray(values, dtype=float))
    top = a.max()
    if top == 0:
        return 0
    peaks, _ = find_peaks(a, prominence=PEAK_PROMINENCE * top, height=0.5 * top)
    return int(peaks[0]) if peaks.size else int(np.argmax(a))


def _crossing(t, y, level, stop):
    """First time y rises through level before index stop (linear interpolation)."""
    idx = np.flatnonzero(y[: stop + 1] >= level)
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) / (y1 - y0) * (t[i] - t[i - 1]))


def rise_time(w: FieldWaveform) -> float:
    """10-90 % rise time of the first peak."""
    v = w.values
    ip = first_peak_index(v)
    y = v * np.sign(v[ip]) if v[ip] != 0 else v
    pk = y[ip]
    if pk <= 0:
        return float("nan")
    t = w.times
    return _crossing(t, y, 0.9 * pk, ip) - _crossing(t, y, 0.1 * pk, ip)


def _align(a: FieldWaveform, b: FieldWaveform, window):
    if a.component != b.component:
        raise ValueError(f"component mismatch: {a.component} vs {b.component}")
    t_end = min(a.timebase.duration, b.timebase.duration)
    if window is None:
        window = (0.0, t_end)
    t0, t1 = float(window[0]), float(window[1])
    if not t1 > t0:
        raise ValueError(f"empty window {window}")
    if t0 >= t_end or t1 <= 0:
        raise ValueError(f"window {window} does not overlap both records (common span 0..{t_end:g} s)")
    t1 = min(t1, t_end)
    dt = max(a.timebase.dt, b.timebase.dt)
    if a.timebase.dt != b.timebase.dt:
        n = int(np.floor(t_end / dt + 1e-9)) + 1
        tb = Timebase(dt, n)
        a = a if a.timebase.dt == dt else a.resampled(tb)
        b = b if b.timebase.dt == dt else b.resampled(tb)
    n = min(a.values.size, b.values.size)
    t = np.arange(n) * dt
    sel = (t >= t0 - 1e-12 * dt) & (t <= t1 + 1e-9 * dt)
    if sel.sum() < 2:
        raise ValueError("window holds fewer than two samples")
    return a, b, sel, (t0, t1), dt


def _windowed(w: FieldWaveform, sel) -> FieldWaveform:
    i0 = int(np.flatnonzero(sel)[0])
    vals = w.values[: sel.size][sel]
    return FieldWaveform(w.component, vals, Timebase(w.timebase.dt, vals.size), w.point,
                         w.scenario_id, meta={"t0": i0 * w.timebase.dt})


def compare(a: FieldWaveform, b: FieldWaveform, window=None,
            f_cutoff: float = DEFAULT_CUTOFF) -> ComparisonReport:
    """Compare ``b`` against the reference ``a`` over ``window`` = (t0, t1) seconds."""
    a, b, sel, window, dt = _align(a, b, window)
    va = a.values[: sel.size][sel]
    vb = b.values[: sel.size][sel]
    pa = np.max(np.abs(va))
    pb = np.max(np.abs(vb))
    if pa == 0:
        raise ValueError("reference waveform is identically zero in the window")
    wa, wb = _windowed(a, sel), _windowed(b, sel)
    osc = []
    for w in (wa, wb):
        try:
            osc.append(oscillation_index(w, f_cutoff))
        except ValueError:
            osc.append(None)
    return ComparisonReport(
        component=a.component,
        peak_relative_error=float(abs(pa - pb) / pa),
        rise_time_a=rise_time(wa),
        rise_time_b=rise_time(wb),
        nrmse=float(np.sqrt(np.mean((va - vb) ** 2)) / pa),
        oscillation_index_a=osc[0],
        oscillation_index_b=osc[1],
        window=window,
        dt=dt,
    )


def lowpass(values, dt: float, f_cutoff: float) -> np.ndarray:
    """Raised-cosine low-pass on a 2x zero-padded record: flat below f_cutoff/2,
    exactly zero from f_cutoff up (no Gibbs ringing for the envelope fit)."""
    v = np.asarray(values, dtype=float)
    n = 2 * v.size
    spec = np.fft.rfft(v, n)
    x = np.clip(np.fft.rfftfreq(n, dt) / f_cutoff * 2.0 - 1.0, 0.0, 1.0)
    spec *= 0.5 * (1.0 + np.cos(np.pi * x))
    return np.fft.irfft(spec, n)[: v.size]


def monotone_envelope(values) -> np.ndarray:
    """Piecewise best-fit monotone envelope: rising up to the first peak, then the
    better (least squares) of a rising or falling fit over the tail."""
    v = np.asarray(values, dtype=float)
    ip = first_peak_index(v)
    s = np.sign(v[ip]) or 1.0
    y = s * v
    env = np.empty_like(y)
    env[: ip + 1] = isotonic_regression(y[: ip + 1], increasing=True).x
    tail = y[ip:]
    fits = [isotonic_regression(tail, increasing=inc).x for inc in (True, False)]
    best = min(fits, key=lambda f: float(np.sum((tail - f) ** 2)))
    env[ip:] = best
    return s * env


def oscillation_index(w: FieldWaveform, f_cutoff: float = DEFAULT_CUTOFF) -> float:
    """Energy of the non-monotone residual above ``f_cutoff`` relative to the total energy.

    The monotone envelope is fitted to the low-passed waveform so that content
    above the cut-off never leaks into it; the residual then carries all of it.
    """
    if not f_cutoff > 0:
        raise ValueError("f_cutoff must be positive")
    span = w.timebase.dt * w.values.size
    if span < 4.0 / f_cutoff:
        raise ValueError(f"window {span:.3g} s is shorter than 4/f_cutoff = {4.0 / f_cutoff:.3g} s")
    v = w.values
    total = float(np.sum(v * v))
    if total == 0:
        return 0.0
    resid = v - monotone_envelope(lowpass(v, w.timebase.dt, f_cutoff))
    n = 2 * v.size
    spec = np.fft.rfft(resid, n)
    weight = np.full(spec.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    freqs = np.fft.rfftfreq(n, w.timebase.dt)
    high = float(np.sum(weight[freqs > f_cutoff] * np.abs(spec[freqs > f_cutoff]) ** 2)) / n
    return high / total
