import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lemp.channel import HeidlerParams, MtleModel, heidler_current
from lemp.constants import C0, EPS0, ETA0, MU0
from lemp.groundfx import (GroundModel, apply_chain, attenuation_filter, complex_permittivity,
                           cooray_rubinstein, norton_attenuation, numerical_distance, parse_chain,
                           propagation_constant, spectral_energy, to_spectrum, to_waveform,
                           wave_tilt, waveform_energy, weyl_underground)
from lemp.groundfx import _attenuation_faddeeva, _attenuation_series
from lemp.reffields import pec_fields
from lemp.waveform import FieldWaveform, ObservationPoint, Timebase

G = GroundModel("lossy", 1e-3, 10.0)
TB = Timebase(10e-9, 6000)


def wave(values, comp="Ez", dt=10e-9, point=ObservationPoint(10e3, 0.0)):
    return FieldWaveform(comp, np.asarray(values, float), Timebase(dt, len(values)), point, "t")


@pytest.fixture(scope="module")
def pec10km():
    return pec_fields(ObservationPoint(10e3, 0.0), MtleModel(), TB)


def spectrum_at(f, n=4000, dt=1e-8, comp="Ez"):
    """A spectrum whose bin grid contains f exactly (unit values)."""
    s = to_spectrum(wave(np.zeros(n), comp, dt), 2)
    s = s.multiplied(0.0)
    s.values[:] = 1.0
    k = int(round(f / s.df))
    assert math.isclose(k * s.df, f, rel_tol=1e-9)
    return s, k


# --------------------------------------------------------------------- ground model / permittivity

def test_ground_model_validation():
    with pytest.raises(ValueError):
        GroundModel("wet", 1e-3, 10)
    with pytest.raises(ValueError):
        GroundModel("lossy", -1.0, 10)
    with pytest.raises(ValueError):
        GroundModel("lossy", 1e-3, 0.5)
    assert GroundModel.pec().is_pec and GroundModel("PEC").kind == "pec"


def test_permittivity_example():
    eps = complex_permittivity(G, 1e6)
    assert eps.real == pytest.approx(10.0)
    assert eps.imag == pytest.approx(-1e-3 / (2 * math.pi * 1e6 * oracles.EPS0), rel=1e-12)
    assert eps.imag == pytest.approx(-17.97, abs=0.01)


def test_permittivity_limits():
    assert complex_permittivity(GroundModel("lossy", 0.0, 4.0), 1e5) == 4.0
    assert complex_permittivity(G, 1e15) == pytest.approx(10.0, abs=1e-6)
    with pytest.raises(ValueError):
        complex_permittivity(G, 0.0)
    with pytest.raises(ValueError):
        complex_permittivity(GroundModel.pec(), 1e6)


# --------------------------------------------------------------------- spectra

@given(st.integers(2, 8), st.integers(8, 300), st.integers(0, 2 ** 31 - 1))
def test_round_trip_and_parseval(pad, n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    w = wave(x)
    s = to_spectrum(w, pad)
    back = to_waveform(s)
    np.testing.assert_allclose(back.values, x, rtol=0, atol=1e-12 * np.abs(x).max())
    assert spectral_energy(s) == pytest.approx(waveform_energy(w), rel=1e-10)


def test_zero_and_impulse():
    z = to_spectrum(wave(np.zeros(64)))
    assert not np.any(z.values) and not np.any(to_waveform(z).values)
    k = 5
    x = np.zeros(64)
    x[k] = 1.0
    s = to_spectrum(wave(x), 2)
    np.testing.assert_allclose(np.abs(s.values), 1.0, rtol=1e-12)
    phase = np.unwrap(np.angle(s.values))
    np.testing.assert_allclose(phase, -2 * np.pi * s.freqs * k * 10e-9, atol=1e-9)


def test_pad_factor_and_nonuniform():
    with pytest.raises(ValueError):
        to_spectrum(wave(np.ones(8)), 1)
    with pytest.raises(ValueError):
        to_spectrum(wave(np.ones(8)), 2.5)
    with pytest.raises(ValueError):
        Timebase.from_times([0.0, 1.0, 2.5])


def _corner(record):
    dt = 10e-9
    t = np.arange(int(round(record / dt))) * dt
    w = FieldWaveform("Ez", heidler_current(t, HeidlerParams()), Timebase(dt, t.size),
                      ObservationPoint(1.0))
    s = to_spectrum(w, 8)
    mag = np.abs(s.values) / abs(s.values[0])
    return s.freqs[np.argmax(mag < 1 / math.sqrt(2))]


def test_heidler_spectrum_corner():
    # a 20 us record (the current-waveform figure's time scale) puts the corner in 10-100 kHz
    assert 10e3 <= _corner(20e-6) <= 100e3
    # the full record is dominated by the 230 us tail: corner near 1/(2 pi 230 us)
    assert _corner(2e-3) == pytest.approx(1 / (2 * math.pi * 230e-6), rel=0.15)


# --------------------------------------------------------------------- attenuation

def test_norton_zero_and_small():
    assert norton_attenuation(0.0)[0] == 1.0
    assert abs(norton_attenuation(1e-12)[0] - 1.0) < 1e-5


@pytest.mark.parametrize("arg", [0.0, -0.3, -0.9, -1.4, -math.pi / 2 + 1e-3])
def test_series_matches_erfc_branch_at_50(arg):
    p = 50 * np.exp(1j * arg)
    series = _attenuation_series(np.array([p]))[0]
    closed = _attenuation_faddeeva(np.array([p]))[0]
    assert abs(series - closed) <= 1e-6 * abs(closed)
    assert abs(series - oracles.norton_series(p)) <= 1e-12 * abs(series)
    assert series == pytest.approx(-1 / (2 * p), rel=0.05)


@pytest.mark.parametrize("p", [0.1 - 0.2j, 1 - 1j, 3 - 0.5j, 10 - 20j, 0.5 - 5j])
def test_closed_form_matches_extended_precision(p):
    assert norton_attenuation(p)[0] == pytest.approx(oracles.norton_mpmath(p), rel=1e-10)


def test_fallback_never_returns_garbage():
    p = np.array([1e3 - 1e4j, 1e6 * np.exp(-0.7j), 30 - 1e-3j])
    out = norton_attenuation(p)
    assert np.all(np.isfinite(out))


@given(st.floats(1e-4, 1.0), st.floats(1.0, 80.0), st.floats(1e3, 200e3))
@settings(max_examples=100)
def test_filter_magnitudes_bounded(sigma, eps_r, r):
    g = GroundModel("lossy", sigma, eps_r)
    f = np.logspace(1, 8, 60)
    assert np.all(np.abs(norton_attenuation(numerical_distance(f, r, g))) <= 1 + 1e-12)
    assert np.all(np.abs(1 / np.sqrt(complex_permittivity(g, f))) <= 1 + 1e-12)
    gamma = propagation_constant(g, 2 * np.pi * f)
    assert np.all(gamma.real > 0)
    assert np.all(np.abs(np.exp(-gamma * 10.0)) <= 1 + 1e-12)


def test_attenuation_pec_limit_is_identity(pec10km):
    s = to_spectrum(pec10km["Ez"])
    # the deviation from unity falls as 1/sqrt(sigma); 1e15 S/m puts it below 1e-6
    out = attenuation_filter(s, 10e3, GroundModel("lossy", 1e15, 10))
    np.testing.assert_allclose(out.values, s.values, rtol=1e-6, atol=1e-9 * np.abs(s.values).max())
    assert attenuation_filter(s, 10e3, G).values[0] == s.values[0]
    with pytest.raises(ValueError):
        attenuation_filter(s, 0.0, G)


# --------------------------------------------------------------------- wave tilt

def test_wave_tilt_1mhz_example():
    s, k = spectrum_at(1e6)
    ratio = abs(wave_tilt(s, G).values[k])
    assert ratio == pytest.approx(1 / math.sqrt(abs(10 - 17.975j)), rel=1e-3)
    assert ratio == pytest.approx(0.2205, abs=5e-4)
    # exp(+jwt) convention: Ex leads Ez in phase
    assert np.angle(wave_tilt(s, G).values[k]) > 0


def test_wave_tilt_limits():
    s, _ = spectrum_at(1e5)
    assert np.abs(wave_tilt(s, GroundModel("lossy", 1e12, 10)).values[1:]).max() < 1e-4
    np.testing.assert_allclose(wave_tilt(s, GroundModel("lossy", 0.0, 1.0)).values[1:], 1.0)
    assert wave_tilt(s, G).values[0] == 0.0
    assert wave_tilt(s, G).component == "Ex"


# --------------------------------------------------------------------- Cooray-Rubinstein

def test_cooray_rubinstein_limits(pec10km):
    er = to_spectrum(pec_fields(ObservationPoint(10e3, 20.0), MtleModel(), TB)["Er"])
    h = to_spectrum(pec10km["Hphi"])
    out = cooray_rubinstein(er, h, GroundModel("lossy", 1e12, 10))
    np.testing.assert_allclose(out.values, er.values, atol=1e-5 * np.abs(er.values).max())
    er0 = to_spectrum(pec10km["Er"])
    pure = cooray_rubinstein(er0, h, G)
    expected = -ETA0 * h.values[1:] / np.sqrt(complex_permittivity(G, h.freqs[1:]))
    np.testing.assert_allclose(pure.values[1:], expected, rtol=1e-12)


def test_cooray_rubinstein_grid_mismatch(pec10km):
    with pytest.raises(ValueError):
        cooray_rubinstein(to_spectrum(pec10km["Er"], 2), to_spectrum(pec10km["Hphi"], 4), G)


def test_dual_path_consistency(pec10km):
    tilt = apply_chain(pec10km["Ez"], "wave_tilt", G)
    cr = apply_chain(pec10km["Er"], "cooray_rubinstein", G, hphi=pec10km["Hphi"])
    assert abs(cr.peak - tilt.peak) / tilt.peak < 0.10


# --------------------------------------------------------------------- Weyl

def test_weyl_identity_at_zero_depth():
    s, _ = spectrum_at(1e5)
    np.testing.assert_array_equal(weyl_underground(s, 0.0, G).values, s.values)


def test_weyl_lossless_is_phase_only():
    s, _ = spectrum_at(1e5)
    with pytest.warns(UserWarning):
        out = weyl_underground(s, 25.0, GroundModel("lossy", 0.0, 10.0))
    np.testing.assert_allclose(np.abs(out.values), 1.0, rtol=1e-12)


def test_weyl_skin_depth_example():
    s, k = spectrum_at(1e5)
    mag = abs(weyl_underground(s, 10.0, G).values[k])
    delta = math.sqrt(2 / (2 * math.pi * 1e5 * MU0 * 1e-3))
    assert delta == pytest.approx(50.3, abs=0.1)
    # plane-wave decay exp(-d/delta) = 0.820; the full propagation constant keeps
    # the displacement term, which lifts the magnitude by about half a percent
    assert mag == pytest.approx(math.exp(-10 / delta), rel=0.01)
    assert weyl_underground(s, 10.0, G).values[0] == 1.0


def test_weyl_errors_and_warning():
    s, _ = spectrum_at(1e5)
    with pytest.raises(ValueError):
        weyl_underground(s, -1.0, G)
    with pytest.raises(ValueError):
        weyl_underground(s, 1.0, GroundModel.pec())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        weyl_underground(s, 1.0, G)
    with pytest.warns(UserWarning, match="approximation"):
        weyl_underground(s, 1.0, GroundModel("lossy", 1e-4, 10))


# --------------------------------------------------------------------- chain

def test_empty_chain_is_identity(pec10km):
    out = apply_chain(pec10km["Ez"], [], G)
    np.testing.assert_allclose(out.values, pec10km["Ez"].values, atol=1e-12 * pec10km["Ez"].peak)


@pytest.mark.parametrize("chain", ["weyl:10,wave_tilt", "weyl:10", "wave_tilt,attenuation",
                                   "attenuation,cooray_rubinstein", "wave_tilt,cooray_rubinstein",
                                   "attenuation,attenuation", "weyl", "bogus"])
def test_invalid_chains(chain):
    with pytest.raises(ValueError):
        parse_chain(chain)


def test_chain_parsing():
    assert parse_chain("attenuation, wave_tilt ,weyl:10") == [
        ("attenuation", None), ("wave_tilt", None), ("weyl", 10.0)]
    assert parse_chain([("weyl", 5.0)] and ["wave_tilt", ("weyl", 5.0)]) == [
        ("wave_tilt", None), ("weyl", 5.0)]


def test_chain_component_checks(pec10km):
    with pytest.raises(ValueError):
        apply_chain(pec10km["Hphi"], "attenuation", G)
    with pytest.raises(ValueError):
        apply_chain(pec10km["Er"], "cooray_rubinstein", G)
    with pytest.raises(ValueError):
        apply_chain(pec10km["Ez"], "attenuation", GroundModel.pec())


def test_surface_ex_shape_and_depth_attenuation(pec10km):
    ex = apply_chain(pec10km["Ez"], "attenuation,wave_tilt", G)
    deep = apply_chain(pec10km["Ez"], "attenuation,wave_tilt,weyl:10", G)
    assert ex.component == "Ex" and deep.point.z == -10.0
    t, v = ex.times, ex.values
    arrival = 10e3 / C0
    k = int(np.argmax(np.abs(v)))
    # a sharp early pulse within a couple of microseconds of the arrival ...
    assert 0 < t[k] - arrival < 2e-6
    # ... that has fallen below a tenth of its peak by 7 us later
    assert np.abs(v[t > t[k] + 7e-6]).max() < 0.1 * ex.peak
    assert deep.peak < ex.peak


def test_pec_limit_chain(pec10km):
    g = GroundModel("lossy", 100.0, 10.0)
    ez = pec10km["Ez"]
    att = apply_chain(ez, "attenuation", g)
    assert np.abs(att.values - ez.values).max() < 0.01 * ez.peak
    assert apply_chain(ez, "wave_tilt", g).peak < 0.01 * ez.peak


def test_causality(pec10km):
    ez = pec10km["Ez"]
    first = np.flatnonzero(ez.values)[0]
    for chain in ("attenuation", "attenuation,wave_tilt", "attenuation,wave_tilt,weyl:10"):
        out = apply_chain(ez, chain, G)
        assert np.abs(out.values[:first]).max(initial=0.0) < 1e-3 * out.peak


@settings(max_examples=10)
@given(st.floats(-5.0, 5.0).filter(lambda k: abs(k) > 1e-3), st.integers(0, 200))
def test_linear_and_time_invariant(k, shift):
    # a pulse that dies out inside the record, so no tail is cut off at the end
    dt = 20e-9
    t = np.arange(2500) * dt
    base = heidler_current(t - 1e-6, HeidlerParams(i2=0.0)) / 1e3
    w = wave(base, dt=dt)
    ref = apply_chain(w, "attenuation,wave_tilt", G).values
    scaled = apply_chain(w.with_values(k * base), "attenuation,wave_tilt", G).values
    np.testing.assert_allclose(scaled, k * ref, atol=1e-9 * abs(k) * np.abs(ref).max())
    delayed = np.concatenate([np.zeros(shift), base[: base.size - shift]])
    out = apply_chain(w.with_values(delayed), "attenuation,wave_tilt", G).values
    n = base.size - shift
    np.testing.assert_allclose(out[shift:], ref[:n], atol=1e-6 * np.abs(ref).max())
