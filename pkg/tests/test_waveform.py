import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lemp.waveform import FieldWaveform, ObservationPoint, Timebase, read_csv, write_csv

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def wave(values, dt=1e-8, comp="Ez", point=ObservationPoint(1000.0, 5.0), sid="s"):
    return FieldWaveform(comp, np.asarray(values, float), Timebase(dt, len(values)), point, sid)


def test_timebase_invariants():
    with pytest.raises(ValueError):
        Timebase(0.0, 10)
    with pytest.raises(ValueError):
        Timebase(1e-8, 1)
    tb = Timebase(1e-8, 5)
    np.testing.assert_allclose(tb.times, [0, 1e-8, 2e-8, 3e-8, 4e-8])
    assert tb.duration == pytest.approx(4e-8)


def test_from_times_rejects_nonuniform():
    with pytest.raises(ValueError):
        Timebase.from_times([0.0, 1.0, 3.0])
    with pytest.raises(ValueError):
        Timebase.from_times([1.0, 2.0, 3.0])
    assert Timebase.from_times([0.0, 0.5, 1.0]).dt == pytest.approx(0.5)


def test_waveform_validation():
    with pytest.raises(ValueError):
        wave([1.0, 2.0]).__class__("Bz", np.zeros(2), Timebase(1, 2), ObservationPoint(1.0))
    with pytest.raises(ValueError):
        FieldWaveform("Ez", np.zeros(3), Timebase(1, 2), ObservationPoint(1.0))
    with pytest.raises(ValueError):
        wave([0.0, np.nan])


def test_aliases_and_units():
    assert wave([0, 1], comp="Hy").component == "Hphi"
    assert wave([0, 1], comp="Hy").unit == "A/m"
    assert wave([0, 1], comp="Ex").unit == "V/m"


def test_csv_layout_is_exact(tmp_path):
    w = wave([0.0, 1.5, -2.25e-3], dt=1e-8, sid="fig2_pec_1km")
    p = write_csv(w, tmp_path / "w.csv")
    raw = p.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8") == (
        "# scenario_id=fig2_pec_1km\n"
        "# component=Ez\n"
        "# unit=V/m\n"
        "# dt_s=1.00000000e-08\n"
        "# r_m=1.00000000e+03\n"
        "# z_m=5.00000000e+00\n"
        "t_s,value\n"
        "0.00000000e+00,0.00000000e+00\n"
        "1.00000000e-08,1.50000000e+00\n"
        "2.00000000e-08,-2.25000000e-03\n"
    )


@given(arrays(float, st.integers(2, 40), elements=finite))
def test_csv_round_trip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("csv") / "w.csv"
    w = wave(values, comp="Hphi")
    r = read_csv(write_csv(w, p))
    assert r.component == "Hphi" and r.scenario_id == "s"
    assert r.point == w.point
    assert r.timebase.n_samples == w.timebase.n_samples
    np.testing.assert_allclose(r.values, values, rtol=1e-8, atol=0)


def test_csv_rewrite_is_byte_identical(tmp_path):
    w = wave(np.sin(np.arange(100) * 0.1) * 123.456)
    a = write_csv(w, tmp_path / "a.csv")
    b = write_csv(read_csv(a), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_csv_missing_metadata(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_s,value\n0,0\n1,1\n")
    with pytest.raises(ValueError, match="component"):
        read_csv(p)


def test_resample_and_truncate():
    w = wave([0.0, 1.0, 2.0, 3.0], dt=1.0)
    r = w.resampled(Timebase(0.5, 7))
    np.testing.assert_allclose(r.values, [0, 0.5, 1, 1.5, 2, 2.5, 3])
    assert w.truncated(2).values.tolist() == [0.0, 1.0]
    assert w.peak == 3.0
