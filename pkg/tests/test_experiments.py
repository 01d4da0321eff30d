import json

import pytest

from lemp.harness.experiments import (PRESETS, THRESHOLDS, ExperimentError, post_peak_deviation,
                                      preset_scenario, run_experiment)
from lemp.waveform import FieldWaveform, ObservationPoint, Timebase


def test_every_preset_has_thresholds():
    assert set(PRESETS) == {"fig2_pec_1km", "fig3_lossy_10km", "fig4_pml_sweep_scaled",
                            "fig5_dispersion_scaled", "cfl_divergence"}
    assert set(THRESHOLDS) == set(PRESETS)


def test_unknown_preset_lists_the_available_ones(tmp_path):
    with pytest.raises(KeyError) as exc:
        run_experiment("fig9", tmp_path)
    for name in PRESETS:
        assert name in str(exc.value)
    with pytest.raises(KeyError):
        preset_scenario("fig9")


def test_preset_parameters():
    fig2 = preset_scenario("fig2_pec_1km")
    assert fig2.ground.is_pec and fig2.observers[0].r == 1000.0
    fig3 = preset_scenario("fig3_lossy_10km")
    assert (fig3.ground.sigma, fig3.ground.eps_r) == (1e-3, 10.0)
    assert {o.z for o in fig3.observers} >= {-10.0}
    fig4 = preset_scenario("fig4_pml_sweep_scaled")
    assert fig4.mtle.channel_height == 5000.0 and fig4.observers[0].r == 20e3
    fig5 = preset_scenario("fig5_dispersion_scaled")
    assert (fig5.ground.sigma, fig5.ground.eps_r) == (3e-3, 10.0)
    assert fig5.observers[0].r == 30e3


@pytest.fixture(scope="module")
def cfl_runs(tmp_path_factory):
    a = tmp_path_factory.mktemp("a")
    b = tmp_path_factory.mktemp("b")
    return run_experiment("cfl_divergence", a), run_experiment("cfl_divergence", b), a, b


def test_cfl_preset_passes(cfl_runs):
    res, _, out, _ = cfl_runs
    assert res.passed
    names = {c.name for c in res.checks}
    assert names == {"stable_steps_completed", "divergence_step", "growth_flag_before_fault"}
    div = res.info["divergence"]
    assert div["growth_flag_step"] < div["fault_step"] <= 2000


def test_artifact_layout(cfl_runs):
    _, _, out, _ = cfl_runs
    for sub in ("reference", "fdtd", "reports"):
        assert (out / sub).is_dir()
    m = json.loads((out / "manifest.json").read_text())
    assert m["preset"] == "cfl_divergence" and m["passed"] is True
    assert m["thresholds"] == THRESHOLDS["cfl_divergence"]
    run = m["runs"]["cfl0.9"]
    assert {"cells", "dx_m", "dt_s", "memory_estimate_bytes", "seconds_per_iteration"} <= set(run)
    assert json.loads((out / "scenario.json").read_text())["id"] == "cfl_divergence"


def test_rerun_is_byte_identical(cfl_runs):
    _, _, a, b = cfl_runs
    csvs = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert csvs
    for rel in csvs:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_stage_failure_names_the_stage(tmp_path):
    with pytest.raises(ExperimentError) as exc:
        run_experiment("cfl_divergence", tmp_path, overrides={"extents_m": [2005.0, 1500.0]})
    assert exc.value.stage == "grid"
    assert "multiple of dx" in str(exc.value)


def test_post_peak_deviation():
    tb = Timebase(1.0, 6)
    p = ObservationPoint(1.0)
    a = FieldWaveform("Hphi", [0.0, 1.0, 2.0, 1.0, 0.5, 0.2], tb, p)
    b = FieldWaveform("Hphi", [9.0, 1.0, 2.0, 1.2, 0.5, 0.2], tb, p)
    # differences before the reference peak do not count
    assert post_peak_deviation(a, b) == pytest.approx(0.1)
