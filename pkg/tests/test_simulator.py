from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excavator_dynamics.errors import ConfigError, ScriptInfeasible
from excavator_dynamics.estimation import episode_torques
from excavator_dynamics.hydraulics import GRAVITY
from excavator_dynamics.kinematics import JointRates, forward_kinematics
from excavator_dynamics.scenarios import friction_sweeps, inertia_excitation, scenario_library
from excavator_dynamics.signals import band_power, ensure_aligned, psd
from excavator_dynamics.simulator import (
    Hold,
    Move,
    Ramp,
    Rocking,
    ScenarioScript,
    SetPayload,
    format_script,
    joint_torques,
    load_phys,
    parse_script,
    rocking_response,
    save_phys,
    simulate,
    unlumped_gravity_torque,
)

from helpers import random_poses


def _mid(case):
    return tuple(float(np.mean(case.workspace[j])) for j in ("boom", "stick", "bucket")) + (0.0,)


def test_standstill_reads_gravity(case):
    ep = simulate(case.physical.noiseless(), case.geometry, ScenarioScript("s", _mid(case), [Hold(2.0)]), noise=False)
    tau = episode_torques(case.geometry, ep)
    for j in ("boom", "stick"):
        assert np.ptp(ep.pressures[j].p1) == 0.0
        np.testing.assert_allclose(tau[j], unlumped_gravity_torque(case.physical, case.geometry, j, ep.q), rtol=1e-9)


@pytest.mark.parametrize("mass", [100.0, 580.0, 4000.0])
def test_payload_adds_weight_times_lever(case, mass, zero_rates):
    g = case.geometry
    q = random_poses(case, 50, seed=4)
    acc = {"boom": 0.0, "stick": 0.0, "bucket": 0.0}
    empty = joint_torques(case.physical.frictionless(), g, q, zero_rates, acc)
    loaded = joint_torques(case.physical.frictionless(), g, q, zero_rates, acc, payload=mass)
    r = forward_kinematics(g, q)
    np.testing.assert_allclose(loaded["boom"] - empty["boom"], GRAVITY * mass * r[:, 0], rtol=1e-9)


def test_friction_sweep_shows_direction_gap(case):
    ep = ensure_aligned(simulate(case.physical, case.geometry, friction_sweeps(case, "boom", configurations=1)[0], seed=3))
    tau = episode_torques(case.geometry, ep)["boom"]
    w = ep.qd.boom
    q = ep.q.boom
    mid = np.abs(q - np.median(q)) < 0.1
    assert tau[mid & (w > 0.05)].mean() - tau[mid & (w < -0.05)].mean() > 1000.0


def test_inertia_excitation_has_band_power(case):
    ep = ensure_aligned(simulate(case.physical, case.geometry, inertia_excitation(case, "stick"), seed=1))
    assert band_power(psd(ep.qdd.stick, ep.rate), 0.5, 3.0) > 1e-3


def test_deterministic_given_seed(case):
    script = inertia_excitation(case, "boom")
    a = simulate(case.physical, case.geometry, script, seed=7)
    b = simulate(case.physical, case.geometry, script, seed=7)
    c = simulate(case.physical, case.geometry, script, seed=8)
    np.testing.assert_array_equal(a.pressures["boom"].p1, b.pressures["boom"].p1)
    np.testing.assert_array_equal(a.qd.stick, b.qd.stick)
    assert not np.array_equal(a.pressures["boom"].p1, c.pressures["boom"].p1)


def test_noise_levels(case):
    script = inertia_excitation(case, "boom")
    clean = simulate(case.physical, case.geometry, script, noise=False)
    noisy = simulate(case.physical, case.geometry, script, seed=2)
    nz = case.physical.noise
    assert np.std(noisy.pressures["boom"].p1 - clean.pressures["boom"].p1) == pytest.approx(nz.pressure, rel=0.1)
    assert np.std(noisy.qd.boom - clean.qd.boom) == pytest.approx(nz.gyro, rel=0.1)
    assert np.std(noisy.q.stick - clean.q.stick) == pytest.approx(nz.angle, rel=0.1)


def test_payload_recorded(case):
    script = ScenarioScript("p", _mid(case), [SetPayload(750.0), Hold(1.0)])
    ep = simulate(case.physical, case.geometry, script)
    assert ep.true_payload == 750.0
    assert ep.metadata["payload_kg"] == "750.0"


# rocking -------------------------------------------------------------------------

def test_rocking_decays_after_motion():
    r = Rocking(frequency=1.5, damping=0.1, gain=0.005)
    dt = 0.004
    acc = np.zeros(5000)
    acc[:100] = 1.0
    x, _, _ = rocking_response(r, acc, dt)
    period = int(round(1 / (r.frequency * dt)))
    peaks = [np.abs(x[k:k + period]).max() for k in range(200, 200 + 6 * period, period)]
    assert all(b < a for a, b in zip(peaks, peaks[1:]))
    ratio = peaks[1] / peaks[0]
    expected = np.exp(-2 * np.pi * r.damping / np.sqrt(1 - r.damping**2))
    assert ratio == pytest.approx(expected, rel=0.05)


def test_rocking_static_deflection():
    r = Rocking(frequency=2.0, damping=0.7, gain=0.01)
    x, xd, _ = rocking_response(r, np.full(3000, 2.0), 0.004)
    assert x[-1] == pytest.approx(-0.02, rel=1e-4)
    assert abs(xd[-1]) < 1e-6


def test_no_rocking_leaves_path_exact(case):
    script = ScenarioScript("m", _mid(case), [Move(2.0, tuple(np.add(_mid(case), (0.3, 0.2, 0.0, 0.0))))])
    a = simulate(case.physical.without_rocking(), case.geometry, script, noise=False)
    assert a.q.boom[-1] == pytest.approx(_mid(case)[0] + 0.3, abs=1e-12)


# scripts -------------------------------------------------------------------------

def test_library_scripts_round_trip(case):
    for name, scripts in scenario_library(case).items():
        for s in scripts:
            text = format_script(s)
            back = parse_script(text)
            assert format_script(back) == text, name
            assert back.duration == pytest.approx(s.duration)


def test_script_text_example():
    s = parse_script(
        "name lift_1\nstart 0.1 -1.5 -1.0 0.0\npayload 500  # kg\nmove 2.0 0.6 -1.2 -1.0 0.8\n"
        "hold 0.5\nramp 4.0 0.4 0.2 -1.2 -1.0 0.8\npath 3.0 0.2 -1.4 -1 0 | 0.5 -1.0 -1 0.5\n"
    )
    assert s.name == "lift_1"
    assert s.duration == pytest.approx(9.5)
    assert s.payload_mass == 500.0


@pytest.mark.parametrize(
    "text",
    ["move 1 0 0 0 0\n", "start 0 0 0 0\nfly 1\n", "start 0 0 0\n", "start 0 0 0 0\nhold x\n"],
)
def test_script_config_errors(text):
    with pytest.raises(ConfigError):
        parse_script(text)


@pytest.mark.parametrize("text", ["start 0 -1 -1 0\nramp 4 3 0 -1 -1 0\n", "start 0 -1 -1 0\nhold 0\n"])
def test_script_infeasible_text(text):
    with pytest.raises(ScriptInfeasible):
        parse_script(text)


def test_script_outside_limits(case):
    lo, hi = case.geometry.limits["boom"]
    script = ScenarioScript("x", _mid(case), [Move(2.0, (hi + 0.2,) + _mid(case)[1:])])
    with pytest.raises(ScriptInfeasible, match="boom"):
        simulate(case.physical, case.geometry, script)


def test_script_too_short(case):
    with pytest.raises(ScriptInfeasible):
        simulate(case.physical, case.geometry, ScenarioScript("x", _mid(case), []))


@settings(max_examples=25, deadline=None)
@given(d=st.floats(0.5, 5.0), m=st.floats(0.0, 5000.0))
def test_script_property_round_trip(case, d, m):
    s = ScenarioScript("p", _mid(case), [SetPayload(m), Ramp(d, d / 4, _mid(case)), Hold(d)])
    assert parse_script(format_script(s)) == s


# physical parameter file ---------------------------------------------------------

def test_phys_file_round_trip(tmp_path, case):
    p = replace(case.physical, back_pressure=4e5)
    save_phys(p, tmp_path / "phys.txt")
    assert load_phys(tmp_path / "phys.txt") == p


def test_phys_file_missing_mass(tmp_path):
    (tmp_path / "phys.txt").write_text("boom.cog = 1, 0\n")
    with pytest.raises(ConfigError):
        load_phys(tmp_path / "phys.txt")


def test_joint_torques_rates_broadcast(case):
    q = random_poses(case, 4)
    tau = joint_torques(case.physical, case.geometry, q, JointRates(0.1, -0.1, 0.0, 0.2), {"boom": 0.0, "stick": 0.0, "bucket": 0.0})
    assert tau["boom"].shape == (4,)
