import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excavator_dynamics.errors import ConfigError, InsufficientOverlap, InvalidGeometry, NonQuasistatic
from excavator_dynamics.hydraulics import (
    DEFAULT_CATALOG,
    GRAVITY,
    CylinderCatalog,
    PressurePair,
    chamber_pressures,
    cylinder_force,
    identify_plunger_area,
    load_catalog,
    measured_joint_torque,
    payload_lever,
)
from excavator_dynamics.kinematics import CylinderAreas, JointAngles, JointRates, sensitivity
from excavator_dynamics.scenarios import plunger_sweeps
from excavator_dynamics.signals import Episode
from excavator_dynamics.simulator import Hold, Ramp, ScenarioScript, SetPayload, joint_torques, payload_torque, simulate

from helpers import random_poses


def test_force_zero_pressure():
    assert cylinder_force(0.02, 0.008, PressurePair(0.0, 0.0)) == 0.0


def test_force_worked_example():
    assert cylinder_force(0.02, 0.008, PressurePair(1e7, 5e6)) == pytest.approx(1.4e5, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(0, 4e7), ap=st.floats(0.005, 0.05), frac=st.floats(0.1, 0.9))
def test_equal_pressures_act_on_rod_area(p, ap, frac):
    ar = ap * frac
    assert cylinder_force(ap, ar, PressurePair(p, p)) == pytest.approx(ar * p, rel=1e-9, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(
    p1=st.floats(0, 3e7), p2=st.floats(0, 3e7), q1=st.floats(0, 3e7), q2=st.floats(0, 3e7),
    k=st.floats(-3, 3),
)
def test_force_is_linear(p1, p2, q1, q2, k):
    f = lambda a, b: cylinder_force(0.03, 0.01, PressurePair(a, b))
    assert f(p1 + k * q1, p2 + k * q2) == pytest.approx(f(p1, p2) + k * f(q1, q2), rel=1e-9, abs=1e-3)


@pytest.mark.parametrize("ap, ar", [(0.01, 0.01), (0.01, 0.02), (0.01, 0.0)])
def test_force_rejects_bad_areas(ap, ar):
    with pytest.raises(InvalidGeometry):
        cylinder_force(ap, ar, PressurePair(1.0, 1.0))


@pytest.mark.parametrize("joint", ["boom", "stick"])
def test_torque_zero_and_linear(case, joint):
    q = random_poses(case, 20)
    zero = PressurePair(np.zeros(20), np.zeros(20))
    assert np.all(measured_joint_torque(case.geometry, joint, q, zero) == 0)
    p = PressurePair(np.full(20, 8e6), np.full(20, 2e6))
    p2 = PressurePair(2 * p.p1, 2 * p.p2)
    np.testing.assert_allclose(
        measured_joint_torque(case.geometry, joint, q, p2), 2 * measured_joint_torque(case.geometry, joint, q, p)
    )


@pytest.mark.parametrize("joint", ["boom", "stick"])
def test_pressures_round_trip_simulator_torque(case, joint):
    g = case.geometry
    q = random_poses(case, 500, seed=4)
    rates = JointRates(0.1, -0.1, 0.0, 0.3)
    acc = {"boom": 0.5, "stick": -0.4, "bucket": 0.0}
    tau = joint_torques(case.physical, g, q, rates, acc, payload=800.0)[joint]
    p = chamber_pressures(g, joint, q, tau, 5e5)
    assert np.all(p.p1 >= 0) and np.all(p.p2 >= 0)
    back = measured_joint_torque(g, joint, q, p)
    np.testing.assert_allclose(back, tau, rtol=1e-9)


def test_payload_lever_reproduces_gravity_torque(case):
    g = case.geometry
    q = random_poses(case, 50)
    r, tm = payload_lever(g, "boom", q)
    expected = payload_torque(g, "boom", q, 0.0, 0.0, 300.0)
    np.testing.assert_allclose(GRAVITY * r * 300.0 * np.cos(q.boom - tm), expected, rtol=1e-10, atol=1e-8)


# plunger identification ------------------------------------------------------

@pytest.fixture(scope="module")
def bore110(case):
    return case.geometry.with_areas("boom", CylinderAreas.from_diameters(0.110, 0.070))


def _lever(geom, ep):
    r, tm = payload_lever(geom, "boom", ep[len(ep) // 2].q)
    return float(r), float(tm)


def test_plunger_area_from_simulated_sweeps(case, bore110):
    loaded, unloaded = plunger_sweeps(case, payload=500.0)
    lo = simulate(case.physical, bore110, loaded, seed=1)
    un = simulate(case.physical, bore110, unloaded, seed=2)
    res = identify_plunger_area(lo, un, 500.0, *_lever(bore110, lo), bore110.areas["boom"].rod, bore110.linkage["boom"])
    assert res.area_raw == pytest.approx(np.pi * 0.055**2, rel=0.02)
    assert res.bore_catalog == 0.110
    assert res.area_catalog == pytest.approx(np.pi * 0.055**2, rel=1e-12)


def _cruise_pair(case, geom, duration):
    phys = case.physical.frictionless().without_rocking()
    a, b = (-0.5, -1.5, -1.0, 0.0), (0.6, -1.5, -1.0, 0.0)
    steps = [Ramp(duration, 1.0, b), Hold(0.5), Ramp(duration, 1.0, a)]
    lo = simulate(phys, geom, ScenarioScript("l", a, [SetPayload(500.0)] + steps), noise=False)
    un = simulate(phys, geom, ScenarioScript("u", a, list(steps)), noise=False)
    return lo, un, 1.1 / (duration - 1.0)


def test_true_area_is_a_fixed_point_on_quasistatic_pairs(case, bore110):
    lo, un, v = _cruise_pair(case, bore110, 11.0)
    res = identify_plunger_area(
        lo, un, 500.0, *_lever(bore110, lo), bore110.areas["boom"].rod, bore110.linkage["boom"],
        speed_band=(0.99 * v, 1.01 * v), bin_width=1e-3,
    )
    assert res.area_raw == pytest.approx(bore110.areas["boom"].piston, rel=1e-10)


@pytest.mark.parametrize("duration", [8.0, 15.0])
def test_time_reparameterisation_invariance(case, bore110, duration):
    lo, un, v = _cruise_pair(case, bore110, duration)
    res = identify_plunger_area(
        lo, un, 500.0, *_lever(bore110, lo), bore110.areas["boom"].rod, bore110.linkage["boom"],
        speed_band=(0.99 * v, 1.01 * v), bin_width=1e-3,
    )
    assert res.area_raw == pytest.approx(bore110.areas["boom"].piston, rel=1e-10)


def test_identical_pressures_carry_no_signal(case, bore110):
    _, un, _ = _cruise_pair(case, bore110, 11.0)
    with pytest.raises(InsufficientOverlap):
        identify_plunger_area(un, un, 500.0, *_lever(bore110, un), bore110.areas["boom"].rod, bore110.linkage["boom"])


def test_static_episodes_are_not_quasistatic(case, bore110):
    phys = case.physical
    s = ScenarioScript("s", (0.1, -1.5, -1.0, 0.0), [Hold(5.0)])
    ep = simulate(phys, bore110, s, noise=False)
    with pytest.raises(NonQuasistatic):
        identify_plunger_area(ep, ep, 500.0, 8.0, 0.0, bore110.areas["boom"].rod, bore110.linkage["boom"])


def _constant_episode(theta, omega, p1, p2, n=10):
    t = np.arange(n) * 0.02
    return Episode(
        t=t, q=JointAngles(theta, -1.5, -1.0, 0.0), qd=JointRates(omega, 0.0, 0.0, 0.0),
        pressures={"boom": PressurePair(np.full(n, p1), np.full(n, p2)), "stick": PressurePair(np.full(n, 1e6), np.full(n, 1e6))},
    )


def test_single_pair_by_hand(case):
    link = case.geometry.linkage["boom"]
    theta, theta_m, radius, mass, rod = 0.3, 0.3, 7.0, 400.0, 0.012
    w = _constant_episode(theta, 0.1, 12e6, 1.0e6)
    wo = _constant_episode(theta, 0.1, 10e6, 1.2e6)
    eta = sensitivity(link, theta)
    expected = (rod * eta * (1.2e6 - 1.0e6) + GRAVITY * radius * mass * 1.0) / (eta * ((12e6 - 1.0e6) - (10e6 - 1.2e6)))
    res = identify_plunger_area(w, wo, mass, radius, theta_m, rod, link, min_pairs=1)
    assert res.area_raw == pytest.approx(expected, rel=1e-12)
    assert res.pairs_used == 1


def test_catalog_snaps_by_diameter():
    bore, area = DEFAULT_CATALOG.nearest(np.pi * 0.112**2 / 4)
    assert bore == 0.110
    assert area == pytest.approx(np.pi * 0.055**2)


def test_catalog_file(tmp_path):
    path = tmp_path / "bores.txt"
    path.write_text("# custom\n100\n 115  # odd size\n130\n", encoding="utf-8")
    cat = load_catalog(path)
    assert cat.bores == (0.1, 0.115, 0.13)
    path.write_text("100\n90\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_catalog(path)
    with pytest.raises(ConfigError):
        CylinderCatalog(())
