"""Scenario library: calibration bundles and evaluation suites for the simulator.

Every generator is deterministic for a given seed. Joint ranges come from
the preset's ``workspace`` so scripts stay inside the joint limits.
"""

from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .signals import write_episode_csv
from .simulator import Hold, Move, Path as PathSeg, Ramp, ScenarioScript, SetForce, SetPayload, format_script, simulate

GRADING_LOAD = 580.0  # kg


def _lerp(rng_pair, u):
    lo, hi = rng_pair
    return lo + (hi - lo) * u


def _pose(ws, u_boom, u_stick, u_bucket, cab=0.0):
    return (_lerp(ws["boom"], u_boom), _lerp(ws["stick"], u_stick), _lerp(ws["bucket"], u_bucket), cab)


def plunger_sweeps(preset, payload=500.0, duration=16.0):
    """Slow boom sweeps (up, then down) with and without a blade payload."""
    ws = preset.workspace
    start = _pose(ws, 0.05, 0.5, 0.5)
    top = _pose(ws, 0.95, 0.5, 0.5)
    steps = [Hold(1.0), Move(duration, top), Hold(1.0), Move(duration, start), Hold(1.0)]
    loaded = ScenarioScript("plunger_loaded", start, [SetPayload(payload)] + steps)
    unloaded = ScenarioScript("plunger_unloaded", start, list(steps))
    return loaded, unloaded


def inertia_excitation(preset, joint, seed=0, cycles=10, duration=1.2):
    """Hard up-and-down moves of one joint at varied configurations, with rocking pauses."""
    rng = np.random.default_rng(seed)
    ws = preset.workspace
    k = 0 if joint == "boom" else 1
    u = rng.uniform(0.15, 0.85, size=(cycles, 3))
    start = list(_pose(ws, *u[0]))
    steps = [Hold(1.0)]
    current = list(start)
    for c in range(cycles):
        base = list(_pose(ws, *u[c]))
        lo, hi = ws[joint]
        span = 0.5 * (hi - lo)
        down = base.copy()
        up = base.copy()
        down[k] = lo + 0.05 * (hi - lo)
        up[k] = down[k] + span * rng.uniform(0.7, 1.0)
        if current != down:
            steps.append(Move(2.0, tuple(down)))
            steps.append(Hold(1.0))
        steps += [Move(duration, tuple(up)), Hold(2.0), Move(duration, tuple(down)), Hold(2.0)]
        current = down
    return ScenarioScript(f"inertia_{joint}", tuple(start), steps)


def friction_sweeps(preset, joint, seed=0, configurations=4, speeds=(1.0, 0.7, 1.4)):
    """Constant-speed single-joint up/down sweeps, other joints fixed; one script per configuration."""
    rng = np.random.default_rng(seed)
    ws = preset.workspace
    k = 0 if joint == "boom" else 1
    lo, hi = ws[joint]
    scripts = []
    for c in range(configurations):
        u = rng.uniform(0.15, 0.85, size=3)
        u[k] = 0.05
        bottom = list(_pose(ws, *u))
        top = bottom.copy()
        top[k] = lo + 0.95 * (hi - lo)
        steps = [Hold(0.5)]
        for speed in speeds:
            T = 8.0 / speed
            steps += [Ramp(T, 0.5, tuple(top)), Hold(0.5), Ramp(T, 0.5, tuple(bottom)), Hold(0.5)]
        scripts.append(ScenarioScript(f"friction_{joint}_{c}", tuple(bottom), steps))
    return scripts


def _inside(ws, path):
    """True when the cubic spline through ``path`` stays inside the workspace ranges."""
    dense = CubicSpline(np.arange(len(path)), np.asarray(path), axis=0)(np.linspace(0, len(path) - 1, 50 * len(path)))
    return all(
        ws[j][0] <= dense[:, k].min() and dense[:, k].max() <= ws[j][1]
        for k, j in enumerate(("boom", "stick", "bucket"))
    )


def _random_path(rng, ws, knots, cab=(0.0, 0.0), u_range=(0.05, 0.95), tries=100):
    # redraw knot sets whose spline overshoots the workspace
    cabs = np.linspace(cab[0], cab[1], knots)
    for _ in range(tries):
        u = rng.uniform(*u_range, size=(knots, 3))
        path = tuple(_pose(ws, *u[i], cab=cabs[i]) for i in range(knots))
        if _inside(ws, path):
            return path
    raise RuntimeError("could not draw a path inside the workspace")


def gravity_sweeps(preset, seed=0, episodes=6, duration=20.0, knots=6):
    """Slow multi-joint spline paths covering the workspace."""
    rng = np.random.default_rng(seed)
    ws = preset.workspace
    scripts = []
    for e in range(episodes):
        path = _random_path(rng, ws, knots + 1)
        scripts.append(
            ScenarioScript(f"gravity_{e}", path[0], [Hold(0.5), PathSeg(duration, path[1:]), Hold(0.5)])
        )
    return scripts


def centripetal_slew(preset, seed=0, episodes=2, slew_rate=0.5, duration=12.0):
    """Sustained cabin rotation while the boom moves slowly up and down."""
    rng = np.random.default_rng(seed)
    ws = preset.workspace
    scripts = []
    for e in range(episodes):
        u = rng.uniform(0.2, 0.8, size=3)
        start = _pose(ws, 0.1, *u[1:])
        # quintic slew: peak rate 1.875 * angle / T
        angle = slew_rate * duration / 1.875 * (1 if e % 2 == 0 else -1)
        knots = (
            _pose(ws, 0.9, *u[1:], cab=angle / 3),
            _pose(ws, 0.2, *u[1:], cab=2 * angle / 3),
            _pose(ws, 0.8, *u[1:], cab=angle),
        )
        scripts.append(ScenarioScript(f"centripetal_{e}", start, [Hold(0.5), PathSeg(duration, knots), Hold(0.5)]))
    return scripts


def baseline_static(preset, seed=0, episodes=8, duration=40.0, knots=8):
    """Slow empty-bucket paths for fitting the quasi-static torque surface."""
    rng = np.random.default_rng(seed + 1000)
    ws = preset.workspace
    scripts = []
    for e in range(episodes):
        path = _random_path(rng, ws, knots + 1, u_range=(0.0, 1.0))
        scripts.append(ScenarioScript(f"baseline_{e}", path[0], [PathSeg(duration, path[1:])]))
    return scripts


def workspace_grid(preset, seed=0, trajectories=15, duration=8.0):
    """Fifteen evaluation trajectories on a 5 x 3 grid of boom and stick ranges."""
    rng = np.random.default_rng(seed + 2000)
    ws = preset.workspace
    scripts = []
    for i, ub in enumerate(np.linspace(0.1, 0.9, 5)):
        for j, us in enumerate(np.linspace(0.15, 0.85, 3)):
            ubu = rng.uniform(0.2, 0.8)
            start = _pose(ws, ub - 0.08, us - 0.1, ubu)
            end = _pose(ws, ub + 0.08, us + 0.1, ubu + 0.1)
            steps = [Move(duration / 2, end), Move(duration / 2, start)]
            scripts.append(ScenarioScript(f"grid_{i}_{j}", start, steps))
    return scripts[:trajectories]


WEIGHING_KINDS = ("normal", "short", "max_accel", "fast_slew", "multi_joint")


def weighing_cycles(preset, seed=0, count=55, max_fraction=0.6):
    """Lift-and-swing loading cycles with random payloads.

    The mix follows a realistic operator log: normal lifts, very short 0.5 s
    lifts, maximum-acceleration lifts, fast slewing and multi-joint motions.
    Boom rates stay below about 0.5 rad/s and accelerations below about
    1.3 rad/s^2, the range of a loaded hydraulic boom.
    """
    rng = np.random.default_rng(seed + 3000)
    ws = preset.workspace
    rated = preset.geometry.rated_capacity
    scripts = []
    for e in range(count):
        kind = WEIGHING_KINDS[e % len(WEIGHING_KINDS)]
        mass = float(np.round(rng.uniform(0.0, max_fraction) * rated, 1))
        ub0 = rng.uniform(0.05, 0.35)
        us, ubu = rng.uniform(0.3, 0.7), rng.uniform(0.4, 0.8)
        start = _pose(ws, ub0, us, ubu)
        if kind == "short":
            end = _pose(ws, ub0 + 0.04, us, ubu)
            steps = [Move(0.5, end)]
        elif kind == "max_accel":
            end = _pose(ws, ub0 + 0.21, us, ubu)
            steps = [Move(1.15, end)]
        elif kind == "fast_slew":
            # peak slew rate of 0.5-0.7 rad/s during the lift
            duration = 4.0
            angle = rng.uniform(0.5, 0.7) * duration / 1.875
            end = _pose(ws, ub0 + 0.45, us, ubu, cab=angle)
            steps = [Move(duration, end)]
        elif kind == "multi_joint":
            end = _pose(ws, ub0 + 0.5, us - 0.2, ubu - 0.2)
            steps = [Move(3.0, end)]
        else:
            end = _pose(ws, ub0 + 0.5, us, ubu, cab=rng.uniform(0.3, 0.8))
            steps = [Move(3.5, end)]
        scripts.append(ScenarioScript(f"weighing_{e:02d}_{kind}", start, [SetPayload(mass)] + steps))
    return scripts


def grading(preset, seed=0, count=5, load=GRADING_LOAD, duration=10.0):
    """Slow boom-and-stick sweeps holding a suspended load, modelled as a blade force."""
    rng = np.random.default_rng(seed + 4000)
    ws = preset.workspace
    scripts = []
    for e in range(count):
        u = rng.uniform(0.3, 0.7, size=3)
        start = _pose(ws, u[0] - 0.2, 0.25, u[2])
        end = _pose(ws, u[0] + 0.1, 0.75, u[2])
        steps = [SetForce((0.0, -load * 9.81)), Move(duration, end)]
        scripts.append(ScenarioScript(f"grading_{e}", start, steps))
    return scripts


def calibration_bundle(preset, seed=0, include_plunger=False):
    """Staged calibration scripts: list of (stage, joint or None, script)."""
    out = []
    if include_plunger:
        loaded, unloaded = plunger_sweeps(preset)
        out += [("plunger_loaded", "boom", loaded), ("plunger_unloaded", "boom", unloaded)]
    for joint in ("boom", "stick"):
        out.append(("inertia", joint, inertia_excitation(preset, joint, seed=seed + (0 if joint == "boom" else 1))))
    for joint in ("boom", "stick"):
        for s in friction_sweeps(preset, joint, seed=seed + (10 if joint == "boom" else 11)):
            out.append(("friction", joint, s))
    for s in gravity_sweeps(preset, seed=seed + 20):
        out.append(("gravity", None, s))
    for s in centripetal_slew(preset, seed=seed + 30):
        out.append(("centripetal", None, s))
    for s in baseline_static(preset, seed=seed):
        out.append(("baseline", None, s))
    return out


SUITES = {
    "weighing_cycles": weighing_cycles,
    "grading": grading,
    "workspace_grid": workspace_grid,
    "baseline_static": baseline_static,
    "gravity": gravity_sweeps,
    "centripetal": centripetal_slew,
}


def scenario_library(preset, seed=0):
    """All named scenarios: single scripts and suites, keyed by name."""
    lib = {name: fn(preset, seed=seed) for name, fn in SUITES.items()}
    loaded, unloaded = plunger_sweeps(preset)
    lib["plunger"] = [loaded, unloaded]
    lib["inertia_boom"] = [inertia_excitation(preset, "boom", seed)]
    lib["inertia_stick"] = [inertia_excitation(preset, "stick", seed + 1)]
    lib["friction_boom"] = friction_sweeps(preset, "boom", seed + 10)
    lib["friction_stick"] = friction_sweeps(preset, "stick", seed + 11)
    return lib


def write_bundle(preset, out_dir, seed=0, include_plunger=False, noise=True, phys=None):
    """Simulate the calibration bundle into ``out_dir`` and write its manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    phys = preset.physical if phys is None else phys
    lines = []
    for k, (stage, joint, script) in enumerate(calibration_bundle(preset, seed, include_plunger)):
        ep = simulate(phys, preset.geometry, script, seed=seed * 1000 + k, noise=noise)
        name = f"{script.name}.csv"
        write_episode_csv(ep, out_dir / name)
        extra = ""
        if stage == "plunger_loaded":
            extra = f" payload_kg={script.payload_mass!r}"
        lines.append(f"{stage} {joint or '-'} {name}{extra}")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("# stage joint path [key=value ...]\n" + "\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def write_scripts(scripts, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for s in scripts:
        (out_dir / f"{s.name}.script").write_text(format_script(s), encoding="utf-8")
