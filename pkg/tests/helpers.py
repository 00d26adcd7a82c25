"""Shared test helpers."""

import numpy as np

from excavator_dynamics.kinematics import JointAngles
from excavator_dynamics.scenarios import calibration_bundle
from excavator_dynamics.simulator import simulate


def random_poses(preset, n, seed=0, cab=0.0):
    rng = np.random.default_rng(seed)
    ws = preset.workspace
    return JointAngles(*(rng.uniform(*ws[j], n) for j in ("boom", "stick", "bucket")), cab)


def simulate_bundle(preset, seed=0, noise=False, phys=None):
    phys = preset.physical if phys is None else phys
    groups = {}
    for k, (stage, joint, script) in enumerate(calibration_bundle(preset, seed)):
        ep = simulate(phys, preset.geometry, script, seed=seed * 1000 + k, noise=noise)
        groups.setdefault((stage, joint), []).append(ep)
    return groups


def random_phys(rng, base):
    """Physical parameters with random masses, COGs and inertias (friction from ``base``)."""
    from dataclasses import replace

    from excavator_dynamics.simulator import LinkInertial

    links = {
        name: LinkInertial(
            float(rng.uniform(100, 5000)),
            (float(rng.uniform(-1, 4)), float(rng.uniform(-1, 1))),
            float(rng.uniform(0, 8000)),
        )
        for name in ("boom", "stick", "bucket")
    }
    return replace(base, links=links)
