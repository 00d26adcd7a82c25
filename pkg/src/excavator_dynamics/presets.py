"""Bundled machine presets: geometry, simulator ground truth and working envelope.

Dimensions are loosely scaled from two real machines, a 25 t tracked
excavator and a 6 t walking excavator. Masses, inertias and friction are
invented but plausible.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import FrictionCoeffs, JointFriction
from .errors import ConfigError
from .kinematics import CylinderAreas, LinkageGeometry, MachineGeometry
from .simulator import LinkInertial, PhysicalParams


@dataclass(frozen=True)
class Preset:
    geometry: MachineGeometry
    physical: PhysicalParams
    envelope: tuple  # normal working envelope (x_min, x_max, z_min, z_max) of the blade [m]
    workspace: dict  # joint ranges used by the scenario library [rad]


def _symmetric(slope, offset):
    c = FrictionCoeffs(slope, offset)
    return JointFriction(c, c)


def case_like():
    geom = MachineGeometry(
        l_boom=5.8,
        l_stick=3.0,
        blade_offset=(1.6, 0.0),
        linkage={
            "boom": LinkageGeometry(a=1.0, c=2.4, phi1=1.2, phi2=0.4),
            "stick": LinkageGeometry(a=2.8, c=0.75, phi1=-0.2, phi2=-0.1),
        },
        areas={
            "boom": CylinderAreas.from_diameters(0.180, 0.125),
            "stick": CylinderAreas.from_diameters(0.140, 0.100),
        },
        limits={"boom": (-0.9, 1.0), "stick": (-2.6, -0.5), "bucket": (-2.8, 0.6)},
        boom_pivot_offset=0.6,
        rated_capacity=9210.0,
        machine_id="case-like-25t",
    )
    phys = PhysicalParams(
        links={
            "boom": LinkInertial(2600.0, (2.9, -0.25), 7500.0),
            "stick": LinkInertial(1300.0, (1.3, 0.12), 1100.0),
            "bucket": LinkInertial(1100.0, (0.7, 0.25), 350.0),
        },
        friction={"boom": _symmetric(0.05, 2000.0), "stick": _symmetric(0.02, 1000.0)},
    )
    workspace = {"boom": (-0.6, 0.75), "stick": (-2.3, -0.8), "bucket": (-2.2, 0.2)}
    return Preset(geom, phys, (4.0, 9.0, -2.0, 3.0), workspace)


def m545_like():
    geom = MachineGeometry(
        l_boom=2.8,
        l_stick=2.1,
        blade_offset=(1.0, 0.0),
        linkage={
            "boom": LinkageGeometry(a=0.55, c=1.25, phi1=1.2, phi2=0.4),
            "stick": LinkageGeometry(a=1.7, c=0.45, phi1=-0.2, phi2=-0.1),
        },
        areas={
            "boom": CylinderAreas.from_diameters(0.125, 0.080),
            "stick": CylinderAreas.from_diameters(0.110, 0.070),
        },
        limits={"boom": (-0.9, 1.0), "stick": (-2.6, -0.5), "bucket": (-2.8, 0.6)},
        boom_pivot_offset=0.4,
        rated_capacity=6000.0,
        machine_id="m545-like",
    )
    phys = PhysicalParams(
        links={
            "boom": LinkInertial(900.0, (1.4, -0.12), 700.0),
            "stick": LinkInertial(450.0, (0.9, 0.06), 180.0),
            "bucket": LinkInertial(400.0, (0.45, 0.15), 60.0),
        },
        friction={"boom": _symmetric(0.05, 700.0), "stick": _symmetric(0.02, 350.0)},
    )
    workspace = {"boom": (-0.6, 0.75), "stick": (-2.3, -0.8), "bucket": (-2.2, 0.2)}
    return Preset(geom, phys, (2.0, 5.0, -1.0, 2.0), workspace)


PRESETS = {"case-like": case_like, "m545-like": m545_like}


def get_preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown machine preset {name!r}; choose from {sorted(PRESETS)}") from None


def envelope_grid(preset, step=0.25):
    x0, x1, z0, z1 = preset.envelope
    return np.arange(x0, x1 + 1e-9, step), np.arange(z0, z1 + 1e-9, step)
