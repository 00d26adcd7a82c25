"""Lumped zero-load torque model for the boom and stick joints.

The measured joint torque of an unloaded arm is modelled as

    tau_m = tau_g(q) + I(q) * qdd + tau_fric(tau_m, qd) + tau_c(q, cab_rate)

with every term linear in a small set of lumped coefficients. Inter-joint
Coriolis and acceleration coupling terms are not modelled.
"""

import warnings
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from . import kvfile
from .errors import ConfigError
from .kinematics import INSTRUMENTED

FORMAT_VERSION = 1
DEFAULT_DEADBAND = 0.01  # rad/s
NOT_MOVING = np.nan  # friction marker for samples inside the deadband

N_GRAVITY = {"boom": 6, "stick": 4}
N_INERTIA = {"boom": 5, "stick": 3}


class NonPhysical(UserWarning):
    """A lumped inertia evaluated to a non-positive value."""


@dataclass(frozen=True)
class FrictionCoeffs:
    slope: float = 0.0  # dimensionless
    offset: float = 0.0  # N*m


@dataclass(frozen=True)
class JointFriction:
    raising: FrictionCoeffs = FrictionCoeffs()
    lowering: FrictionCoeffs = FrictionCoeffs()


def _zeros(n):
    return tuple([0.0] * n)


@dataclass(frozen=True)
class LumpedParams:
    """Identified coefficients for the boom and stick torque models.

    Gravity coefficients multiply ``cos``/``sin`` of the cumulative link
    angles, so ``gravity_torque`` at zero angles is the sum of the odd
    (cosine) entries. ``calibrated`` is only set by the calibration pipeline
    or when loading a parameter file that says so.
    """

    pi_bg: tuple = _zeros(6)
    pi_sg: tuple = _zeros(4)
    pi_bI: tuple = _zeros(5)
    pi_sI: tuple = _zeros(3)
    friction: dict = field(default_factory=lambda: {j: JointFriction() for j in INSTRUMENTED})
    pi_c: float = 0.0
    machine_id: str = "unnamed"
    calibration_date: str = ""
    calibrated: bool = False

    def __post_init__(self):
        for name, n in (("pi_bg", 6), ("pi_sg", 4), ("pi_bI", 5), ("pi_sI", 3)):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != n:
                raise ConfigError(f"{name} needs {n} coefficients, got {len(values)}")
            if not np.all(np.isfinite(values)):
                raise ConfigError(f"{name} contains non-finite values")
            object.__setattr__(self, name, values)
        if not np.isfinite(self.pi_c):
            raise ConfigError("pi_c is not finite")

    def gravity(self, joint):
        return self.pi_bg if joint == "boom" else self.pi_sg

    def inertia(self, joint):
        return self.pi_bI if joint == "boom" else self.pi_sI

    def with_stage(self, **changes):
        return replace(self, **changes)


@dataclass
class TorqueBreakdown:
    gravity: object
    inertia: object
    friction: object  # contribution to the measured torque (NaN when not moving)
    centripetal: object

    @property
    def total(self):
        return self.gravity + self.inertia + self.friction + self.centripetal


def _check_joint(joint):
    if joint not in INSTRUMENTED:
        raise ValueError(f"joint must be one of {INSTRUMENTED}, got {joint!r}")


# regressors ---------------------------------------------------------------

def gravity_regressor(joint, q, geom=None):
    """Columns multiplying the gravity coefficients, shape (..., 6) or (..., 4)."""
    _check_joint(joint)
    pitch = 0.0 if geom is None else geom.cabin_pitch
    a1 = np.asarray(q.boom, dtype=float) + pitch
    a2 = a1 + q.stick
    a3 = a2 + q.bucket
    angles = (a1, a2, a3) if joint == "boom" else (a2, a3)
    cols = []
    for a in angles:
        cols += [np.cos(a), np.sin(a)]
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def inertia_regressor(joint, q, geom):
    """Columns multiplying the inertia coefficients, shape (..., 5) or (..., 3)."""
    _check_joint(joint)
    s = np.asarray(q.stick, dtype=float)
    bu = np.asarray(q.bucket, dtype=float)
    s, bu = np.broadcast_arrays(s, bu)
    one = np.ones_like(s)
    if joint == "boom":
        lb, ls = geom.l_boom, geom.l_stick
        cols = [
            one,
            np.cos(s),
            np.sin(s),
            2 * lb * np.cos(s + bu) + 2 * ls * np.cos(bu),
            2 * lb * np.sin(s + bu) + 2 * ls * np.sin(bu),
        ]
    else:
        cols = [one, np.cos(bu), np.sin(bu)]
    return np.stack(cols, axis=-1)


def centripetal_regressor(params, q, cab_rate, geom=None):
    """Torque per unit ``pi_c``: the gravity terms with sine and cosine swapped."""
    g = params.pi_bg
    swapped = np.array([g[1], g[0], g[3], g[2], g[5], g[4]])
    return np.asarray(cab_rate, dtype=float) ** 2 * (gravity_regressor("boom", q, geom) @ swapped)


# evaluators ---------------------------------------------------------------

def gravity_torque(params, joint, q, geom=None):
    """Holding torque against gravity [N*m]; cabin pitch is taken from ``geom``."""
    return gravity_regressor(joint, q, geom) @ np.asarray(params.gravity(joint))


def inertia_coefficient(params, joint, q, geom):
    """Configuration-dependent inertia about the joint axis [kg*m^2]."""
    value = inertia_regressor(joint, q, geom) @ np.asarray(params.inertia(joint))
    if np.any(value <= 0) and any(params.inertia(joint)):
        warnings.warn(f"{joint} inertia is non-positive at some queried poses", NonPhysical, stacklevel=2)
    return value


def friction_torque(params, joint, tau_measured, omega, deadband=DEFAULT_DEADBAND):
    """Friction torque acting on the joint, opposing the motion [N*m].

    The coefficient set is picked by the direction of motion (raising for
    ``omega > 0``). Inside the velocity deadband the result is
    :data:`NOT_MOVING` (NaN) and the sample should be excluded.
    """
    _check_joint(joint)
    fr = params.friction[joint]
    tau = np.asarray(tau_measured, dtype=float)
    w = np.asarray(omega, dtype=float)
    up = fr.raising.slope * tau + fr.raising.offset
    down = fr.lowering.slope * tau + fr.lowering.offset
    out = np.where(w > 0, -up, down)
    out = np.where(np.abs(w) < deadband, NOT_MOVING, out)
    return out if out.ndim else float(out)


def centripetal_torque(params, q, cab_rate, geom=None):
    """Boom torque from cabin slewing, scaled gravity terms with swapped pairing."""
    return params.pi_c * centripetal_regressor(params, q, cab_rate, geom)


def predict_zero_load(params, geom, s, tau_measured, deadband=DEFAULT_DEADBAND):
    """Per-joint torque breakdown of the unloaded arm.

    ``s`` is an aligned sample or episode (anything with ``q``, ``qd`` and
    ``qdd``); ``tau_measured`` maps joint name to measured torque. The
    residual ``tau_measured - breakdown.total`` carries payload and contact
    forces; it is NaN where the joint is inside the velocity deadband.
    """
    out = {}
    for joint in INSTRUMENTED:
        tau = np.asarray(tau_measured[joint], dtype=float)
        grav = gravity_torque(params, joint, s.q, geom)
        inert = inertia_coefficient(params, joint, s.q, geom) * np.asarray(s.qdd[joint], dtype=float)
        fric = -friction_torque(params, joint, tau, s.qd[joint], deadband)
        if joint == "boom":
            cent = centripetal_torque(params, s.q, s.qd.cab, geom)
        else:
            cent = np.zeros_like(np.asarray(grav))
        out[joint] = TorqueBreakdown(grav, inert, fric, cent)
    return out


def residual_torques(params, geom, s, tau_measured, deadband=DEFAULT_DEADBAND):
    pred = predict_zero_load(params, geom, s, tau_measured, deadband)
    return {j: np.asarray(tau_measured[j], dtype=float) - pred[j].total for j in INSTRUMENTED}


# parameter file -----------------------------------------------------------

def params_to_dict(params):
    out = {
        "format_version": FORMAT_VERSION,
        "machine_id": params.machine_id,
        "calibration_date": params.calibration_date or date.today().isoformat(),
        "calibrated": params.calibrated,
        "pi_bg": list(params.pi_bg),
        "pi_sg": list(params.pi_sg),
        "pi_bI": list(params.pi_bI),
        "pi_sI": list(params.pi_sI),
        "pi_c": float(params.pi_c),
    }
    for joint in INSTRUMENTED:
        fr = params.friction[joint]
        for direction in ("raising", "lowering"):
            coeffs = getattr(fr, direction)
            out[f"friction.{joint}.{direction}.slope"] = float(coeffs.slope)
            out[f"friction.{joint}.{direction}.offset"] = float(coeffs.offset)
    return out


def params_from_dict(data, source="<params>"):
    version = int(kvfile.get_float(data, "format_version", source=source))
    if version != FORMAT_VERSION:
        raise ConfigError(f"{source}: unsupported parameter format_version {version}")
    friction = {}
    for joint in INSTRUMENTED:
        sets = {}
        for direction in ("raising", "lowering"):
            key = f"friction.{joint}.{direction}"
            sets[direction] = FrictionCoeffs(
                kvfile.get_float(data, f"{key}.slope", source=source),
                kvfile.get_float(data, f"{key}.offset", source=source),
            )
        friction[joint] = JointFriction(**sets)
    return LumpedParams(
        pi_bg=kvfile.get_floats(data, "pi_bg", 6, source=source),
        pi_sg=kvfile.get_floats(data, "pi_sg", 4, source=source),
        pi_bI=kvfile.get_floats(data, "pi_bI", 5, source=source),
        pi_sI=kvfile.get_floats(data, "pi_sI", 3, source=source),
        friction=friction,
        pi_c=kvfile.get_float(data, "pi_c", source=source),
        machine_id=data.get("machine_id", "unnamed"),
        calibration_date=data.get("calibration_date", ""),
        calibrated=kvfile.get_bool(data, "calibrated"),
    )


def save_params(params, path):
    kvfile.write(path, params_to_dict(params), header="lumped dynamic parameters, SI units")


def load_params(path):
    return params_from_dict(kvfile.read(path), source=path)
