"""Planar arm geometry: cylinder linkages, forward kinematics and Jacobians.

Conventions used throughout the package:

* The base frame sits on the boom axis, x horizontal (forward), z up,
  aligned with gravity.
* ``boom`` is measured from the horizontal, ``stick`` and ``bucket`` are
  relative to their parent link; absolute link angles are cumulative sums.
  A static cabin pitch is added to the boom angle whenever gravity matters.
* Points fixed to a link are given as ``(x, z)`` in the link frame: x runs
  from the joint towards the next joint, z is the link's underside normal,
  so a local point maps to ``(x cos a + z sin a, x sin a - z cos a)``.
* Positive joint torque lifts the joint (counter-clockwise seen from the
  left side of the machine).

All functions broadcast over numpy arrays of joint angles.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import kvfile
from .errors import DegenerateLinkage, InvalidGeometry, UnsupportedConfiguration

ARM_JOINTS = ("boom", "stick", "bucket")
INSTRUMENTED = ("boom", "stick")


@dataclass(frozen=True)
class JointAngles:
    boom: object
    stick: object
    bucket: object
    cab: object = 0.0

    def map(self, fn):
        return type(self)(*(fn(getattr(self, f.name)) for f in fields(self)))

    def __getitem__(self, name):
        return getattr(self, name)


@dataclass(frozen=True)
class JointRates:
    boom: object
    stick: object
    bucket: object
    cab: object = 0.0

    def map(self, fn):
        return type(self)(*(fn(getattr(self, f.name)) for f in fields(self)))

    def __getitem__(self, name):
        return getattr(self, name)


@dataclass(frozen=True)
class JointAccels:
    boom: object
    stick: object
    bucket: object

    def map(self, fn):
        return type(self)(*(fn(getattr(self, f.name)) for f in fields(self)))

    def __getitem__(self, name):
        return getattr(self, name)


@dataclass(frozen=True)
class LinkageGeometry:
    """Triangle formed by the joint axis, the cylinder anchor and the rod pin.

    ``a`` is the joint axis to cylinder anchor distance, ``c`` the joint
    axis to rod pin distance, ``phi1``/``phi2`` fixed offset angles.
    """

    a: float
    c: float
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0):
            raise InvalidGeometry(f"linkage needs a > 0 and c > 0, got a={self.a}, c={self.c}")


@dataclass(frozen=True)
class CylinderAreas:
    piston: float  # A_p, full bore
    rod: float  # A_r, rod cross-section

    def __post_init__(self):
        if not (self.piston > self.rod > 0):
            raise InvalidGeometry(
                f"cylinder areas need piston > rod > 0, got piston={self.piston}, rod={self.rod}"
            )

    @classmethod
    def from_diameters(cls, bore, rod):
        return cls(np.pi * bore**2 / 4.0, np.pi * rod**2 / 4.0)

    @property
    def annulus(self):
        return self.piston - self.rod


@dataclass(frozen=True)
class MachineGeometry:
    l_boom: float
    l_stick: float
    blade_offset: tuple
    linkage: dict
    areas: dict
    limits: dict = field(default_factory=dict)
    boom_pivot_offset: float = 0.0
    cabin_pitch: float = 0.0
    cabin_roll: float = 0.0
    rated_capacity: float = 0.0
    machine_id: str = "unnamed"

    def __post_init__(self):
        if not (self.l_boom > 0 and self.l_stick > 0):
            raise InvalidGeometry("l_boom and l_stick must be positive")
        if len(self.blade_offset) != 2:
            raise InvalidGeometry("blade_offset must have two components")
        if self.cabin_roll != 0.0:
            raise UnsupportedConfiguration(
                "cabin roll is not supported; only a static cabin pitch can be compensated"
            )
        for joint in INSTRUMENTED:
            if joint not in self.linkage:
                raise InvalidGeometry(f"missing linkage for joint '{joint}'")
            if joint not in self.areas:
                raise InvalidGeometry(f"missing cylinder areas for joint '{joint}'")
        for joint, (lo, hi) in self.limits.items():
            if not lo < hi:
                raise InvalidGeometry(f"limits for '{joint}' must satisfy min < max")
        for joint in INSTRUMENTED:
            if joint in self.limits:
                lo, hi = self.limits[joint]
                try:
                    cylinder_length(self.linkage[joint], np.linspace(lo, hi, 64))
                except DegenerateLinkage:
                    raise InvalidGeometry(
                        f"linkage of '{joint}' degenerates inside its joint limits"
                    ) from None

    def joint_limits(self, joint):
        return self.limits.get(joint, (-np.pi, np.pi))

    def with_areas(self, joint, areas):
        return replace(self, areas={**self.areas, joint: areas})


def _total_angle(geom, joint_angle):
    return np.asarray(joint_angle, dtype=float) + geom.phi1 + geom.phi2


def cylinder_length(geom, joint_angle):
    """Cylinder length ``b`` from the law of cosines."""
    total = _total_angle(geom, joint_angle)
    b2 = geom.a**2 + geom.c**2 - 2.0 * geom.a * geom.c * np.cos(total)
    if np.any(b2 <= 1e-12 * (geom.a**2 + geom.c**2)):
        raise DegenerateLinkage(f"cylinder length collapses at joint angle {joint_angle}")
    return np.sqrt(b2)


def sensitivity(geom, joint_angle):
    """``eta = db/dtheta`` [m/rad]; joint torque is ``eta * cylinder_force``."""
    b = cylinder_length(geom, joint_angle)
    return geom.a * geom.c * np.sin(_total_angle(geom, joint_angle)) / b


def local_to_base(px, pz, angle):
    c, s = np.cos(angle), np.sin(angle)
    return px * c + pz * s, px * s - pz * c


def absolute_angles(geom, q):
    """Gravity-referenced link angles (boom, boom+stick, boom+stick+bucket)."""
    a1 = np.asarray(q.boom, dtype=float) + geom.cabin_pitch
    a2 = a1 + q.stick
    return a1, a2, a2 + q.bucket


def joint_positions(geom, q):
    """Stick and bucket joint positions in the base frame, each shape (..., 2)."""
    a1, a2, _ = absolute_angles(geom, q)
    stick = np.stack([geom.l_boom * np.cos(a1), geom.l_boom * np.sin(a1)], axis=-1)
    bucket = stick + np.stack([geom.l_stick * np.cos(a2), geom.l_stick * np.sin(a2)], axis=-1)
    return stick, bucket


def forward_kinematics(geom, q, point=None):
    """Blade point (or another bucket-frame ``point``) in the base frame."""
    _, a2, a3 = absolute_angles(geom, q)
    _, wrist = joint_positions(geom, q)
    ox, oz = geom.blade_offset if point is None else point
    bx, bz = local_to_base(ox, oz, a3)
    return wrist + np.stack([bx, bz], axis=-1)


def _perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def arm_jacobian(geom, q, point=None):
    """d r / d(boom, stick, bucket), shape (..., 2, 3)."""
    stick_pos, wrist = joint_positions(geom, q)
    r = forward_kinematics(geom, q, point)
    cols = [_perp(r), _perp(r - stick_pos), _perp(r - wrist)]
    return np.stack(cols, axis=-1)


def blade_jacobian(geom, q, point=None):
    """Boom and stick columns of :func:`arm_jacobian`, shape (..., 2, 2)."""
    return arm_jacobian(geom, q, point)[..., :2]


def blade_inverse_kinematics(geom, x, z, bucket_orientation=-np.pi / 2, check_limits=True):
    """Joint angles placing the blade at ``(x, z)`` with a fixed absolute bucket angle.

    Uses the stick-curled (negative stick angle) branch. Unreachable targets
    and poses outside the joint limits come back as NaN.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    ox, oz = geom.blade_offset
    bx, bz = local_to_base(ox, oz, bucket_orientation)
    wx, wz = x - bx, z - bz
    l1, l2 = geom.l_boom, geom.l_stick
    cos_s = (wx**2 + wz**2 - l1**2 - l2**2) / (2.0 * l1 * l2)
    with np.errstate(invalid="ignore"):
        stick = -np.arccos(cos_s)
    a1 = np.arctan2(wz, wx) - np.arctan2(l2 * np.sin(stick), l1 + l2 * np.cos(stick))
    boom = a1 - geom.cabin_pitch
    bucket = bucket_orientation - a1 - stick
    bucket = (bucket + np.pi) % (2 * np.pi) - np.pi
    bad = ~np.isfinite(stick)
    if check_limits:
        for name, val in (("boom", boom), ("stick", stick), ("bucket", bucket)):
            lo, hi = geom.joint_limits(name)
            with np.errstate(invalid="ignore"):
                bad = bad | (val < lo) | (val > hi)
    nan = np.where(bad, np.nan, 0.0)
    return JointAngles(boom + nan, stick + nan, bucket + nan)


@dataclass
class SensitivityMap:
    x: np.ndarray
    z: np.ndarray
    values: np.ndarray  # Pa, shape (len(z), len(x)); NaN where unreachable
    probe_force: float

    @property
    def reachable(self):
        return np.isfinite(self.values)

    def ratio(self):
        v = self.values[self.reachable]
        return float(v.max() / v.min())


def boom_pressure_change(geom, q, probe_force):
    """Boom plunger-chamber pressure change for a vertical blade force [Pa]."""
    jac = blade_jacobian(geom, q)
    force = np.array([0.0, -probe_force])
    torque = np.abs(jac[..., :, 0] @ force)
    eta = np.abs(sensitivity(geom.linkage["boom"], q.boom))
    return torque / (eta * geom.areas["boom"].piston)


def sensitivity_map(geom, x, z, probe_force=1000.0, bucket_orientation=-np.pi / 2):
    """Boom chamber pressure change per vertical blade force over a workspace grid."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    gx, gz = np.meshgrid(x, z)
    q = blade_inverse_kinematics(geom, gx, gz, bucket_orientation)
    ok = np.isfinite(q.boom)
    values = np.full(gx.shape, np.nan)
    if ok.any():
        sub = q.map(lambda v: np.asarray(v)[ok] if np.ndim(v) else v)
        values[ok] = boom_pressure_change(geom, sub, probe_force)
    return SensitivityMap(x, z, values, probe_force)


# geometry file --------------------------------------------------------------

def _linkage_from(data, joint, source):
    return LinkageGeometry(
        a=kvfile.get_float(data, f"{joint}.a", source=source),
        c=kvfile.get_float(data, f"{joint}.c", source=source),
        phi1=kvfile.get_float(data, f"{joint}.phi1", 0.0, source=source),
        phi2=kvfile.get_float(data, f"{joint}.phi2", 0.0, source=source),
    )


def _areas_from(data, joint, source):
    if f"{joint}.piston_area" in data:
        piston = kvfile.get_float(data, f"{joint}.piston_area", source=source)
    else:
        piston = np.pi * kvfile.get_float(data, f"{joint}.bore", source=source) ** 2 / 4.0
    if f"{joint}.rod_area" in data:
        rod = kvfile.get_float(data, f"{joint}.rod_area", source=source)
    else:
        rod = np.pi * kvfile.get_float(data, f"{joint}.rod_diameter", source=source) ** 2 / 4.0
    try:
        return CylinderAreas(piston, rod)
    except InvalidGeometry as exc:
        raise InvalidGeometry(f"{source}: {joint}.piston_area/{joint}.rod_area: {exc}") from None


def geometry_from_dict(data, source="<geometry>"):
    limits = {}
    for joint in ARM_JOINTS:
        key = f"{joint}.limits"
        if key in data:
            limits[joint] = tuple(kvfile.get_floats(data, key, 2, source=source))
    try:
        return MachineGeometry(
            l_boom=kvfile.get_float(data, "l_boom", source=source),
            l_stick=kvfile.get_float(data, "l_stick", source=source),
            blade_offset=tuple(kvfile.get_floats(data, "blade_offset", 2, source=source)),
            linkage={j: _linkage_from(data, j, source) for j in INSTRUMENTED},
            areas={j: _areas_from(data, j, source) for j in INSTRUMENTED},
            limits=limits,
            boom_pivot_offset=kvfile.get_float(data, "boom_pivot_offset", 0.0, source=source),
            cabin_pitch=kvfile.get_float(data, "cabin_pitch", 0.0, source=source),
            cabin_roll=kvfile.get_float(data, "cabin_roll", 0.0, source=source),
            rated_capacity=kvfile.get_float(data, "rated_capacity", 0.0, source=source),
            machine_id=data.get("machine_id", "unnamed"),
        )
    except InvalidGeometry as exc:
        if str(exc).startswith(str(source)):
            raise
        raise InvalidGeometry(f"{source}: {exc}") from None


def load_geometry(path):
    return geometry_from_dict(kvfile.read(path), source=path)


def geometry_to_dict(geom):
    out = {
        "machine_id": geom.machine_id,
        "l_boom": geom.l_boom,
        "l_stick": geom.l_stick,
        "blade_offset": list(geom.blade_offset),
        "boom_pivot_offset": geom.boom_pivot_offset,
        "cabin_pitch": geom.cabin_pitch,
        "cabin_roll": geom.cabin_roll,
        "rated_capacity": geom.rated_capacity,
    }
    for joint in INSTRUMENTED:
        link = geom.linkage[joint]
        out[f"{joint}.a"] = link.a
        out[f"{joint}.c"] = link.c
        out[f"{joint}.phi1"] = link.phi1
        out[f"{joint}.phi2"] = link.phi2
        out[f"{joint}.piston_area"] = geom.areas[joint].piston
        out[f"{joint}.rod_area"] = geom.areas[joint].rod
    for joint, lim in geom.limits.items():
        out[f"{joint}.limits"] = list(lim)
    return out


def save_geometry(geom, path):
    kvfile.write(path, geometry_to_dict(geom), header="machine geometry, SI units (m, rad, m^2)")
