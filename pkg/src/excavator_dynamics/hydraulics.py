"""Chamber pressures to cylinder force and joint torque, plunger-area identification."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InsufficientOverlap, InvalidGeometry, NonQuasistatic
from .kinematics import absolute_angles, forward_kinematics, sensitivity

GRAVITY = 9.81

# ISO 3320 cylinder bores [mm]
DEFAULT_BORES_MM = (63, 80, 90, 100, 110, 125, 140, 160, 180, 200, 220, 250)


@dataclass(frozen=True)
class PressurePair:
    p1: object  # extension (plunger) side [Pa]
    p2: object  # retraction (rod) side [Pa]


@dataclass(frozen=True)
class CylinderCatalog:
    bores: tuple  # [m], strictly increasing

    def __post_init__(self):
        b = np.asarray(self.bores, dtype=float)
        if b.size == 0 or np.any(b <= 0) or np.any(np.diff(b) <= 0):
            raise ConfigError("catalog bores must be positive and strictly increasing")

    @property
    def areas(self):
        return np.pi * np.asarray(self.bores) ** 2 / 4.0

    def nearest(self, area):
        """Closest catalog bore (compared by diameter) to a plunger area."""
        diameter = np.sqrt(4.0 * area / np.pi)
        i = int(np.argmin(np.abs(np.asarray(self.bores) - diameter)))
        return self.bores[i], float(self.areas[i])


DEFAULT_CATALOG = CylinderCatalog(tuple(b / 1000.0 for b in DEFAULT_BORES_MM))


def load_catalog(path):
    """One bore diameter in mm per line; ``#`` starts a comment."""
    bores = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            bores.append(float(line) / 1000.0)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a bore diameter: {line!r}") from None
    return CylinderCatalog(tuple(bores))


def cylinder_force(piston_area, rod_area, pressures):
    """Net rod force [N], positive extending. Cylinder friction is not modelled here."""
    if not (piston_area > rod_area > 0):
        raise InvalidGeometry(f"need piston_area > rod_area > 0, got {piston_area}, {rod_area}")
    p1 = np.asarray(pressures.p1, dtype=float)
    p2 = np.asarray(pressures.p2, dtype=float)
    return piston_area * p1 - (piston_area - rod_area) * p2


def measured_joint_torque(geom, joint, q, pressures):
    """Joint torque from chamber pressures, ``eta(theta) * F``.

    The linkage is evaluated at the cab-relative joint angle; cabin pitch
    only enters gravity-dependent terms.
    """
    areas = geom.areas[joint]
    eta = sensitivity(geom.linkage[joint], q[joint])
    return eta * cylinder_force(areas.piston, areas.rod, pressures)


def chamber_pressures(geom, joint, q, torque, back_pressure):
    """Inverse of :func:`measured_joint_torque` with the idle chamber at ``back_pressure``."""
    areas = geom.areas[joint]
    force = np.asarray(torque, dtype=float) / sensitivity(geom.linkage[joint], q[joint])
    push = force >= 0
    p1 = np.where(push, (force + areas.annulus * back_pressure) / areas.piston, back_pressure)
    p2 = np.where(push, back_pressure, (areas.piston * back_pressure - force) / areas.annulus)
    return PressurePair(p1, p2)


def payload_lever(geom, joint, q, point=None):
    """Distance ``|r|`` and angle offset ``theta_m`` of a blade payload seen from ``joint``.

    With these, the payload's gravity torque on the joint is
    ``g * |r| * m * cos(theta_i - theta_m)`` where ``theta_i`` is the joint
    angle (gravity referenced for the boom).
    """
    r = forward_kinematics(geom, q, point)
    a1, _, _ = absolute_angles(geom, q)
    if joint == "boom":
        rel, theta = r, a1
    else:
        rel = r - np.stack([geom.l_boom * np.cos(a1), geom.l_boom * np.sin(a1)], axis=-1)
        theta = np.asarray(q.stick, dtype=float)
    radius = np.hypot(rel[..., 0], rel[..., 1])
    theta_m = theta - np.arctan2(rel[..., 1], rel[..., 0])
    return radius, theta_m


@dataclass
class PlungerIdentification:
    area_raw: float
    area_catalog: float
    bore_catalog: float
    pairs_used: int
    pairs_rejected: int
    pair_areas: np.ndarray


def _binned_means(episode, joint, bin_width, speed_band):
    angle = np.asarray(episode.q[joint], dtype=float)
    omega = np.asarray(episode.qd[joint], dtype=float)
    p = episode.pressures[joint]
    speed = np.abs(omega)
    keep = (speed >= speed_band[0]) & (speed <= speed_band[1])
    out = {}
    if not keep.any():
        return out
    bins = np.floor(angle[keep] / bin_width).astype(int)
    direction = np.sign(omega[keep]).astype(int)
    cols = np.column_stack([angle[keep], np.asarray(p.p1)[keep], np.asarray(p.p2)[keep]])
    keys = np.column_stack([bins, direction])
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, cols)
    counts = np.bincount(inverse, minlength=len(uniq))
    for k, key in enumerate(map(tuple, uniq)):
        out[key] = sums[k] / counts[k]
    return out


def identify_plunger_area(
    loaded,
    unloaded,
    payload_mass,
    radius,
    angle_offset,
    rod_area,
    linkage,
    *,
    joint="boom",
    cabin_pitch=0.0,
    bin_width=np.deg2rad(0.5),
    speed_band=(0.01, 0.3),
    min_pairs=5,
    catalog=DEFAULT_CATALOG,
):
    """Plunger area from a loaded and an unloaded single-joint sweep.

    Samples are paired per joint-angle bin and motion direction, restricted
    to the quasi-static speed band, so arm gravity, friction and inertia
    cancel in the difference. Per-pair estimates outside 1.5 IQR are dropped
    before averaging; the mean is snapped to the nearest catalog bore.
    """
    a = _binned_means(loaded, joint, bin_width, speed_band)
    b = _binned_means(unloaded, joint, bin_width, speed_band)
    if not a or not b:
        raise NonQuasistatic("no samples inside the quasi-static speed band")
    common = sorted(set(a) & set(b))
    estimates = []
    rejected = 0
    for key in common:
        ang_w, p1_w, p2_w = a[key]
        ang_wo, p1_wo, p2_wo = b[key]
        theta = 0.5 * (ang_w + ang_wo)
        eta = float(sensitivity(linkage, theta))
        gravity_angle = theta + (cabin_pitch if joint == "boom" else 0.0)
        numerator = rod_area * eta * (p2_wo - p2_w) + GRAVITY * radius * payload_mass * np.cos(
            gravity_angle - angle_offset
        )
        dp = (p1_w - p2_w) - (p1_wo - p2_wo)
        denominator = eta * dp
        # a pressure difference below ~0.1 % of the chamber pressure carries no payload signal
        if abs(dp) <= 1e-3 * max(abs(p1_w), abs(p1_wo), 1.0):
            rejected += 1
            continue
        estimates.append(numerator / denominator)
    estimates = np.asarray(estimates)
    if estimates.size:
        q1, q3 = np.percentile(estimates, [25, 75])
        iqr = q3 - q1
        inlier = (estimates >= q1 - 1.5 * iqr) & (estimates <= q3 + 1.5 * iqr)
        rejected += int((~inlier).sum())
        estimates = estimates[inlier]
    if estimates.size < min_pairs:
        raise InsufficientOverlap(
            f"only {estimates.size} usable angle-matched pairs (need {min_pairs})"
        )
    raw = float(estimates.mean())
    bore, area = catalog.nearest(raw)
    return PlungerIdentification(raw, area, bore, int(estimates.size), rejected, estimates)
