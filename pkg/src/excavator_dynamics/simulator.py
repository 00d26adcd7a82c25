"""Synthetic excavator producing episode logs from known physical parameters.

The simulator is the ground truth for calibration and estimation tests. It
plays back a joint-space script, superimposes a damped base-rocking
oscillation on the boom and stick angles, evaluates the unlumped rigid-link
torques (gravity, per-joint inertia, slew centrifugal, payload and blade
force), adds direction-dependent friction, converts torque to chamber
pressures and finally adds seeded Gaussian sensor noise.
"""

from dataclasses import dataclass, field, replace
import pathlib

import numpy as np
from scipy import signal as sp_signal
from scipy.interpolate import CubicSpline

from . import kvfile
from .dynamics import FrictionCoeffs, JointFriction, LumpedParams
from .errors import ConfigError, DegenerateLinkage, ScriptInfeasible
from .hydraulics import GRAVITY, PressurePair, chamber_pressures
from .kinematics import (
    ARM_JOINTS,
    INSTRUMENTED,
    JointAngles,
    JointRates,
    absolute_angles,
    arm_jacobian,
    forward_kinematics,
    joint_positions,
    local_to_base,
)
from .signals import Episode

LINKS = ARM_JOINTS


@dataclass(frozen=True)
class LinkInertial:
    mass: float  # kg
    cog: tuple  # (x, z) in the link frame [m]
    izz: float  # about the COG [kg*m^2]


@dataclass(frozen=True)
class Rocking:
    frequency: float = 1.5  # Hz
    damping: float = 0.1
    gain: float = 0.005  # static angle deflection per unit commanded acceleration [s^2]


@dataclass(frozen=True)
class SensorNoise:
    pressure: float = 5e3  # Pa
    gyro: float = 0.002  # rad/s
    angle: float = 0.0005  # rad

    @classmethod
    def none(cls):
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PhysicalParams:
    links: dict
    friction: dict = field(default_factory=lambda: {j: JointFriction() for j in INSTRUMENTED})
    rocking: Rocking = Rocking()
    noise: SensorNoise = SensorNoise()
    back_pressure: float = 5e5  # Pa, idle chamber
    friction_smoothing: float = 0.002  # rad/s, width of the stick-slip transition

    def __post_init__(self):
        for name in LINKS:
            if name not in self.links:
                raise ConfigError(f"missing link '{name}'")
            if not self.links[name].mass > 0:
                raise ConfigError(f"link '{name}' mass must be positive")
        if not 0 < self.rocking.damping <= 1:
            raise ConfigError("rocking damping ratio must lie in (0, 1]")
        if self.rocking.frequency <= 0:
            raise ConfigError("rocking frequency must be positive")

    def noiseless(self):
        return replace(self, noise=SensorNoise.none())

    def frictionless(self):
        return replace(self, friction={j: JointFriction() for j in INSTRUMENTED})

    def without_rocking(self):
        return replace(self, rocking=replace(self.rocking, gain=0.0))


# lumping -------------------------------------------------------------------

def lump_parameters(phys, geom):
    """Exact lumped coefficients implied by the physical parameters."""
    g = GRAVITY
    lb, ls = geom.l_boom, geom.l_stick
    bo, st, bu = (phys.links[k] for k in LINKS)
    (bx, bz), (sx, sz), (ux, uz) = bo.cog, st.cog, bu.cog
    pi_bg = (
        g * (bo.mass * bx + (st.mass + bu.mass) * lb),
        g * bo.mass * bz,
        g * (st.mass * sx + bu.mass * ls),
        g * st.mass * sz,
        g * bu.mass * ux,
        g * bu.mass * uz,
    )
    pi_sg = pi_bg[2:]
    izz = bo.izz + st.izz + bu.izz
    pi_bI = (
        bo.mass * (bx**2 + bz**2)
        + st.mass * (lb**2 + sx**2 + sz**2)
        + bu.mass * (ux**2 + uz**2 + lb**2 + ls**2)
        + izz,
        2 * lb * (st.mass * sx + bu.mass * ls),
        2 * lb * st.mass * sz,
        bu.mass * ux,
        bu.mass * uz,
    )
    pi_sI = (
        st.mass * (sx**2 + sz**2) + bu.mass * (ls**2 + ux**2 + uz**2) + st.izz + bu.izz,
        2 * ls * bu.mass * ux,
        2 * ls * bu.mass * uz,
    )
    return LumpedParams(
        pi_bg=pi_bg, pi_sg=pi_sg, pi_bI=pi_bI, pi_sI=pi_sI,
        friction=dict(phys.friction), pi_c=0.0,
        machine_id=geom.machine_id, calibration_date="ground-truth", calibrated=True,
    )


# unlumped rigid-link model -------------------------------------------------

def link_cogs(phys, geom, q):
    """Base-frame COG of each link, dict of (..., 2) arrays."""
    angles = absolute_angles(geom, q)
    stick_pos, wrist = joint_positions(geom, q)
    origins = (0.0, stick_pos, wrist)
    out = {}
    for name, origin, a in zip(LINKS, origins, angles):
        cx, cz = phys.links[name].cog
        px, pz = local_to_base(cx, cz, a)
        out[name] = origin + np.stack([px, pz], axis=-1)
    return out


def _joint_origin(geom, q, joint):
    if joint == "boom":
        return np.zeros(2)
    return joint_positions(geom, q)[0]


def _carried(joint):
    return LINKS if joint == "boom" else LINKS[1:]


def unlumped_gravity_torque(phys, geom, joint, q):
    """Holding torque against gravity, summed link by link."""
    cogs = link_cogs(phys, geom, q)
    origin = _joint_origin(geom, q, joint)
    return sum(
        GRAVITY * phys.links[k].mass * (cogs[k] - origin)[..., 0] for k in _carried(joint)
    )


def steiner_inertia(phys, geom, joint, q):
    """Inertia about the joint axis: sum of m d^2 plus each link's own I_zz."""
    cogs = link_cogs(phys, geom, q)
    origin = _joint_origin(geom, q, joint)
    total = 0.0
    for k in _carried(joint):
        d = cogs[k] - origin
        total = total + phys.links[k].mass * np.sum(d**2, axis=-1) + phys.links[k].izz
    return total


def _point_centrifugal(geom, origin, p, mass, cab_rate):
    # outward slew force m w^2 R on a point at horizontal slew radius R
    radius = geom.boom_pivot_offset + p[..., 0]
    return mass * np.asarray(cab_rate) ** 2 * radius * (p - origin)[..., 1]


def centrifugal_torque(phys, geom, joint, q, cab_rate):
    """Holding torque against the slew centrifugal forces of point-mass links."""
    cogs = link_cogs(phys, geom, q)
    origin = _joint_origin(geom, q, joint)
    return sum(
        _point_centrifugal(geom, origin, cogs[k], phys.links[k].mass, cab_rate)
        for k in _carried(joint)
    )


def payload_torque(geom, joint, q, qdd, cab_rate, mass, point=None):
    """Holding torque of a point payload: gravity, inertia about the joint and slew."""
    p = forward_kinematics(geom, q, point)
    origin = _joint_origin(geom, q, joint)
    d = p - origin
    grav = GRAVITY * mass * d[..., 0]
    inert = mass * np.sum(d**2, axis=-1) * qdd
    cent = _point_centrifugal(geom, origin, p, mass, cab_rate)
    return grav + inert + cent


def contact_torque(geom, joint, q, force):
    """Holding torque against a force applied to the blade: ``-J^T f``."""
    jac = arm_jacobian(geom, q)
    col = jac[..., :, 0] if joint == "boom" else jac[..., :, 1]
    return -np.sum(col * force, axis=-1)


def apply_friction(tau0, omega, friction, smoothing):
    """Measured torque including friction, solving the torque-dependent law exactly."""
    s = np.tanh(np.asarray(omega) / smoothing) if smoothing > 0 else np.sign(omega)
    wr, wl = 0.5 * (1 + s), 0.5 * (1 - s)
    r, lo = friction.raising, friction.lowering
    return (tau0 + wr * r.offset - wl * lo.offset) / (1 - wr * r.slope + wl * lo.slope)


def joint_torques(phys, geom, q, qd, qdd, payload=0.0, attach=None, force=(0.0, 0.0)):
    """True measured torques for boom and stick, dict of arrays."""
    force = np.asarray(force, dtype=float)
    out = {}
    for joint in INSTRUMENTED:
        acc = np.asarray(qdd[joint], dtype=float)
        tau0 = (
            unlumped_gravity_torque(phys, geom, joint, q)
            + steiner_inertia(phys, geom, joint, q) * acc
            + centrifugal_torque(phys, geom, joint, q, qd.cab)
            + payload_torque(geom, joint, q, acc, qd.cab, payload, attach)
            + contact_torque(geom, joint, q, force)
        )
        out[joint] = apply_friction(tau0, qd[joint], phys.friction[joint], phys.friction_smoothing)
    return out


# scenario scripts ----------------------------------------------------------

@dataclass(frozen=True)
class Move:
    duration: float
    target: tuple  # (boom, stick, bucket, cab)


@dataclass(frozen=True)
class Ramp:
    """Constant-speed move with raised-cosine acceleration and braking phases of ``blend`` s."""

    duration: float
    blend: float
    target: tuple


@dataclass(frozen=True)
class Hold:
    duration: float


@dataclass(frozen=True)
class Path:
    duration: float
    knots: tuple  # sequence of 4-tuples, the current pose is prepended


@dataclass(frozen=True)
class SetPayload:
    mass: float


@dataclass(frozen=True)
class SetForce:
    force: tuple


@dataclass(frozen=True)
class SetAttach:
    point: tuple


@dataclass
class ScenarioScript:
    """Timed joint-space waypoints plus payload, attach-point and blade-force changes.

    Text form, one command per line (``#`` comments)::

        name lift_1
        start 0.1 -1.5 -1.0 0.0
        payload 500
        move 2.0 0.6 -1.2 -1.0 0.8
        hold 0.5
        ramp 4.0 0.4 0.2 -1.2 -1.0 0.8
        path 3.0 0.2 -1.4 -1 0 | 0.5 -1.0 -1 0.5

    Moves use quintic blends; ``ramp`` cruises at constant speed between
    short raised-cosine acceleration phases; ``path`` runs a cubic spline through the knots
    with quintic time scaling. Payload and force changes take effect at the
    following segment; the payload attach point (bucket frame, defaults to
    the blade) is fixed per script.
    """

    name: str
    start: tuple
    steps: list = field(default_factory=list)

    @property
    def duration(self):
        return sum(s.duration for s in self.steps if hasattr(s, "duration"))

    @property
    def payload_mass(self):
        masses = [s.mass for s in self.steps if isinstance(s, SetPayload)]
        return masses[-1] if masses else 0.0

    @property
    def attach_point(self):
        points = [s.point for s in self.steps if isinstance(s, SetAttach)]
        return points[-1] if points else None

    @property
    def has_payload(self):
        return any(isinstance(s, SetPayload) for s in self.steps)


def _floats(parts, n, lineno, what):
    try:
        values = tuple(float(v) for v in parts)
    except ValueError:
        raise ConfigError(f"line {lineno}: '{what}' expects numbers") from None
    if n is not None and len(values) != n:
        raise ConfigError(f"line {lineno}: '{what}' expects {n} numbers, got {len(values)}")
    return values


def parse_script(text, default_name="script"):
    name, start, steps = default_name, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cmd, _, rest = line.partition(" ")
        parts = rest.split()
        if cmd == "name":
            name = rest.strip()
        elif cmd == "start":
            start = _floats(parts, 4, lineno, cmd)
        elif cmd == "move":
            vals = _floats(parts, 5, lineno, cmd)
            steps.append(Move(vals[0], vals[1:]))
        elif cmd == "ramp":
            vals = _floats(parts, 6, lineno, cmd)
            if not 0 < vals[1] <= vals[0] / 2:
                raise ScriptInfeasible(f"line {lineno}: ramp blend must lie in (0, duration/2]")
            steps.append(Ramp(vals[0], vals[1], vals[2:]))
        elif cmd == "hold":
            steps.append(Hold(_floats(parts, 1, lineno, cmd)[0]))
        elif cmd == "path":
            head, *knots = rest.split("|")
            hp = head.split()
            duration = _floats(hp[:1], 1, lineno, cmd)[0]
            first = _floats(hp[1:], 4, lineno, cmd)
            rest_knots = tuple(_floats(k.split(), 4, lineno, cmd) for k in knots)
            steps.append(Path(duration, (first,) + rest_knots))
        elif cmd == "payload":
            steps.append(SetPayload(_floats(parts, 1, lineno, cmd)[0]))
        elif cmd == "force":
            steps.append(SetForce(_floats(parts, 2, lineno, cmd)))
        elif cmd == "attach":
            steps.append(SetAttach(_floats(parts, 2, lineno, cmd)))
        else:
            raise ConfigError(f"line {lineno}: unknown command '{cmd}'")
    if start is None:
        raise ConfigError("script has no 'start' line")
    for s in steps:
        if hasattr(s, "duration") and not s.duration > 0:
            raise ScriptInfeasible("segment durations must be positive")
    return ScenarioScript(name, start, steps)


def load_script(path):
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_script(text, default_name=path.stem)


def format_script(script):
    def f(values):
        return " ".join(repr(float(v)) for v in values)

    lines = [f"name {script.name}", f"start {f(script.start)}"]
    for s in script.steps:
        if isinstance(s, Move):
            lines.append(f"move {f([s.duration, *s.target])}")
        elif isinstance(s, Ramp):
            lines.append(f"ramp {f([s.duration, s.blend, *s.target])}")
        elif isinstance(s, Hold):
            lines.append(f"hold {f([s.duration])}")
        elif isinstance(s, Path):
            lines.append(f"path {f([s.duration])} " + " | ".join(f(k) for k in s.knots))
        elif isinstance(s, SetPayload):
            lines.append(f"payload {f([s.mass])}")
        elif isinstance(s, SetForce):
            lines.append(f"force {f(s.force)}")
        elif isinstance(s, SetAttach):
            lines.append(f"attach {f(s.point)}")
    return "\n".join(lines) + "\n"


def _quintic(tau):
    tau = np.clip(tau, 0.0, 1.0)
    s = tau**3 * (10 - 15 * tau + 6 * tau**2)
    ds = 30 * tau**2 * (1 - tau) ** 2
    dds = 60 * tau * (1 - tau) * (1 - 2 * tau)
    return s, ds, dds


def _ramp_profile(t, duration, blend):
    """Normalised position, rate and acceleration of a :class:`Ramp` (0 to 1)."""
    t = np.clip(t, 0.0, duration)
    ta = blend
    vc = 1.0 / (duration - ta)
    amp = 2.0 * vc / ta
    w = 2 * np.pi / ta

    def phase(u):
        a = 0.5 * amp * (1 - np.cos(w * u))
        v = 0.5 * amp * (u - np.sin(w * u) / w)
        x = 0.5 * amp * (u**2 / 2 + (np.cos(w * u) - 1) / w**2)
        return x, v, a

    x1, v1, a1 = phase(np.minimum(t, ta))
    x_acc_end = 0.25 * amp * ta**2
    mid = (t > ta) & (t < duration - ta)
    x = np.where(mid, x_acc_end + vc * (t - ta), x1)
    v = np.where(mid, vc, v1)
    a = np.where(mid, 0.0, a1)
    late = t >= duration - ta
    xd, vd, ad = phase(duration - t)
    x = np.where(late, 1.0 - xd, x)
    v = np.where(late, vd, v)
    a = np.where(late, -ad, a)
    return x, v, a


def commanded_trajectory(script, t):
    """Commanded joint positions, rates, accelerations and the load schedule at times ``t``.

    Returns arrays of shape (len(t), 4) for (boom, stick, bucket, cab) plus
    per-sample payload mass and blade force.
    """
    t = np.asarray(t, dtype=float)
    n = t.size
    pos = np.tile(np.asarray(script.start, dtype=float), (n, 1))
    vel = np.zeros((n, 4))
    acc = np.zeros((n, 4))
    payload = np.zeros(n)
    force = np.zeros((n, 2))
    current = np.asarray(script.start, dtype=float)
    t0 = 0.0
    load, fvec = 0.0, np.zeros(2)

    for step in script.steps:
        if isinstance(step, SetPayload):
            load = step.mass
            continue
        if isinstance(step, SetForce):
            fvec = np.asarray(step.force, dtype=float)
            continue
        if isinstance(step, SetAttach):
            continue
        T = step.duration
        mask = t >= t0 - 1e-12
        tau = (t[mask] - t0) / T
        s, ds, dds = _quintic(tau)
        if isinstance(step, Hold):
            pos[mask] = current
            vel[mask] = 0.0
            acc[mask] = 0.0
            end = current
        elif isinstance(step, Ramp):
            target = np.asarray(step.target, dtype=float)
            delta = target - current
            x, v, a = _ramp_profile(t[mask] - t0, T, step.blend)
            pos[mask] = current + np.outer(x, delta)
            vel[mask] = np.outer(v, delta)
            acc[mask] = np.outer(a, delta)
            end = target
        elif isinstance(step, Move):
            target = np.asarray(step.target, dtype=float)
            delta = target - current
            pos[mask] = current + np.outer(s, delta)
            vel[mask] = np.outer(ds / T, delta)
            acc[mask] = np.outer(dds / T**2, delta)
            end = target
        else:
            knots = np.vstack([current, np.asarray(step.knots, dtype=float)])
            u_end = knots.shape[0] - 1
            spline = CubicSpline(np.arange(knots.shape[0]), knots, axis=0)
            u = s * u_end
            du = ds * u_end / T
            ddu = dds * u_end / T**2
            d1, d2 = spline(u, 1), spline(u, 2)
            pos[mask] = spline(u)
            vel[mask] = d1 * du[:, None]
            acc[mask] = d2 * du[:, None] ** 2 + d1 * ddu[:, None]
            end = knots[-1]
        payload[mask] = load
        force[mask] = fvec
        current = end
        t0 += T
    return pos, vel, acc, payload, force


def _check_limits(geom, pos):
    for k, joint in enumerate(ARM_JOINTS):
        if joint in geom.limits:
            lo, hi = geom.limits[joint]
            if np.any(pos[:, k] < lo - 1e-9) or np.any(pos[:, k] > hi + 1e-9):
                raise ScriptInfeasible(
                    f"commanded {joint} angle leaves its limits [{lo}, {hi}]"
                )


def rocking_response(rocking, command_acc, dt):
    """Angle, rate and acceleration of the damped rocking oscillator.

    ``x'' + 2 zeta w x' + w^2 (x + gain * a) = 0`` is discretised with a
    first-order hold on the commanded acceleration ``a``.
    """
    w = 2 * np.pi * rocking.frequency
    z = rocking.damping
    a_mat = np.array([[0.0, 1.0], [-(w**2), -2 * z * w]])
    b_mat = np.array([[0.0], [-(w**2) * rocking.gain]])
    c_mat = np.eye(2)
    d_mat = np.zeros((2, 1))
    ad, bd, cd, dd, _ = sp_signal.cont2discrete((a_mat, b_mat, c_mat, d_mat), dt, method="foh")
    _, y, _ = sp_signal.dlsim((ad, bd, cd, dd, dt), np.asarray(command_acc, dtype=float))
    x, xd = y[:, 0], y[:, 1]
    xdd = -(w**2) * (x + rocking.gain * command_acc) - 2 * z * w * xd
    return x, xd, xdd


OVERSAMPLE = 5


def simulate(phys, geom, script, rate=50.0, seed=0, noise=True):
    """Play ``script`` on the simulated machine and return the logged episode."""
    n = int(np.floor(script.duration * rate + 1e-9)) + 1
    if n < 2:
        raise ScriptInfeasible("script is shorter than one sample period")
    dt_fine = 1.0 / (rate * OVERSAMPLE)
    t_fine = np.arange((n - 1) * OVERSAMPLE + 1) * dt_fine
    pos, vel, acc, payload, force = commanded_trajectory(script, t_fine)
    _check_limits(geom, pos)

    # rocking perturbs boom and stick, each driven by its own commanded acceleration
    if phys.rocking.gain != 0.0:
        for k in (0, 1):
            x, xd, xdd = rocking_response(phys.rocking, acc[:, k], dt_fine)
            pos[:, k] += x
            vel[:, k] += xd
            acc[:, k] += xdd

    idx = np.arange(n) * OVERSAMPLE
    pos, vel, acc = pos[idx], vel[idx], acc[idx]
    payload, force = payload[idx], force[idx]
    t = np.arange(n) / rate

    q = JointAngles(*(pos[:, k] for k in range(4)))
    qd = JointRates(*(vel[:, k] for k in range(4)))
    qdd = {"boom": acc[:, 0], "stick": acc[:, 1], "bucket": acc[:, 2]}

    try:
        tau = joint_torques(phys, geom, q, qd, qdd, payload, script.attach_point, force)
        pressures = {
            j: chamber_pressures(geom, j, q, tau[j], phys.back_pressure) for j in INSTRUMENTED
        }
    except DegenerateLinkage as exc:
        raise ScriptInfeasible(str(exc)) from None

    if noise:
        rng = np.random.default_rng(seed)
        nz = phys.noise
        q = q.map(lambda v: v + rng.normal(0.0, nz.angle, n) if nz.angle else v)
        qd = qd.map(lambda v: v + rng.normal(0.0, nz.gyro, n) if nz.gyro else v)
        if nz.pressure:
            pressures = {
                j: PressurePair(p.p1 + rng.normal(0.0, nz.pressure, n), p.p2 + rng.normal(0.0, nz.pressure, n))
                for j, p in pressures.items()
            }

    metadata = {"scenario": script.name, "machine_id": geom.machine_id, "seed": str(seed)}
    if script.has_payload:
        metadata["payload_kg"] = repr(float(script.payload_mass))
    return Episode(
        t=t, q=q, qd=qd, pressures=pressures,
        payload=payload if script.has_payload else None,
        metadata=metadata,
    )


# physical parameter file ---------------------------------------------------

def phys_to_dict(phys):
    out = {}
    for name in LINKS:
        link = phys.links[name]
        out[f"{name}.mass"] = float(link.mass)
        out[f"{name}.cog"] = list(link.cog)
        out[f"{name}.izz"] = float(link.izz)
    for joint in INSTRUMENTED:
        fr = phys.friction[joint]
        for direction in ("raising", "lowering"):
            c = getattr(fr, direction)
            out[f"friction.{joint}.{direction}.slope"] = float(c.slope)
            out[f"friction.{joint}.{direction}.offset"] = float(c.offset)
    out["rocking.frequency"] = float(phys.rocking.frequency)
    out["rocking.damping"] = float(phys.rocking.damping)
    out["rocking.gain"] = float(phys.rocking.gain)
    out["noise.pressure"] = float(phys.noise.pressure)
    out["noise.gyro"] = float(phys.noise.gyro)
    out["noise.angle"] = float(phys.noise.angle)
    out["back_pressure"] = float(phys.back_pressure)
    out["friction_smoothing"] = float(phys.friction_smoothing)
    return out


def phys_from_dict(data, source="<physical>"):
    g = kvfile.get_float
    links = {
        name: LinkInertial(
            g(data, f"{name}.mass", source=source),
            tuple(kvfile.get_floats(data, f"{name}.cog", 2, source=source)),
            g(data, f"{name}.izz", source=source),
        )
        for name in LINKS
    }
    friction = {}
    for joint in INSTRUMENTED:
        sets = {}
        for direction in ("raising", "lowering"):
            key = f"friction.{joint}.{direction}"
            sets[direction] = FrictionCoeffs(
                g(data, f"{key}.slope", 0.0, source=source), g(data, f"{key}.offset", 0.0, source=source)
            )
        friction[joint] = JointFriction(**sets)
    default_r, default_n = Rocking(), SensorNoise()
    return PhysicalParams(
        links=links,
        friction=friction,
        rocking=Rocking(
            g(data, "rocking.frequency", default_r.frequency, source=source),
            g(data, "rocking.damping", default_r.damping, source=source),
            g(data, "rocking.gain", default_r.gain, source=source),
        ),
        noise=SensorNoise(
            g(data, "noise.pressure", default_n.pressure, source=source),
            g(data, "noise.gyro", default_n.gyro, source=source),
            g(data, "noise.angle", default_n.angle, source=source),
        ),
        back_pressure=g(data, "back_pressure", 5e5, source=source),
        friction_smoothing=g(data, "friction_smoothing", 0.002, source=source),
    )


def save_phys(phys, path):
    kvfile.write(path, phys_to_dict(phys), header="simulator physical parameters, SI units")


def load_phys(path):
    return phys_from_dict(kvfile.read(path), source=path)
