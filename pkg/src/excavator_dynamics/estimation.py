"""End-effector force and payload estimation from zero-load torque residuals.

Sign convention: ``f_ext`` is the external force applied *to* the blade, in
the base frame. A suspended load therefore reads as ``(0, -m g)`` and its
direction (measured from the downward gravity axis) is zero.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.spatial import Delaunay, QhullError

from .dynamics import DEFAULT_DEADBAND, residual_torques
from .errors import IllConditioned, NonConvergence, NoValidSamples
from .hydraulics import GRAVITY, measured_joint_torque
from .kinematics import INSTRUMENTED, JointAngles, blade_jacobian, forward_kinematics
from .optimize import nelder_mead
from .signals import ensure_aligned

DEFAULT_MAX_CONDITION = 50.0


def episode_torques(geom, episode):
    """Measured boom and stick torques for every sample of an episode."""
    return {j: measured_joint_torque(geom, j, episode.q, episode.pressures[j]) for j in INSTRUMENTED}


# force ---------------------------------------------------------------------

@dataclass
class ForceEstimate:
    f_ext: np.ndarray  # (..., 2) [N]
    magnitude: np.ndarray
    direction: np.ndarray  # rad from the downward vertical, positive towards +x
    jacobian_condition: np.ndarray
    valid: np.ndarray


def force_from_residual(jac, dtau):
    """Solve ``J^T f = -dtau`` for the blade force; broadcasts over samples."""
    jt = np.swapaxes(np.asarray(jac, dtype=float), -1, -2)
    return -np.linalg.solve(jt, np.asarray(dtau, dtype=float)[..., None])[..., 0]


def estimate_force(params, geom, s, tau_m, deadband=DEFAULT_DEADBAND, max_condition=DEFAULT_MAX_CONDITION):
    """Blade contact force from the boom and stick torque residuals, per sample.

    No optimisation is involved; every sample is independent. Samples with
    either joint inside the velocity deadband, or with an ill-conditioned
    blade Jacobian, are returned with ``valid=False``.
    """
    res = residual_torques(params, geom, s, tau_m, deadband)
    dtau = np.stack(np.broadcast_arrays(res["boom"], res["stick"]), axis=-1)
    jac = blade_jacobian(geom, s.q)
    cond = np.linalg.cond(jac)
    moving = np.all(np.isfinite(dtau), axis=-1)
    f = force_from_residual(jac, np.where(moving[..., None], dtau, 0.0))
    f = np.where(moving[..., None], f, np.nan)
    magnitude = np.hypot(f[..., 0], f[..., 1])
    direction = np.arctan2(f[..., 0], -f[..., 1])
    valid = moving & (cond < max_condition)
    return ForceEstimate(f, magnitude, direction, cond, valid)


def estimate_force_episode(params, geom, episode, deadband=DEFAULT_DEADBAND, max_condition=DEFAULT_MAX_CONDITION):
    """Force stream for a whole episode; returns ``(t, ForceEstimate)``."""
    aligned = ensure_aligned(episode)
    est = estimate_force(params, geom, aligned, episode_torques(geom, aligned), deadband, max_condition)
    return aligned.t, est


def write_force_csv(path, t, est):
    valid = est.valid.astype(int)
    data = np.column_stack([t, est.f_ext[:, 0], est.f_ext[:, 1], est.magnitude, est.direction, valid])
    header = "t,fx,fy,magnitude,direction_rad,valid"
    fmt = ["%.17g"] * 5 + ["%d"]
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)


# payload -------------------------------------------------------------------

@dataclass
class PayloadEstimate:
    mass: float
    residual_rms: float
    samples_used: int
    optimizer_iterations: int
    runtime: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def negative(self):
        return self.mass < 0


def payload_regressor(geom, s, point=None):
    """Boom holding torque per kilogram of payload at the blade point.

    Gravity uses the horizontal lever from the boom axis, the added inertia
    the squared distance from the boom axis and the slew term the horizontal
    radius from the slew axis.
    """
    r = forward_kinematics(geom, s.q, point)
    rx, rz = r[..., 0], r[..., 1]
    slew = np.asarray(s.qd.cab, dtype=float) ** 2 * (geom.boom_pivot_offset + rx) * rz
    return GRAVITY * rx + slew + np.asarray(s.qdd.boom, dtype=float) * (rx**2 + rz**2)


def estimate_payload(params, geom, episode, deadband=DEFAULT_DEADBAND, point=None, max_iter=200, tol=1e-7):
    """Payload mass of one episode by Nelder-Mead on the summed squared boom residual.

    Only samples where the boom moves (outside the deadband) enter the
    objective. Negative masses are returned unclamped and flagged.
    """
    started = time.perf_counter()
    aligned = ensure_aligned(episode)
    tau = episode_torques(geom, aligned)
    dtau = residual_torques(params, geom, aligned, tau, deadband)["boom"]
    phi = payload_regressor(geom, aligned, point)
    ok = np.isfinite(dtau) & np.isfinite(phi)
    if not ok.any():
        raise NoValidSamples("no sample with boom motion outside the deadband")
    d, p = dtau[ok], phi[ok]

    def objective(m):
        return float(np.sum((d - m[0] * p) ** 2))

    res = nelder_mead(objective, [0.0], scale=1000.0, tol=tol, max_iter=max_iter)
    if not res.converged:
        raise NonConvergence(f"payload search did not converge in {max_iter} iterations")
    mass = float(res.x[0])
    r = forward_kinematics(geom, aligned.q, point)[ok]
    diagnostics = {
        "mean_reach": float(np.mean(np.hypot(r[:, 0], r[:, 1]))),
        "mean_slew_radius": float(np.mean(geom.boom_pivot_offset + r[:, 0])),
        "negative": mass < 0,
    }
    return PayloadEstimate(
        mass=mass,
        residual_rms=float(np.sqrt(res.fun / d.size)),
        samples_used=int(d.size),
        optimizer_iterations=res.iterations,
        runtime=time.perf_counter() - started,
        converged=res.converged,
        diagnostics=diagnostics,
    )


def payload_closed_form(params, geom, episode, deadband=DEFAULT_DEADBAND, point=None):
    """Exact minimiser of the payload objective (one-parameter least squares)."""
    aligned = ensure_aligned(episode)
    tau = episode_torques(geom, aligned)
    dtau = residual_torques(params, geom, aligned, tau, deadband)["boom"]
    phi = payload_regressor(geom, aligned, point)
    ok = np.isfinite(dtau) & np.isfinite(phi)
    if not ok.any():
        raise NoValidSamples("no sample with boom motion outside the deadband")
    return float(np.dot(dtau[ok], phi[ok]) / np.dot(phi[ok], phi[ok]))


@dataclass
class PayloadSummary:
    count: int
    mean_error: float
    mean_abs_error: float
    std_error: float
    max_abs_error: float


def summarize_errors(estimates, truths):
    err = np.asarray(estimates, dtype=float) - np.asarray(truths, dtype=float)
    if err.size == 0:
        raise NoValidSamples("no estimates to summarise")
    return PayloadSummary(
        count=int(err.size),
        mean_error=float(err.mean()),
        mean_abs_error=float(np.abs(err).mean()),
        std_error=float(err.std(ddof=1)) if err.size > 1 else 0.0,
        max_abs_error=float(np.abs(err).max()),
    )


# quasi-static baseline -----------------------------------------------------

def _open_uniform_knots(lo, hi, n_intervals, degree):
    inner = np.linspace(lo, hi, n_intervals + 1)
    return np.concatenate([[lo] * degree, inner, [hi] * degree])


def _difference_penalty(n, order=2):
    return np.diff(np.eye(n), n=order, axis=0)


@dataclass
class QuasistaticModel:
    """Tensor-product cubic B-spline surface from joint angles to static boom torque."""

    knots: tuple  # per axis knot vectors
    coef: np.ndarray  # flattened (n_b * n_s * n_bu,)
    hull: Delaunay
    degree: int = 3
    fit_rms: float = 0.0

    def _basis(self, q):
        cols = []
        for t, x in zip(self.knots, (q.boom, q.stick, q.bucket)):
            lo, hi = t[0], t[-1]
            x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), lo, hi)
            cols.append(BSpline.design_matrix(x, t, self.degree).toarray())
        b, s, u = cols
        return np.einsum("ni,nj,nk->nijk", b, s, u).reshape(b.shape[0], -1)

    def __call__(self, q):
        return self._basis(q) @ self.coef

    def inside(self, q):
        pts = np.column_stack([np.atleast_1d(np.asarray(v, dtype=float)) for v in (q.boom, q.stick, q.bucket)])
        return self.hull.find_simplex(pts) >= 0


def quasistatic_baseline_fit(static_episodes, geom, intervals=(6, 6, 6), smoothing=1e-3):
    """Fit the static boom-torque surface to slow, empty-bucket motion.

    A second-difference penalty (weight ``smoothing`` relative to the data
    term's scale) keeps unsupported basis functions well defined; raises
    :class:`IllConditioned` when the poses do not fill a 3-D region.
    """
    qs, taus = [], []
    for ep in static_episodes:
        qs.append(np.column_stack([ep.q.boom, ep.q.stick, ep.q.bucket]))
        taus.append(measured_joint_torque(geom, "boom", ep.q, ep.pressures["boom"]))
    if not qs:
        raise IllConditioned("no static episodes supplied")
    pts = np.vstack(qs)
    tau = np.concatenate(taus)
    try:
        hull = Delaunay(pts)
    except QhullError as exc:
        raise IllConditioned(f"poses do not span a 3-D region: {exc}".splitlines()[0]) from None
    degree = 3
    knots = tuple(
        _open_uniform_knots(pts[:, k].min(), pts[:, k].max(), intervals[k], degree) for k in range(3)
    )
    model = QuasistaticModel(knots, np.zeros(0), hull, degree)
    basis = model._basis(JointAngles(pts[:, 0], pts[:, 1], pts[:, 2]))
    support = np.count_nonzero(basis.sum(axis=0) > 1e-6)
    if support < 0.5 * basis.shape[1]:
        raise IllConditioned(
            f"only {support} of {basis.shape[1]} surface basis functions see data; widen pose coverage"
        )
    sizes = [len(t) - degree - 1 for t in knots]
    penalty_rows = []
    for axis in range(3):
        eyes = [np.eye(n) for n in sizes]
        eyes[axis] = _difference_penalty(sizes[axis])
        penalty_rows.append(np.kron(np.kron(eyes[0], eyes[1]), eyes[2]))
    pen = np.vstack(penalty_rows)
    lam = smoothing * np.sqrt(np.sum(basis**2) / basis.shape[1])
    a = np.vstack([basis, lam * pen])
    y = np.concatenate([tau, np.zeros(pen.shape[0])])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    model.coef = coef
    model.fit_rms = float(np.sqrt(np.mean((basis @ coef - tau) ** 2)))
    return model


def quasistatic_baseline_estimate(model, geom, episode, point=None, min_lever=0.5):
    """Time-averaged payload from ``(tau_m - surface) / (g * r_x)``.

    Samples outside the fitted pose hull or with a horizontal lever shorter
    than ``min_lever`` are skipped.
    """
    started = time.perf_counter()
    tau = measured_joint_torque(geom, "boom", episode.q, episode.pressures["boom"])
    rx = forward_kinematics(geom, episode.q, point)[..., 0]
    ok = model.inside(episode.q) & (np.abs(rx) > min_lever)
    if not ok.any():
        raise NoValidSamples("no sample inside the baseline's pose coverage")
    per_sample = (tau - model(episode.q)) / (GRAVITY * rx)
    per_sample = per_sample[ok]
    mass = float(per_sample.mean())
    return PayloadEstimate(
        mass=mass,
        residual_rms=float(np.std(per_sample) * GRAVITY * np.mean(np.abs(rx[ok]))),
        samples_used=int(ok.sum()),
        optimizer_iterations=0,
        runtime=time.perf_counter() - started,
        diagnostics={"extrapolated": int((~model.inside(episode.q)).sum())},
    )
