"""Staged identification of the lumped model: inertia, friction, gravity, centripetal.

Stages must run in this order because each one compensates the torque with
the coefficients found so far. The cylinder plunger area can be identified
first when it is not known.
"""

from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy import signal as sp_signal

from . import kvfile
from .dynamics import (
    DEFAULT_DEADBAND,
    FrictionCoeffs,
    JointFriction,
    LumpedParams,
    centripetal_regressor,
    friction_torque,
    gravity_regressor,
    gravity_torque,
    inertia_coefficient,
    inertia_regressor,
)
from .errors import (
    ConfigError,
    DirectionMissing,
    ExcavatorError,
    IllConditioned,
    InsufficientExcitation,
    InsufficientSlew,
    StageFailed,
    TooFewConfigurations,
)
from .estimation import episode_torques
from .hydraulics import identify_plunger_area, payload_lever
from .kinematics import INSTRUMENTED
from .optimize import nelder_mead
from .signals import PSD_SEGMENT, Spectrum, band_power, ensure_aligned, polyfit, psd, read_episode_csv

STAGE_ORDER = ("plunger", "inertia", "friction", "gravity", "centripetal")
DEFAULT_BAND = (0.5, 3.0)
EXCITATION_FLOOR = 1e-3  # (rad/s^2)^2, accel band power summed over episodes
DEFAULT_MAX_CONDITION = 1e4


@dataclass
class StageRecord:
    stage: str
    joint: object
    metrics: dict
    datasets: list = field(default_factory=list)


@dataclass
class CalibrationReport:
    stages: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    params: LumpedParams = None

    def add(self, stage, joint, metrics, datasets=()):
        self.stages.append(StageRecord(stage, joint, dict(metrics), [str(d) for d in datasets]))

    def stage_names(self):
        names = []
        for rec in self.stages:
            if rec.stage not in names:
                names.append(rec.stage)
        return names

    def to_dict(self):
        out = {"stages": ", ".join(self.stage_names())}
        for rec in self.stages:
            prefix = rec.stage if rec.joint is None else f"{rec.stage}.{rec.joint}"
            for key, value in rec.metrics.items():
                out[f"{prefix}.{key}"] = value
            out[f"{prefix}.datasets"] = len(rec.datasets)
        for i, w in enumerate(self.warnings):
            out[f"warning.{i}"] = w
        return out

    def to_text(self):
        lines = ["Calibration report", "=================="]
        for rec in self.stages:
            title = rec.stage if rec.joint is None else f"{rec.stage} ({rec.joint})"
            lines.append(f"\n[{title}] {len(rec.datasets)} dataset(s)")
            for key, value in rec.metrics.items():
                shown = f"{value:.6g}" if isinstance(value, float) else str(value)
                lines.append(f"  {key:<28} {shown}")
        if self.warnings:
            lines.append("\nWarnings:")
            lines.extend(f"  - {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"

    def write(self, text_path, kv_path):
        Path(text_path).write_text(self.to_text(), encoding="utf-8")
        kvfile.write(kv_path, self.to_dict(), header="calibration report")


# helpers -------------------------------------------------------------------

def _aligned_list(episodes):
    return [ensure_aligned(e) for e in episodes]


def _rms(x):
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x**2))) if x.size else float("nan")


def _r2(y, resid):
    ss = np.sum((y - y.mean()) ** 2)
    return float(1 - np.sum(resid**2) / ss) if ss > 0 else float("nan")


def friction_contribution(params, joint, tau, omega, deadband=DEFAULT_DEADBAND):
    """Friction share of the measured torque (NaN inside the deadband)."""
    return -friction_torque(params, joint, tau, omega, deadband)


# inertia -------------------------------------------------------------------

class BandObjective:
    """Summed Welch band power of ``tau - sum_k pi_k * phi_k`` over episodes.

    Welch segment spectra are linear in the signal, so the spectra of the
    torque and of every regressor column are computed once; evaluating the
    objective is then a small complex matrix product. Matches
    :func:`psd` followed by :func:`band_power` to rounding error.
    """

    def __init__(self, signals, rate, band, segment=PSD_SEGMENT):
        self.parts = []
        for tau, cols in signals:
            n = tau.size
            nper = min(segment, n)
            step = nper - nper // 2
            window = sp_signal.get_window("hann", nper)
            starts = np.arange(0, n - nper + 1, step)
            idx = starts[:, None] + np.arange(nper)
            freqs = np.fft.rfftfreq(nper, 1.0 / rate)
            scale = np.full(freqs.size, 2.0 / (rate * np.sum(window**2)))
            scale[0] /= 2.0
            if nper % 2 == 0:
                scale[-1] /= 2.0
            weights = np.array([band_power(Spectrum(freqs, np.eye(freqs.size)[i]), *band) for i in range(freqs.size)])
            keep = weights > 0
            w = (weights * scale)[keep] / starts.size

            def spectra(x):
                seg = x[idx]
                seg = seg - seg.mean(axis=1, keepdims=True)
                return np.fft.rfft(seg * window, axis=1)[:, keep]

            ft = spectra(tau)
            fc = np.stack([spectra(c) for c in cols.T], axis=-1)
            self.parts.append((ft, fc, w))

    def __call__(self, pi):
        pi = np.asarray(pi, dtype=float)
        total = 0.0
        for ft, fc, w in self.parts:
            r = ft - fc @ pi
            total += float(np.sum(w * np.abs(r) ** 2))
        return total

    def least_squares(self):
        """Exact minimiser (the objective is a positive semi-definite quadratic)."""
        rows, rhs = [], []
        for ft, fc, w in self.parts:
            sw = np.sqrt(w)
            a = (fc * sw[None, :, None]).reshape(-1, fc.shape[-1])
            b = (ft * sw[None, :]).ravel()
            rows.append(np.concatenate([a.real, a.imag]))
            rhs.append(np.concatenate([b.real, b.imag]))
        sol, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
        return sol


def _inertia_signals(episodes, joint, geom, known=None, deadband=DEFAULT_DEADBAND):
    signals = []
    for ep in episodes:
        tau = episode_torques(geom, ep)[joint]
        if known is not None:
            fr = friction_contribution(known, joint, tau, ep.qd[joint], deadband)
            tau = tau - gravity_torque(known, joint, ep.q, geom) - np.nan_to_num(fr)
        phi = inertia_regressor(joint, ep.q, geom) * np.asarray(ep.qdd[joint])[:, None]
        signals.append((np.asarray(tau, dtype=float), phi))
    return signals


def calibrate_inertia(
    episodes, joint, geom, band=DEFAULT_BAND, max_iter=500, tol=1e-4, restarts=3,
    known=None, deadband=DEFAULT_DEADBAND,
):
    """Inertia coefficients minimising the residual band power.

    Returns ``(pi_I, metrics)``. The Nelder-Mead search starts at zero with
    per-coefficient simplex steps derived from a one-parameter constant
    inertia search.

    Parameters
    ----------
    known : LumpedParams, optional
        Gravity and friction coefficients to remove from the torque first.
        Gravity varies with the excitation moves and otherwise leaks into the
        band, biasing the inertia low.
    """
    episodes = _aligned_list(episodes)
    if not episodes:
        raise InsufficientExcitation("no inertia episodes supplied")
    rate = episodes[0].rate
    signals = _inertia_signals(episodes, joint, geom, known, deadband)

    accel_power = sum(band_power(psd(ep.qdd[joint], rate), *band) for ep in episodes)
    if accel_power < EXCITATION_FLOOR:
        raise InsufficientExcitation(
            f"{joint} acceleration band power {accel_power:.3g} is below {EXCITATION_FLOOR:g}"
        )

    objective = BandObjective(signals, rate, band)
    n = signals[0][1].shape[1]
    before = objective(np.zeros(n))

    const = BandObjective([(tau, phi[:, :1]) for tau, phi in signals], rate, band)
    coarse_scale = np.sqrt(before / accel_power)
    coarse = nelder_mead(const, [0.0], scale=coarse_scale, tol=1e-6, max_iter=200)
    i0 = abs(float(coarse.x[0])) or coarse_scale

    phis = np.vstack([inertia_regressor(joint, ep.q, geom) for ep in episodes])
    col_rms = np.sqrt(np.mean(phis**2, axis=0))
    scale = i0 / np.maximum(col_rms, 1e-12)

    x = np.zeros(n)
    iterations = 0
    converged = False
    for _ in range(restarts + 1):
        res = nelder_mead(objective, x, scale=scale, tol=tol, max_iter=max_iter)
        iterations += res.iterations
        moved = np.max(np.abs(res.x - x) / scale)
        x = res.x
        converged = res.converged
        if converged and moved <= tol:
            break
    after = objective(x)
    metrics = {
        "band_power_before": before,
        "band_power_after": after,
        "band_power_ratio": after / before if before > 0 else float("nan"),
        "constant_inertia": float(coarse.x[0]),
        "iterations": iterations,
        "converged": bool(converged),
    }
    return tuple(float(v) for v in x), metrics


# friction ------------------------------------------------------------------

def _friction_gap(ep, joint, geom, params, min_speed, n_points=50):
    """Raising-minus-lowering torque gap and mean measured torque on a shared angle grid.

    The gap comes from the inertia-compensated torque; the regressor is the
    fitted *measured* torque, which is what the friction law scales with.
    Fitting both with the same samples keeps the relation exact even where
    accelerations are not negligible.
    """
    tau = episode_torques(geom, ep)[joint]
    comp = tau - inertia_coefficient(params, joint, ep.q, geom) * ep.qdd[joint]
    angle = np.asarray(ep.q[joint])
    omega = np.asarray(ep.qd[joint])
    up = omega > min_speed
    down = omega < -min_speed
    if up.sum() < 4 or down.sum() < 4:
        raise DirectionMissing(
            f"{ep.metadata.get('source', 'episode')}: needs both raising and lowering {joint} motion"
        )
    lo = max(angle[up].min(), angle[down].min())
    hi = min(angle[up].max(), angle[down].max())
    if not hi > lo:
        raise DirectionMissing(f"raising and lowering {joint} motions do not overlap in angle")
    grid = np.linspace(lo, hi, n_points)
    gap = polyfit(angle[up], comp[up], 2)(grid) - polyfit(angle[down], comp[down], 2)(grid)
    mean = 0.5 * (polyfit(angle[up], tau[up], 2)(grid) + polyfit(angle[down], tau[down], 2)(grid))
    return gap, mean


def calibrate_friction(episodes, joint, geom, params, min_speed=0.05, min_configurations=3):
    """Direction-dependent friction law from up/down sweeps at fixed configurations.

    Each episode is one configuration. The gap between the raising and
    lowering torque curves is regressed on their mean; under the symmetric
    split each direction gets half of the slope and half of the offset.
    """
    episodes = _aligned_list(episodes)
    if len(episodes) < min_configurations:
        raise TooFewConfigurations(
            f"{joint} friction needs at least {min_configurations} configurations, got {len(episodes)}"
        )
    gaps, means = [], []
    for ep in episodes:
        gap, mean = _friction_gap(ep, joint, geom, params, min_speed)
        gaps.append(gap)
        means.append(mean)
    gap = np.concatenate(gaps)
    mean = np.concatenate(means)
    a = np.column_stack([mean, np.ones_like(mean)])
    (slope2, offset2), *_ = np.linalg.lstsq(a, gap, rcond=None)
    coeffs = FrictionCoeffs(float(slope2 / 2), float(offset2 / 2))
    resid = gap - a @ np.array([slope2, offset2])
    metrics = {
        "slope": coeffs.slope,
        "offset": coeffs.offset,
        "gap_mean": float(gap.mean()),
        "gap_fit_rms": _rms(resid),
        "fit_r2": _r2(gap, resid),
        "configurations": len(episodes),
        "split": "symmetric",
    }
    return JointFriction(coeffs, coeffs), metrics


# gravity -------------------------------------------------------------------

def _gravity_system(episodes, joint, geom, params, deadband, max_slew, with_offset):
    rows, targets = [], []
    for ep in episodes:
        tau = episode_torques(geom, ep)[joint]
        fric = friction_contribution(params, joint, tau, ep.qd[joint], deadband)
        target = tau - inertia_coefficient(params, joint, ep.q, geom) * ep.qdd[joint] - fric
        ok = np.isfinite(target) & (np.abs(np.asarray(ep.qd.cab)) <= max_slew)
        reg = gravity_regressor(joint, ep.q, geom)
        if with_offset:
            reg = np.column_stack([reg, np.ones(reg.shape[0])])
        rows.append(reg[ok])
        targets.append(target[ok])
    return np.vstack(rows), np.concatenate(targets)


def calibrate_gravity(
    episodes, joint, geom, params, deadband=DEFAULT_DEADBAND, max_condition=DEFAULT_MAX_CONDITION,
    max_slew=0.05, with_offset=False,
):
    """Gravity coefficients by QR least squares on compensated torques.

    With ``with_offset`` a constant column absorbs an asymmetric friction
    offset; its value is reported as ``offset_asymmetry``.
    """
    episodes = _aligned_list(episodes)
    a, y = _gravity_system(episodes, joint, geom, params, deadband, max_slew, with_offset)
    if y.size < a.shape[1]:
        raise IllConditioned(f"only {y.size} moving samples for {a.shape[1]} {joint} gravity coefficients")
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0):
        raise IllConditioned(f"{joint} gravity regressor has an empty column")
    q_mat, r_mat = scipy.linalg.qr(a / norms, mode="economic")
    diag = np.abs(np.diag(r_mat))
    cond = float(np.linalg.cond(r_mat)) if diag.min() > 0 else float("inf")
    if not cond < max_condition:
        raise IllConditioned(
            f"{joint} gravity regressor condition {cond:.3g} exceeds {max_condition:g}; poses lack diversity"
        )
    coef = scipy.linalg.solve_triangular(r_mat, q_mat.T @ y) / norms
    resid = y - a @ coef
    metrics = {
        "condition": cond,
        "samples": int(y.size),
        "residual_rms": _rms(resid),
        "target_rms": _rms(y),
        "fit_r2": _r2(y, resid),
    }
    if with_offset:
        metrics["offset_asymmetry"] = float(coef[-1])
        coef = coef[:-1]
    return tuple(float(c) for c in coef), metrics


# centripetal ---------------------------------------------------------------

def calibrate_centripetal(episodes, geom, params, deadband=DEFAULT_DEADBAND, min_slew=0.2, min_samples=50):
    """Scale of the swapped-gravity centripetal model from slewing data (1-D least squares)."""
    episodes = _aligned_list(episodes)
    phis, resids = [], []
    for ep in episodes:
        tau = episode_torques(geom, ep)["boom"]
        fric = friction_contribution(params, "boom", tau, ep.qd.boom, deadband)
        grav = gravity_regressor("boom", ep.q, geom) @ np.asarray(params.pi_bg)
        r = tau - grav - inertia_coefficient(params, "boom", ep.q, geom) * ep.qdd.boom - fric
        ok = np.isfinite(r) & (np.abs(np.asarray(ep.qd.cab)) > min_slew)
        phis.append(centripetal_regressor(params, ep.q, ep.qd.cab, geom)[ok])
        resids.append(r[ok])
    phi = np.concatenate(phis) if phis else np.zeros(0)
    r = np.concatenate(resids) if resids else np.zeros(0)
    if phi.size < min_samples:
        raise InsufficientSlew(
            f"{phi.size} moving samples with slew rate above {min_slew} rad/s (need {min_samples})"
        )
    denom = float(phi @ phi)
    if denom <= 0:
        raise InsufficientSlew("centripetal regressor vanishes on the slewing samples")
    pi_c = float(phi @ r) / denom
    metrics = {
        "pi_c": pi_c,
        "samples": int(phi.size),
        "residual_rms_before": _rms(r),
        "residual_rms_after": _rms(r - pi_c * phi),
    }
    return pi_c, metrics


# manifest and pipeline -----------------------------------------------------

MANIFEST_STAGES = (
    "plunger_loaded", "plunger_unloaded", "inertia", "friction", "gravity", "centripetal", "baseline",
)


@dataclass(frozen=True)
class ManifestEntry:
    stage: str
    joint: object
    path: Path
    options: dict


def parse_manifest(path):
    """Read ``stage joint path [key=value ...]`` lines; paths are relative to the manifest."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ConfigError(f"{path}:{lineno}: expected 'stage joint path'")
        stage, joint, rel = parts[:3]
        if stage not in MANIFEST_STAGES:
            raise ConfigError(f"{path}:{lineno}: unknown stage '{stage}'")
        if joint not in INSTRUMENTED and joint != "-":
            raise ConfigError(f"{path}:{lineno}: joint must be boom, stick or '-'")
        options = {}
        for item in parts[3:]:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: option '{item}' is not key=value")
            options[key] = value
        entries.append(ManifestEntry(stage, None if joint == "-" else joint, path.parent / rel, options))
    return entries


class Bundle:
    """Episodes grouped by stage and joint, loaded lazily from a manifest or given directly."""

    def __init__(self, entries=(), episodes=None):
        self.entries = list(entries)
        self._cache = {}
        self._direct = episodes or {}

    @classmethod
    def from_manifest(cls, path):
        return cls(parse_manifest(path))

    @classmethod
    def from_episodes(cls, mapping):
        """``mapping``: {(stage, joint or None): [Episode, ...]}."""
        return cls(episodes=dict(mapping))

    def get(self, stage, joint=None):
        key = (stage, joint)
        if key in self._direct:
            return list(self._direct[key])
        out = []
        for e in self.entries:
            if e.stage == stage and (e.joint == joint or joint is None and e.joint is None):
                if e.path not in self._cache:
                    ep = read_episode_csv(e.path)
                    ep.metadata.update(e.options)
                    self._cache[e.path] = ep
                out.append(self._cache[e.path])
        return out

    def names(self, stage, joint=None):
        if (stage, joint) in self._direct:
            return [ep.metadata.get("source", ep.metadata.get("scenario", "?")) for ep in self._direct[(stage, joint)]]
        return [e.path.name for e in self.entries if e.stage == stage and e.joint == joint]

    def has(self, stage, joint=None):
        if (stage, joint) in self._direct:
            return bool(self._direct[(stage, joint)])
        return any(e.stage == stage and e.joint == joint for e in self.entries)


def _run_stage(stage, joint, fn):
    try:
        return fn()
    except StageFailed:
        raise
    except ExcavatorError as exc:
        raise StageFailed(stage, joint, f"{type(exc).__name__}: {exc}") from exc


def _require(bundle, stage, joint):
    if not bundle.has(stage, joint):
        where = stage if joint is None else f"{stage}/{joint}"
        raise StageFailed(stage, joint, f"no datasets for '{where}' in the bundle")
    return bundle.get(stage, joint)


def _rigid_stages(bundle, geom, params, report, band, deadband, friction_split, max_condition, known):
    inertia = {}
    for joint in INSTRUMENTED:
        eps = _require(bundle, "inertia", joint)
        pi, metrics = _run_stage(
            "inertia", joint,
            lambda: calibrate_inertia(eps, joint, geom, band, known=known, deadband=deadband),
        )
        inertia[joint] = pi
        report.add("inertia", joint, metrics, bundle.names("inertia", joint))
    params = replace(params, pi_bI=inertia["boom"], pi_sI=inertia["stick"])

    friction = {}
    for joint in INSTRUMENTED:
        eps = _require(bundle, "friction", joint)
        fr, metrics = _run_stage("friction", joint, lambda: calibrate_friction(eps, joint, geom, params))
        friction[joint] = fr
        report.add("friction", joint, metrics, bundle.names("friction", joint))
    params = replace(params, friction=friction)

    gravity = {}
    eps = _require(bundle, "gravity", None)
    with_offset = friction_split == "gravity"
    for joint in INSTRUMENTED:
        pi, metrics = _run_stage(
            "gravity", joint,
            lambda: calibrate_gravity(eps, joint, geom, params, deadband, max_condition, with_offset=with_offset),
        )
        gravity[joint] = pi
        if with_offset:
            d = metrics["offset_asymmetry"]
            fr = friction[joint]
            friction[joint] = JointFriction(
                replace(fr.raising, offset=fr.raising.offset + d),
                replace(fr.lowering, offset=fr.lowering.offset - d),
            )
            metrics["split"] = "gravity"
        report.add("gravity", joint, metrics, bundle.names("gravity", None))
    return replace(params, pi_bg=gravity["boom"], pi_sg=gravity["stick"], friction=friction)


def run_pipeline(
    bundle, geom, *, band=DEFAULT_BAND, deadband=DEFAULT_DEADBAND, friction_split="symmetric",
    max_condition=DEFAULT_MAX_CONDITION, calibration_date=None, catalog=None,
):
    """Run plunger (when present), inertia, friction, gravity and centripetal stages.

    Returns ``(params, report, geom)``; ``geom`` carries the identified boom
    plunger area when the plunger stage ran. The first failing stage raises
    :class:`StageFailed` naming it.
    """
    if friction_split not in ("symmetric", "gravity"):
        raise ConfigError("friction_split must be 'symmetric' or 'gravity'")
    report = CalibrationReport()
    params = LumpedParams(machine_id=geom.machine_id)

    if bundle.has("plunger_loaded", "boom") or bundle.has("plunger_unloaded", "boom"):
        def plunger():
            loaded = _require(bundle, "plunger_loaded", "boom")[0]
            unloaded = _require(bundle, "plunger_unloaded", "boom")[0]
            mass = float(loaded.metadata.get("payload_kg", "nan"))
            if not np.isfinite(mass) or mass <= 0:
                raise ConfigError("plunger_loaded entry needs payload_kg=<mass>")
            mid = len(loaded) // 2
            radius, theta_m = payload_lever(geom, "boom", loaded[mid].q)
            kwargs = {} if catalog is None else {"catalog": catalog}
            ident = identify_plunger_area(
                loaded, unloaded, mass, float(radius), float(theta_m), geom.areas["boom"].rod,
                geom.linkage["boom"], joint="boom", cabin_pitch=geom.cabin_pitch, **kwargs,
            )
            return ident

        ident = _run_stage("plunger", "boom", plunger)
        geom = geom.with_areas("boom", replace(geom.areas["boom"], piston=ident.area_catalog))
        report.add("plunger", "boom", {
            "area_raw": ident.area_raw, "area_catalog": ident.area_catalog,
            "bore_catalog": ident.bore_catalog, "pairs_used": ident.pairs_used,
            "pairs_rejected": ident.pairs_rejected,
        }, bundle.names("plunger_loaded", "boom") + bundle.names("plunger_unloaded", "boom"))

    # The first round identifies inertia on the raw torque, the second
    # repeats all three stages with gravity and friction already removed
    # from the inertia excitation.
    for round_ in (1, 2):
        known = params if round_ == 2 else None
        first = len(report.stages)
        params = _rigid_stages(bundle, geom, params, report, band, deadband, friction_split, max_condition, known)
        for rec in report.stages[first:]:
            rec.metrics["round"] = round_

    eps = _require(bundle, "centripetal", None)
    pi_c, metrics = _run_stage("centripetal", None, lambda: calibrate_centripetal(eps, geom, params, deadband))
    report.add("centripetal", None, metrics, bundle.names("centripetal", None))

    params = replace(
        params, pi_c=pi_c, calibrated=True,
        calibration_date=calibration_date or date.today().isoformat(),
    )
    report.params = params
    return params, report, geom
