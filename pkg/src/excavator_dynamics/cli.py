"""``exdyn``: simulate, calibrate, estimate, benchmark and sensitivity-map commands.

Exit codes: 0 success, 2 input error, 3 calibration failure, 4 estimation
precondition failure.
"""

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kvfile
from .calibration import DEFAULT_BAND, DEFAULT_MAX_CONDITION, Bundle, run_pipeline
from .dynamics import DEFAULT_DEADBAND, load_params, save_params
from .errors import ConfigError, EpisodeTooShort, ExcavatorError, MalformedEpisode, ScriptInfeasible, StageFailed
from .estimation import (
    DEFAULT_MAX_CONDITION as FORCE_MAX_CONDITION,
    estimate_force_episode,
    estimate_payload,
    quasistatic_baseline_estimate,
    quasistatic_baseline_fit,
    summarize_errors,
    write_force_csv,
)
from .hydraulics import load_catalog
from .kinematics import load_geometry, save_geometry, sensitivity_map
from .presets import PRESETS, envelope_grid, get_preset
from .scenarios import baseline_static, scenario_library, write_bundle
from .signals import read_episode_csv, write_episode_csv
from .simulator import load_phys, load_script, simulate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CALIBRATION = 3
EXIT_ESTIMATION = 4


class InputError(ExcavatorError):
    """Bad command-line input: exit code 2."""


class EstimationPrecondition(ExcavatorError):
    """Estimation cannot start (uncalibrated params, no episodes): exit code 4."""


@dataclass
class RunConfig:
    """Settings shared by all commands, read from a ``key = value`` file.

    Either ``machine`` (a bundled preset) or ``geometry`` (a geometry file)
    selects the machine; a ``physical`` file overrides the preset's simulator
    ground truth. Relative paths resolve against the config file.
    """

    machine: str = "case-like"
    geometry: Path = None
    physical: Path = None
    params: Path = None
    manifest: Path = None
    catalog: Path = None
    out: Path = Path("out")
    seed: int = 0
    rate: float = 50.0
    noise: bool = True
    deadband: float = DEFAULT_DEADBAND
    force_max_condition: float = FORCE_MAX_CONDITION
    gravity_max_condition: float = DEFAULT_MAX_CONDITION
    band: tuple = DEFAULT_BAND
    friction_split: str = "symmetric"
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    _PATHS = ("geometry", "physical", "params", "manifest", "catalog", "out")

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        data = kvfile.read(path)
        cfg = cls()
        base = path.parent
        for key in cls._PATHS:
            if key in data:
                setattr(cfg, key, base / data.pop(key))
        src = str(path)
        if "machine" in data:
            cfg.machine = data.pop("machine")
        if "seed" in data:
            cfg.seed = int(kvfile.get_float(data, "seed", source=src))
            data.pop("seed")
        if "jobs" in data:
            cfg.jobs = int(kvfile.get_float(data, "jobs", source=src))
            data.pop("jobs")
        for key in ("rate", "deadband", "force_max_condition", "gravity_max_condition"):
            if key in data:
                setattr(cfg, key, kvfile.get_float(data, key, source=src))
                data.pop(key)
        if "band" in data:
            cfg.band = tuple(kvfile.get_floats(data, "band", count=2, source=src))
            data.pop("band")
        if "noise" in data:
            cfg.noise = kvfile.get_bool(data, "noise")
            data.pop("noise")
        if "friction_split" in data:
            cfg.friction_split = data.pop("friction_split")
        cfg.extra = data
        cfg.validate(src)
        return cfg

    def validate(self, source="<config>"):
        for key in ("rate", "deadband", "force_max_condition", "gravity_max_condition"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{source}: '{key}' must be positive")
        if self.jobs < 1:
            raise ConfigError(f"{source}: 'jobs' must be at least 1")
        lo, hi = self.band
        if not 0 <= lo < hi:
            raise ConfigError(f"{source}: 'band' must satisfy 0 <= lo < hi")
        if self.friction_split not in ("symmetric", "gravity"):
            raise ConfigError(f"{source}: 'friction_split' must be symmetric or gravity")
        if self.geometry is None and self.machine not in PRESETS:
            raise ConfigError(f"{source}: unknown machine preset {self.machine!r}; choose from {sorted(PRESETS)}")
        for key in ("geometry", "physical", "params", "manifest", "catalog"):
            p = getattr(self, key)
            if p is not None and key != "params" and not Path(p).is_file():
                raise ConfigError(f"{source}: {key} file {p} does not exist")

    def preset(self):
        return get_preset(self.machine) if self.machine in PRESETS else None

    def load_geometry(self):
        if self.geometry is not None:
            return load_geometry(self.geometry)
        return self.preset().geometry

    def load_physical(self):
        if self.physical is not None:
            return load_phys(self.physical)
        preset = self.preset()
        if preset is None:
            raise ConfigError("a 'physical' file is required when the machine is not a bundled preset")
        return preset.physical


# helpers -------------------------------------------------------------------

def _out_dir(cfg, sub=None):
    d = Path(cfg.out) if sub is None else Path(cfg.out) / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def _simulate_one(job):
    phys, geom, script, rate, seed, noise = job
    return simulate(phys, geom, script, rate=rate, seed=seed, noise=noise)


def _simulate_many(cfg, scripts, phys, geom, seed_base):
    jobs = [(phys, geom, s, cfg.rate, seed_base + k, cfg.noise) for k, s in enumerate(scripts)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_simulate_one, jobs))
    return [_simulate_one(j) for j in jobs]


def _resolve_scripts(cfg, names):
    preset = cfg.preset()
    library = scenario_library(preset, seed=cfg.seed) if preset is not None else {}
    scripts = []
    for name in names:
        if name in library:
            found = library[name]
            scripts.extend(found if isinstance(found, list) else [found])
        elif Path(name).is_file():
            scripts.append(load_script(name))
        else:
            known = ", ".join(sorted(library)) or "none (machine is not a preset)"
            raise InputError(f"'{name}' is neither a script file nor a scenario; scenarios: {known}")
    return scripts


def _read_episodes(paths):
    files = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        elif p.is_file():
            files.append(p)
        else:
            raise InputError(f"episode file {p} does not exist")
    return files, [read_episode_csv(f) for f in files]


def _load_calibrated(cfg):
    if cfg.params is None:
        raise EstimationPrecondition("no parameter file configured (set 'params' or pass --params)")
    if not Path(cfg.params).is_file():
        raise InputError(f"parameter file {cfg.params} does not exist")
    params = load_params(cfg.params)
    if not params.calibrated:
        raise EstimationPrecondition(f"{cfg.params} is not calibrated; run 'exdyn calibrate' first")
    return params


def _fmt_summary(label, s):
    return (
        f"{label:<14} n={s.count:<4d} mean={s.mean_error:9.2f} kg  mean|e|={s.mean_abs_error:8.2f} kg"
        f"  std={s.std_error:8.2f} kg  max|e|={s.max_abs_error:8.2f} kg"
    )


# commands ------------------------------------------------------------------

def cmd_simulate(cfg, args):
    geom = cfg.load_geometry()
    phys = cfg.load_physical()
    out = _out_dir(cfg)
    if args.scenario == ["calibration_bundle"]:
        preset = cfg.preset()
        if preset is None:
            raise InputError("calibration_bundle needs a bundled machine preset")
        preset = replace(preset, geometry=geom, physical=phys)
        manifest = write_bundle(preset, out, seed=cfg.seed, include_plunger=args.plunger, noise=cfg.noise)
        print(f"wrote calibration bundle manifest {manifest}")
        return EXIT_OK
    scripts = _resolve_scripts(cfg, args.scenario)
    episodes = _simulate_many(cfg, scripts, phys, geom, cfg.seed)
    for script, ep in zip(scripts, episodes):
        path = out / f"{script.name}.csv"
        write_episode_csv(ep, path)
        payload = f"{script.payload_mass:.1f} kg" if script.has_payload else "none"
        print(f"{path.name:<36} {ep.duration:7.2f} s  {len(ep):6d} samples  payload {payload}")
    print(f"{len(episodes)} episode file(s) in {out}")
    return EXIT_OK


def cmd_calibrate(cfg, args):
    manifest = args.manifest or cfg.manifest
    if manifest is None:
        raise InputError("no manifest given (pass --manifest or set 'manifest' in the config)")
    if not Path(manifest).is_file():
        raise InputError(f"manifest {manifest} does not exist")
    geom = cfg.load_geometry()
    catalog = load_catalog(cfg.catalog) if cfg.catalog is not None else None
    params, report, geom = run_pipeline(
        Bundle.from_manifest(manifest), geom, band=cfg.band, deadband=cfg.deadband,
        friction_split=cfg.friction_split, max_condition=cfg.gravity_max_condition, catalog=catalog,
    )
    out = _out_dir(cfg)
    save_params(params, out / "params.txt")
    report.write(out / "calibration_report.txt", out / "calibration_report.kv")
    if "plunger" in report.stage_names():
        save_geometry(geom, out / "geometry.txt")
    for rec in report.stages:
        where = rec.stage if rec.joint is None else f"{rec.stage}/{rec.joint}"
        m = rec.metrics
        keys = [k for k in ("residual_rms", "residual_rms_after", "band_power_ratio", "fit_r2") if k in m]
        detail = "  ".join(f"{k}={m[k]:.4g}" for k in keys)
        tag = f" (round {m['round']})" if "round" in m else ""
        print(f"[pass] {where:<18}{tag:<10} {detail}")
    print(f"stages: {', '.join(report.stage_names())}")
    print(f"wrote {out / 'params.txt'}")
    return EXIT_OK


def cmd_estimate(cfg, args):
    if args.params is not None:
        cfg.params = Path(args.params)
    params = _load_calibrated(cfg)
    geom = cfg.load_geometry()
    files, episodes = _read_episodes(args.episodes)
    if not episodes:
        raise EstimationPrecondition("no episodes to estimate")

    if args.mode == "force":
        out = _out_dir(cfg, "force")
        for f, ep in zip(files, episodes):
            t, est = estimate_force_episode(params, geom, ep, cfg.deadband, cfg.force_max_condition)
            write_force_csv(out / f"{f.stem}_force.csv", t, est)
            v = est.valid
            if v.any():
                print(
                    f"{f.name:<36} valid {v.sum():5d}/{v.size:<5d} mean |f| {np.mean(est.magnitude[v]):9.1f} N"
                    f"  mean direction {np.degrees(np.mean(est.direction[v])):6.2f} deg"
                )
            else:
                print(f"{f.name:<36} no valid samples")
        return EXIT_OK

    out = _out_dir(cfg, "payload")
    rows, errors, truths = [], [], []
    for f, ep in zip(files, episodes):
        est = estimate_payload(params, geom, ep, cfg.deadband)
        truth = ep.true_payload
        record = {
            "episode": f.name, "mass": est.mass, "residual_rms": est.residual_rms,
            "samples_used": est.samples_used, "optimizer_iterations": est.optimizer_iterations,
            "runtime": est.runtime, "negative": est.negative,
        }
        record.update({f"diag.{k}": v for k, v in est.diagnostics.items()})
        if truth is not None:
            record["true_mass"] = truth
            record["error"] = est.mass - truth
            errors.append(est.mass)
            truths.append(truth)
        kvfile.write(out / f"{f.stem}.kv", record, header="payload estimate")
        rows.append((f.name, est.mass, np.nan if truth is None else truth, est.runtime))
        flag = "  (negative)" if est.negative else ""
        shown = "" if truth is None else f"  true {truth:9.1f} kg  error {est.mass - truth:+8.1f} kg"
        print(f"{f.name:<36} {est.mass:9.1f} kg{shown}  {est.runtime * 1e3:6.1f} ms{flag}")
    with open(Path(cfg.out) / "payload_estimates.csv", "w", encoding="utf-8") as fh:
        fh.write("episode,mass,true_mass,error,runtime\n")
        for name, mass, truth, runtime in rows:
            fh.write(f"{name},{mass:.17g},{truth:.17g},{mass - truth:.17g},{runtime:.6g}\n")
    if truths:
        print(_fmt_summary("dynamic", summarize_errors(errors, truths)))
    return EXIT_OK


def _baseline_episodes(cfg, geom):
    manifest = cfg.manifest
    if manifest is not None:
        bundle = Bundle.from_manifest(manifest)
        if bundle.has("baseline", None):
            return bundle.get("baseline", None)
    preset = cfg.preset()
    if preset is None:
        raise InputError("no baseline episodes: add 'baseline' entries to the manifest")
    return _simulate_many(cfg, baseline_static(preset, seed=cfg.seed), cfg.load_physical(), geom, cfg.seed + 100)


def cmd_benchmark(cfg, args):
    if args.params is not None:
        cfg.params = Path(args.params)
    params = _load_calibrated(cfg)
    geom = cfg.load_geometry()
    if args.episodes:
        files, episodes = _read_episodes(args.episodes)
        names = [f.name for f in files]
    else:
        scripts = _resolve_scripts(cfg, [args.suite])
        episodes = _simulate_many(cfg, scripts, cfg.load_physical(), geom, cfg.seed + 5000)
        names = [s.name for s in scripts]
    if not episodes:
        raise EstimationPrecondition("benchmark suite is empty")
    if any(ep.true_payload is None for ep in episodes):
        raise InputError("every benchmark episode needs a ground-truth payload")
    model = quasistatic_baseline_fit(_baseline_episodes(cfg, geom), geom)

    truths = np.array([ep.true_payload for ep in episodes])
    dyn, qs, runtimes = [], [], []
    for ep in episodes:
        t0 = time.perf_counter()
        dyn.append(estimate_payload(params, geom, ep, cfg.deadband).mass)
        runtimes.append(time.perf_counter() - t0)
        qs.append(quasistatic_baseline_estimate(model, geom, ep).mass)
    dyn_s = summarize_errors(dyn, truths)
    qs_s = summarize_errors(qs, truths)
    ratio = qs_s.std_error / dyn_s.std_error if dyn_s.std_error > 0 else float("inf")

    out = _out_dir(cfg)
    with open(out / "benchmark.csv", "w", encoding="utf-8") as fh:
        fh.write("episode,true_mass,dynamic,quasistatic\n")
        for name, t, d, q in zip(names, truths, dyn, qs):
            fh.write(f"{name},{t:.17g},{d:.17g},{q:.17g}\n")
    kvfile.write(out / "benchmark.kv", {
        "episodes": len(episodes),
        "dynamic.mean_error": dyn_s.mean_error, "dynamic.std_error": dyn_s.std_error,
        "quasistatic.mean_error": qs_s.mean_error, "quasistatic.std_error": qs_s.std_error,
        "std_ratio": ratio, "dynamic.mean_runtime": float(np.mean(runtimes)),
        "dynamic.max_runtime": float(np.max(runtimes)),
    }, header="payload benchmark")
    print(f"{'method':<14} {'mean error [kg]':>16} {'std [kg]':>10}")
    print(f"{'dynamic':<14} {dyn_s.mean_error:16.1f} {dyn_s.std_error:10.1f}")
    print(f"{'quasistatic':<14} {qs_s.mean_error:16.1f} {qs_s.std_error:10.1f}")
    print(f"std ratio quasistatic/dynamic: {ratio:.1f}  ({len(episodes)} episodes,"
          f" mean optimizer runtime {np.mean(runtimes) * 1e3:.1f} ms)")
    return EXIT_OK


def cmd_sensitivity_map(cfg, args):
    geom = cfg.load_geometry()
    preset = cfg.preset()
    if args.envelope is not None:
        x0, x1, z0, z1 = args.envelope
        x, z = np.arange(x0, x1 + 1e-9, args.step), np.arange(z0, z1 + 1e-9, args.step)
    elif preset is not None:
        x, z = envelope_grid(preset, args.step)
    else:
        raise InputError("pass --envelope XMIN XMAX ZMIN ZMAX for a machine without a preset")
    smap = sensitivity_map(geom, x, z, probe_force=args.probe_force)
    if not smap.reachable.any():
        raise InputError("no grid point of the envelope is reachable")
    out = _out_dir(cfg)
    gx, gz = np.meshgrid(smap.x, smap.z)
    data = np.column_stack([gx.ravel(), gz.ravel(), smap.values.ravel() / smap.probe_force])
    np.savetxt(out / "sensitivity_map.csv", data, delimiter=",", header="x,z,pa_per_newton", comments="", fmt="%.10g")
    v = smap.values[smap.reachable] / smap.probe_force
    print(f"boom pressure per blade force: min {v.min():.4g} Pa/N, max {v.max():.4g} Pa/N,"
          f" ratio {smap.ratio():.2f} over {v.size} reachable points")
    return EXIT_OK


# parser --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="exdyn", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run config file (key = value)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate episode CSVs from scenarios or script files")
    p.add_argument("scenario", nargs="+", help="scenario name, 'calibration_bundle', or script file")
    p.add_argument("--plunger", action="store_true", help="include plunger sweeps in a calibration bundle")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common], help="run the staged calibration on a manifest")
    p.add_argument("--manifest", type=Path)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("estimate", parents=[common], help="force stream or payload mass per episode")
    p.add_argument("mode", choices=("force", "payload"))
    p.add_argument("episodes", nargs="*", help="episode CSV files or directories")
    p.add_argument("--params", type=Path, help="calibrated parameter file (overrides the config)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", parents=[common], help="dynamic estimator vs quasistatic baseline")
    p.add_argument("suite", nargs="?", default="weighing_cycles", help="scenario suite to simulate")
    p.add_argument("--episodes", nargs="+", help="use recorded episodes instead of a simulated suite")
    p.add_argument("--params", type=Path)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sensitivity-map", parents=[common], help="boom pressure change per blade force")
    p.add_argument("--step", type=float, default=0.25, help="grid spacing [m]")
    p.add_argument("--probe-force", type=float, default=1000.0, help="vertical probe force [N]")
    p.add_argument("--envelope", type=float, nargs=4, metavar=("XMIN", "XMAX", "ZMIN", "ZMAX"))
    p.set_defaults(func=cmd_sensitivity_map)
    return parser


def _exit_code(exc):
    if isinstance(exc, StageFailed):
        return EXIT_CALIBRATION
    if isinstance(exc, (InputError, ConfigError, MalformedEpisode, EpisodeTooShort, ScriptInfeasible)):
        return EXIT_INPUT
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config is not None else RunConfig()
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        return args.func(cfg, args)
    except ExcavatorError as exc:
        code = _exit_code(exc)
        if code is None:
            # anything else surfacing from estimation is a precondition failure there,
            # and an input problem everywhere else
            code = EXIT_ESTIMATION if args.command in ("estimate", "benchmark") else EXIT_INPUT
        print(f"exdyn {args.command}: error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"exdyn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
