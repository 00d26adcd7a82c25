"""Calibrated lumped-parameter dynamics of hydraulic excavator arms.

Identifies a compact model of the boom and stick from cylinder pressures and
joint angles, then uses it to estimate blade contact forces and per-episode
payload mass. A ground-truth simulator provides every test oracle.
"""

from .calibration import Bundle, CalibrationReport, run_pipeline
from .dynamics import LumpedParams, load_params, predict_zero_load, save_params
from .errors import ExcavatorError
from .estimation import estimate_force, estimate_payload
from .kinematics import JointAngles, JointRates, MachineGeometry, load_geometry
from .presets import get_preset
from .signals import Episode, derive_accelerations, read_episode_csv, write_episode_csv
from .simulator import PhysicalParams, ScenarioScript, lump_parameters, simulate

__version__ = "0.1.0"

__all__ = [
    "Bundle", "CalibrationReport", "Episode", "ExcavatorError", "JointAngles", "JointRates",
    "LumpedParams", "MachineGeometry", "PhysicalParams", "ScenarioScript", "derive_accelerations",
    "estimate_force", "estimate_payload", "get_preset", "load_geometry", "load_params",
    "lump_parameters", "predict_zero_load", "read_episode_csv", "run_pipeline", "save_params",
    "simulate", "write_episode_csv",
]
