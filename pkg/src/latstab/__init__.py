"""latstab: lateral stability workbench for an in-wheel-motor vehicle.

Online neural identification of planar dynamics, equilibrium reference
search, predictive yaw-moment control, and a self-contained 7-DoF plant to
validate against.
"""

from .allocation import TorqueVector, allocate
from .config import ScenarioConfig, load_config, preset, save_config
from .control import (LmpcController, NmpcConfig, NmpcMfController,
                      NmpcRhonnController, OffController, YawMomentCommand,
                      make_controller)
from .ekf import ControlInput, EkfConfig, EkfLearner, RhonnIdentifier, identify_step
from .harness import RunResult, estimation_report, phase_area, run_scenario, speed_frontier
from .plant import CompanionModel, VehicleParams, VehicleState, integrate
from .refgen import ReferenceTargets, SearchConfig, desired_sideslip, neighbors_search
from .rhonn import RhonnModel, SigmoidParams, build_basis, build_xi, sigmoid, step

__version__ = "0.1.0"

__all__ = [
    "TorqueVector", "allocate",
    "ScenarioConfig", "load_config", "preset", "save_config",
    "LmpcController", "NmpcConfig", "NmpcMfController", "NmpcRhonnController",
    "OffController", "YawMomentCommand", "make_controller",
    "ControlInput", "EkfConfig", "EkfLearner", "RhonnIdentifier", "identify_step",
    "RunResult", "estimation_report", "phase_area", "run_scenario", "speed_frontier",
    "CompanionModel", "VehicleParams", "VehicleState", "integrate",
    "ReferenceTargets", "SearchConfig", "desired_sideslip", "neighbors_search",
    "RhonnModel", "SigmoidParams", "build_basis", "build_xi", "sigmoid", "step",
]
