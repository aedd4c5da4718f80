"""Deterministic closed-loop simulator for one-shot visual target following."""

__version__ = "0.1.0"

from .dtw import DtwReport, Trajectory, case_name, dtw_exact, dtw_fast, evaluate_run  # noqa: F401
from .perception import DescriptorModel, Mask, Query, detect, pool_region, resolve_query, segment  # noqa: F401
from .scenario import Scenario, load_scenario  # noqa: F401
from .servo import ControlSignal, ServoController, ServoGains, direction_vector  # noqa: F401
from .tracking import DescriptorBank, Tracker, TrackerParams  # noqa: F401
from .world import CameraModel, DroneState, Frame, SceneObject, WorldState, project_to_image  # noqa: F401
