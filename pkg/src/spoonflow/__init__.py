"""spoonflow: curvature flow of spoon-shaped networks.

Simulation of the motion by curvature of a closed loop joined to a
pinned handle at a 120 degree triple junction, with the conservation
and monotonicity diagnostics that govern the collapse, the
self-shrinking spoon profile, and parabolic blow-up classification.
"""

from .geometry import Polyline, CurveFrame, frame, enclosed_area, resample, polyline_distance
from .network import Disc, ConvexPolygon, SpoonNetwork
from .flow import FlowConfig, FlowState, StopReason, run, step
from .shrinker import shoot_brakke_spoon, spoon_gaussian_density
from .blowup import estimate_singularity, rescale_trajectory, classify_limit
from .generators import circle_spoon, ellipse_spoon, dumbbell_spoon, generate_initial

__version__ = "0.1.0"

__all__ = [
    "Polyline", "CurveFrame", "frame", "enclosed_area", "resample", "polyline_distance",
    "Disc", "ConvexPolygon", "SpoonNetwork",
    "FlowConfig", "FlowState", "StopReason", "run", "step",
    "shoot_brakke_spoon", "spoon_gaussian_density",
    "estimate_singularity", "rescale_trajectory", "classify_limit",
    "circle_spoon", "ellipse_spoon", "dumbbell_spoon", "generate_initial",
    "__version__",
]
