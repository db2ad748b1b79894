"""Upwind finite volumes for linear advection on polygonal meshes."""

from .estimator import UpwindAdvection
from .flow import VelocityField
from .mesh import Mesh, build_cartesian, build_perturbed_cartesian, validate_mesh
from .scheme import AnalyticData, IndicatorData, PiecewiseConstantData, SchemeConfig, run_to_time

__all__ = [
    "AnalyticData", "IndicatorData", "Mesh", "PiecewiseConstantData", "SchemeConfig", "UpwindAdvection",
    "VelocityField", "build_cartesian", "build_perturbed_cartesian", "run_to_time", "validate_mesh",
]
