"""Sparse identification of drag laws for falling balls."""

__version__ = "0.1.0"

from .data_model import (  # noqa: E402
    AIR,
    BallSpec,
    FluidSpec,
    Trajectory,
    add_gaussian_noise,
    load_trajectories,
    write_trajectories,
)
from .diffsmooth import SmootherConfig, compute_derivatives, estimate_noise_level  # noqa: E402
from .simulate import LinearDrag, QuadraticDrag, ReynoldsDependent, simulate_drop  # noqa: E402
from .sindy import (  # noqa: E402
    FitConfig,
    SparseModel,
    fit_group_second_order,
    fit_second_order,
    group_stlsq,
    stlsq,
)

__all__ = [
    "AIR",
    "BallSpec",
    "FitConfig",
    "FluidSpec",
    "LinearDrag",
    "QuadraticDrag",
    "ReynoldsDependent",
    "SmootherConfig",
    "SparseModel",
    "Trajectory",
    "add_gaussian_noise",
    "compute_derivatives",
    "estimate_noise_level",
    "fit_group_second_order",
    "fit_second_order",
    "group_stlsq",
    "load_trajectories",
    "simulate_drop",
    "stlsq",
    "write_trajectories",
]
