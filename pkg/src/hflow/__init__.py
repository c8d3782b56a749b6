"""Time-discrete flow of H-surfaces spanning a Jordan curve, on a triangulated disk."""

from .admissibility import (ConditionReport, SurfaceState, bump, check_conditions,
                            harmonic_state, project_monotone, realize, state_from_surface)
from .curvature import Callback, Constant, Radial
from .curve import JordanCurve, chord_arc, circle_curve, curve_from_samples, ellipse_curve
from .energy import (dirichlet, f_gradient, f_value, h_volume, hopf_residual,
                     inner_variation_residual)
from .errors import HFlowError
from .flow import (ConvergenceConfig, FlowConfig, FlowTrace, InnerConfig, neumann_residual,
                   rothe_step, run_flow, solve_stationary, stationarity_residual)
from .io import RunConfig, parse_config, write_frame, write_report, write_trace
from .mesh import DiskMesh, build_disk_mesh
from .obstacle import AllSpace, Ball

__version__ = "0.1.0"
