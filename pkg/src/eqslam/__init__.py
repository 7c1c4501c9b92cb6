"""Equivariant nonlinear observer for landmark-bearing SLAM.

A numpy library implementing the symmetry group of the visual SLAM problem,
an equivariant observer with constant gains, an EKF baseline on the raw
state, and a simulation harness for convergence, accuracy, and step-time
scaling experiments.
"""

from .errors import (CountMismatchError, DegenerateConfigurationError,
                     InsufficientDataError, LifecycleError, TangencyError)
from .lie import (Pose, Twist, projector, se3_exp, se3_log, skew, so3_exp,
                  so3_log, vee)
from .group import (AlgebraElement, GroupElement, Output, TotalState,
                    VelocityMeasurement, group_exp, output_action,
                    predicted_flow, state_action, velocity_lift)
from .system import MeasurementFrame, SystemParams, measure, propagate, sense
from .observer import (Innovation, LandmarkStatus, ObserverState,
                       estimated_output, estimated_positions, freeze,
                       initialize_landmark, innovation, lyapunov_components,
                       output_error, reconstruct, step, unfreeze)
from .ekf import (EkfState, ekf_freeze, ekf_init_landmark, ekf_predict,
                  ekf_unfreeze, ekf_update)
from .sim import (ComplexityFit, Scenario, SweepResult, TrialRecord,
                  build_scenario, comparison_scenario, complexity_fit,
                  convergence_scenario, rmse, rmse_aligned, run_sweep,
                  run_trial, sample_reference)

__version__ = "0.1.0"
