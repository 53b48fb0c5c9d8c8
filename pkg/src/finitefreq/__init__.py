"""Finite-frequency input-output analysis for LTI and LPV systems."""

from .model import (AffineMatrixFunction, DimensionError, FrequencyRange,
                    FrequencyWeight, LpvSystem, ParameterBox, PerformanceIndex,
                    THETA, THETA_D, box_vertices, eval_affine, frequency_weight,
                    load_system, system_from_dict, system_to_dict, transfer_function)
from .sdp import (AffineSymmetricForm, FeasibilityResult, max_eig_neg,
                  real_embedding, solve_feasibility)
from .lmi import (GammaResult, LmiProblem, UasCertificate, assemble_gkyp_lti,
                  assemble_kyp_lti, assemble_lpv_ef, assemble_lpv_ff,
                  assemble_theorem2, build_problem, min_gamma, uas_certificate,
                  verify_on_grid)
from .gramians import (GramianSet, ShiftedTraceBound, StateTransition,
                       gramian_lpv_frozen, gramian_lpv_shifted, gramian_lpv_weighted,
                       gramian_lti_ff, gramian_set, quadrature_trace_bound,
                       shifted_trace_bound, state_transition)
from .enlargement import (EnlargementResult, delta_squared, enlarge_range, gap,
                          recommend_range, uniform_spectral_radius)
from .simulation import (BandLimitedSignal, IqcReport, ScheduleTrajectory,
                         SimulationResult, iqc_value, performance_ratio,
                         sample_signal, simulate, spectrum_fraction)

__version__ = "0.1.0"
