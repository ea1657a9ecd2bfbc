"""Finite element solver and verification toolkit for double phase Dirichlet
problems: first eigenpairs of the r-Laplacian, gauge norms of the mixed-growth
modular, truncated functionals, two constant-sign solutions, and a posteriori
diagnostics."""

from .discretization import (ElementQuadrature, FemFunction, Mesh,
                             QuadratureRule, build_mesh, default_rule,
                             element_gradient, element_gradients, integrate,
                             interpolate, interval_rule,
                             is_dirichlet_conforming, read_function_csv,
                             triangle_rule, write_function_csv)
from .eigen import (EigenPair, min_inward_slope, normalize_lr, positive_bump,
                    rayleigh_quotient, solve_first_eigenpair)
from .errors import (ConfigError, ConvergenceError, DoublePhaseError,
                     GateError, InputError, PositivityError, SeedError,
                     SuperlinearityError, VerificationError)
from .operator import (DualVector, Problem, apply_operator,
                       assemble_linear_stiffness, energy, gradient_check,
                       gradient_lp_norm, gradient_luxemburg_norm,
                       gradient_seminorm_q_mu, monotonicity_gap)
from .orlicz import (Exponents, HypothesisReport, SandwichReport,
                     check_hypotheses, check_sandwich, gauge_from_parts,
                     luxemburg_norm, modulus, seminorm_q_mu)
from .solver import (Nonlinearity, ReactionReport, SolveReport,
                     TruncationData, check_reaction_hypotheses,
                     find_upper_constant, minimize_functional, original_rhs,
                     positive_truncation, positive_truncation_primitive,
                     power_reaction, primitive_from_f, reaction_f1,
                     reaction_f2, reaction_f3, solve_negative, solve_positive,
                     truncated_functional)
from .verify import (GrowthConstants, GrowthReport, MoserReport,
                     ResidualReport, SupReport, check_growth_bound,
                     moser_identity_check, sup_norm_report, weak_residual)
from .cli import ExperimentConfig, parse_config, run

__version__ = "0.1.0"
