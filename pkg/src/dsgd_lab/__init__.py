"""Gradient estimation for stochastic objectives with branching.

The pieces: a small expression calculus with if-statements (`expr`), a
sigmoid smoothing of branch selection (`smoothing`), tape-based batched
differentiation of both the hard and smoothed semantics (`autodiff`),
gradient estimators with variance diagnostics (`estimators`), an
optimisation loop that anneals the smoothing accuracy alongside the step
size (`optimize`), and built-in benchmark models with closed-form oracles
(`models`).
"""

from .expr import (ArityMismatch, Const, DomainError, DslSyntaxError, Expr,
                   If, Prim, PrimDef, PrimitiveRegistry, SafeReport,
                   UnknownPrimitive, Var, affine_name, check_safe, count_ifs,
                   default_registry, eval_expr, free_vars, nesting_depth,
                   node_count, parse, print_expr, register_affine_sum,
                   registry_selftest)
from .smoothing import (SmoothProgram, eval_program, eval_smoothed,
                        print_program, sigma, sigma_prime, smooth_transform)
from .stochastics import (Exponential, Fixed, HalfNormal, LocationScale,
                          Logistic, ParamBox, RngStream, StdNormal, Transform,
                          TransformViolation, logpdf, sample, sample_block,
                          uniform_block, validate_transform)
from .autodiff import (Gradient, NonFiniteGradient, expr_grad_block,
                       expr_value_block, finite_diff, grad_reparam_biased,
                       grad_smoothed, value_and_grad_block, value_block)
from .estimators import (BoundaryOracle, GradStats, NotEligible, Reparam,
                         Score, Smoothed, boundary_term, elbo_estimate,
                         elbo_stats, estimate, format_estimator,
                         gradient_block, parse_estimator, resolve_workers,
                         sample_gradient)
from .optimize import (AdamState, Checkpoint, CompatibilityReport,
                       InvalidExponent, ScheduleSpec, Trajectory, adam_update,
                       check_compatibility, dsgd_step, eta_at,
                       eta_from_anchor, gamma_at, make_schedule, project, run,
                       theorem_schedule, trajectory_to_csv)
from .models import (MODELS, ModelSpec, example11_expr, get_model,
                     list_models, make_model, nested_guard_expr,
                     oracle_smoothed_gradient_example11,
                     oracle_stationary_example11,
                     oracle_true_gradient_example11, step_expr)

__version__ = "0.1.0"
