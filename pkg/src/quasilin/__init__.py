"""Variational solver for quasilinear elliptic problems with bounded densities.

Discretizes -div[gamma((u^2+|grad u|^2)/2) grad u] + gamma(...) u = f(u) + h
on intervals and rectangles with zero boundary trace, minimizes or saddle-
searches the associated energy, and audits the structural hypotheses the
existence / nonexistence phenomenology rests on.
"""

from .common import AccuracyError, HypothesisReport, SampleSpec
from .gamma import GammaModel, beta, check_bounds_and_limit, check_convexity, \
    eval_Gamma, eval_K, eval_gamma, monotonicity_function
from .grid import DomainSpec, EigenPair, Field, Grid, build_grid, field_to_csv, \
    first_eigenpair, lambda1_closed_form, negative_part, norms, operators, \
    pencil_eigenvalues, positive_part
from .functional import EnergyConfig, EnergyReport, energy, energy_value, \
    gradient, phi, phi_prime, residual_norm
from .oracle import BruteForceResult, NoSolution, OracleReport, brute_force_min, \
    fd_directional, fd_gradient, semilinear_solve
from .reactions import Reaction, ReactionSplit, audit_linear_growth, \
    audit_sublinear, eval_F, eval_f, g2_witness, nonexistence_threshold, \
    sampled_metadata, split, with_nu
from .solver import EndpointResult, HSmallnessResult, LocalGeometry, \
    MountainPassResult, MuContinuationEntry, Nu1Estimate, PipelineError, \
    ScanReport, SolveResult, SolverConfig, TwoSolutionResult, \
    certify_local_geometry, find_endpoint, global_minimize, h_smallness_search, \
    minimize, mountain_pass, mu_continuation, nonexistence_scan, nu1_search, \
    plateau_field, refine_saddle, sphere_scan, two_solution_search

__version__ = "0.1.0"
