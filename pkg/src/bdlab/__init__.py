"""Numerical laboratory for linear-growth variational problems over
symmetrized gradients: dyad algebra, derivative measures with explicit
singular parts, recession functions, quasiconvexity testing, functional
evaluation and minimization, 2D differential-inclusion rigidity, and
desk-scale generalized Young measures."""

from .errors import (GrowthViolationError, InputError, NotSolvableError,
                     ParseError, RecessionError, ResolutionError)
from .symtensor import (DyadClass, SymMatrix, as_matrix, classify_dyad,
                        frobenius_inner, reconstruct, sym_dyad)
from .fields import (DisplacementField, Grid, JumpInterface, PointAtom,
                     SurfaceAtom, SymMeasure, assemble_symmetrized_measure,
                     ball_mass, blow_up, directional_slice_check, doubling_scan,
                     field_from_function, fit_rigid, staircase_field, sym_gradient)
from .integrands import (CellProblemResult, Integrand, RecessionEstimate,
                         builtin_integrand, cell_problem_min, dyad_segment_scan,
                         make_area, make_linear, make_neg_norm, make_norm,
                         make_quadratic, make_segment_violator, parse_integrand,
                         recession, transform_S)
from .functional import (FunctionalBreakdown, SequenceSpec, area_functional,
                         concentration_sequence, evaluate_functional,
                         laminate_sequence, lsc_experiment, minimize_functional,
                         strict_continuity_experiment)
from .rigidity2d import (EllipticSolution, InclusionCase, Profile1D,
                         classify_inclusion, solve_degenerate, solve_elliptic,
                         solve_opposite_sign)
from .youngmeasures import (ConcAtom, PairingReport, YoungMeasure, barycenter,
                            elementary_ym, empirical_ym, jensen_check,
                            laminate_ym, pair_duality, staircase_average,
                            staircase_cell)

__version__ = "0.1.0"
