"""Entropy-bumped two-weight bounds for bilinear fractional operators, checked numerically on dyadic meshes."""

from .errors import (ConfigError, ConstructionError, DegenerateWeightError, EntroweightError,
                     ExponentError, GeometryError, IntegrabilityError)
from .geometry import (DyadicCube, GridShift, RationalBox, Window, all_shifts, children, cover_cube,
                       cube_box, enumerate_cubes, parent)
from .measure import (ExponentTuple, Mesh, OperatorField, StepFunction, average, integrate,
                      log_average, lorentz_norm, lp_norm, weak_norm)
from .operators import (frac_integral_dyadic, frac_integral_quadrature, frac_maximal_dyadic,
                        frac_maximal_oracle, hl_maximal, multi_integral_dyadic, multi_maximal_dyadic,
                        multi_maximal_oracle, sparse_apply, weighted_dyadic_maximal)
from .sparse import SparseFamily, build_sparse, domination_report, verify_sparse
from .entropy import (ConstantReport, EpsilonSpec, a_inf_exp, calA, epsilon_check, gamma_ijk,
                      global_constant, constant_chains, rho, rho_eps, sawyer_testing)
from .gallery import DensitySpec, GalleryConfig, GallerySpec, gallery_suite, make_density, make_weight
from .verification import (VerificationReport, carleson_check, equivalence_check, packing_check,
                           refinement_study, run_harness, run_suite, verify_integral_bound,
                           verify_maximal_bound, verify_testing_bound)

__version__ = "0.1.0"
