"""gsge: solver and numerical certifier for the sigma_k conformal geodesic
boundary problem u_tt sigma_k(W[u]) - sigma_k^{ij}(W[u]) u_ti u_tj = psi on a
flat periodic torus cross [0, 1]."""

from . import cli, conformal, fields, grid, linearize, solver, symfunc, verifier
from .conformal import (AdmissibilityVerdict, Jet, ProblemParams, assemble_E,
                        assemble_R, assemble_W, classify_admissible, F_k_of,
                        log_residual, preset_params, residual_pair,
                        validate_theorem_regime)
from .errors import (AdmissibilityError, ConfigError, DomainError, GsgeError,
                     InitializationError, InputError, ParameterError,
                     SnapshotError, SolveError)
from .grid import GridSpec, SpacetimeField, jet_at, jet_stack, sup_norms
from .linearize import (assemble_jacobian, ellipticity_form,
                        ellipticity_form_direct, g_coefficients)
from .solver import (DegenerateResult, SolverOptions, SolveTrace,
                     build_initializer, choose_initializer, degenerate_solve,
                     elliptic_slice_solve, homotopy_solve, newton_solve,
                     slice_initializer, slice_stack_solve)
from .symfunc import (gamma_margin, gamma_margin_matrix, in_gamma_k,
                      rank_one_identities, sigma_grad, sigma_hess,
                      sigma_of_matrix, sigma_of_spectrum)
from .verifier import (VerificationReport, check_concavity,
                       check_cone_propagation, check_maximum_principle,
                       comparison_uniqueness_test, monitor_estimates,
                       uniqueness_approximation, viscosity_spot_check)

__version__ = "0.1.0"
