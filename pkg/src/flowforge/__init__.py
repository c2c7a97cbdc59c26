"""Well-conditioned affine coupling networks from damped phase-space
transport: exact polynomial/trigonometric arithmetic, flow-map tooling,
closed-form Gaussian evolution, chunk coefficient solving, coupling-block
construction, and Wasserstein diagnostics."""

from .coupling import (CouplingBlock, CouplingNetwork, discretize_chunk,
                       euler_step_to_blocks, network_conditioning,
                       network_pushforward)
from .errors import (ConfigError, DivergenceError, FitError, FlowForgeError,
                     InputError, PreconditionError, SingularBlockError,
                     SolvabilityError)
from .henon import (CoefficientSystem, HenonSystem, approximating_field,
                    block_form_matrix_d1, chunk_field, frequencies,
                    matching_integrals, solve_coefficients,
                    target_polynomials, unperturbed_solution,
                    verify_chunk_order)
from .langevin import (ConditioningReport, GaussianDensity, LangevinParams,
                       block_exp, conditioning_bounds,
                       convolution_hessian_check, gaussian_evolve,
                       jacobian_flow, langevin_field, lyapunov_gaussian,
                       sde_simulate, variance_proxy)
from .metrics import (SampleCloud, gaussian_kl, gaussian_w2, sliced_w1,
                      talagrand_check, w1_1d)
from .multipoly import (Polynomial, PolyFit, TimeVaryingPolynomial,
                        TrigFunction, basis_g, poly_eval, poly_fit_on_grid,
                        poly_partial, trig_inner_product, trig_product)
from .odeflow import (FlowProbe, OrderStudy, PairField, VectorField,
                      alternating_euler, alternating_euler_with_jacobian,
                      flow_distance, grid_points, gronwall_bound, integrate,
                      integrate_with_jacobian, perturbation_first_order,
                      perturbation_order_check, probe_field)
from .pipeline import (BuildConfig, BuildReport, affine_reference_maps,
                       build_network, choose_radius, choose_time,
                       chunk_hamiltonian, evaluate_w1, pad_source,
                       source_kappa)

__version__ = "0.1.0"
