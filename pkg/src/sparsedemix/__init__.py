"""Sparse blind deconvolution and demixing by mixed-norm minimization."""

from .certificate import (BudgetQuery, CertificateReport, SpectralOptions, build_certificate,
                          certificate_params, error_bound, error_constants, estimate_beta,
                          estimate_delta, guarantee_check, measurement_budget)
from .errors import (BudgetExceededError, ConvergenceError, InvalidInputError, NoGuaranteeError,
                     ShapeMismatchError, SparseDemixError)
from .instances import (InstanceSpec, PlantedInstance, build_instance, load_instance, make_spec,
                        relative_error, save_instance)
from .measurement import (Convention, FrameFamily, MeasurementEnsemble, adjoint, forward,
                          lift_deconvolution, make_deconvolution_instance, make_dft_frame,
                          make_frames, make_random_frame, materialize_dense, sample_ensemble)
from .oracle import (MomentReport, dense_beta, dense_delta, exhaustive_min_l12, mc_gauss_moments,
                     verify_optimality)
from .solvers import (METHODS, NoiseModel, SolveOptions, SolveReport, solve, solve_l1_eq,
                      solve_l1_noisy, solve_l12_eq, solve_l12_noisy, solve_nuclear_eq,
                      solve_nuclear_noisy)
from .tuples import (MatrixTuple, SupportPattern, block_soft_threshold, inner, norm_l12,
                     norm_linf2, normalize_columns, project_support, subdiff_check)

__version__ = "0.1.0"
