"""apseq: bounded and almost periodic solutions of nonautonomous linear
difference equations on the integers, with certified truncation control."""

from .ap_analysis import (APReport, BesicovitchReport, besicovitch_distance,
                          bohr_check, bohr_fourier_coefficient, fit_trig_poly,
                          omega_c_check, weyl_distance)
from .discretization import (GridLaplacian, HeatProblem, WaveProblem,
                             difference_family, heat_problem, laplacian_1d,
                             laplacian_2d, resolvent_apply,
                             resolvent_block_selection, resolvent_matrix,
                             resolvent_norm_bound, wave_problem)
from .errors import (ApseqError, CertificateError,
                     ConvergencePreconditionError, InputContractError,
                     NumericError, RangeError, ShapeError)
from .first_order import (SolveReport, forward_oracle, homogeneous_decay,
                          residual, solve_series, weighted_growth_check)
from .higher_order import (CompanionSystem, build_companion, build_B_from_D,
                           companion_D_block, companion_D_dense,
                           companion_forward_oracle, solve_second_order)
from .operator_model import (OperatorSequence, RacCertificate, induced_bound,
                             op_apply, op_product_apply, rac_certify)
from .resolvent import (ResolventSelection, compose_selection,
                        forward_form_residual, inclusion_residual,
                        selection_consistency, solve_degenerate_vb,
                        solve_degenerate_vb1, solve_inclusion)
from .seq_core import (BiSequence, Seminorm, SeminormFamily, TrigPoly, Window,
                       product_seminorm, read_csv, seq_axpy, seq_eval,
                       seq_reverse, seq_shift, write_csv)

__version__ = "0.1.0"
