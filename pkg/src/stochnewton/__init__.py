"""Stochastic Newton and stochastic cubic Newton for finite-sum minimization."""
from .baselines import (ReferenceSolution, cubic_newton_step, cyclic_sampler, incremental_newton_step,
                        newton_step, solve_reference)
from .cubic import (CubicModel, l3_penalty_eval, l3_sums, prox_cubic, solve_multi_anchor,
                    solve_single_anchor)
from .errors import (NonConvergenceError, ParseError, SingularMatrixError, SolverError,
                     StochNewtonError, ValidationError)
from .glm_fast import glm_init, glm_step, inverse_residual, sherman_morrison
from .harness import RunConfig, TraceRecord, compare, run, tune_M, verify
from .libsvm import (SparseDataset, dump_libsvm, load_libsvm, parse_libsvm, partition, synth_binary_dataset, synth_dataset,
                     synth_logistic, synth_quadratic)
from .problems import (CallableProblem, FiniteSumProblem, GlmProblem, QuadraticProblem, eval_component,
                       eval_full)
from .scn import check_scn_theory, lyapunov_v, scn_init, scn_step
from .sn import (check_distance_bound, expected_next_w, lyapunov_w, sample_subset, sn_init, sn_step,
                 w_recursion_factor)

__version__ = "0.1.0"
