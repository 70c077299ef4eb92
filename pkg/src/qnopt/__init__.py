"""Distributed learning over peer-to-peer networks with quantized
communications.

Agents cooperate to minimize a sum of local costs while exchanging only
quantized messages. The package provides a finite-time quantized
coordination scheme (consensus ADMM), gradient methods built on it
(including asynchronous/stochastic updates and zooming-in quantization),
mixing-matrix baselines, and an experiment harness with a CLI.
"""

from .exceptions import (ConfigurationError, ConvergenceError,
                         GraphGenerationError, NumericError, QnoptError)
from .ftqc import (FtqcConfig, FtqcResult, FtqcState, ftqc_run,
                   lemma1_error_bound, noise_bound, step_round,
                   write_round_log)
from .harness import (EXPERIMENTS, ExperimentSpec, SummaryTable,
                      run_batch_and_async_sweeps, run_experiment,
                      run_ftqc_table, run_method_comparison,
                      run_quantizer_table, run_rho_sweep,
                      run_zoom_comparison)
from .kernels import available_backends, backend_name, use_backend
from .network import Graph, generate_graph, metropolis_weights
from .problem import (Dataset, LogisticProblem, OracleSolution,
                      QuadraticProblem, curvature_constants,
                      estimate_gradient_deviation, generate_classification,
                      quadratic_fixture, solve_centralized)
from .quantize import Quantizer, max_error, quantize
from .solvers import (RunRecord, SolverConfig, run_algorithm2,
                      run_algorithm3, run_dgt, run_near_dgd,
                      theoretical_constants)

__version__ = "0.1.0"
