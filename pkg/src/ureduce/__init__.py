"""Higher-order accurate inference for reduced (incomplete) U-statistics."""

__version__ = "0.1.0"

from . import design, edgeworth, estimate, inference, kernels, network, validate  # noqa: F401,E402
from .design import Design, build_deterministic, build_random, complete_design, count_subsets  # noqa: E402
from .edgeworth import Expansion, evaluate, expansion_for_design  # noqa: E402
from .errors import StatisticalError, UReduceError  # noqa: E402
from .estimate import compute_UJ, estimate_moments, oracle_projections  # noqa: E402
from .inference import InferenceReport, cf_quantile, ci_nondegenerate, pvalue_nondegenerate  # noqa: E402
from .kernels import Kernel, builtin_kernel, eval_kernel  # noqa: E402
from .network import Graph, MotifSpec, block_graphon, builtin_motif, ci_network, generate_graphon  # noqa: E402
from .validate import MCConfig, cdf_study, coverage_experiment  # noqa: E402
