"""Random walks conditioned to stay nonnegative or to die at zero.

Exact renewal tables, finite-horizon laws, Doob-transform samplers, the
split at the overall minimum, and scaling experiments.
"""
from ._io import VERSION as __version__
from .decomposition import (MinimumSplit, decomposition_paths, minimum_law, pre_minimum_smallness_check,
                            sample_plus_by_decomposition, split_at_minimum)
from .errors import *  # noqa: F401,F403
from .estimators import ConditionedWalk, ConvergenceExperiment, NormingEstimator, RenewalFunction
from .kernel import (FiniteLaw, die_at_zero_law, harmonicity_check, killed_law, meander_law,
                     meander_plus_duality_check, plus_law)
from .laws import PathSample, StepLaw, load_law, make_step_law, named_law
from .renewal import RenewalTable, alili_doney_check, ladder_height_law, renewal_table, strict_renewal
from .rng import Stream
from .samplers import (HKernel, build_h_kernel, sample_die_at_zero, sample_plus, sample_plus_by_rejection)
from .scaling import (ExperimentReport, NormingSequence, constant_product_check, convergence_experiment,
                      limit_oracles, norming_sequence, rescale_path, rescaled_renewal, sup_convergence_check)
from .stats import Ecdf, chi2_lattice, ks_one_sample, ks_two_sample, total_variation
