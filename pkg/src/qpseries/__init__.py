"""Convergent Rayleigh-Schrodinger series for quasiperiodic lattice operators.

Subpackages map to the pipeline stages: `model` (potentials, frequencies,
hopping), `series` (projection recursion), `paths` (graph paths and weights),
`cancel` (denominator leveling and grouped contributions), `spectra`
(truncated-matrix oracle and localization checks), `flatseg` (flat-segment
elimination transform), `cli` (command-line front end).
"""

from .errors import (BadPosition, ComputeError, ConfigError, DegeneratePair,
                     InterpolationSingular, LevelShift, MalformedString,
                     NoConvergence, NotCanonical, NotOneToOne,
                     PreconditionViolated, QpSeriesError, RangeViolation,
                     ResonantSite, SingularArgument, SingularSite)
from .model import (FrequencyVector, HoppingKernel, OperatorInstance,
                    PotentialSpec, RegularityReport, golden_frequency,
                    hopping_value, kernel_from_orders, laplacian_kernel,
                    potential_value, probe_regularity, v_of)
from .series import (LambdaCurve, SeriesResult, compute_series_longrange,
                     compute_series_recursive, evaluate_partial_sum,
                     lambda_of_x, order_residuals, radius_estimate)
from .paths import (PathString, PathWeightContext, Segment, attach,
                    compute_series_path_sum, cont, enumerate_paths,
                    make_path, parse_path, print_path)
from .cancel import (DenominatorData, LoopStack, StackStats,
                     canonical_marking, canonical_translation,
                     check_stack_bound, compose_stacks,
                     compute_series_class_sum, cont_class, cont_class_stacked,
                     decompose_stacks, equivalence_class, level_of,
                     sample_loop_stacks, stack_stats, translate_marked,
                     verify_consistency)
from .spectra import (EigenSystem, TruncatedOperator, build_truncated,
                      completeness_check, diagonalize, halving_report,
                      ids_counting_check, localization_profile,
                      match_series_to_spectrum, window_projection_check)
from .flatseg import (EliminationPair, StagedOperator, build_U2,
                      covariant_conjugate, eliminate_entry, f1_function,
                      flat_window_sites, sing4_accounting, staged_from_instance,
                      step1, step2)

__version__ = "0.1.0"
