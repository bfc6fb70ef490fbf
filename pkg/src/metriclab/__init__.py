"""metriclab: exact finite metric geometry workbench.

Certified finite approximation of isometry families, Katetov one-point
extensions and lazily grown universal-space fragments, finite metric
Ramsey checks, and concentration-of-measure verification, all in exact
rational arithmetic.
"""

from .metric import (Embedding, EpsilonIsometryResult, IndexedFamily, MetricSpace,
                     MetricValidationError, PermutationIsometry, PseudoMetricSpace,
                     Violation, embeddability_test, enumerate_embeddings,
                     epsilon_isometry_check, frac, glue_indexed, isometry_group,
                     metric_violations, validate_metric)
from .katetov import (KatetovFunction, PartialIsometry, UrysohnFragment,
                      controlled_extension, extension_property_check, fragment_apply,
                      grow_fragment, is_admissible, kuratowski_function,
                      one_point_extend)
from .freegroup import Word, ball, ball_size, free_reduce, word_inv, word_mul, word_str
from .approx import (ApproximationResult, Budgets, CertificateError, OrbitMetric,
                     PermutationQuotient, approximate_isometries, build_quotient,
                     certify, kernel_check, orbit_metric, parameters,
                     quotient_metric, quotient_pair_distances)
from .ramsey import (Coloring, EmbeddingSpace, FlipColoring, RamseyVerdict,
                     check_R, embedding_ball, flip_coloring_witness,
                     rdm_finite_check, reverify_ramsey_witness)
from .concentration import (FiniteGroup, GroupAction, HammingSample, StepFunction,
                            binomial_tail, hamming_concentration,
                            hm_action_isometry_check, me_lambda,
                            uniformity_domination_check)

__version__ = "0.1.0"
