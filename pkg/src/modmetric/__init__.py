"""Discrete p-modulus, essential metrics and pull-back distances on metric measure graphs."""

from .analysis import (DiscreteFunction, ThicknessProfile, quasiconvexity_constant,
                       sobolev_to_lipschitz_check, thickness_profile, upper_gradient_violations)
from .essential import (EssentialLengthResult, MetricMatrix, NoConnectionError, Params,
                        essential_length, essential_metric, essential_metric_infty,
                        essential_predistance, essential_row, metrize)
from .graph import (EdgeLengthMap, GraphError, MetricMeasureGraph, Path, UnsupportedError,
                    ball, closed_ball, collapsed_disc, cusp_domain, graph_distance, grid_square,
                    refine)
from .modulus import (FamilySpec, ModulusNotConverged, ModulusResult, modulus_positive,
                      p_modulus)
from .oracle import separation_oracle
from .pullback import (QuotientSpace, factorization_check, path_pullback_metric,
                       pullback_essential_metric, quotient_space)

__version__ = "0.1.0"
