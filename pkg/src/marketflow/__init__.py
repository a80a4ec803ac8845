"""Directed information flow among financial time series.

Conditional Granger causality / Gaussian transfer entropy from nested lagged
regressions, pruned into a directed graph and causal tree, alongside the
correlation-distance minimum spanning tree and its subdominant ultrametric.
"""

from .causal_graph import (Arc, CausalTree, DirectedGraph, export_dot, export_json,
                           extract_causal_tree, parse_json, threshold_adjacency)
from .estimators import (CorrelationMST, DiscreteTransferEntropy, GrangerCausalityNetwork,
                         LogReturns, ReturnPreprocessor)
from .infotheory import (JointDistribution, SymbolSeries, conditional_entropy,
                         discrete_transfer_entropy, discretize, entropy,
                         gaussian_conditional_entropy, joint_entropy)
from .ingest import PricePanel, ReturnPanel, compute_returns, load_price_csv, preprocess
from .synthetic import (VarSpec, generate_copy_chain, generate_var,
                        price_panel_from_returns)
from .ultrametric import (check_metric_properties, correlation_matrix, kruskal_mst,
                          subdominant_distance, to_distance)
from .var_granger import (CausalityMatrix, GcResult, build_lag_design, causality_matrix,
                          conditional_gc, gc_significance, ols_fit, select_lag_bic)

__version__ = "0.1.0"
