"""Robust graph convolutional network with a spectral modulation filter,
fixed-point propagation, and an adversarial-attack evaluation harness."""

from .attacks import (AttackSpec, PerturbedGraph, PoolExhaustedError,
                      apply_attack, dice_attack, feature_flip_attack,
                      load_perturbed_adjacency, random_edge_attack)
from .autodiff import Node, Tape
from .data import (MetricsRecord, SplitSpec, load_dataset, make_split,
                   read_edge_list, read_metrics_csv, read_split,
                   write_dataset, write_edge_list, write_metrics_csv,
                   write_split)
from .filters import (FilterSingularityError, PropagationOperator,
                      apply_propagation, direct_filter_solve,
                      filter_response_table, fixed_point_iterate,
                      spectral_radius_estimate, transfer_function)
from .graph import (Graph, SparseMatrix, SpectralDecomposition, build_graph,
                    largest_connected_component, normalized_adjacency,
                    normalized_laplacian, self_loop_normalized_adjacency,
                    spectral_decomposition)
from .harness import (TrainConfig, aggregate, community_graph, evaluate,
                      robustness_curve, run_clean, scaling_probe, sweep_s,
                      synthetic_graph, train)
from .model import (ModelConfig, ModelParams, ForwardContext, fixgcn_layer,
                    forward, forward_on_tape, gcn_baseline_forward, gcn_layer,
                    init_params, load_params, predict, save_params)
from .optim import AdamState, adam_step, glorot_init

__version__ = "0.1.0"
