"""Authentication-log graph analytics toolkit.

Raw logs -> heterogeneous multigraph -> time-aware event subgraphs ->
multi-scale attention classifier for lateral movement detection.
"""

__version__ = "0.1.0"

from .logs import (LabelSet, LogRecord, load_labels, normalize_stream,
                   parse_record, read_records, serialize_record)
from .graph import (AuthEvent, AuthGraph, build_hamg, encode_edge_features,
                    encode_node_features, load_graph, save_graph)
from .sampling import (EventSubgraph, SamplerConfig, build_dataset,
                       build_event_neighborhood, generate_time_aware_subgraph,
                       subsample_events)
from .encoder import (EncoderConfig, FeatureSpace, compute_position_encoding,
                      cross_entropy_loss, encode_subgraph, init_params)
from .metrics import Metrics, aggregate_metrics, compute_auc
from .training import TrainConfig, evaluate, split_dataset, train
from .synth import ScenarioConfig, generate_benign_logs, generate_scenario, inject_lateral_movement
from .pipeline import BenchConfig, run_bench

__all__ = [
    "LabelSet", "LogRecord", "load_labels", "normalize_stream", "parse_record",
    "read_records", "serialize_record",
    "AuthEvent", "AuthGraph", "build_hamg", "encode_edge_features",
    "encode_node_features", "load_graph", "save_graph",
    "EventSubgraph", "SamplerConfig", "build_dataset", "build_event_neighborhood",
    "generate_time_aware_subgraph", "subsample_events",
    "EncoderConfig", "FeatureSpace", "compute_position_encoding",
    "cross_entropy_loss", "encode_subgraph", "init_params",
    "Metrics", "aggregate_metrics", "compute_auc",
    "TrainConfig", "evaluate", "split_dataset", "train",
    "ScenarioConfig", "generate_benign_logs", "generate_scenario",
    "inject_lateral_movement",
    "BenchConfig", "run_bench",
]
