"""Decentralized graph path search: local-view walkers, attention embeddings,
and advantage actor-critic training over attributed graphs."""

__version__ = "0.1.0"

from .graphs import (AttributedGraph, EgoGraph, NodeSplit, bfs_distances, distance_matrix,
                     largest_connected_component, load_graph,
                     mean_shortest_path_and_density, save_graph, shortest_path_length,
                     split_nodes)
from .synth import SynthConfig, edge_probability, generate, generate_connected
from .env import EpisodeState, Observation, Status, Transition, observe, reset, run_episode, step
from .networks import (ActorCriticModel, AdamOptimizer, DenseLayer, EgoIndex, GatLayer, Mlp,
                       embed_centers, embed_centers_inference, gat_embed_ego,
                       load_checkpoint, save_checkpoint)
from .policies import (ActionDistribution, ConnectionWalker, DistanceWalker, GreedyWalker,
                       LearnedWalker, RandomWalker, connection_walker, distance_walker,
                       greedy_walker, learned_policy, random_walker, value_estimate)
from .training import (EpisodeBuffer, TrainConfig, TrainResult, advantage, losses, rollout,
                       rollout_episode, train, tune_temperature, validate_policy)
from .evaluation import (EvaluationResult, MetricsReport, PairSet, build_pair_set, evaluate,
                         export_value_heatmap, load_pair_set, mean_oracle_ratio,
                         measure_action_time, run_pair_episodes, save_pair_set,
                         sensitivity_sweep, truncation_rate, win_rate)
from .snap import EgoNetFiles, IngestResult, ingest, select_experiment_graphs
