"""Always-on general game player.

Plays grid games described in the GDF text format with a rolling-horizon
evolutionary planner, learns a per-game policy/value model from its own
episodes, tunes its parameter registry with an n-tuple bandit, persists
complete snapshots, and takes live human steering over an HTTP protocol.
"""

from .game import (
    Action,
    GameState,
    GridObservation,
    ScoreBounds,
    advance,
    builtin_games,
    copy_state,
    heuristic_value,
    load_level,
    observe,
)
from .gdf import GameSpec, GdfError, Kind, parse_gdf, serialize_gdf
from .learner import (
    FeatureExtractor,
    GuidanceModel,
    ModelWeights,
    ReplayBuffer,
    init_model,
    load_model,
    predict,
    save_model,
    softmax,
    train_step,
)
from .ntbea import TuningConfig, TuningProblem, run_ntbea
from .params import (
    AgentFingerprint,
    ParameterSet,
    ParameterSpace,
    default_params,
    default_space,
    space_cardinality,
)
from .planner import Individual, RheaPlanner, blend_values, mutation_distribution, play_episode
from .runtime import Runtime, RuntimeConfig, Suggestion, moderation_filter

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentFingerprint",
    "FeatureExtractor",
    "GameSpec",
    "GameState",
    "GdfError",
    "GridObservation",
    "GuidanceModel",
    "Individual",
    "Kind",
    "ModelWeights",
    "ParameterSet",
    "ParameterSpace",
    "ReplayBuffer",
    "RheaPlanner",
    "Runtime",
    "RuntimeConfig",
    "ScoreBounds",
    "Suggestion",
    "TuningConfig",
    "TuningProblem",
    "advance",
    "blend_values",
    "builtin_games",
    "copy_state",
    "default_params",
    "default_space",
    "heuristic_value",
    "init_model",
    "load_level",
    "load_model",
    "moderation_filter",
    "mutation_distribution",
    "observe",
    "parse_gdf",
    "play_episode",
    "predict",
    "run_ntbea",
    "save_model",
    "serialize_gdf",
    "softmax",
    "space_cardinality",
    "train_step",
]
