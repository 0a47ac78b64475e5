"""Protocol-aware laboratory layout generation, repair, navigation checking and scoring."""

from .assets import AssetBase, AssetRecord, BoundingBox, SafetyAttributes, load_asset_base, resolve_asset, validate_asset_record
from .commands import Move, Rotate, Swap, apply_command, apply_rotation, apply_translation, rotate_by
from .config import PipelineConfig, load_config
from .errors import (
    Issue,
    LabLayoutError,
    NotFoundError,
    PlacementInfeasible,
    ProposerUnavailable,
    ResponseRejected,
    ScorerUnavailable,
    UnrepairableError,
    ValidationError,
)
from .evaluator import EvaluationReport, compose_scores, evaluate, nav_benchmark
from .geometry import footprint, overlap
from .navigation import NavConfig, NavTarget, OccupancyGrid, astar, goal_pairs, rasterize, reachability
from .optimizer import OptimizerConfig, RewardWeights, count_violations, fast_repair, optimize
from .proposers import HeuristicProposer, RemoteProposer, generate_layout
from .protocol import Protocol, load_protocol, protocol_stats, validate_protocol
from .refine import RefineConfig, refine_loop
from .render import render_svg
from .safety import SafetyConfig, chem_report
from .scene import Layout, PlacedObject, Pose, Room, load_layout, save_layout

__version__ = "0.1.0"

__all__ = [
    "AssetBase", "AssetRecord", "BoundingBox", "SafetyAttributes", "load_asset_base", "resolve_asset",
    "validate_asset_record", "Move", "Rotate", "Swap", "apply_command", "apply_rotation", "apply_translation",
    "rotate_by", "PipelineConfig", "load_config", "Issue", "LabLayoutError", "NotFoundError", "PlacementInfeasible",
    "ProposerUnavailable", "ResponseRejected", "ScorerUnavailable", "UnrepairableError", "ValidationError",
    "EvaluationReport", "compose_scores", "evaluate", "nav_benchmark", "footprint", "overlap", "NavConfig",
    "NavTarget", "OccupancyGrid", "astar", "goal_pairs", "rasterize", "reachability", "OptimizerConfig",
    "RewardWeights", "count_violations", "fast_repair", "optimize", "HeuristicProposer", "RemoteProposer",
    "generate_layout", "Protocol", "load_protocol", "protocol_stats", "validate_protocol", "RefineConfig",
    "refine_loop", "render_svg", "SafetyConfig", "chem_report", "Layout", "PlacedObject", "Pose", "Room",
    "load_layout", "save_layout",
]
