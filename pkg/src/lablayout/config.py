"""Pipeline configuration loaded from a TOML file.

Grammar (every key optional; unknown sections or keys are rejected):

    seed = 0

    [weights]       w_geo, w_chem                      (normalized on load)
    [safety]        d_min_flam, d_min_incomp, d_low_factor, d_safe, storage_categories
    [navigation]    resolution, agent_radius, offset_radius, inflation ("rounded" | "box")
    [optimizer]     margin, repair_rounds, plateau, room_iterations, desktop_iterations
    [refine]        max_iterations, epsilon, stall_limit, clearance_margin, facing_threshold
    [proposer]      kind ("heuristic" | "remote"), endpoint_url, timeout_s, max_retries,
                    auth_env_var, backoff_s, model
    [semantic]      kind ("stub" | "remote"), mode, scores, endpoint_url, timeout_s, auth_env_var, model

Credentials never live in the file: only the *name* of the environment variable holding
the token is configurable.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assets import AssetBase
from .errors import Issue, ValidationError
from .evaluator import SEMANTIC_MODES, RemoteScorer, SemanticScorer, StubScorer
from .navigation import NavConfig
from .optimizer import OptimizerConfig, Proposer, RewardWeights
from .proposers import EndpointConfig, HeuristicProposer, RemoteProposer
from .refine import RefineConfig
from .safety import SafetyConfig


@dataclass(frozen=True)
class ProposerSettings:
    kind: str = "heuristic"
    endpoint: EndpointConfig = EndpointConfig()


@dataclass(frozen=True)
class SemanticSettings:
    kind: str = "stub"
    mode: str = "medium"
    scores: tuple[float, float, float] = (8.0, 9.0, 9.0)
    endpoint_url: str = ""
    timeout_s: float = 60.0
    auth_env_var: str = "LABLAYOUT_SCORER_TOKEN"
    model: str = ""


@dataclass(frozen=True)
class RefineSettings:
    max_iterations: int = 10
    epsilon: float = 0.5
    stall_limit: int = 3
    clearance_margin: float = 0.1
    facing_threshold: float = 30.0


@dataclass(frozen=True)
class OptimizerSettings:
    margin: float = 0.02
    repair_rounds: int = 50
    plateau: int = 3
    room_iterations: int = 20
    desktop_iterations: int = 20


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    weights: RewardWeights = RewardWeights()
    safety: SafetyConfig = SafetyConfig()
    nav: NavConfig = NavConfig()
    optimizer: OptimizerSettings = OptimizerSettings()
    refine: RefineSettings = RefineSettings()
    proposer: ProposerSettings = ProposerSettings()
    semantic: SemanticSettings = field(default_factory=SemanticSettings)

    def with_seed(self, seed: int | None) -> "PipelineConfig":
        return self if seed is None else replace(self, seed=int(seed))

    def optimizer_config(self) -> OptimizerConfig:
        o = self.optimizer
        return OptimizerConfig(
            weights=self.weights,
            margin=o.margin,
            repair_rounds=o.repair_rounds,
            plateau=o.plateau,
            room_iterations=o.room_iterations,
            desktop_iterations=o.desktop_iterations,
            seed=self.seed,
        )

    def refine_config(self) -> RefineConfig:
        r = self.refine
        return RefineConfig(
            nav=self.nav,
            max_iterations=r.max_iterations,
            epsilon=r.epsilon,
            stall_limit=r.stall_limit,
            clearance_margin=r.clearance_margin,
            facing_threshold=r.facing_threshold,
            repair_rounds=self.optimizer.repair_rounds,
            repair_margin=self.optimizer.margin,
        )

    def heuristic_proposer(self, base: AssetBase) -> HeuristicProposer:
        return HeuristicProposer(
            base,
            safety=self.safety,
            weights=self.weights,
            margin=self.optimizer.margin,
            agent_radius=self.nav.agent_radius,
            offset_radius=self.nav.offset_radius,
        )

    def build_proposer(self, base: AssetBase) -> Proposer:
        if self.proposer.kind == "remote":
            return RemoteProposer(self.proposer.endpoint, base)
        return self.heuristic_proposer(base)

    def build_scorer(self) -> SemanticScorer:
        s = self.semantic
        if s.kind == "remote":
            return RemoteScorer(s.endpoint_url, s.timeout_s, s.auth_env_var, s.model)
        return StubScorer(s.scores)


def _issue(path: str, message: str) -> Issue:
    return Issue(path, "config", message)


_SECTIONS = ("weights", "safety", "navigation", "optimizer", "refine", "proposer", "semantic")


def _check_keys(section: str, data: Mapping, allowed, issues: list[Issue]) -> dict:
    if not isinstance(data, Mapping):
        issues.append(_issue(section, "must be a table"))
        return {}
    for key in data:
        if key not in allowed:
            issues.append(_issue(f"{section}.{key}", "unknown key"))
    return {k: v for k, v in data.items() if k in allowed}


def _names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))


def _positive(section: str, values: Mapping, issues: list[Issue], allow_zero=()) -> None:
    for key, v in values.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            continue
        if v < 0 or (v == 0 and key not in allow_zero):
            issues.append(_issue(f"{section}.{key}", "must be positive"))


def config_from_dict(data: Mapping) -> PipelineConfig:
    issues: list[Issue] = []
    for key in data:
        if key != "seed" and key not in _SECTIONS:
            issues.append(_issue(key, "unknown section"))
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        issues.append(_issue("seed", "must be an integer"))
        seed = 0

    sec = {name: data.get(name, {}) for name in _SECTIONS}
    w = _check_keys("weights", sec["weights"], ("w_geo", "w_chem"), issues)
    safety_keys = ("d_min_flam", "d_min_incomp", "d_low_factor", "d_safe", "storage_categories")
    s = _check_keys("safety", sec["safety"], safety_keys, issues)
    n = _check_keys("navigation", sec["navigation"], _names(NavConfig), issues)
    o = _check_keys("optimizer", sec["optimizer"], _names(OptimizerSettings), issues)
    r = _check_keys("refine", sec["refine"], _names(RefineSettings), issues)
    p = _check_keys("proposer", sec["proposer"], ("kind",) + _names(EndpointConfig), issues)
    m = _check_keys("semantic", sec["semantic"], _names(SemanticSettings), issues)

    _positive("weights", w, issues, allow_zero=("w_geo", "w_chem"))
    _positive("safety", s, issues, allow_zero=("d_low_factor",))
    _positive("navigation", n, issues, allow_zero=("agent_radius", "offset_radius"))
    _positive("optimizer", o, issues, allow_zero=("margin",))
    _positive("refine", r, issues, allow_zero=("epsilon", "clearance_margin"))
    _positive("proposer", p, issues, allow_zero=("max_retries", "backoff_s"))
    _positive("semantic", m, issues)
    if p.get("kind", "heuristic") not in ("heuristic", "remote"):
        issues.append(_issue("proposer.kind", "must be 'heuristic' or 'remote'"))
    if p.get("kind") == "remote" and not p.get("endpoint_url"):
        issues.append(_issue("proposer.endpoint_url", "required for the remote proposer"))
    if m.get("kind", "stub") not in ("stub", "remote"):
        issues.append(_issue("semantic.kind", "must be 'stub' or 'remote'"))
    if m.get("kind") == "remote" and not m.get("endpoint_url"):
        issues.append(_issue("semantic.endpoint_url", "required for the remote scorer"))
    if m.get("mode", "medium") not in SEMANTIC_MODES:
        issues.append(_issue("semantic.mode", f"must be one of {SEMANTIC_MODES}"))
    if "scores" in m and (not isinstance(m["scores"], list) or len(m["scores"]) != 3):
        issues.append(_issue("semantic.scores", "must list three numbers"))
    if issues:
        raise ValidationError("invalid configuration", issues)

    try:
        endpoint = EndpointConfig(**{k: v for k, v in p.items() if k != "kind"})
        if "scores" in m:
            m = {**m, "scores": tuple(float(x) for x in m["scores"])}
        return PipelineConfig(
            seed=seed,
            weights=RewardWeights(**w),
            safety=SafetyConfig.from_dict(s),
            nav=NavConfig(**n),
            optimizer=OptimizerSettings(**o),
            refine=RefineSettings(**r),
            proposer=ProposerSettings(p.get("kind", "heuristic"), endpoint),
            semantic=SemanticSettings(**m),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid configuration: {exc}", [_issue("config", str(exc))]) from None


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Read a TOML config; ``None`` returns the defaults."""
    if path is None:
        return PipelineConfig()
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", [_issue("config", str(exc))]) from None
    return config_from_dict(data)
