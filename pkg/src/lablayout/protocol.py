"""Structured experimental protocols: loading, grounding, validation and corpus statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assets import AssetBase, normalize_name
from .errors import Issue, NotFoundError, ValidationError, errors_only

CONSTRAINT_KINDS = ("flammable_heat_separation", "reagent_storage", "incompatible_separation", "glass_edge")
DISTANCE_KINDS = ("flammable_heat_separation", "incompatible_separation", "glass_edge")
PAIR_KINDS = ("flammable_heat_separation", "incompatible_separation")
DEFAULT_LOCATIONS = ("FumeHood", "ExperimentTable", "ValidationPlatform", "RotaryEvaporator Station")
PREPARATION = "preparation"


def location_key(token: str) -> str:
    """Location tokens compare case- and whitespace-insensitively ("Validation Platform" == "ValidationPlatform")."""
    return "".join(str(token).lower().split())


@dataclass(frozen=True)
class ProtocolStep:
    index: int
    description: str
    location: str
    assets_used: tuple[str, ...] = ()
    phase: str | None = None

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "description": self.description,
            "location": self.location,
            "assets_used": list(self.assets_used),
        }
        if self.phase is not None:
            out["phase"] = self.phase
        return out


@dataclass(frozen=True)
class MoveAction:
    from_step: int
    to_step: int

    def to_dict(self) -> dict:
        return {"from_step": self.from_step, "to_step": self.to_step}


@dataclass(frozen=True)
class ChemicalConstraintSpec:
    kind: str
    subjects: tuple[str, ...]
    min_distance: float | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "subjects": list(self.subjects)}
        if self.min_distance is not None:
            out["min_distance"] = self.min_distance
        return out


@dataclass(frozen=True)
class Protocol:
    protocol_id: str
    name: str
    reagents: tuple[str, ...]
    instruments: tuple[str, ...]
    steps: tuple[ProtocolStep, ...]
    moves: tuple[MoveAction, ...] = ()
    constraints: tuple[ChemicalConstraintSpec, ...] = ()
    description: str = ""
    extra: Mapping = field(default_factory=dict, compare=False)

    @property
    def required_assets(self) -> tuple[str, ...]:
        seen = dict.fromkeys(self.reagents + self.instruments)
        return tuple(seen)

    def step(self, index: int) -> ProtocolStep:
        for s in self.steps:
            if s.index == index:
                return s
        raise KeyError(index)

    def to_dict(self) -> dict:
        out = {
            "protocol_id": self.protocol_id,
            "name": self.name,
            "description": self.description,
            "reagents": list(self.reagents),
            "instruments": list(self.instruments),
            "steps": [s.to_dict() for s in self.steps],
            "moves": [m.to_dict() for m in self.moves],
            "constraints": [c.to_dict() for c in self.constraints],
        }
        out.update(self.extra)
        return out

    def summary(self) -> dict:
        return {
            "protocol_id": self.protocol_id,
            "name": self.name,
            "reagents": list(self.reagents),
            "instruments": list(self.instruments),
            "steps": [{"index": s.index, "location": s.location, "assets_used": list(s.assets_used)} for s in self.steps],
        }


_KNOWN_KEYS = {"protocol_id", "name", "description", "reagents", "instruments", "steps", "moves", "constraints"}


def structural_issues(data: Mapping) -> list[Issue]:
    """Schema checks that need no asset base; paths point into the JSON document."""
    issues = []
    for key in ("protocol_id", "reagents", "instruments", "steps"):
        if key not in data:
            issues.append(Issue(key, "required", f"missing field {key!r}"))
    for key in ("reagents", "instruments"):
        items = data.get(key) or []
        if key in data and not items:
            issues.append(Issue(key, "nonempty", f"{key} must be nonempty"))
        if len(set(items)) != len(items):
            issues.append(Issue(key, "distinct", f"{key} contains duplicates"))
    steps = data.get("steps")
    if "steps" in data and not steps:
        issues.append(Issue("steps", "nonempty", "protocol has no steps"))
    indices = []
    for i, step in enumerate(steps or []):
        for key in ("index", "description", "location"):
            value = step.get(key)
            if value is None or (isinstance(value, str) and not value.strip()):
                issues.append(Issue(f"steps[{i}].{key}", "required", f"step {i} missing {key}"))
        indices.append(step.get("index"))
    if len(set(indices)) != len(indices):
        issues.append(Issue("steps", "distinct_index", "step indices repeat"))
    valid = set(indices)
    for i, mv in enumerate(data.get("moves") or []):
        a, b = mv.get("from_step"), mv.get("to_step")
        if a not in valid or b not in valid:
            issues.append(Issue(f"moves[{i}]", "dangling_step", f"move {a}->{b} references a missing step"))
        elif not a < b:
            issues.append(Issue(f"moves[{i}]", "forward", f"move {a}->{b} does not go forward"))
    for i, c in enumerate(data.get("constraints") or []):
        kind = c.get("kind")
        if kind not in CONSTRAINT_KINDS:
            issues.append(Issue(f"constraints[{i}].kind", "enum", f"unknown constraint kind {kind!r}"))
            continue
        subjects = c.get("subjects") or []
        want = 2 if kind in PAIR_KINDS else 1
        if len(subjects) != want:
            issues.append(Issue(f"constraints[{i}].subjects", "arity", f"{kind} takes {want} subject(s)"))
        md = c.get("min_distance")
        if md is not None and not md > 0:
            issues.append(Issue(f"constraints[{i}].min_distance", "positive", "min_distance must be > 0"))
    return issues


def protocol_from_dict(data: Mapping) -> Protocol:
    problems = structural_issues(data)
    if problems:
        raise ValidationError(f"invalid protocol {data.get('protocol_id', '?')}", problems)
    steps = tuple(
        ProtocolStep(
            int(s["index"]),
            str(s["description"]),
            str(s["location"]),
            tuple(str(a) for a in s.get("assets_used", ())),
            s.get("phase"),
        )
        for s in data["steps"]
    )
    return Protocol(
        protocol_id=str(data["protocol_id"]),
        name=str(data.get("name", data["protocol_id"])),
        reagents=tuple(str(r) for r in data["reagents"]),
        instruments=tuple(str(r) for r in data["instruments"]),
        steps=steps,
        moves=tuple(MoveAction(int(m["from_step"]), int(m["to_step"])) for m in data.get("moves", ())),
        constraints=tuple(
            ChemicalConstraintSpec(
                str(c["kind"]),
                tuple(str(s) for s in c["subjects"]),
                None if c.get("min_distance") is None else float(c["min_distance"]),
            )
            for c in data.get("constraints", ())
        ),
        description=str(data.get("description", "")),
        extra={k: v for k, v in data.items() if k not in _KNOWN_KEYS},
    )


def load_protocol(path: str | Path) -> Protocol:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error: {exc}") from exc
    return protocol_from_dict(data)


def save_protocol(protocol: Protocol, path: str | Path) -> None:
    Path(path).write_text(json.dumps(protocol.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_corpus(directory: str | Path) -> list[Protocol]:
    return [load_protocol(p) for p in sorted(Path(directory).glob("*.json"))]


def ground_protocol(protocol: Protocol, base: AssetBase) -> Protocol:
    """Replace every asset mention with its canonical asset_id. Raises NotFoundError."""

    def g(name: str) -> str:
        return base.resolve(name).asset_id

    return replace(
        protocol,
        reagents=tuple(g(r) for r in protocol.reagents),
        instruments=tuple(g(r) for r in protocol.instruments),
        steps=tuple(replace(s, assets_used=tuple(g(a) for a in s.assets_used)) for s in protocol.steps),
        constraints=tuple(replace(c, subjects=tuple(g(a) for a in c.subjects)) for c in protocol.constraints),
    )


def location_legal(token: str, base: AssetBase, allowed: Iterable[str] = DEFAULT_LOCATIONS) -> bool:
    if location_key(token) in {location_key(t) for t in allowed}:
        return True
    rec = base.try_resolve(token)
    return rec is not None and (rec.provides_surface or rec.asset_type == "room_asset")


def validate_protocol(
    protocol: Protocol, base: AssetBase, allowed_locations: Iterable[str] = DEFAULT_LOCATIONS
) -> list[Issue]:
    """Resolvability, step completeness, location legality, constraint subjects, preparation-first."""
    allowed = tuple(allowed_locations)
    issues = []

    def check_asset(path, name):
        if base.try_resolve(name) is None:
            issues.append(Issue(path, "resolvable", f"{name!r} is not in the asset knowledge base"))

    for key in ("reagents", "instruments"):
        for i, name in enumerate(getattr(protocol, key)):
            check_asset(f"{key}[{i}]", name)
    for i, step in enumerate(protocol.steps):
        if not step.description.strip():
            issues.append(Issue(f"steps[{i}].description", "required", "empty step description"))
        if not step.location.strip():
            issues.append(Issue(f"steps[{i}].location", "required", "empty step location"))
        elif not location_legal(step.location, base, allowed):
            issues.append(Issue(f"steps[{i}].location", "location_legal", f"{step.location!r} is not a legal location"))
        for j, name in enumerate(step.assets_used):
            check_asset(f"steps[{i}].assets_used[{j}]", name)
    for i, c in enumerate(protocol.constraints):
        for j, name in enumerate(c.subjects):
            check_asset(f"constraints[{i}].subjects[{j}]", name)
        if c.kind in DISTANCE_KINDS and c.min_distance is not None and not c.min_distance > 0:
            issues.append(Issue(f"constraints[{i}].min_distance", "positive", "min_distance must be > 0"))
    if any(s.phase == PREPARATION for s in protocol.steps) and protocol.steps[0].phase != PREPARATION:
        issues.append(Issue("steps[0].phase", "preparation_first", "reagent preparation must be the first step"))
    return issues


def require_valid(protocol: Protocol, base: AssetBase, allowed_locations: Iterable[str] = DEFAULT_LOCATIONS) -> Protocol:
    problems = errors_only(validate_protocol(protocol, base, allowed_locations))
    if problems:
        raise ValidationError(f"protocol {protocol.protocol_id} failed validation", problems)
    try:
        return ground_protocol(protocol, base)
    except NotFoundError as exc:  # pragma: no cover - validate_protocol already checked
        raise ValidationError(str(exc)) from exc


STAT_ROWS = (("Reagents", "reagents"), ("Instruments", "instruments"), ("Steps", "steps"), ("Moves", "moves"))


@dataclass(frozen=True)
class CountStats:
    mean: float
    min: int
    max: int
    std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "min": self.min, "max": self.max, "std": self.std}


def protocol_stats(corpus: Sequence[Protocol], ddof: int = 0) -> dict[str, CountStats]:
    """Per-protocol count distribution. Population std by default; pass ddof=1 for sample std."""
    if not corpus:
        raise ValueError("protocol_stats needs a nonempty corpus")
    out = {}
    for label, attr in STAT_ROWS:
        counts = np.array([len(getattr(p, attr)) for p in corpus], dtype=float)
        std = float(counts.std(ddof=ddof)) if len(counts) > ddof and len(counts) >= 2 else 0.0
        out[label] = CountStats(float(counts.mean()), int(counts.min()), int(counts.max()), std)
    return out


def format_stats_table(stats: Mapping[str, CountStats]) -> str:
    lines = [f"{'Count type':<12} {'Mean':>6} {'Min':>4} {'Max':>4} {'Std':>6}"]
    for label, s in stats.items():
        lines.append(f"{label:<12} {s.mean:>6.2f} {s.min:>4d} {s.max:>4d} {s.std:>6.2f}")
    return "\n".join(lines)


def stats_to_json(stats: Mapping[str, CountStats], n_protocols: int) -> str:
    return json.dumps({"protocols": n_protocols, "rows": {k: v.to_dict() for k, v in stats.items()}}, indent=2)


def step_location_index(protocol: Protocol) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for s in protocol.steps:
        out.setdefault(normalize_name(s.location), []).append(s.index)
    return out
