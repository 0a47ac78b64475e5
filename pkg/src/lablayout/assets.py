"""Annotated asset knowledge base: records, loading, validation and name resolution."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import Issue, NotFoundError, ValidationError, errors_only

logger = logging.getLogger(__name__)

ASSET_TYPES = ("instrument", "reagent", "room_asset")
SAFETY_FLAGS = (
    "flammable",
    "explosive",
    "volatile_or_toxic",
    "glass_container",
    "heat_source",
    "acid",
    "base",
    "oxidizer",
    "reactive_metal",
)
CANONICAL_FRONT = (0.0, 1.0, 0.0)
SURFACE_CATEGORIES = ("furniture", "safety_equipment")
SURFACE_MIN_HEIGHT = 0.5

_RECORD_KEYS = (
    "asset_id",
    "asset_type",
    "category",
    "subtype",
    "synonyms",
    "description",
    "bbox",
    "scale_factor",
    "front_direction",
    "coordinate_system",
    "usd_path",
    "safety",
    "provides_surface",
)


def normalize_name(name: str) -> str:
    """Lowercase, trim and collapse internal whitespace."""
    return " ".join(str(name).lower().split())


@dataclass(frozen=True)
class BoundingBox:
    short_side: float
    long_side: float
    height: float

    @property
    def footprint_area(self) -> float:
        return self.short_side * self.long_side

    def to_dict(self) -> dict:
        return {"short_side": self.short_side, "long_side": self.long_side, "height": self.height}

    @classmethod
    def from_value(cls, value) -> "BoundingBox":
        if isinstance(value, Mapping):
            return cls(float(value["short_side"]), float(value["long_side"]), float(value["height"]))
        short, long, height = value
        return cls(float(short), float(long), float(height))


@dataclass(frozen=True)
class SafetyAttributes:
    flammable: bool = False
    explosive: bool = False
    volatile_or_toxic: bool = False
    glass_container: bool = False
    heat_source: bool = False
    acid: bool = False
    base: bool = False
    oxidizer: bool = False
    reactive_metal: bool = False

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "SafetyAttributes":
        data = dict(data or {})
        unknown = set(data) - set(SAFETY_FLAGS)
        if unknown:
            raise ValueError(f"unknown safety flags: {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in SAFETY_FLAGS}

    def active(self) -> tuple[str, ...]:
        return tuple(k for k in SAFETY_FLAGS if getattr(self, k))


@dataclass(frozen=True)
class AssetRecord:
    asset_id: str
    asset_type: str
    bbox: BoundingBox
    category: str = ""
    subtype: str = ""
    synonyms: tuple[str, ...] = ()
    description: str = ""
    scale_factor: float = 1.0
    front_direction: tuple[float, float, float] = CANONICAL_FRONT
    coordinate_system: str = "z_up"
    usd_path: str = ""
    safety: SafetyAttributes = field(default_factory=SafetyAttributes)
    provides_surface: bool = False
    # unknown JSON keys, kept so save() round-trips them
    extra: Mapping = field(default_factory=dict, compare=False)

    @property
    def width(self) -> float:
        """Extent along the local x axis (the long side)."""
        return self.bbox.long_side

    @property
    def depth(self) -> float:
        """Extent along the local y axis (the short side)."""
        return self.bbox.short_side

    @property
    def footprint_area(self) -> float:
        return self.bbox.footprint_area

    @property
    def is_reagent(self) -> bool:
        return self.asset_type == "reagent"

    def to_dict(self) -> dict:
        out = {
            "asset_id": self.asset_id,
            "asset_type": self.asset_type,
            "category": self.category,
            "subtype": self.subtype,
            "synonyms": list(self.synonyms),
            "description": self.description,
            "bbox": self.bbox.to_dict(),
            "scale_factor": self.scale_factor,
            "front_direction": list(self.front_direction),
            "coordinate_system": self.coordinate_system,
            "usd_path": self.usd_path,
            "safety": self.safety.to_dict(),
            "provides_surface": self.provides_surface,
        }
        out.update(self.extra)
        return out


def default_provides_surface(asset_type: str, category: str, height: float) -> bool:
    return asset_type == "room_asset" and category in SURFACE_CATEGORIES and height >= SURFACE_MIN_HEIGHT


def record_from_dict(data: Mapping) -> AssetRecord:
    """Build a record from its JSON object. Missing safety flags default to False."""
    if "asset_id" not in data:
        raise ValueError("asset record without asset_id")
    bbox = BoundingBox.from_value(data["bbox"])
    asset_type = str(data.get("asset_type", ""))
    category = str(data.get("category", ""))
    provides = data.get("provides_surface")
    if provides is None:
        provides = default_provides_surface(asset_type, category, bbox.height)
    return AssetRecord(
        asset_id=str(data["asset_id"]),
        asset_type=asset_type,
        bbox=bbox,
        category=category,
        subtype=str(data.get("subtype", "")),
        synonyms=tuple(str(s) for s in data.get("synonyms", ())),
        description=str(data.get("description", "")),
        scale_factor=float(data.get("scale_factor", 1.0)),
        front_direction=tuple(float(v) for v in data.get("front_direction", CANONICAL_FRONT)),
        coordinate_system=str(data.get("coordinate_system", "z_up")),
        usd_path=str(data.get("usd_path", "")),
        safety=SafetyAttributes.from_dict(data.get("safety")),
        provides_surface=bool(provides),
        extra={k: v for k, v in data.items() if k not in _RECORD_KEYS},
    )


def validate_asset_record(record: AssetRecord) -> list[Issue]:
    """Check every record invariant; returns an empty list for a valid record.

    A short/long inversion is reported as a warning since loading repairs it.
    """
    issues = []
    aid = record.asset_id

    def add(path, rule, message, severity="error"):
        issues.append(Issue(f"{aid}.{path}", rule, message, severity))

    if not aid:
        add("asset_id", "nonempty", "asset_id is empty")
    if record.asset_type not in ASSET_TYPES:
        add("asset_type", "enum", f"asset_type {record.asset_type!r} not in {ASSET_TYPES}")
    for name in ("short_side", "long_side", "height"):
        value = getattr(record.bbox, name)
        if not value > 0:
            add(f"bbox.{name}", "positive", f"{name} must be > 0, got {value}")
    if record.bbox.short_side > record.bbox.long_side > 0:
        add("bbox", "short_le_long", "short_side exceeds long_side", "warning")
    if not record.scale_factor > 0:
        add("scale_factor", "positive", f"scale_factor must be > 0, got {record.scale_factor}")
    front = tuple(record.front_direction)
    if len(front) != 3 or any(abs(a - b) > 1e-9 for a, b in zip(front, CANONICAL_FRONT)):
        add("front_direction", "canonical_front", f"front_direction must be {CANONICAL_FRONT}, got {front}")
    if record.coordinate_system != "z_up":
        add("coordinate_system", "z_up", f"coordinate_system must be 'z_up', got {record.coordinate_system!r}")
    return issues


class AssetBase:
    """Immutable, indexed collection of asset records."""

    def __init__(self, records: Iterable[AssetRecord] = (), issues: Iterable[Issue] = ()):
        self.records: dict[str, AssetRecord] = {}
        self.synonym_index: dict[str, str] = {}
        self.issues: list[Issue] = list(issues)
        for rec in records:
            if rec.asset_id in self.records:
                raise ValidationError(f"duplicate asset_id {rec.asset_id!r}")
            self.records[rec.asset_id] = rec
        for rec in self.records.values():
            for name in (rec.asset_id, *rec.synonyms):
                key = normalize_name(name)
                owner = self.synonym_index.get(key)
                if owner is not None and owner != rec.asset_id:
                    raise ValidationError(
                        f"synonym collision: {key!r} maps to both {owner!r} and {rec.asset_id!r}"
                    )
                self.synonym_index[key] = rec.asset_id

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AssetRecord]:
        return iter(self.records.values())

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self.records

    def __getitem__(self, asset_id: str) -> AssetRecord:
        try:
            return self.records[asset_id]
        except KeyError:
            raise NotFoundError(f"asset {asset_id!r} not in knowledge base") from None

    def resolve(self, name: str) -> AssetRecord:
        return resolve_asset(name, self)

    def try_resolve(self, name: str) -> AssetRecord | None:
        asset_id = self.synonym_index.get(normalize_name(name))
        return self.records[asset_id] if asset_id is not None else None

    def to_list(self) -> list[dict]:
        return [rec.to_dict() for rec in self.records.values()]


def resolve_asset(name: str, base: AssetBase) -> AssetRecord:
    """Exact normalized lookup over ids and synonyms; never fuzzy."""
    rec = base.try_resolve(name)
    if rec is None:
        raise NotFoundError(f"cannot ground {name!r} to any asset")
    return rec


def asset_base_from_list(items: Iterable[Mapping]) -> AssetBase:
    records, issues = [], []
    seen: dict[str, int] = {}
    for i, item in enumerate(items):
        try:
            rec = record_from_dict(item)
        except (KeyError, TypeError, ValueError) as exc:
            label = item.get("asset_id", f"#{i}") if isinstance(item, Mapping) else f"#{i}"
            raise ValidationError(f"asset {label}: malformed record ({exc})") from exc
        if rec.asset_id in seen:
            raise ValidationError(f"duplicate asset_id {rec.asset_id!r}")
        seen[rec.asset_id] = i
        rec_issues = validate_asset_record(rec)
        if errors_only(rec_issues):
            raise ValidationError(f"asset {rec.asset_id}: invalid record", rec_issues)
        if any(iss.rule == "short_le_long" for iss in rec_issues):
            logger.warning("asset %s: swapping short/long bbox sides", rec.asset_id)
            b = rec.bbox
            rec = replace(rec, bbox=BoundingBox(b.long_side, b.short_side, b.height))
        issues.extend(rec_issues)
        records.append(rec)
    return AssetBase(records, issues)


def load_asset_base(path: str | Path) -> AssetBase:
    """Load a knowledge base from a JSON array (or an {"assets": [...]} object)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error: {exc}") from exc
    if isinstance(data, Mapping):
        data = data.get("assets", data.get("records"))
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a list of asset records")
    return asset_base_from_list(data)


def save_asset_base(base: AssetBase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(base.to_list(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

