"""Chemical-safety constraint instances and their continuous satisfaction scores."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .assets import AssetBase, AssetRecord
from .geometry import centroid_distance, edge_distance, violating_objects
from .protocol import Protocol
from .scene import Layout, PlacedObject

FLAM = "flammable_heat_separation"
STORE = "reagent_storage"
INCOMP = "incompatible_separation"
GLASS = "glass_edge"

METRIC_OF_KIND = {FLAM: "flam", STORE: "store", INCOMP: "incomp", GLASS: "glass"}
METRICS = ("flam", "store", "incomp", "glass")

DEFAULT_INCOMPATIBLE = (
    ("acid", "base"),
    ("oxidizer", "flammable"),
    ("oxidizer", "reactive_metal"),
    ("acid", "reactive_metal"),
    ("acid", "oxidizer"),
)


@dataclass(frozen=True)
class SafetyConfig:
    d_min_flam: float = 1.0
    d_min_incomp: float = 0.5
    d_low_factor: float = 0.25
    d_safe: float = 0.10
    storage_categories: tuple[str, ...] = ("cabinet", "safety_equipment:storage")
    incompatible: tuple[tuple[str, str], ...] = DEFAULT_INCOMPATIBLE

    def __post_init__(self):
        if not (self.d_min_flam > 0 and self.d_min_incomp > 0 and self.d_safe > 0):
            raise ValueError("safety thresholds must be positive")
        if not 0 <= self.d_low_factor < 1:
            raise ValueError("d_low_factor must lie in [0, 1)")

    def d_min(self, kind: str) -> float:
        return {FLAM: self.d_min_flam, INCOMP: self.d_min_incomp, GLASS: self.d_safe}[kind]

    @classmethod
    def from_dict(cls, data: Mapping) -> "SafetyConfig":
        kwargs = dict(data)
        if "storage_categories" in kwargs:
            kwargs["storage_categories"] = tuple(kwargs["storage_categories"])
        if "incompatible" in kwargs:
            kwargs["incompatible"] = tuple(tuple(p) for p in kwargs["incompatible"])
        return cls(**kwargs)


@dataclass(frozen=True)
class ConstraintInstance:
    kind: str
    subjects: tuple[str, ...]  # instance ids
    d_min: float = 0.0
    d_low: float = 0.0
    d: float | None = None
    geo_ok: bool = True
    score: float | None = None

    @property
    def metric(self) -> str:
        return METRIC_OF_KIND[self.kind]

    @property
    def raw_score(self) -> float:
        """Score with the geometry gate ignored."""
        if self.kind == STORE:
            return float(self.d or 0.0)
        if self.kind == GLASS:
            return satisfaction_glass(self.d, self.d_min)
        return satisfaction_distance(self.d, self.d_min, self.d_low, True)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subjects": list(self.subjects),
            "d_min": self.d_min,
            "d_low": self.d_low,
            "d": self.d,
            "geo_ok": self.geo_ok,
            "score": self.score,
        }


def satisfaction_distance(d: float, d_min: float, d_low: float, geo_ok: bool = True) -> float:
    if not 0 <= d_low < d_min:
        raise ValueError(f"need 0 <= d_low < d_min, got d_low={d_low}, d_min={d_min}")
    if not geo_ok:
        return 0.0
    if d >= d_min:
        return 1.0
    if d >= d_low:
        return d / d_min
    return 0.0


def satisfaction_glass(d: float, d_safe: float) -> float:
    if not d_safe > 0:
        raise ValueError("D_safe must be positive")
    return max(0.0, min(1.0, d / d_safe))


def worst_k_average(scores: Iterable[float], k: int = 3) -> float:
    values = sorted(scores)
    if not values:
        raise ValueError("worst_k_average of an empty score list")
    worst = values[: min(len(values), k)]
    return sum(worst) / len(worst)


def plain_average(scores: Sequence[float]) -> float:
    if not scores:
        raise ValueError("average of an empty score list")
    return sum(scores) / len(scores)


def is_storage(asset: AssetRecord, config: SafetyConfig) -> bool:
    return asset.category in config.storage_categories or f"{asset.category}:{asset.subtype}" in config.storage_categories


def incompatible(a: AssetRecord, b: AssetRecord, table: Iterable[tuple[str, str]]) -> bool:
    fa, fb = set(a.safety.active()), set(b.safety.active())
    return any((x in fa and y in fb) or (y in fa and x in fb) for x, y in table)


def _spec_overrides(protocol: Protocol | None, base: AssetBase) -> list[tuple[str, frozenset, float | None]]:
    out = []
    if protocol is None:
        return out
    for spec in protocol.constraints:
        ids = []
        for name in spec.subjects:
            rec = base.try_resolve(name)
            ids.append(rec.asset_id if rec is not None else name)
        out.append((spec.kind, frozenset(ids), spec.min_distance))
    return out


def _pair_instance(kind, a: PlacedObject, b: PlacedObject, d_min: float, config: SafetyConfig) -> ConstraintInstance:
    return ConstraintInstance(kind, (a.instance_id, b.instance_id), d_min, config.d_low_factor * d_min)


def instantiate_constraints(
    layout: Layout, protocol: Protocol | None, base: AssetBase, config: SafetyConfig = SafetyConfig()
) -> list[ConstraintInstance]:
    """Unevaluated instances (d, geo_ok and score unset) implied by attributes and protocol specs."""
    objs = [o for o in layout.objects if o.asset_id in base]
    rec = {o.instance_id: base[o.asset_id] for o in objs}
    overrides = _spec_overrides(protocol, base)

    def pair_threshold(kind, a, b):
        key = frozenset((a.asset_id, b.asset_id))
        for k, subjects, md in overrides:
            if k == kind and subjects == key and md is not None:
                return md
        return config.d_min(kind)

    out = []
    seen_pairs = set()
    for a, b in combinations(objs, 2):
        ra, rb = rec[a.instance_id], rec[b.instance_id]
        if ra.safety.flammable and rb.safety.heat_source:
            out.append(_pair_instance(FLAM, a, b, pair_threshold(FLAM, a, b), config))
            seen_pairs.add((FLAM, a.instance_id, b.instance_id))
        elif rb.safety.flammable and ra.safety.heat_source:
            out.append(_pair_instance(FLAM, b, a, pair_threshold(FLAM, a, b), config))
            seen_pairs.add((FLAM, a.instance_id, b.instance_id))
        if incompatible(ra, rb, config.incompatible):
            out.append(_pair_instance(INCOMP, a, b, pair_threshold(INCOMP, a, b), config))
            seen_pairs.add((INCOMP, a.instance_id, b.instance_id))
    # protocol specs can demand separation the attributes do not imply
    for kind, subjects, md in overrides:
        if kind not in (FLAM, INCOMP) or len(subjects) != 2:
            continue
        for a, b in combinations(objs, 2):
            if frozenset((a.asset_id, b.asset_id)) == subjects and (kind, a.instance_id, b.instance_id) not in seen_pairs:
                out.append(_pair_instance(kind, a, b, md if md is not None else config.d_min(kind), config))
                seen_pairs.add((kind, a.instance_id, b.instance_id))
    for o in objs:
        if rec[o.instance_id].is_reagent:
            out.append(ConstraintInstance(STORE, (o.instance_id,)))
    for o in objs:
        if rec[o.instance_id].safety.glass_container and not o.on_floor:
            d_safe = config.d_safe
            for k, subjects, md in overrides:
                if k == GLASS and subjects == frozenset((o.asset_id,)) and md is not None:
                    d_safe = md
            out.append(ConstraintInstance(GLASS, (o.instance_id,), d_safe, 0.0))
    return out


def measure(
    inst: ConstraintInstance,
    layout: Layout,
    base: AssetBase,
    offenders: set[str],
    config: SafetyConfig = SafetyConfig(),
) -> ConstraintInstance:
    """Fill d, geo_ok and score from the current placement."""
    geo_ok = not any(s in offenders for s in inst.subjects)
    if inst.kind == STORE:
        obj = layout.get(inst.subjects[0])
        inside = not obj.on_floor and obj.initial_location in layout and is_storage(
            base[layout.get(obj.initial_location).asset_id], config
        )
        d = 1.0 if inside else 0.0
        return replace(inst, d=d, geo_ok=geo_ok, score=d if geo_ok else 0.0)
    if inst.kind == GLASS:
        obj = layout.get(inst.subjects[0])
        parent = layout.get(obj.initial_location)
        d = edge_distance(obj, base[obj.asset_id], parent, base[parent.asset_id])
        return replace(inst, d=d, geo_ok=geo_ok, score=satisfaction_glass(d, inst.d_min) if geo_ok else 0.0)
    a, b = (layout.get(s) for s in inst.subjects)
    d = centroid_distance(a, b)
    return replace(inst, d=d, geo_ok=geo_ok, score=satisfaction_distance(d, inst.d_min, inst.d_low, geo_ok))


def evaluate_constraints(
    layout: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    config: SafetyConfig = SafetyConfig(),
    offenders: set[str] | None = None,
) -> list[ConstraintInstance]:
    if offenders is None:
        offenders = violating_objects(layout, base)
    return [measure(i, layout, base, offenders, config) for i in instantiate_constraints(layout, protocol, base, config)]


@dataclass(frozen=True)
class ChemReport:
    flam: float | None
    store: float | None
    incomp: float | None
    glass: float | None
    instances: tuple[ConstraintInstance, ...] = field(default=())

    @property
    def defined(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS if getattr(self, m) is not None}

    @property
    def f_chem(self) -> float:
        # no applicable constraint at all counts as fully safe
        vals = list(self.defined.values())
        return sum(vals) / len(vals) if vals else 1.0

    def to_dict(self) -> dict:
        return {
            "flam": self.flam,
            "store": self.store,
            "incomp": self.incomp,
            "glass": self.glass,
            "f_chem": self.f_chem,
            "instances": [i.to_dict() for i in self.instances],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChemReport":
        return cls(
            data.get("flam"),
            data.get("store"),
            data.get("incomp"),
            data.get("glass"),
            tuple(ConstraintInstance(**{**i, "subjects": tuple(i["subjects"])}) for i in data.get("instances", ())),
        )


def aggregate(instances: Sequence[ConstraintInstance]) -> ChemReport:
    by_metric: dict[str, list[float]] = {m: [] for m in METRICS}
    for inst in instances:
        by_metric[inst.metric].append(float(inst.score))
    values = {}
    for m, scores in by_metric.items():
        if not scores:
            values[m] = None
        elif m in ("flam", "incomp"):
            values[m] = worst_k_average(scores)
        else:
            values[m] = plain_average(scores)
    return ChemReport(instances=tuple(instances), **values)


def chem_report(
    layout: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    config: SafetyConfig = SafetyConfig(),
    offenders: set[str] | None = None,
) -> ChemReport:
    return aggregate(evaluate_constraints(layout, protocol, base, config, offenders))


def critical_instances(instances: Iterable[ConstraintInstance]) -> list[ConstraintInstance]:
    """Separation instances whose placement alone scores zero (d below d_low).

    Geometry-gated zeros are already counted as boundary/collision violations,
    and storage/glass shortfalls are soft.
    """
    return [i for i in instances if i.kind in (FLAM, INCOMP) and i.d is not None and i.raw_score == 0.0]


def unsafe_pairs(instances: Iterable[ConstraintInstance]) -> list[tuple[str, str]]:
    return [i.subjects for i in instances if i.kind in (FLAM, INCOMP) and i.score is not None and i.score < 1.0]

