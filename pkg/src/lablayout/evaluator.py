"""Scene evaluation: geometry counts, feasibility rates, gated chemistry, scores and reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .assets import AssetBase
from .errors import NotFoundError, ScorerUnavailable
from .geometry import tested_pair_count
from .navigation import NavConfig, reachability
from .optimizer import geometric_violations
from .protocol import Protocol
from .safety import METRICS, ChemReport, SafetyConfig, aggregate, evaluate_constraints
from .scene import Layout, layout_to_dict

logger = logging.getLogger(__name__)

PHYS_CAP = 35.0
CHEM_CAP = 35.0
CONSIST_CAP = 30.0
SEMANTIC_MODES = ("strict", "medium", "lenient")
SEMANTIC_KEYS = ("realism", "layout", "completion")
CSV_COLUMNS = ("Obj", "OB", "CN", "Asset", "Nav.", "Flam.", "Store", "Incomp.", "Glass", "Real", "Lay", "Comp")


@dataclass(frozen=True)
class GeometryMetrics:
    obj: int
    ob: int
    cn: int


def geometry_metrics(layout: Layout, base: AssetBase) -> GeometryMetrics:
    rep = geometric_violations(layout, base)
    return GeometryMetrics(len(layout), len(rep.boundary), len(rep.collision))


def required_assets(protocol: Protocol, base: AssetBase) -> set[str]:
    """Reagents, instruments and the room assets named as step locations."""
    out = set()
    for name in (*protocol.reagents, *protocol.instruments):
        rec = base.try_resolve(name)
        out.add(rec.asset_id if rec is not None else name)
    for step in protocol.steps:
        rec = base.try_resolve(step.location)
        if rec is not None and rec.asset_type == "room_asset":
            out.add(rec.asset_id)
    return out


def asset_availability(layout: Layout, protocol: Protocol, base: AssetBase) -> int:
    return int(required_assets(protocol, base) <= layout.placed_asset_ids())


@dataclass(frozen=True)
class FSR:
    asset: float
    step_nav: float
    protocol_nav: float


def fsr_from_counts(asset_bits: Sequence[int], transitions: Sequence[tuple[int, int]]) -> FSR:
    """``transitions`` holds (ok, total) per scene."""
    if not asset_bits:
        raise ValueError("fsr needs at least one scene")
    ok = sum(t[0] for t in transitions)
    total = sum(t[1] for t in transitions)
    return FSR(
        sum(asset_bits) / len(asset_bits),
        ok / total if total else 1.0,
        sum(1 for a, b in transitions if a == b) / len(transitions),
    )


def fsr(scenes: Sequence[tuple[Layout, Protocol]], base: AssetBase, nav: NavConfig = NavConfig()) -> FSR:
    bits, trans = [], []
    for layout, protocol in scenes:
        bits.append(asset_availability(layout, protocol, base))
        rep = reachability(layout, protocol, base, nav, strict=False)
        trans.append((rep.total - rep.unreachable, rep.total))
    return fsr_from_counts(bits, trans)


def weighted_mean(gates: Sequence[int], scores: Sequence[float]) -> float:
    """(1/N) * sum g_i s_i over N scenes."""
    if len(gates) != len(scores) or not gates:
        raise ValueError("need equally long, nonempty gate and score lists")
    return sum(g * s for g, s in zip(gates, scores)) / len(gates)


def weighted_chem(scenes: Sequence[tuple[int, ChemReport]]) -> dict[str, float | None]:
    """Availability-weighted score per chemistry metric; scenes where a metric is undefined are skipped."""
    out: dict[str, float | None] = {}
    for m in METRICS:
        pairs = [(g, getattr(r, m)) for g, r in scenes if getattr(r, m) is not None]
        out[m] = weighted_mean([p[0] for p in pairs], [p[1] for p in pairs]) if pairs else None
    return out


@dataclass(frozen=True)
class Scores:
    overall: float
    s_phys: float
    s_chem: float
    s_consist: float | None
    semantic_available: bool = True


def _clamp(v: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, v))


def compose_scores(f_geo: float, f_chem: float, semantic_total: float | None, gate: int = 1) -> Scores:
    """35 * f_geo + 35 * gated f_chem + semantic total (out of 30). Missing semantics drop that term."""
    s_phys = PHYS_CAP * _clamp(f_geo, 0.0, 1.0)
    s_chem = CHEM_CAP * _clamp(f_chem, 0.0, 1.0) * (1 if gate else 0)
    if semantic_total is None:
        return Scores(s_phys + s_chem, s_phys, s_chem, None, False)
    s_consist = CONSIST_CAP * (_clamp(semantic_total, 0.0, CONSIST_CAP) / CONSIST_CAP)
    return Scores(s_phys + s_chem + s_consist, s_phys, s_chem, s_consist, True)


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    shortest_length: float
    agent_length: float


def nav_benchmark(episodes: Sequence[EpisodeResult]) -> tuple[float, float]:
    """(SR, SPL) with SPL = mean of success * l / max(p, l)."""
    if not episodes:
        raise ValueError("nav_benchmark needs at least one episode")
    sr = sum(e.success for e in episodes) / len(episodes)
    terms = []
    for e in episodes:
        denom = max(e.agent_length, e.shortest_length)
        terms.append(e.shortest_length / denom if e.success and denom > 0 else float(e.success and denom == 0))
    return sr, sum(terms) / len(terms)


# -- semantic scoring ---------------------------------------------------------------


@dataclass(frozen=True)
class SemanticScore:
    realism: int
    layout: int
    completion: int
    reasons: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return self.realism + self.layout + self.completion

    @property
    def mean(self) -> float:
        return self.total / 3.0

    def to_dict(self) -> dict:
        return {
            "realism": self.realism,
            "layout": self.layout,
            "completion": self.completion,
            "total": self.total,
            "reasons": list(self.reasons),
        }


def clamp_semantic(raw: Mapping) -> SemanticScore:
    """Coerce scorer output to integers in 0..10, warning on anything out of range."""
    values, reasons = {}, list(raw.get("reasons", ()))
    for key in SEMANTIC_KEYS:
        v = raw.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScorerUnavailable(f"semantic scorer returned non-numeric {key}: {v!r}")
        c = int(round(_clamp(float(v), 0.0, 10.0)))
        if c != v:
            logger.warning("semantic %s=%r clamped to %d", key, v, c)
            reasons.append(f"{key} clamped from {v} to {c}")
        values[key] = c
    for key in raw.get("hard_zero", ()):
        if key in values:
            values[key] = 0
            reasons.append(f"{key} forced to 0 by a hard constraint")
    return SemanticScore(values["realism"], values["layout"], values["completion"], tuple(str(r) for r in reasons))


class SemanticScorer:
    def score(self, layout: Layout, mode: str = "medium") -> Mapping:
        raise NotImplementedError


class StubScorer(SemanticScorer):
    """Offline scorer returning fixed scores; ``hard_zero`` names criteria a hard rule zeroes."""

    def __init__(self, scores: tuple[float, float, float] = (8, 9, 9), hard_zero: Iterable[str] = ()):
        self.scores = tuple(scores)
        self.hard_zero = tuple(hard_zero)

    def score(self, layout: Layout, mode: str = "medium") -> Mapping:
        return {**dict(zip(SEMANTIC_KEYS, self.scores)), "hard_zero": list(self.hard_zero), "reasons": [f"stub ({mode})"]}


class RemoteScorer(SemanticScorer):
    """HTTP judge: POSTs the layout and mode, expects realism/layout/completion in the reply."""

    def __init__(
        self, endpoint_url: str, timeout_s: float = 60.0, auth_env_var: str = "LABLAYOUT_SCORER_TOKEN", model: str = ""
    ):
        if not endpoint_url:
            raise ValueError("remote scorer needs an endpoint_url")
        self.endpoint_url = endpoint_url
        self.timeout_s = timeout_s
        self.auth_env_var = auth_env_var
        self.model = model

    def score(self, layout: Layout, mode: str = "medium") -> Mapping:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {"mode": mode, "layout": layout_to_dict(layout)}
        if self.model:
            payload["model"] = self.model
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        req = urllib.request.Request(self.endpoint_url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ScorerUnavailable(f"semantic scorer failed: {exc}") from exc


def semantic_score(layout: Layout, mode: str = "medium", scorer: SemanticScorer | None = None) -> SemanticScore | None:
    """None when the scorer is unreachable or returns garbage."""
    if mode not in SEMANTIC_MODES:
        raise ValueError(f"semantic mode must be one of {SEMANTIC_MODES}")
    scorer = scorer or StubScorer()
    try:
        return clamp_semantic(scorer.score(layout, mode))
    except ScorerUnavailable as exc:
        logger.warning("semantic scoring unavailable: %s", exc)
        return None


# -- report -------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    scene_id: str
    overall: float
    s_phys: float
    s_chem: float
    s_consist: float | None
    semantic_available: bool
    f_geo: float
    f_chem: float
    f_reach: int
    geometry: GeometryMetrics
    fsr: FSR
    chemistry: ChemReport
    semantic: SemanticScore | None
    violations: list = field(default_factory=list)
    suggestions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "overall": self.overall,
            "sub_scores": {"S_phys": self.s_phys, "S_chem": self.s_chem, "S_consist": self.s_consist},
            "semantic_available": self.semantic_available,
            "f_geo": self.f_geo,
            "f_chem": self.f_chem,
            "f_reach": self.f_reach,
            "geometry": asdict(self.geometry),
            "fsr": asdict(self.fsr),
            "chemistry": self.chemistry.to_dict(),
            "semantic": None if self.semantic is None else self.semantic.to_dict(),
            "violations": list(self.violations),
            "suggestions": list(self.suggestions),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluationReport":
        sem = data.get("semantic")
        chem = dict(data["chemistry"])
        chem.pop("f_chem", None)
        return cls(
            scene_id=data["scene_id"],
            overall=data["overall"],
            s_phys=data["sub_scores"]["S_phys"],
            s_chem=data["sub_scores"]["S_chem"],
            s_consist=data["sub_scores"]["S_consist"],
            semantic_available=data["semantic_available"],
            f_geo=data["f_geo"],
            f_chem=data["f_chem"],
            f_reach=data["f_reach"],
            geometry=GeometryMetrics(**data["geometry"]),
            fsr=FSR(**data["fsr"]),
            chemistry=ChemReport.from_dict(chem),
            semantic=None
            if sem is None
            else SemanticScore(sem["realism"], sem["layout"], sem["completion"], tuple(sem.get("reasons", ()))),
            violations=list(data.get("violations", ())),
            suggestions=list(data.get("suggestions", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))


def _suggestions(geo_rep, chem: ChemReport, nav_failures, g: int) -> list[str]:
    out = []
    for iid, corr in geo_rep.boundary:
        out.append(f"move {iid} by ({corr[0]:.3f}, {corr[1]:.3f}) m to bring it inside its container")
    for a, b, p in geo_rep.collision:
        out.append(f"separate {a} and {b} by at least {p.depth:.3f} m")
    for inst in chem.instances:
        if inst.score is not None and inst.score < 1.0:
            if inst.kind == "reagent_storage":
                out.append(f"store {inst.subjects[0]} in a designated cabinet")
            elif inst.kind == "glass_edge":
                out.append(f"move {inst.subjects[0]} at least {inst.d_min:.2f} m from the tabletop edge")
            else:
                out.append(f"keep {inst.subjects[0]} and {inst.subjects[1]} at least {inst.d_min:.2f} m apart")
    for pair, outcome in nav_failures:
        out.append(f"navigation {outcome.status} between step {pair.start.step} and step {pair.end.step}")
    if not g:
        out.append("place every asset the protocol requires")
    return out


def evaluate(
    layout: Layout,
    protocol: Protocol,
    base: AssetBase,
    safety: SafetyConfig = SafetyConfig(),
    nav: NavConfig = NavConfig(),
    scorer: SemanticScorer | None = None,
    mode: str = "medium",
    scene_id: str = "",
) -> EvaluationReport:
    geo_rep = geometric_violations(layout, base)
    n_checks = len(layout) + tested_pair_count(layout)
    f_geo = 1.0 - min(1.0, geo_rep.v_geo / n_checks) if n_checks else 1.0
    chem = aggregate(evaluate_constraints(layout, protocol, base, safety, geo_rep.offenders()))
    g = asset_availability(layout, protocol, base)
    try:
        nav_rep = reachability(layout, protocol, base, nav, strict=False)
        failures = nav_rep.failures
        ok, total = nav_rep.total - nav_rep.unreachable, nav_rep.total
    except NotFoundError:
        failures, ok, total = [], 0, 0
    semantic = semantic_score(layout, mode, scorer)
    scores = compose_scores(f_geo, chem.f_chem, None if semantic is None else semantic.total, g)
    violations = [{"type": "boundary", "id": i, "correction": list(c)} for i, c in geo_rep.boundary]
    violations += [{"type": "collision", "pair": [a, b], "depth": p.depth} for a, b, p in geo_rep.collision]
    violations += [
        {"type": inst.kind, "subjects": list(inst.subjects), "d": inst.d, "d_min": inst.d_min, "score": inst.score}
        for inst in chem.instances
        if inst.score is not None and inst.score < 1.0
    ]
    violations += [
        {"type": outcome.status, "from_step": pair.start.step, "to_step": pair.end.step} for pair, outcome in failures
    ]
    return EvaluationReport(
        scene_id=scene_id or str(layout.metadata.get("scene_id", protocol.protocol_id)),
        overall=scores.overall,
        s_phys=scores.s_phys,
        s_chem=scores.s_chem,
        s_consist=scores.s_consist,
        semantic_available=scores.semantic_available,
        f_geo=f_geo,
        f_chem=chem.f_chem,
        f_reach=int(ok == total),
        geometry=GeometryMetrics(len(layout), len(geo_rep.boundary), len(geo_rep.collision)),
        fsr=fsr_from_counts([g], [(ok, total)]),
        chemistry=chem,
        semantic=semantic,
        violations=violations,
        suggestions=_suggestions(geo_rep, chem, failures, g),
    )


def summary_row(report: EvaluationReport) -> dict:
    def fmt(v):
        return "" if v is None else v

    sem = report.semantic
    return {
        "Obj": report.geometry.obj,
        "OB": report.geometry.ob,
        "CN": report.geometry.cn,
        "Asset": report.fsr.asset,
        "Nav.": report.fsr.step_nav,
        "Flam.": fmt(report.chemistry.flam),
        "Store": fmt(report.chemistry.store),
        "Incomp.": fmt(report.chemistry.incomp),
        "Glass": fmt(report.chemistry.glass),
        "Real": "" if sem is None else sem.realism,
        "Lay": "" if sem is None else sem.layout,
        "Comp": "" if sem is None else sem.completion,
    }


def reports_to_csv(reports: Sequence[EvaluationReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=("scene_id",) + CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({"scene_id": r.scene_id, **summary_row(r)})
    return buf.getvalue()
