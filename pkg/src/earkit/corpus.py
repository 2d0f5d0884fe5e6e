"""Microtext corpus parsing, annotation validation, and project persistence.

A microtext document is an XML argument graph: elementary units carrying
the text, argumentative units, and typed edges between units (or between
a unit and another edge, for undercuts). This module flattens that graph
to segments plus relations, attaches explanation annotations to the
relations, and round-trips whole projects through a single versioned
JSON document.

Parsing is pure and all model values are immutable snapshots; mutation
means building a new Project.
"""

from __future__ import annotations

import json
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .patterns import Catalog, RelationType

PROJECT_SCHEMA = "ear-project"
PROJECT_SCHEMA_VERSION = 1

DEFAULT_SEED = 42

# corpus edge-type codes -> relation types; support-by-example counts as
# plain support, segmentation and linked-premise codes are structural
DEFAULT_EDGE_TYPES: Mapping[str, RelationType] = {
    "sup": RelationType.SUPPORT,
    "exa": RelationType.SUPPORT,
    "reb": RelationType.REBUTTAL,
    "und": RelationType.UNDERCUT,
}
SEGMENTATION_CODE = "seg"
LINKED_PREMISE_CODE = "add"

SPLIT_VALUES = ("dev", "test")


class CorpusError(ValueError):
    """Raised when a corpus document cannot be interpreted."""


class ProjectFormatError(ValueError):
    """Raised when a project file is malformed or truncated."""


class SchemaVersionError(ProjectFormatError):
    """Raised when a project file carries an unsupported schema version."""


@dataclass(frozen=True)
class Segment:
    id: str
    text: str
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise CorpusError(f"segment {self.id}: empty or inverted span")


@dataclass(frozen=True)
class ArgRelation:
    id: str
    source: str
    target: str
    rel_type: RelationType
    extra_sources: tuple[str, ...] = ()  # linked premises folded into the source side

    @property
    def source_set(self) -> tuple[str, ...]:
        return (self.source, *self.extra_sources)


@dataclass(frozen=True)
class Microtext:
    id: str
    topic_question: str
    segments: tuple[Segment, ...]
    relations: tuple[ArgRelation, ...]
    text: str

    def segment(self, segment_id: str) -> Segment:
        for s in self.segments:
            if s.id == segment_id:
                return s
        raise KeyError(segment_id)

    def relation(self, relation_id: str) -> ArgRelation:
        rid = local_relation_id(self.id, relation_id)
        for r in self.relations:
            if r.id == rid:
                return r
        raise KeyError(relation_id)

    def has_relation(self, relation_id: str) -> bool:
        rid = local_relation_id(self.id, relation_id)
        return any(r.id == rid for r in self.relations)

    def participating_segments(self, relation_id: str) -> tuple[str, ...]:
        """Segment ids involved in a relation, following undercut targets."""
        seen: list[str] = []
        segment_ids = {s.id for s in self.segments}

        def walk(rid: str) -> None:
            rel = self.relation(rid)
            for sid in rel.source_set:
                if sid in segment_ids and sid not in seen:
                    seen.append(sid)
            if rel.target in segment_ids:
                if rel.target not in seen:
                    seen.append(rel.target)
            else:
                walk(rel.target)

        walk(relation_id)
        return tuple(seen)


@dataclass(frozen=True)
class Span:
    """A slot-fill anchor: document-level offsets inside one segment."""

    segment_id: str
    start: int
    end: int


@dataclass(frozen=True)
class SlotFill:
    slot: str
    spans: tuple[Span, ...]
    text: str
    implicit: bool = False

    def __post_init__(self):
        if self.implicit != (len(self.spans) == 0):
            raise ValueError("a fill is implicit exactly when it has no spans")


@dataclass(frozen=True)
class EarAnnotation:
    relation_id: str  # qualified "<text id>/<relation id>"
    annotator: str
    stage: int
    pattern_id: str
    fills: tuple[SlotFill, ...]
    note: str | None = None

    def fill_for(self, slot: str) -> SlotFill | None:
        for f in self.fills:
            if f.slot == slot:
                return f
        return None


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    relation_id: str | None = None
    slot: str | None = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "relation_id": self.relation_id,
            "slot": self.slot,
        }

    def format(self) -> str:
        where = f" [{self.relation_id}]" if self.relation_id else ""
        slot = f" (slot {self.slot})" if self.slot else ""
        return f"{self.severity}: {self.code}{where}{slot}: {self.message}"


def relation_key(text_id: str, relation_id: str) -> str:
    return f"{text_id}/{relation_id}"


def split_relation_key(key: str) -> tuple[str, str]:
    text_id, _, relation_id = key.partition("/")
    if not relation_id:
        raise ValueError(f"not a qualified relation id: {key!r}")
    return text_id, relation_id


def local_relation_id(text_id: str, relation_id: str) -> str:
    if relation_id.startswith(text_id + "/"):
        return relation_id[len(text_id) + 1 :]
    return relation_id


def parse_microtext(
    document: str,
    edge_types: Mapping[str, RelationType] = DEFAULT_EDGE_TYPES,
) -> Microtext:
    """Parse one microtext XML document into segments and relations.

    Elementary units become segments (joined by single spaces to form
    the document text; offsets are Unicode code-point offsets). Edges
    carrying an argumentative type code become relations; an edge whose
    target is another edge yields an undercut-style relation targeting
    that relation. Linked-premise edges merge their source into the
    sibling relation's source set.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise CorpusError(f"malformed XML: {exc}") from None

    text_id = root.get("id", "")
    topic = root.get("topic_id", "") or ""

    segments: list[Segment] = []
    cursor = 0
    parts: list[str] = []
    for edu in root.iter("edu"):
        seg_id = edu.get("id")
        if not seg_id:
            raise CorpusError(f"{text_id}: elementary unit without id")
        seg_text = (edu.text or "").strip()
        if not seg_text:
            raise CorpusError(f"{text_id}: elementary unit {seg_id} has no text")
        if parts:
            cursor += 1  # joining space
        segments.append(Segment(seg_id, seg_text, cursor, cursor + len(seg_text)))
        parts.append(seg_text)
        cursor += len(seg_text)
    doc_text = " ".join(parts)

    segment_ids = {s.id for s in segments}
    if len(segment_ids) != len(segments):
        raise CorpusError(f"{text_id}: duplicate segment ids")

    adu_ids = {adu.get("id") for adu in root.iter("adu")}
    adu_ids.discard(None)

    edges = list(root.iter("edge"))
    adu_to_segment: dict[str, str] = {}
    for e in edges:
        if e.get("type") == SEGMENTATION_CODE:
            src, trg = e.get("src"), e.get("trg")
            if src not in segment_ids or trg not in adu_ids:
                raise CorpusError(f"{text_id}: segmentation edge with dangling endpoint")
            if trg in adu_to_segment:
                raise CorpusError(f"{text_id}: argumentative unit {trg} segmented twice")
            adu_to_segment[trg] = src

    def node_segment(node_id: str) -> str | None:
        if node_id in adu_to_segment:
            return adu_to_segment[node_id]
        if node_id in segment_ids:
            return node_id
        return None

    relational = [
        e for e in edges if e.get("type") not in (SEGMENTATION_CODE, LINKED_PREMISE_CODE)
    ]
    relation_ids = {e.get("id") for e in relational}
    if len(relation_ids) != len(relational):
        raise CorpusError(f"{text_id}: duplicate edge ids")

    relations: dict[str, ArgRelation] = {}
    for e in relational:
        eid, code = e.get("id"), e.get("type")
        src, trg = e.get("src"), e.get("trg")
        if code not in edge_types:
            raise CorpusError(f"{text_id}: unknown edge type code {code!r} on {eid}")
        rel_type = edge_types[code]
        source_seg = node_segment(src or "")
        if source_seg is None:
            raise CorpusError(f"{text_id}: edge {eid} has dangling source {src!r}")
        target_seg = node_segment(trg or "")
        if target_seg is not None:
            target = target_seg
            target_is_relation = False
        elif trg in relation_ids:
            target = trg
            target_is_relation = True
        else:
            raise CorpusError(f"{text_id}: edge {eid} has dangling target {trg!r}")
        if eid == trg or source_seg == target:
            raise CorpusError(f"{text_id}: edge {eid} references itself")
        if (rel_type is RelationType.UNDERCUT) != target_is_relation:
            raise CorpusError(
                f"{text_id}: edge {eid} is {code!r} but targets a "
                f"{'relation' if target_is_relation else 'segment'}"
            )
        relations[eid] = ArgRelation(eid, source_seg, target, rel_type)

    for e in edges:
        if e.get("type") != LINKED_PREMISE_CODE:
            continue
        src, trg = e.get("src"), e.get("trg")
        source_seg = node_segment(src or "")
        if source_seg is None or trg not in relations:
            raise CorpusError(f"{text_id}: linked-premise edge with dangling endpoint")
        sibling = relations[trg]
        relations[trg] = replace(
            sibling, extra_sources=(*sibling.extra_sources, source_seg)
        )

    ordered = tuple(relations[e.get("id")] for e in relational)

    # relation-target chains must terminate
    for rel in ordered:
        seen = {rel.id}
        current = rel
        while current.target in relations:
            if current.target in seen:
                raise CorpusError(f"{text_id}: relation cycle through {current.target}")
            seen.add(current.target)
            current = relations[current.target]

    return Microtext(
        id=text_id,
        topic_question=topic,
        segments=tuple(segments),
        relations=ordered,
        text=doc_text,
    )


def parse_microtext_file(path: str | Path, **kwargs) -> Microtext:
    return parse_microtext(Path(path).read_text(encoding="utf-8"), **kwargs)


def load_corpus_dir(
    directory: str | Path,
    require_topic: bool = True,
    edge_types: Mapping[str, RelationType] = DEFAULT_EDGE_TYPES,
) -> tuple[list[Microtext], list[Diagnostic]]:
    """Parse every ``.xml`` file in a directory tree, sorted by name.

    Texts without a topic question are excluded (with a warning
    diagnostic) unless ``require_topic`` is false.
    """
    texts: list[Microtext] = []
    notes: list[Diagnostic] = []
    paths = sorted(Path(directory).rglob("*.xml"))
    for path in paths:
        mt = parse_microtext(path.read_text(encoding="utf-8"), edge_types=edge_types)
        if require_topic and not mt.topic_question:
            notes.append(
                Diagnostic(
                    "warning",
                    "no-topic-question",
                    f"{mt.id or path.name}: excluded, no topic question",
                )
            )
            continue
        texts.append(mt)
    return texts, notes


def validate_annotation(
    annotation: EarAnnotation, microtext: Microtext, catalog: Catalog
) -> list[Diagnostic]:
    """Check one annotation against its relation and the catalog.

    Returns diagnostics instead of raising: pattern/relation type
    mismatches, wrong slot sets, bad spans, and empty implicit fills are
    errors; a span outside the relation's participating segments (the
    classic adjacent-segment slip) is only a warning.
    """
    diags: list[Diagnostic] = []
    rid = annotation.relation_id

    def err(code: str, message: str, slot: str | None = None) -> None:
        diags.append(Diagnostic("error", code, message, relation_id=rid, slot=slot))

    def warn(code: str, message: str, slot: str | None = None) -> None:
        diags.append(Diagnostic("warning", code, message, relation_id=rid, slot=slot))

    if annotation.stage not in (1, 2, 3):
        err("bad-stage", f"stage must be 1, 2 or 3, got {annotation.stage}")

    if not microtext.has_relation(rid):
        err("unknown-relation", f"relation {rid!r} not found in text {microtext.id!r}")
        return diags
    relation = microtext.relation(rid)

    if annotation.pattern_id not in catalog:
        err("unknown-pattern", f"pattern {annotation.pattern_id!r} not in catalog")
        return diags
    pattern = catalog.get(annotation.pattern_id)

    if pattern.relation_type is not None and pattern.relation_type is not relation.rel_type:
        err(
            "pattern-relation-mismatch",
            f"pattern {pattern.id} explains {pattern.relation_type.value} relations "
            f"but {relation.id} is {relation.rel_type.value}",
        )

    declared = set(pattern.slot_names)
    filled = [f.slot for f in annotation.fills]
    if len(set(filled)) != len(filled):
        err("slot-set-mismatch", "duplicate slot fills")
    elif set(filled) != declared:
        err(
            "slot-set-mismatch",
            f"pattern {pattern.id} declares slots {sorted(declared)}, "
            f"fills cover {sorted(set(filled))}",
        )

    participants = set(microtext.participating_segments(rid))
    segment_ids = {s.id for s in microtext.segments}
    for fill in annotation.fills:
        if fill.implicit:
            if not fill.text.strip():
                err("empty-implicit-fill", "implicit fill with empty text", slot=fill.slot)
            continue
        span_texts: list[str] = []
        ok = True
        for span in fill.spans:
            if span.segment_id not in segment_ids:
                err(
                    "span-out-of-bounds",
                    f"span names unknown segment {span.segment_id!r}",
                    slot=fill.slot,
                )
                ok = False
                continue
            seg = microtext.segment(span.segment_id)
            if not (seg.start <= span.start < span.end <= seg.end):
                err(
                    "span-out-of-bounds",
                    f"span {span.start}..{span.end} outside segment "
                    f"{span.segment_id} ({seg.start}..{seg.end})",
                    slot=fill.slot,
                )
                ok = False
                continue
            span_texts.append(microtext.text[span.start : span.end])
            if span.segment_id not in participants:
                warn(
                    "outside-participants",
                    f"span in segment {span.segment_id}, which does not participate "
                    f"in relation {relation.id}",
                    slot=fill.slot,
                )
        if ok and span_texts:
            if _squash(" ".join(span_texts)) != _squash(fill.text):
                err(
                    "span-text-mismatch",
                    f"fill text {fill.text!r} does not match span text "
                    f"{' '.join(span_texts)!r}",
                    slot=fill.slot,
                )
    return diags


def _squash(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class CrossCheckResponse:
    """One annotator's verdict on the counterpart annotation (stage 2)."""

    relation_id: str
    annotator: str
    response: str  # "yes" | "no" | "unsure"

    def __post_init__(self):
        if self.response not in ("yes", "no", "unsure"):
            raise ValueError(f"bad cross-check response {self.response!r}")


@dataclass(frozen=True)
class Resolution:
    """Outcome of a stage-2 acceptance or stage-3 discussion.

    ``chosen`` holds the annotator ids whose annotations remain
    acceptable: one for an explicit acceptance, two when both survive
    and a seeded random draw decides (``rng_seed`` records the seed).
    """

    relation_id: str
    stage: int
    outcome: str  # AgreementVerdict value
    chosen: tuple[str, ...] = ()
    rng_seed: int | None = None


@dataclass(frozen=True)
class ClueTag:
    """A contextual-clue marker on one relation's explanation."""

    relation_id: str
    clue_kind: str  # "value_judgment" | "causality"
    spans: tuple[Span, ...] = ()
    note: str | None = None

    def __post_init__(self):
        if self.clue_kind not in ("value_judgment", "causality"):
            raise ValueError(f"bad clue kind {self.clue_kind!r}")


@dataclass(frozen=True)
class Project:
    corpus: tuple[Microtext, ...] = ()
    annotators: tuple[str, ...] = ()
    annotations: tuple[EarAnnotation, ...] = ()
    cross_checks: tuple[CrossCheckResponse, ...] = ()
    resolutions: tuple[Resolution, ...] = ()
    clue_tags: tuple[ClueTag, ...] = ()
    split: Mapping[str, str] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    revision: int = 0

    def microtext(self, text_id: str) -> Microtext:
        for mt in self.corpus:
            if mt.id == text_id:
                return mt
        raise KeyError(text_id)

    def resolve_relation(self, key: str) -> tuple[Microtext, ArgRelation]:
        text_id, rid = split_relation_key(key)
        mt = self.microtext(text_id)
        return mt, mt.relation(rid)

    def relation_keys(self, split: str | None = None) -> tuple[str, ...]:
        keys: list[str] = []
        for mt in self.corpus:
            if split and self.split.get(mt.id) != split:
                continue
            keys.extend(relation_key(mt.id, r.id) for r in mt.relations)
        return tuple(keys)

    def validate(self, catalog: Catalog) -> list[Diagnostic]:
        diags: list[Diagnostic] = []
        for mt in self.corpus:
            if mt.id not in self.split:
                diags.append(
                    Diagnostic("error", "missing-split", f"text {mt.id} has no split")
                )
        for a in self.annotations:
            try:
                mt, _ = self.resolve_relation(a.relation_id)
            except (KeyError, ValueError):
                diags.append(
                    Diagnostic(
                        "error",
                        "unknown-relation",
                        f"annotation references missing relation {a.relation_id!r}",
                        relation_id=a.relation_id,
                    )
                )
                continue
            diags.extend(validate_annotation(a, mt, catalog))
        return diags


# --- project (de)serialization ------------------------------------------

def _microtext_to_dict(mt: Microtext) -> dict:
    return {
        "id": mt.id,
        "topic_question": mt.topic_question,
        "text": mt.text,
        "segments": [
            {"id": s.id, "text": s.text, "start": s.start, "end": s.end}
            for s in mt.segments
        ],
        "relations": [
            {
                "id": r.id,
                "source": r.source,
                "target": r.target,
                "rel_type": r.rel_type.value,
                "extra_sources": list(r.extra_sources),
            }
            for r in mt.relations
        ],
    }


def _microtext_from_dict(d: Mapping) -> Microtext:
    return Microtext(
        id=d["id"],
        topic_question=d["topic_question"],
        text=d["text"],
        segments=tuple(
            Segment(s["id"], s["text"], s["start"], s["end"]) for s in d["segments"]
        ),
        relations=tuple(
            ArgRelation(
                r["id"],
                r["source"],
                r["target"],
                RelationType(r["rel_type"]),
                tuple(r.get("extra_sources", ())),
            )
            for r in d["relations"]
        ),
    )


def _fill_to_dict(f: SlotFill) -> dict:
    return {
        "slot": f.slot,
        "spans": [[sp.segment_id, sp.start, sp.end] for sp in f.spans],
        "text": f.text,
        "implicit": f.implicit,
    }


def _fill_from_dict(d: Mapping) -> SlotFill:
    return SlotFill(
        slot=d["slot"],
        spans=tuple(Span(sp[0], sp[1], sp[2]) for sp in d["spans"]),
        text=d["text"],
        implicit=bool(d["implicit"]),
    )


def annotation_to_dict(a: EarAnnotation) -> dict:
    return {
        "relation_id": a.relation_id,
        "annotator": a.annotator,
        "stage": a.stage,
        "pattern_id": a.pattern_id,
        "fills": [_fill_to_dict(f) for f in a.fills],
        "note": a.note,
    }


def annotation_from_dict(d: Mapping) -> EarAnnotation:
    return EarAnnotation(
        relation_id=d["relation_id"],
        annotator=d["annotator"],
        stage=int(d["stage"]),
        pattern_id=d["pattern_id"],
        fills=tuple(_fill_from_dict(f) for f in d.get("fills", ())),
        note=d.get("note"),
    )


def project_to_dict(project: Project) -> dict:
    return {
        "schema": PROJECT_SCHEMA,
        "schema_version": PROJECT_SCHEMA_VERSION,
        "corpus": [_microtext_to_dict(mt) for mt in project.corpus],
        "annotators": list(project.annotators),
        "annotations": [annotation_to_dict(a) for a in project.annotations],
        "cross_checks": [
            {"relation_id": c.relation_id, "annotator": c.annotator, "response": c.response}
            for c in project.cross_checks
        ],
        "resolutions": [
            {
                "relation_id": r.relation_id,
                "stage": r.stage,
                "outcome": r.outcome,
                "chosen": list(r.chosen),
                "rng_seed": r.rng_seed,
            }
            for r in project.resolutions
        ],
        "clue_tags": [
            {
                "relation_id": t.relation_id,
                "clue_kind": t.clue_kind,
                "spans": [[sp.segment_id, sp.start, sp.end] for sp in t.spans],
                "note": t.note,
            }
            for t in project.clue_tags
        ],
        "split": dict(sorted(project.split.items())),
        "seed": project.seed,
        "revision": project.revision,
    }


def project_from_dict(doc: Mapping) -> Project:
    if not isinstance(doc, Mapping) or doc.get("schema") != PROJECT_SCHEMA:
        raise ProjectFormatError("not a project document")
    if doc.get("schema_version") != PROJECT_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported project schema version {doc.get('schema_version')!r}"
        )
    try:
        return Project(
            corpus=tuple(_microtext_from_dict(m) for m in doc["corpus"]),
            annotators=tuple(doc["annotators"]),
            annotations=tuple(annotation_from_dict(a) for a in doc["annotations"]),
            cross_checks=tuple(
                CrossCheckResponse(c["relation_id"], c["annotator"], c["response"])
                for c in doc["cross_checks"]
            ),
            resolutions=tuple(
                Resolution(
                    r["relation_id"],
                    int(r["stage"]),
                    r["outcome"],
                    tuple(r.get("chosen", ())),
                    r.get("rng_seed"),
                )
                for r in doc["resolutions"]
            ),
            clue_tags=tuple(
                ClueTag(
                    t["relation_id"],
                    t["clue_kind"],
                    tuple(Span(sp[0], sp[1], sp[2]) for sp in t.get("spans", ())),
                    t.get("note"),
                )
                for t in doc.get("clue_tags", ())
            ),
            split=dict(doc["split"]),
            seed=int(doc.get("seed", DEFAULT_SEED)),
            revision=int(doc.get("revision", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProjectFormatError(f"bad project document: {exc}") from None


def save_project(project: Project, path: str | Path) -> None:
    """Write a project atomically (temp file + rename, fsynced)."""
    path = Path(path)
    payload = json.dumps(project_to_dict(project), indent=2, sort_keys=True) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    dir_fd = os.open(path.parent, os.O_RDONLY)
    try:
        os.fsync(dir_fd)
    finally:
        os.close(dir_fd)


def load_project(path: str | Path) -> Project:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProjectFormatError(f"unreadable project file: {exc}") from None
    return project_from_dict(doc)
