"""Standoff annotation parsing (.ann files paired with a .txt document).

The line grammar is the usual tab-separated one:

    T<i>\\t<LABEL> <start> <end>[;<start> <end>]*\\t<surface text>
    R<i>\\t<LABEL> Arg1:<id> Arg2:<id>
    E<i>\\t<LABEL>:<trigger id> [<role>:<id> ...]
    A<i>\\t<NAME> <target id> [<value>]
    #<i>\\t<KIND> <target id>\\t<free text>

Explanation annotations are encoded on top of it: an event whose label
is a pattern id groups the trigger span with role-labelled slot spans;
``TargetRelation`` attributes bind the event to a relation id;
``AnnotatorNotes`` notes attach free text; ``Slot-<name>`` notes carry
implicit (span-less) slot fills. A degenerate file with one
pattern-labelled span plus bare slot spans and no event is also
accepted. Lines of unknown shape are kept verbatim as extras rather
than rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .corpus import EarAnnotation, Microtext, SlotFill, Span, relation_key
from .patterns import Catalog, SLOT_NAMES


class BratFormatError(ValueError):
    """Raised when a standoff line violates the grammar or the text."""


@dataclass(frozen=True)
class TextBound:
    id: str
    label: str
    spans: tuple[tuple[int, int], ...]
    text: str


@dataclass(frozen=True)
class BratRelation:
    id: str
    label: str
    args: tuple[tuple[str, str], ...]  # (role, target id)


@dataclass(frozen=True)
class BratEvent:
    id: str
    label: str
    trigger: str
    args: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class BratAttribute:
    id: str
    name: str
    target: str
    value: str | None = None


@dataclass(frozen=True)
class BratNote:
    id: str
    kind: str
    target: str
    text: str


@dataclass(frozen=True)
class StandoffDocument:
    text_bounds: tuple[TextBound, ...] = ()
    relations: tuple[BratRelation, ...] = ()
    events: tuple[BratEvent, ...] = ()
    attributes: tuple[BratAttribute, ...] = ()
    notes: tuple[BratNote, ...] = ()
    extras: tuple[str, ...] = ()

    def ids(self) -> set[str]:
        out = {t.id for t in self.text_bounds}
        out |= {r.id for r in self.relations}
        out |= {e.id for e in self.events}
        out |= {a.id for a in self.attributes}
        return out


_SPAN_PART = re.compile(r"^(\d+) (\d+)$")


def parse_standoff(ann_text: str, doc_text: str) -> StandoffDocument:
    """Parse standoff lines, validating every span against the document."""
    text_bounds: list[TextBound] = []
    relations: list[BratRelation] = []
    events: list[BratEvent] = []
    attributes: list[BratAttribute] = []
    notes: list[BratNote] = []
    extras: list[str] = []

    for lineno, raw in enumerate(ann_text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue

        def bail(message: str) -> BratFormatError:
            return BratFormatError(f"line {lineno}: {message}: {line!r}")

        fields = line.split("\t")
        head = fields[0]
        if not head:
            extras.append(line)
            continue

        kind = head[0]
        if kind == "T":
            if len(fields) < 3:
                raise bail("text-bound line needs id, label+offsets, and text")
            body, surface = fields[1], "\t".join(fields[2:])
            label, _, offsets = body.partition(" ")
            spans: list[tuple[int, int]] = []
            for part in offsets.split(";"):
                m = _SPAN_PART.match(part.strip())
                if not m:
                    raise bail(f"bad offsets {offsets!r}")
                start, end = int(m.group(1)), int(m.group(2))
                if not (0 <= start < end <= len(doc_text)):
                    raise bail(f"offsets {start}..{end} out of range")
                spans.append((start, end))
            expected = " ".join(doc_text[s:e] for s, e in spans)
            if expected != surface:
                raise bail(
                    f"surface text {surface!r} does not match document text {expected!r}"
                )
            text_bounds.append(TextBound(head, label, tuple(spans), surface))
        elif kind == "R":
            if len(fields) < 2:
                raise bail("relation line needs arguments")
            parts = fields[1].split()
            if len(parts) < 3:
                raise bail("relation line needs a label and two arguments")
            args = []
            for p in parts[1:]:
                role, sep, ref = p.partition(":")
                if not sep:
                    raise bail(f"bad relation argument {p!r}")
                args.append((role, ref))
            relations.append(BratRelation(head, parts[0], tuple(args)))
        elif kind == "E":
            if len(fields) < 2:
                raise bail("event line needs arguments")
            parts = fields[1].split()
            label, sep, trigger = parts[0].partition(":")
            if not sep:
                raise bail("event line needs LABEL:TRIGGER")
            args = []
            for p in parts[1:]:
                role, sep, ref = p.partition(":")
                if not sep:
                    raise bail(f"bad event argument {p!r}")
                args.append((role, ref))
            events.append(BratEvent(head, label, trigger, tuple(args)))
        elif kind == "A" or kind == "M":
            parts = fields[1].split() if len(fields) > 1 else []
            if len(parts) < 2:
                raise bail("attribute line needs a name and a target")
            value = parts[2] if len(parts) > 2 else None
            attributes.append(BratAttribute(head, parts[0], parts[1], value))
        elif kind == "#":
            if len(fields) < 2:
                raise bail("note line needs a kind and a target")
            parts = fields[1].split()
            if len(parts) < 2:
                raise bail("note line needs a kind and a target")
            note_text = "\t".join(fields[2:]) if len(fields) > 2 else ""
            notes.append(BratNote(head, parts[0], parts[1], note_text))
        else:
            extras.append(line)

    doc = StandoffDocument(
        tuple(text_bounds),
        tuple(relations),
        tuple(events),
        tuple(attributes),
        tuple(notes),
        tuple(extras),
    )

    known = doc.ids()
    for rel in doc.relations:
        for _, ref in rel.args:
            if ref not in known:
                raise BratFormatError(f"{rel.id}: orphan reference {ref!r}")
    for ev in doc.events:
        if ev.trigger not in known:
            raise BratFormatError(f"{ev.id}: orphan trigger {ev.trigger!r}")
        for _, ref in ev.args:
            if ref not in known:
                raise BratFormatError(f"{ev.id}: orphan reference {ref!r}")
    for attr in doc.attributes:
        if attr.target not in known:
            raise BratFormatError(f"{attr.id}: orphan reference {attr.target!r}")
    for note in doc.notes:
        if note.target not in known:
            raise BratFormatError(f"{note.id}: orphan reference {note.target!r}")
    return doc


@dataclass(frozen=True)
class EarFragment:
    """One explanation pulled out of a standoff file.

    Offsets are document-level; the fragment still has to be resolved
    against a microtext to obtain segment-anchored fills and, when no
    explicit relation id was given, the relation itself.
    """

    pattern_id: str
    fills: tuple[tuple[str, tuple[tuple[int, int], ...], str], ...]  # slot, spans, text
    relation_id: str = ""
    annotator: str = ""
    stage: int = 1
    note: str | None = None
    trigger_span: tuple[int, int] | None = None


def ears_from_standoff(doc: StandoffDocument, catalog: Catalog) -> list[EarFragment]:
    """Interpret a parsed standoff document as explanation fragments."""
    tb_by_id = {t.id: t for t in doc.text_bounds}
    attrs_by_target: dict[str, list[BratAttribute]] = {}
    for a in doc.attributes:
        attrs_by_target.setdefault(a.target, []).append(a)
    notes_by_target: dict[str, list[BratNote]] = {}
    for n in doc.notes:
        notes_by_target.setdefault(n.target, []).append(n)

    def build(
        anchor_id: str, pattern_id: str, trigger: TextBound | None, slot_tbs: Iterable[TextBound]
    ) -> EarFragment:
        fills: list[tuple[str, tuple[tuple[int, int], ...], str]] = []
        for tb in slot_tbs:
            if tb.label not in SLOT_NAMES:
                raise BratFormatError(
                    f"{anchor_id}: argument {tb.id} has non-slot label {tb.label!r}"
                )
            fills.append((tb.label, tb.spans, tb.text))
        relation_id = ""
        annotator = ""
        stage = 1
        for attr in attrs_by_target.get(anchor_id, ()):
            if attr.name == "TargetRelation" and attr.value:
                relation_id = attr.value
            elif attr.name == "Annotator" and attr.value:
                annotator = attr.value
            elif attr.name == "Stage" and attr.value:
                try:
                    stage = int(attr.value)
                except ValueError:
                    raise BratFormatError(f"{attr.id}: bad stage {attr.value!r}") from None
        note = None
        for n in notes_by_target.get(anchor_id, ()):
            if n.kind == "AnnotatorNotes":
                note = n.text
            elif n.kind.startswith("Slot-"):
                slot = n.kind[len("Slot-") :]
                if slot not in SLOT_NAMES:
                    raise BratFormatError(f"{n.id}: unknown slot note {n.kind!r}")
                fills.append((slot, (), n.text))
        return EarFragment(
            pattern_id=pattern_id,
            fills=tuple(fills),
            relation_id=relation_id,
            annotator=annotator,
            stage=stage,
            note=note,
            trigger_span=trigger.spans[0] if trigger and trigger.spans else None,
        )

    fragments: list[EarFragment] = []
    event_triggers = set()
    for ev in doc.events:
        if ev.label not in catalog:
            continue
        trigger = tb_by_id.get(ev.trigger)
        event_triggers.add(ev.trigger)
        slot_tbs = []
        for role, ref in ev.args:
            tb = tb_by_id.get(ref)
            if tb is None:
                raise BratFormatError(f"{ev.id}: argument {ref!r} is not a text span")
            if role not in SLOT_NAMES:
                raise BratFormatError(f"{ev.id}: unknown slot role {role!r}")
            if tb.label != role:
                # role wins; the span label is advisory in event form
                tb = TextBound(tb.id, role, tb.spans, tb.text)
            slot_tbs.append(tb)
        fragments.append(build(ev.id, ev.label, trigger, slot_tbs))

    if not doc.events:
        pattern_tbs = [t for t in doc.text_bounds if t.label in catalog]
        slot_tbs = [t for t in doc.text_bounds if t.label in SLOT_NAMES]
        if len(pattern_tbs) == 1:
            anchor = pattern_tbs[0]
            fragments.append(build(anchor.id, anchor.label, anchor, slot_tbs))
        elif len(pattern_tbs) > 1:
            raise BratFormatError(
                "multiple pattern spans without events; group them with E lines"
            )
    return fragments


def _segment_spans(mt: Microtext, start: int, end: int) -> tuple[Span, ...]:
    """Clip a document-level span to the segments it touches."""
    out: list[Span] = []
    for seg in mt.segments:
        s, e = max(start, seg.start), min(end, seg.end)
        if s < e:
            out.append(Span(seg.id, s, e))
    if not out:
        raise BratFormatError(f"span {start}..{end} covers no segment")
    return tuple(out)


def resolve_fragment(
    fragment: EarFragment,
    mt: Microtext,
    catalog: Catalog,
    annotator: str = "",
    stage: int | None = None,
) -> EarAnnotation:
    """Anchor a fragment to a microtext, producing a checked annotation.

    The relation comes from the fragment's explicit id when present;
    otherwise the trigger span must sit inside the source segment of
    exactly one relation the pattern can explain.
    """
    pattern = catalog.get(fragment.pattern_id)
    rid = fragment.relation_id
    if not rid:
        if fragment.trigger_span is None:
            raise BratFormatError(
                f"{fragment.pattern_id}: no relation id and no trigger span to locate one"
            )
        start, end = fragment.trigger_span
        candidates = []
        for rel in mt.relations:
            if pattern.relation_type is not None and rel.rel_type is not pattern.relation_type:
                continue
            for sid in rel.source_set:
                seg = mt.segment(sid)
                if start < seg.end and end > seg.start:
                    candidates.append(rel.id)
                    break
        if len(candidates) != 1:
            raise BratFormatError(
                f"{fragment.pattern_id}: trigger span matches "
                f"{len(candidates)} relations {candidates!r}; add a TargetRelation attribute"
            )
        rid = candidates[0]

    fills = []
    for slot, spans, text in fragment.fills:
        if spans:
            anchored: list[Span] = []
            for start, end in spans:
                anchored.extend(_segment_spans(mt, start, end))
            fills.append(SlotFill(slot=slot, spans=tuple(anchored), text=text))
        else:
            fills.append(SlotFill(slot=slot, spans=(), text=text, implicit=True))

    return EarAnnotation(
        relation_id=relation_key(mt.id, rid),
        annotator=annotator or fragment.annotator,
        stage=stage if stage is not None else fragment.stage,
        pattern_id=fragment.pattern_id,
        fills=tuple(fills),
        note=fragment.note,
    )


def parse_brat(ann_text: str, doc_text: str, catalog: Catalog) -> list[EarFragment]:
    """Parse a standoff document into explanation fragments."""
    return ears_from_standoff(parse_standoff(ann_text, doc_text), catalog)


def read_brat_annotations(
    mt: Microtext,
    ann_text: str,
    catalog: Catalog,
    annotator: str = "",
    stage: int | None = None,
) -> list[EarAnnotation]:
    """Parse and resolve a standoff file against one microtext."""
    fragments = parse_brat(ann_text, mt.text, catalog)
    return [resolve_fragment(f, mt, catalog, annotator=annotator, stage=stage) for f in fragments]
