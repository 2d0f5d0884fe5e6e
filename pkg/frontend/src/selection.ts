// Span selection: turning a raw text selection into slot-fill spans the
// service will accept. The API counts offsets in Unicode code points,
// while DOM selections arrive in UTF-16 code units, so both snapping
// and conversion live here.

import type { Microtext, Relation, SlotFill, WireSpan } from "./types.js";

// UTF-16 index -> code-point index (also snaps into the middle of a
// surrogate pair back to the pair's start).
export function utf16ToCodePoint(text: string, utf16Index: number): number {
  let points = 0;
  let i = 0;
  while (i < Math.min(utf16Index, text.length)) {
    const code = text.codePointAt(i)!;
    const width = code > 0xffff ? 2 : 1;
    if (i + width > utf16Index) break; // index split a surrogate pair
    i += width;
    points += 1;
  }
  return points;
}

export function codePointToUtf16(text: string, pointIndex: number): number {
  let points = 0;
  let i = 0;
  while (i < text.length && points < pointIndex) {
    const code = text.codePointAt(i)!;
    i += code > 0xffff ? 2 : 1;
    points += 1;
  }
  return i;
}

export interface SnappedSelection {
  start: number; // code points
  end: number;
  text: string;
}

// Trim surrounding whitespace and snap to whole code points. Returns
// null when nothing selectable remains or the range leaves the document.
export function snapSelection(
  docText: string,
  utf16Start: number,
  utf16End: number,
): SnappedSelection | null {
  if (utf16Start > utf16End) [utf16Start, utf16End] = [utf16End, utf16Start];
  if (utf16Start < 0 || utf16End > docText.length) return null;

  let start = utf16ToCodePoint(docText, utf16Start);
  let end = utf16ToCodePoint(docText, utf16End);
  const points = Array.from(docText);
  while (start < end && /\s/u.test(points[start]!)) start += 1;
  while (end > start && /\s/u.test(points[end - 1]!)) end -= 1;
  if (start >= end) return null;
  return { start, end, text: points.slice(start, end).join("") };
}

// Split a document-level range into per-segment spans, dropping the
// joining whitespace between segments. Empty result means the range
// touched no segment text.
export function spansForSelection(
  mt: Microtext,
  selection: { start: number; end: number },
): WireSpan[] {
  const spans: WireSpan[] = [];
  for (const segment of mt.segments) {
    const start = Math.max(selection.start, segment.start);
    const end = Math.min(selection.end, segment.end);
    if (start < end) spans.push([segment.id, start, end]);
  }
  return spans;
}

export function spanText(mt: Microtext, spans: WireSpan[]): string {
  const points = Array.from(mt.text);
  return spans.map(([, start, end]) => points.slice(start, end).join("")).join(" ");
}

// Segments taking part in a relation, following undercut targets down
// to their segments.
export function participants(mt: Microtext, relationId: string): string[] {
  const relations = new Map(mt.relations.map((r) => [r.id, r]));
  const segmentIds = new Set(mt.segments.map((s) => s.id));
  const seen: string[] = [];
  const visit = (rid: string): void => {
    const rel = relations.get(rid);
    if (!rel) return;
    for (const sid of [rel.source, ...rel.extra_sources]) {
      if (segmentIds.has(sid) && !seen.includes(sid)) seen.push(sid);
    }
    if (segmentIds.has(rel.target)) {
      if (!seen.includes(rel.target)) seen.push(rel.target);
    } else {
      visit(rel.target);
    }
  };
  visit(localRelationId(mt, relationId));
  return seen;
}

export function localRelationId(mt: Microtext, relationId: string): string {
  const prefix = `${mt.id}/`;
  return relationId.startsWith(prefix) ? relationId.slice(prefix.length) : relationId;
}

export interface FillDraft {
  fill: SlotFill;
  warnings: string[];
}

// Span-anchored draft from a snapped selection; warns (but does not
// block) when a span lands outside the relation's participating
// segments, the classic adjacent-segment slip.
export function draftFromSelection(
  mt: Microtext,
  relationId: string,
  slot: string,
  selection: SnappedSelection,
): FillDraft {
  const spans = spansForSelection(mt, selection);
  if (spans.length === 0) {
    throw new Error("selection covers no segment text");
  }
  const inside = new Set(participants(mt, relationId));
  const warnings: string[] = [];
  for (const [segmentId] of spans) {
    if (!inside.has(segmentId)) {
      warnings.push(
        `slot ${slot}: span in segment ${segmentId}, which does not take part in this relation`,
      );
    }
  }
  return {
    fill: { slot, spans, text: spanText(mt, spans), implicit: false },
    warnings,
  };
}

export function implicitDraft(slot: string, text: string): FillDraft {
  const trimmed = text.trim();
  return {
    fill: { slot, spans: [], text: trimmed, implicit: true },
    warnings: trimmed === "" ? [`slot ${slot}: implicit fill is empty`] : [],
  };
}
