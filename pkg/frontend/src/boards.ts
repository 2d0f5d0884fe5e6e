// View models for the three stage boards and the live report panel.
// Pure functions over wire data; the DOM layer just renders these.

import type {
  AgreementReport,
  Annotation,
  DistributionTable,
  Microtext,
  Pattern,
  WorkItem,
} from "./types.js";
import { renderTemplate } from "./picker.js";
import { codePointToUtf16 } from "./selection.js";

export interface QueueBoard {
  stage: number;
  pending: WorkItem[];
  done: WorkItem[];
}

export function queueBoard(stage: number, items: WorkItem[]): QueueBoard {
  return {
    stage,
    pending: items.filter((i) => i.status === "pending"),
    done: items.filter((i) => i.status === "done"),
  };
}

export interface RenderedAnnotation {
  annotator: string;
  patternId: string;
  explanation: string;
  note: string | null;
}

export function renderAnnotation(
  catalog: Pattern[],
  annotation: Annotation,
): RenderedAnnotation {
  const pattern = catalog.find((p) => p.id === annotation.pattern_id);
  const fills: Record<string, string> = {};
  for (const fill of annotation.fills) fills[fill.slot] = fill.text;
  return {
    annotator: annotation.annotator,
    patternId: annotation.pattern_id,
    explanation: pattern
      ? renderTemplate(pattern, fills)
      : `unknown pattern ${annotation.pattern_id}`,
    note: annotation.note,
  };
}

export interface ReviewCard {
  relationId: string;
  counterpart: RenderedAnnotation | null;
  responses: Array<"yes" | "no" | "unsure">;
}

export function stage2Card(catalog: Pattern[], item: WorkItem): ReviewCard {
  return {
    relationId: item.relation_id,
    counterpart: item.counterpart ? renderAnnotation(catalog, item.counterpart) : null,
    responses: ["yes", "no", "unsure"],
  };
}

export interface AdjudicationCard {
  relationId: string;
  annotations: RenderedAnnotation[];
  decisions: Array<"accept" | "both" | "reject">;
}

export function stage3Card(catalog: Pattern[], item: WorkItem): AdjudicationCard {
  return {
    relationId: item.relation_id,
    annotations: (item.annotations ?? []).map((a) => renderAnnotation(catalog, a)),
    decisions: ["accept", "both", "reject"],
  };
}

// Highlight ranges (UTF-16 offsets, ready for DOM ranges) for one
// annotation's spans on its document.
export interface Highlight {
  slot: string;
  segmentId: string;
  start: number;
  end: number;
}

export function highlights(mt: Microtext, annotation: Annotation): Highlight[] {
  const out: Highlight[] = [];
  for (const fill of annotation.fills) {
    for (const [segmentId, start, end] of fill.spans) {
      out.push({
        slot: fill.slot,
        segmentId,
        start: codePointToUtf16(mt.text, start),
        end: codePointToUtf16(mt.text, end),
      });
    }
  }
  return out;
}

export interface ReportPanel {
  rows: Array<{
    stage: number;
    settledLabel: string;
    kappaLabel: string;
    coverageLabel: string;
  }>;
  chart: { labels: string[]; series: Array<{ name: string; values: number[] }> };
}

const pct = (x: number | null): string =>
  x === null ? "n/a" : `${(100 * x).toFixed(1)}%`;

export function reportPanel(report: AgreementReport): ReportPanel {
  const rows = report.stages.map((s) => ({
    stage: s.stage,
    settledLabel: `${s.settled}/${s.compared} (${pct(s.ratio)})`,
    kappaLabel: s.kappa === null ? "n/a" : s.kappa.toFixed(3),
    coverageLabel: `${s.coverage.covered}/${s.coverage.total} (${pct(s.coverage.ratio)})`,
  }));
  return {
    rows,
    chart: {
      labels: report.stages.map((s) => `stage ${s.stage}`),
      series: [
        { name: "settled", values: report.stages.map((s) => s.ratio ?? 0) },
        {
          name: "coverage",
          values: report.stages.map((s) => s.coverage.ratio ?? 0),
        },
        { name: "kappa", values: report.stages.map((s) => s.kappa ?? 0) },
      ],
    },
  };
}

export interface ChartData {
  labels: string[];
  series: Array<{ name: string; values: number[] }>;
}

export function distributionChart(table: DistributionTable): ChartData {
  return {
    labels: table.rows.map((r) => (r.group ? `${r.group}/${r.label}` : r.label)),
    series: table.columns.map((column, i) => ({
      name: column,
      values: table.rows.map((r) => r.counts[i] ?? 0),
    })),
  };
}
