// Wire types mirroring the annotation service's JSON payloads.
// Field names are snake_case because that is exactly what the API emits.

export type RelationType = "support" | "rebuttal" | "undercut";

export type PatternFamily =
  | "consequences"
  | "analogy"
  | "presupposition"
  | "proposition"
  | "quantifier"
  | "other";

export interface SlotSpec {
  name: string;
  role: string;
  anchored_side: "source" | "target" | "either" | "relation";
}

export interface AcParams {
  claim: "good" | "bad";
  val_y: "good" | "bad";
  antecedent: "happens" | "not_happens";
  causality: "promote" | "suppress";
}

export interface Pattern {
  id: string;
  family: PatternFamily;
  relation_type: RelationType | null;
  slots: SlotSpec[];
  ac: AcParams | null;
  template: string;
  algebra_exception: boolean;
}

export interface Segment {
  id: string;
  text: string;
  start: number;
  end: number;
}

export interface Relation {
  id: string;
  source: string;
  target: string;
  rel_type: RelationType;
  extra_sources: string[];
}

export interface Microtext {
  id: string;
  topic_question: string;
  text: string;
  segments: Segment[];
  relations: Relation[];
}

// spans are [segment id, start, end], offsets in Unicode code points
export type WireSpan = [string, number, number];

export interface SlotFill {
  slot: string;
  spans: WireSpan[];
  text: string;
  implicit: boolean;
}

export interface Annotation {
  relation_id: string;
  annotator: string;
  stage: number;
  pattern_id: string;
  fills: SlotFill[];
  note: string | null;
}

export interface ProjectDoc {
  corpus: Microtext[];
  annotators: string[];
  annotations: Annotation[];
  split: Record<string, string>;
  revision: number;
  seed: number;
}

export interface ProjectSummary {
  id: string;
  revision: number;
  texts: number;
  annotators: string[];
}

export interface WorkItem {
  relation_id: string;
  text_id: string;
  stage: number;
  annotator: string;
  status: "pending" | "done";
  counterpart?: Annotation | null;
  annotations?: Annotation[];
}

export interface Diagnostic {
  severity: "error" | "warning";
  code: string;
  message: string;
  relation_id: string | null;
  slot: string | null;
}

export interface CoverageStats {
  covered: number;
  total: number;
  ratio: number | null;
}

export interface StageStats {
  stage: number;
  compared: number;
  settled: number;
  ratio: number | null;
  verdicts: Record<string, number>;
  kappa: number | null;
  coverage: CoverageStats;
}

export interface AgreementReport {
  annotators: string[];
  compared: number;
  kappa_mode: string;
  seed: number;
  stages: StageStats[];
  response_tallies: Record<string, Record<string, number>>;
}

export interface DistributionRow {
  label: string;
  group: string | null;
  counts: number[];
}

export interface DistributionTable {
  title: string;
  columns: string[];
  rows: DistributionRow[];
  totals: number[];
}

export interface Distributions {
  relation: DistributionTable;
  pattern: DistributionTable;
}
