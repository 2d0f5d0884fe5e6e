// Annotation session state. The server is the single source of truth:
// every mutation goes through the API and the state is rebuilt from the
// response, so nothing client-side can outlive a conflicting write.

import { submitWithRetry, type ServiceClient } from "./api.js";
import type {
  Annotation,
  Microtext,
  Pattern,
  Relation,
  SlotFill,
  WorkItem,
} from "./types.js";
import { flatPatterns, pickerPatterns, type PickerModel } from "./picker.js";
import { localRelationId, type FillDraft } from "./selection.js";

export interface StageContext {
  stage: 1 | 2 | 3;
  // stage 2 review shows exactly the counterpart annotation; stage 3
  // shows both; stage 1 is blind and must hold neither
  counterpart: Annotation | null;
  bothAnnotations: Annotation[];
}

export interface ViewState {
  projectId: string;
  annotator: string;
  revision: number;
  document: Microtext | null;
  relationId: string | null;
  picker: PickerModel;
  selectedPattern: Pattern | null;
  drafts: Map<string, FillDraft>;
  note: string;
  context: StageContext;
  banner: string | null;
  warnings: string[];
}

export function initialState(projectId: string, annotator: string): ViewState {
  return {
    projectId,
    annotator,
    revision: 0,
    document: null,
    relationId: null,
    picker: { groups: [], error: null },
    selectedPattern: null,
    drafts: new Map(),
    note: "",
    context: { stage: 1, counterpart: null, bothAnnotations: [] },
    banner: null,
    warnings: [],
  };
}

// Stage context from a queue item. Whatever the payload carried, a
// stage-1 item never yields a counterpart: blindness is enforced here
// as well as on the server.
export function stageContextFor(item: WorkItem): StageContext {
  if (item.stage === 1) {
    return { stage: 1, counterpart: null, bothAnnotations: [] };
  }
  if (item.stage === 2) {
    return {
      stage: 2,
      counterpart: item.counterpart ?? null,
      bothAnnotations: [],
    };
  }
  return { stage: 3, counterpart: null, bothAnnotations: item.annotations ?? [] };
}

export function relationOf(state: ViewState): Relation | null {
  if (!state.document || !state.relationId) return null;
  const local = localRelationId(state.document, state.relationId);
  return state.document.relations.find((r) => r.id === local) ?? null;
}

export function openRelation(
  state: ViewState,
  catalog: Pattern[],
  document: Microtext,
  item: WorkItem,
): ViewState {
  const local = localRelationId(document, item.relation_id);
  const relation = document.relations.find((r) => r.id === local);
  const picker = relation
    ? pickerPatterns(catalog, relation)
    : { groups: [], error: `unknown relation ${item.relation_id}` };
  return {
    ...state,
    document,
    relationId: item.relation_id,
    picker,
    selectedPattern: null,
    drafts: new Map(),
    note: "",
    context: stageContextFor(item),
    banner: picker.error,
    warnings: [],
  };
}

export function selectPattern(state: ViewState, pattern: Pattern): ViewState {
  if (!flatPatterns(state.picker).some((p) => p.id === pattern.id)) {
    return { ...state, banner: `pattern ${pattern.id} not selectable here` };
  }
  return { ...state, selectedPattern: pattern, drafts: new Map(), banner: null };
}

export function setDraft(state: ViewState, draft: FillDraft): ViewState {
  const pattern = state.selectedPattern;
  if (!pattern || !pattern.slots.some((s) => s.name === draft.fill.slot)) {
    return { ...state, banner: `no active slot ${draft.fill.slot}` };
  }
  const drafts = new Map(state.drafts);
  drafts.set(draft.fill.slot, draft);
  return {
    ...state,
    drafts,
    warnings: [...drafts.values()].flatMap((d) => d.warnings),
    banner: null,
  };
}

export function draftComplete(state: ViewState): boolean {
  const pattern = state.selectedPattern;
  if (!pattern || !state.relationId) return false;
  return pattern.slots.every((s) => state.drafts.has(s.name));
}

export function annotationFromState(state: ViewState): Annotation {
  const pattern = state.selectedPattern;
  if (!pattern || !state.relationId) {
    throw new Error("no pattern selected");
  }
  const fills: SlotFill[] = pattern.slots.map((s) => {
    const draft = state.drafts.get(s.name);
    if (!draft) throw new Error(`slot ${s.name} not filled`);
    return draft.fill;
  });
  return {
    relation_id: state.relationId,
    annotator: state.annotator,
    stage: state.context.stage,
    pattern_id: pattern.id,
    fills,
    note: state.note === "" ? null : state.note,
  };
}

// Submit the drafted annotation; on a stale revision the project is
// refetched and the submit retried, per the optimistic-versioning
// contract.
export async function submitAnnotation(
  client: ServiceClient,
  state: ViewState,
): Promise<{ state: ViewState; warnings: string[] }> {
  const annotation = annotationFromState(state);
  const result = await submitWithRetry(
    async () => (await client.getProject(state.projectId)).revision,
    (revision) => client.postAnnotation(state.projectId, revision, annotation),
  );
  const warnings = result.diagnostics
    .filter((d) => d.severity === "warning")
    .map((d) => d.message);
  return {
    state: { ...state, revision: result.revision, warnings },
    warnings,
  };
}

export async function submitCrossCheck(
  client: ServiceClient,
  state: ViewState,
  response: "yes" | "no" | "unsure",
): Promise<ViewState> {
  if (!state.relationId) throw new Error("no relation open");
  const relationId = state.relationId;
  const result = await submitWithRetry(
    async () => (await client.getProject(state.projectId)).revision,
    (revision) =>
      client.postCrossCheck(
        state.projectId,
        revision,
        relationId,
        state.annotator,
        response,
      ),
  );
  return { ...state, revision: result.revision };
}

export async function submitResolution(
  client: ServiceClient,
  state: ViewState,
  decision: "accept" | "both" | "reject",
  acceptedAnnotator?: string,
): Promise<{ state: ViewState; rngSeed: number | null }> {
  if (!state.relationId) throw new Error("no relation open");
  const relationId = state.relationId;
  const result = await submitWithRetry(
    async () => (await client.getProject(state.projectId)).revision,
    (revision) =>
      client.postResolution(
        state.projectId,
        revision,
        relationId,
        decision,
        acceptedAnnotator,
      ),
  );
  return {
    state: { ...state, revision: result.revision },
    rngSeed: result.resolution.rng_seed,
  };
}
