import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { StaleRevisionError, submitWithRetry, type ServiceClient } from "../src/api.js";
import { draftFromSelection, implicitDraft, snapSelection } from "../src/selection.js";
import {
  annotationFromState,
  draftComplete,
  initialState,
  openRelation,
  selectPattern,
  setDraft,
  stageContextFor,
  submitAnnotation,
} from "../src/state.js";
import type { Annotation, Microtext, Pattern, WorkItem } from "../src/types.js";

const catalogPath = fileURLToPath(
  new URL("../../src/earkit/data/catalog.json", import.meta.url),
);
const catalog: Pattern[] = JSON.parse(readFileSync(catalogPath, "utf-8")).patterns;
const byId = (id: string) => catalog.find((p) => p.id === id)!;

const mt: Microtext = {
  id: "m1",
  topic_question: "t",
  text: "Claim sentence here. Rebuttal text follows.",
  segments: [
    { id: "e1", text: "Claim sentence here.", start: 0, end: 20 },
    { id: "e2", text: "Rebuttal text follows.", start: 21, end: 43 },
  ],
  relations: [
    { id: "c1", source: "e2", target: "e1", rel_type: "rebuttal", extra_sources: [] },
  ],
};

const counterpart: Annotation = {
  relation_id: "m1/c1",
  annotator: "ann2",
  stage: 1,
  pattern_id: "R05",
  fills: [],
  note: null,
};

const item = (stage: number, extra: Partial<WorkItem> = {}): WorkItem => ({
  relation_id: "m1/c1",
  text_id: "m1",
  stage,
  annotator: "ann1",
  status: "pending",
  ...extra,
});

describe("stage context blindness", () => {
  it("never exposes a counterpart at stage 1, even if a payload sneaks one in", () => {
    const context = stageContextFor(item(1, { counterpart }));
    expect(context.counterpart).toBeNull();
    expect(context.bothAnnotations).toEqual([]);
  });

  it("exposes exactly the counterpart at stage 2", () => {
    const context = stageContextFor(item(2, { counterpart }));
    expect(context.counterpart).toEqual(counterpart);
  });

  it("exposes both annotations at stage 3", () => {
    const context = stageContextFor(item(3, { annotations: [counterpart] }));
    expect(context.counterpart).toBeNull();
    expect(context.bothAnnotations).toEqual([counterpart]);
  });
});

describe("view state", () => {
  const opened = () =>
    openRelation(initialState("demo", "ann1"), catalog, mt, item(1));

  it("offers only patterns matching the relation type", () => {
    const state = opened();
    const ids = state.picker.groups.flatMap((g) => g.patterns.map((p) => p.id));
    expect(ids).toContain("R03");
    expect(ids).toContain("OTHER");
    expect(ids).not.toContain("S01");
    expect(ids).not.toContain("U01");
  });

  it("rejects selecting a pattern outside the picker", () => {
    const state = selectPattern(opened(), byId("S01"));
    expect(state.selectedPattern).toBeNull();
    expect(state.banner).toMatch(/not selectable/);
  });

  it("collects drafts until the slot set is complete", () => {
    let state = selectPattern(opened(), byId("R03"));
    expect(draftComplete(state)).toBe(false);
    const snapped = snapSelection(mt.text, 0, 14)!;
    state = setDraft(state, draftFromSelection(mt, "c1", "x", snapped));
    expect(draftComplete(state)).toBe(false);
    state = setDraft(state, implicitDraft("y", "weekend work"));
    expect(draftComplete(state)).toBe(true);
    const annotation = annotationFromState(state);
    expect(annotation.pattern_id).toBe("R03");
    expect(annotation.fills.map((f) => f.slot)).toEqual(["x", "y"]);
    expect(annotation.relation_id).toBe("m1/c1");
  });

  it("refuses drafts for slots the pattern does not declare", () => {
    const state = setDraft(
      selectPattern(opened(), byId("R03")),
      implicitDraft("q", "all"),
    );
    expect(state.drafts.size).toBe(0);
    expect(state.banner).toMatch(/no active slot/);
  });
});

function fakeClient(behavior: {
  revisions: number[];
  failuresBeforeAccept: number;
}): { client: ServiceClient; submitted: Array<{ revision: number }> } {
  const submitted: Array<{ revision: number }> = [];
  let failures = behavior.failuresBeforeAccept;
  let revisionIndex = 0;
  const client = {
    async getProject() {
      const revision =
        behavior.revisions[Math.min(revisionIndex++, behavior.revisions.length - 1)]!;
      return { id: "demo", revision, project: {} as never };
    },
    async postAnnotation(_id: string, revision: number) {
      submitted.push({ revision });
      if (failures > 0) {
        failures -= 1;
        throw new StaleRevisionError(409, []);
      }
      return { revision: revision + 1, diagnostics: [] };
    },
  } as Partial<ServiceClient> as ServiceClient;
  return { client, submitted };
}

describe("optimistic submission", () => {
  it("retries after a stale revision with a fresh fetch", async () => {
    const { client, submitted } = fakeClient({
      revisions: [3, 5],
      failuresBeforeAccept: 1,
    });
    let state = openRelation(initialState("demo", "ann1"), catalog, mt, item(1));
    state = selectPattern(state, byId("OTHER"));
    const result = await submitAnnotation(client, state);
    expect(submitted.map((s) => s.revision)).toEqual([3, 5]);
    expect(result.state.revision).toBe(6);
  });

  it("gives up after the retry budget", async () => {
    const { client } = fakeClient({ revisions: [1], failuresBeforeAccept: 99 });
    await expect(
      submitWithRetry(
        async () => (await client.getProject("demo")).revision,
        (revision) => client.postAnnotation("demo", revision, {} as never),
        2,
      ),
    ).rejects.toBeInstanceOf(StaleRevisionError);
  });
});
