// Browser entry point: wires the API client, stage boards, document
// view with span selection, and the live report panel together.

import { ApiClient } from "./api.js";
import {
  distributionChart,
  highlights,
  queueBoard,
  reportPanel,
  stage2Card,
  stage3Card,
} from "./boards.js";
import { barChart, clear, el } from "./dom.js";
import { templatePreview } from "./picker.js";
import {
  draftFromSelection,
  implicitDraft,
  snapSelection,
  utf16ToCodePoint,
  codePointToUtf16,
} from "./selection.js";
import {
  annotationFromState,
  draftComplete,
  initialState,
  openRelation,
  relationOf,
  selectPattern,
  setDraft,
  submitAnnotation,
  submitCrossCheck,
  submitResolution,
  type ViewState,
} from "./state.js";
import type { Microtext, Pattern, WorkItem } from "./types.js";

interface App {
  client: ApiClient;
  catalog: Pattern[];
  state: ViewState;
  items: WorkItem[];
  activeSlot: string | null;
}

const $ = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
};

function banner(message: string | null): void {
  const node = $("banner");
  clear(node);
  if (message) {
    node.append(el("div", { class: "banner-error" }, [message]));
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "http://127.0.0.1:8765";
  const token = params.get("token");
  const annotator = params.get("annotator") ?? "ann1";
  const client = new ApiClient(base, token);

  let catalog: Pattern[];
  try {
    catalog = await client.getCatalog();
  } catch (error) {
    banner(`cannot load the pattern catalog from ${base}: ${String(error)}`);
    return;
  }

  const projects = await client.listProjects();
  const first = projects[0];
  if (!first) {
    banner("no projects in the store");
    return;
  }
  const app: App = {
    client,
    catalog,
    state: initialState(first.id, annotator),
    items: [],
    activeSlot: null,
  };
  ($("annotator") as HTMLElement).textContent = `${annotator} @ ${first.id}`;
  for (const stage of [1, 2, 3] as const) {
    $(`tab-${stage}`).addEventListener("click", () => {
      void loadQueue(app, stage);
    });
  }
  await loadQueue(app, 1);
  await refreshReport(app);
}

async function loadQueue(app: App, stage: 1 | 2 | 3): Promise<void> {
  const { items } = await app.client.getQueue(
    app.state.projectId,
    app.state.annotator,
    stage,
  );
  app.items = items;
  app.state = { ...app.state, context: { ...app.state.context, stage } };
  const board = queueBoard(stage, items);
  const list = clear($("queue"));
  for (const item of [...board.pending, ...board.done]) {
    const button = el(
      "button",
      { class: `queue-item ${item.status}` },
      [`${item.relation_id} (${item.status})`],
    );
    button.addEventListener("click", () => {
      void openItem(app, item);
    });
    list.append(button);
  }
}

async function openItem(app: App, item: WorkItem): Promise<void> {
  const { project } = await app.client.getProject(app.state.projectId);
  const document_ = project.corpus.find((m) => m.id === item.text_id);
  if (!document_) {
    banner(`text ${item.text_id} not in project`);
    return;
  }
  app.state = openRelation(app.state, app.catalog, document_, item);
  banner(app.state.banner);
  renderDocument(app, document_);
  renderPicker(app);
  renderStagePanel(app, item);
}

function renderDocument(app: App, mt: Microtext): void {
  const host = clear($("document"));
  host.append(el("h3", {}, [mt.topic_question || mt.id]));
  const relation = relationOf(app.state);
  for (const segment of mt.segments) {
    const classes = ["segment"];
    if (relation) {
      if (segment.id === relation.source) classes.push("segment-source");
      if (segment.id === relation.target) classes.push("segment-target");
    }
    const span = el("span", { class: classes.join(" "), "data-segment": segment.id }, [
      mt.text.slice(
        codePointToUtf16(mt.text, segment.start),
        codePointToUtf16(mt.text, segment.end),
      ),
      " ",
    ]);
    host.append(span);
  }
  host.addEventListener("mouseup", () => onSelection(app, mt));
}

function onSelection(app: App, mt: Microtext): void {
  if (!app.activeSlot || !app.state.relationId) return;
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return;
  const text = selection.toString();
  const docStart = mt.text.indexOf(text);
  if (docStart < 0) return; // selection crossed the document boundary
  const snapped = snapSelection(mt.text, docStart, docStart + text.length);
  if (!snapped) return;
  try {
    const draft = draftFromSelection(mt, app.state.relationId, app.activeSlot, snapped);
    app.state = setDraft(app.state, draft);
    renderDrafts(app);
  } catch (error) {
    banner(String(error));
  }
}

function renderPicker(app: App): void {
  const host = clear($("picker"));
  for (const group of app.state.picker.groups) {
    host.append(el("h4", {}, [group.family]));
    for (const pattern of group.patterns) {
      const button = el("button", { class: "pattern" }, [
        el("strong", {}, [pattern.id]),
        " ",
        templatePreview(pattern),
      ]);
      button.addEventListener("click", () => {
        app.state = selectPattern(app.state, pattern);
        app.activeSlot = pattern.slots[0]?.name ?? null;
        renderDrafts(app);
      });
      host.append(button);
    }
  }
}

function renderDrafts(app: App): void {
  const pattern = app.state.selectedPattern;
  const host = clear($("slots"));
  if (!pattern) return;
  host.append(el("h4", {}, [`pattern ${pattern.id}`]));
  for (const slot of pattern.slots) {
    const draft = app.state.drafts.get(slot.name);
    const row = el("div", { class: "slot-row" }, [
      el("label", {}, [`${slot.name} (${slot.role}): `]),
      el("span", { class: "slot-text" }, [draft ? draft.fill.text : "⟨select text⟩"]),
    ]);
    const pick = el("button", {}, [app.activeSlot === slot.name ? "selecting…" : "select"]);
    pick.addEventListener("click", () => {
      app.activeSlot = slot.name;
      renderDrafts(app);
    });
    const implicitInput = el("input", {
      placeholder: "implicit fill text",
    }) as HTMLInputElement;
    const implicitButton = el("button", {}, ["implicit"]);
    implicitButton.addEventListener("click", () => {
      app.state = setDraft(app.state, implicitDraft(slot.name, implicitInput.value));
      renderDrafts(app);
    });
    row.append(pick, implicitInput, implicitButton);
    host.append(row);
  }
  const warnings = clear($("warnings"));
  for (const warning of app.state.warnings) {
    warnings.append(el("div", { class: "warning" }, [warning]));
  }
  const submit = el("button", { class: "submit" }, ["submit annotation"]);
  submit.addEventListener("click", () => {
    void (async () => {
      try {
        annotationFromState(app.state); // validates completeness
        const { state, warnings: accepted } = await submitAnnotation(
          app.client,
          app.state,
        );
        app.state = state;
        banner(accepted.length ? `accepted with warnings: ${accepted.join("; ")}` : null);
        await loadQueue(app, app.state.context.stage);
        await refreshReport(app);
        await showHighlights(app);
      } catch (error) {
        banner(String(error));
      }
    })();
  });
  if (!draftComplete(app.state)) submit.setAttribute("disabled", "disabled");
  host.append(submit);
}

async function showHighlights(app: App): Promise<void> {
  if (!app.state.document || !app.state.relationId) return;
  const { project } = await app.client.getProject(app.state.projectId);
  const mine = project.annotations.find(
    (a) =>
      a.relation_id === app.state.relationId &&
      a.annotator === app.state.annotator &&
      a.stage === app.state.context.stage,
  );
  if (!mine) return;
  const marks = highlights(app.state.document, mine);
  const host = $("document");
  for (const node of host.querySelectorAll(".segment")) {
    node.classList.remove("highlighted");
  }
  for (const mark of marks) {
    const node = host.querySelector(`[data-segment="${mark.segmentId}"]`);
    node?.classList.add("highlighted");
  }
}

function renderStagePanel(app: App, item: WorkItem): void {
  const host = clear($("stage-panel"));
  if (item.stage === 2) {
    const card = stage2Card(app.catalog, item);
    if (card.counterpart) {
      host.append(
        el("div", { class: "counterpart" }, [
          el("h4", {}, [`${card.counterpart.annotator} annotated:`]),
          el("p", {}, [card.counterpart.explanation]),
        ]),
      );
    }
    for (const response of card.responses) {
      const button = el("button", {}, [response]);
      button.addEventListener("click", () => {
        void (async () => {
          app.state = await submitCrossCheck(app.client, app.state, response);
          await loadQueue(app, 2);
          await refreshReport(app);
        })();
      });
      host.append(button);
    }
  } else if (item.stage === 3) {
    const card = stage3Card(app.catalog, item);
    for (const rendered of card.annotations) {
      host.append(
        el("div", { class: "candidate" }, [
          el("h4", {}, [rendered.annotator]),
          el("p", {}, [rendered.explanation]),
        ]),
      );
    }
    for (const decision of card.decisions) {
      const button = el("button", {}, [decision]);
      button.addEventListener("click", () => {
        void (async () => {
          const accepted =
            decision === "accept" ? card.annotations[0]?.annotator : undefined;
          const { state, rngSeed } = await submitResolution(
            app.client,
            app.state,
            decision,
            accepted,
          );
          app.state = state;
          banner(rngSeed === null ? null : `recorded random seed ${rngSeed}`);
          await loadQueue(app, 3);
          await refreshReport(app);
        })();
      });
      host.append(button);
    }
  }
}

async function refreshReport(app: App): Promise<void> {
  const report = await app.client.getReport(app.state.projectId);
  const panel = reportPanel(report);
  const host = clear($("report"));
  for (const row of panel.rows) {
    host.append(
      el("div", { class: "report-row" }, [
        `stage ${row.stage}: ${row.settledLabel} · kappa ${row.kappaLabel} · coverage ${row.coverageLabel}`,
      ]),
    );
  }
  host.append(barChart(panel.chart.labels, panel.chart.series));
  const distributions = await app.client.getDistributions(app.state.projectId);
  const chart = distributionChart(distributions.relation);
  host.append(barChart(chart.labels, chart.series));
}

window.addEventListener("DOMContentLoaded", () => {
  void boot().catch((error) => banner(String(error)));
});

export { utf16ToCodePoint };
