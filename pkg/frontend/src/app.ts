import { ServiceClient, ServiceError } from "./api.js";
import { renderDensity, renderDensityError } from "./densityView.js";
import { renderGuide } from "./guideView.js";
import { renderError, renderNotes, renderSummary } from "./summaryView.js";
import { renderTree, renderTreeEditor } from "./treeView.js";
import {
  DensityGrid,
  GuideState,
  InferenceOutcome,
  SummaryView,
  TreeView,
} from "./types.js";

export type DensityState =
  | { kind: "grid"; grid: DensityGrid }
  | { kind: "refused"; code: string; message: string }
  | null;

export interface AppState {
  sid: string | null;
  tree: TreeView | null;
  summary: SummaryView | null;
  guide: GuideState | null;
  selected: string | null;
  density: DensityState;
  notes: string[];
  error: { code: string; message: string } | null;
  inference: InferenceOutcome | null;
  inferenceRunning: boolean;
}

export function initialState(): AppState {
  return {
    sid: null,
    tree: null,
    summary: null,
    guide: null,
    selected: null,
    density: null,
    notes: [],
    error: null,
    inference: null,
    inferenceRunning: false,
  };
}

// State transitions are pure so the update logic is testable without a DOM.

export function applyTreePayload(
  state: AppState,
  tree: TreeView,
  notes: string[] = [],
): AppState {
  const stillThere =
    state.selected !== null && tree.nodes.some((n) => n.name === state.selected);
  return {
    ...state,
    tree,
    notes,
    error: null,
    selected: stillThere ? state.selected : null,
    // prior choices may have changed, so any plotted density is stale
    density: null,
  };
}

export function applySummary(state: AppState, summary: SummaryView): AppState {
  return { ...state, summary };
}

export function applyGuide(state: AppState, guide: GuideState): AppState {
  const next: AppState = { ...state, guide, error: null };
  if (guide.done) {
    next.summary = {
      summary: guide.summary,
      print: guide.print,
      parameters: guide.parameters,
      likelihood: guide.likelihood,
      formula: guide.formula,
    };
  }
  return next;
}

export function applyDensity(
  state: AppState,
  selected: string,
  density: DensityState,
): AppState {
  return { ...state, selected, density };
}

export function applyError(state: AppState, code: string, message: string): AppState {
  return { ...state, error: { code, message } };
}

function asServiceError(err: unknown): { code: string; message: string } {
  if (err instanceof ServiceError) return { code: err.code, message: err.message };
  return { code: "client_error", message: String(err) };
}

/** DOM shell: owns the state, talks to the service, re-renders panels.
 * After every mutation the tree and summary are re-fetched; the service
 * stays the single source of truth. */
export class App {
  state = initialState();

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
  ) {
    root.addEventListener("click", (event) => void this.onClick(event));
  }

  private async onClick(event: Event): Promise<void> {
    const target = event.target as HTMLElement | null;
    if (target === null) return;
    const nodeEl = target.closest<HTMLElement>(".node[data-name]");
    if (nodeEl?.dataset.name) {
      await this.selectNode(nodeEl.dataset.name);
      return;
    }
    const answerEl = target.closest<HTMLElement>("button.answer[data-answer]");
    if (answerEl?.dataset.answer !== undefined) {
      await this.answer(answerEl.dataset.answer);
      return;
    }
    switch (target.id) {
      case "tree-apply": {
        const input = this.root.querySelector<HTMLInputElement>("#tree-input");
        if (input) await this.editTree(input.value);
        break;
      }
      case "guide-start":
        await this.startGuide();
        break;
      case "guide-submit": {
        const input = this.root.querySelector<HTMLInputElement>("#guide-number");
        if (input && input.value !== "") await this.answer(Number(input.value));
        break;
      }
      case "run-inference":
        await this.runInference();
        break;
      default: {
        const example = target.dataset.example;
        if (example !== undefined) await this.openExample(example);
      }
    }
  }

  async openExample(name: string): Promise<void> {
    try {
      const created = await this.client.createSession({ example: name });
      this.state = { ...initialState(), sid: created.session };
      this.state = applyTreePayload(this.state, created, created.notes);
      await this.refreshSummary();
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = applyError(this.state, code, message);
    }
    this.render();
  }

  private async refreshSummary(): Promise<void> {
    if (this.state.sid === null) return;
    this.state = applySummary(this.state, await this.client.summary(this.state.sid));
  }

  async refreshTree(): Promise<void> {
    if (this.state.sid === null) return;
    const tree = await this.client.tree(this.state.sid);
    this.state = applyTreePayload(this.state, tree, this.state.notes);
  }

  async selectNode(name: string): Promise<void> {
    if (this.state.sid === null) return;
    try {
      const grid = await this.client.density(this.state.sid, name);
      this.state = applyDensity(this.state, name, { kind: "grid", grid });
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = applyDensity(this.state, name, { kind: "refused", code, message });
    }
    this.render();
  }

  async editTree(tree: string): Promise<void> {
    if (this.state.sid === null) return;
    try {
      const edited = await this.client.editTree(this.state.sid, tree);
      this.state = applyTreePayload(this.state, edited, edited.notes);
      this.state = { ...this.state, guide: null };
      await this.refreshSummary();
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = applyError(this.state, code, message);
    }
    this.render();
  }

  async startGuide(): Promise<void> {
    if (this.state.sid === null) return;
    try {
      this.state = applyGuide(this.state, await this.client.guideStart(this.state.sid));
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = applyError(this.state, code, message);
    }
    this.render();
  }

  async answer(value: string | number): Promise<void> {
    if (this.state.sid === null) return;
    try {
      const next = await this.client.guideAnswer(this.state.sid, value);
      this.state = applyGuide(this.state, next);
      if (next.done) {
        // the finished walk changed the priors; re-fetch everything shown
        await this.refreshTree();
        if (this.state.selected !== null) await this.selectNode(this.state.selected);
      }
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = applyError(this.state, code, message);
    }
    this.render();
  }

  async runInference(): Promise<void> {
    const sid = this.state.sid;
    if (sid === null || this.state.inferenceRunning) return;
    this.state = { ...this.state, inferenceRunning: true, inference: null };
    this.render();
    try {
      const { job } = await this.client.startInference(sid);
      const outcome = await this.client.waitForJob(sid, job);
      this.state = { ...this.state, inference: outcome, inferenceRunning: false };
    } catch (err) {
      const { code, message } = asServiceError(err);
      this.state = { ...this.state, inferenceRunning: false };
      this.state = applyError(this.state, code, message);
    }
    this.render();
  }

  render(): void {
    this.root.innerHTML = renderApp(this.state);
  }
}

const EXAMPLES = ["model1", "latin", "wheat", "neonatal"];

export function renderApp(state: AppState): string {
  const header =
    `<header>` +
    `<h1>priorforest</h1>` +
    EXAMPLES.map(
      (name) => `<button type="button" data-example="${name}">${name}</button>`,
    ).join("") +
    (state.sid !== null ? `<span class="session">session ${state.sid}</span>` : "") +
    `</header>`;
  if (state.tree === null) {
    return (
      header +
      (state.error ? renderError(state.error.code, state.error.message) : "") +
      `<p class="hint">Open an example session to begin.</p>`
    );
  }
  const density =
    state.density === null
      ? `<p class="hint">Click a node to plot its prior.</p>`
      : state.density.kind === "grid"
        ? renderDensity(state.density.grid)
        : renderDensityError(state.density.code, state.density.message);
  const inference = state.inferenceRunning
    ? `<p class="hint">running the sampler...</p>`
    : state.inference !== null
      ? `<pre class="inference">${state.inference.text
          .replace(/&/g, "&amp;")
          .replace(/</g, "&lt;")}</pre>`
      : "";
  return (
    header +
    (state.error ? renderError(state.error.code, state.error.message) : "") +
    renderNotes(state.notes) +
    `<main>` +
    `<section class="panel tree-panel">` +
    renderTree(state.tree, state.selected ?? undefined) +
    renderTreeEditor(state.tree.tree, []) +
    `</section>` +
    `<section class="panel density-panel">${density}</section>` +
    `<section class="panel side-panel">` +
    renderGuide(state.guide) +
    renderSummary(state.summary) +
    `<button id="run-inference" type="button">Run inference</button>` +
    inference +
    `</section>` +
    `</main>`
  );
}
