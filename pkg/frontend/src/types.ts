// Shapes of the service responses. The service is the single source of
// truth; the client renders these payloads verbatim and never derives
// prior quantities on its own.

export interface NodeView {
  name: string;
  children: string[];
  parent: string | null;
  kind: string;
  weight_label: string | null;
  variance_label: string | null;
  label: string;
}

export interface TreeView {
  tree: string;
  roots: string[];
  components: string[];
  parameters: string[];
  nodes: NodeView[];
}

export interface SessionCreated extends TreeView {
  session: string;
  notes: string[];
}

export interface TreeEdited extends TreeView {
  notes: string[];
}

export interface SummaryView {
  summary: string;
  print: string;
  parameters: string[];
  likelihood: string;
  formula: string;
}

export interface GuideQuestion {
  id: string;
  node: string;
  text: string;
  kind: "choice" | "number";
  options: string[];
  note: string | null;
}

export type GuideState =
  | { done: false; question: GuideQuestion }
  | ({ done: true } & SummaryView);

export interface DensityGrid {
  parameter: string;
  scale: string;
  x: number[];
  density: number[];
}

export interface PriorDraws {
  n: number;
  pinned_roots: string[];
  draws: Record<string, number[]>;
}

export interface JobStarted {
  job: string;
}

export interface SummaryRow {
  param: string;
  mean: number;
  median: number;
  sd: number;
}

export interface InferenceOutcome {
  acceptance_rate: number;
  n_draws: number;
  prior_only: boolean;
  rows: SummaryRow[];
  text: string;
}

export interface JobStatus {
  status: "running" | "done" | "failed";
  result?: InferenceOutcome;
  error?: string;
}

export interface ErrorEnvelope {
  error: { code: string; message: string };
}

export function isErrorEnvelope(body: unknown): body is ErrorEnvelope {
  if (typeof body !== "object" || body === null) return false;
  const err = (body as { error?: unknown }).error;
  return (
    typeof err === "object" &&
    err !== null &&
    typeof (err as { code?: unknown }).code === "string" &&
    typeof (err as { message?: unknown }).message === "string"
  );
}
