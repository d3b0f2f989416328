import {
  DensityGrid,
  GuideState,
  InferenceOutcome,
  isErrorEnvelope,
  JobStarted,
  JobStatus,
  PriorDraws,
  SessionCreated,
  SummaryView,
  TreeEdited,
  TreeView,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the HTTP API. Every method returns the parsed
 * service payload unchanged; failures throw ServiceError carrying the
 * machine-readable code from the error envelope. */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ServiceError(response.status, "bad_response", "service sent no JSON");
    }
    if (!response.ok) {
      if (isErrorEnvelope(body)) {
        throw new ServiceError(response.status, body.error.code, body.error.message);
      }
      throw new ServiceError(response.status, "unknown", `HTTP ${response.status}`);
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(body: { example: string } | { bundle: unknown }): Promise<SessionCreated> {
    return this.post("/session", body);
  }

  tree(sid: string): Promise<TreeView> {
    return this.request(`/session/${sid}/tree`);
  }

  summary(sid: string): Promise<SummaryView> {
    return this.request(`/session/${sid}/summary`);
  }

  editTree(sid: string, tree: string): Promise<TreeEdited> {
    return this.post(`/session/${sid}/tree/edit`, { tree });
  }

  setNodePrior(
    sid: string,
    node: string,
    prior: string,
    param?: number[],
  ): Promise<TreeEdited> {
    const body: { prior: string; param?: number[] } = { prior };
    if (param !== undefined) body.param = param;
    return this.post(`/session/${sid}/node/${encodeURIComponent(node)}/prior`, body);
  }

  density(sid: string, node: string, child?: string): Promise<DensityGrid> {
    const query = child === undefined ? "" : `?child=${encodeURIComponent(child)}`;
    return this.request(`/session/${sid}/node/${encodeURIComponent(node)}/density${query}`);
  }

  guideStart(sid: string): Promise<GuideState> {
    return this.post(`/session/${sid}/guide/start`, {});
  }

  guideAnswer(sid: string, answer: string | number): Promise<GuideState> {
    return this.post(`/session/${sid}/guide/answer`, { answer });
  }

  samplePrior(sid: string, opts: { n?: number; seed?: number } = {}): Promise<PriorDraws> {
    return this.post(`/session/${sid}/sample-prior`, opts);
  }

  startInference(
    sid: string,
    opts: Partial<{
      iterations: number;
      warmup: number;
      chains: number;
      seed: number;
      latent_draws: number;
      prior_only: boolean;
    }> = {},
  ): Promise<JobStarted> {
    return this.post(`/session/${sid}/infer`, opts);
  }

  job(sid: string, jobId: string): Promise<JobStatus> {
    return this.request(`/session/${sid}/job/${jobId}`);
  }

  async waitForJob(
    sid: string,
    jobId: string,
    pollMs = 500,
    timeoutMs = 15 * 60 * 1000,
  ): Promise<InferenceOutcome> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.job(sid, jobId);
      if (status.status === "done" && status.result) return status.result;
      if (status.status === "failed") {
        throw new ServiceError(500, "job_failed", status.error ?? "inference failed");
      }
      if (Date.now() > deadline) {
        throw new ServiceError(504, "job_timeout", "inference did not finish in time");
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
