// HTTP client for the annotation service. Every mutation carries the
// project revision it was based on; a 409 means someone else wrote
// first, so callers refetch and retry (see submitWithRetry).

import type {
  AgreementReport,
  Annotation,
  Diagnostic,
  Distributions,
  Pattern,
  ProjectDoc,
  ProjectSummary,
  WorkItem,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  diagnostics: Diagnostic[];

  constructor(status: number, diagnostics: Diagnostic[], message?: string) {
    super(message ?? diagnostics.map((d) => d.message).join("; "));
    this.status = status;
    this.diagnostics = diagnostics;
  }
}

export class StaleRevisionError extends ApiError {}

async function raiseFor(response: Response): Promise<never> {
  let diagnostics: Diagnostic[] = [];
  try {
    const body = await response.json();
    if (Array.isArray(body.detail)) diagnostics = body.detail;
  } catch {
    // non-JSON error body; keep diagnostics empty
  }
  if (response.status === 409) {
    throw new StaleRevisionError(response.status, diagnostics);
  }
  throw new ApiError(response.status, diagnostics, `HTTP ${response.status}`);
}

// Public surface of the client; state logic depends on this interface
// so tests can substitute fakes.
export interface ServiceClient {
  getCatalog(): Promise<Pattern[]>;
  listProjects(): Promise<ProjectSummary[]>;
  getProject(
    id: string,
  ): Promise<{ id: string; revision: number; project: ProjectDoc }>;
  getQueue(
    id: string,
    annotator: string,
    stage: number,
  ): Promise<{ revision: number; items: WorkItem[] }>;
  postAnnotation(
    id: string,
    revision: number,
    annotation: Annotation,
  ): Promise<{ revision: number; diagnostics: Diagnostic[] }>;
  postCrossCheck(
    id: string,
    revision: number,
    relationId: string,
    annotator: string,
    response: "yes" | "no" | "unsure",
  ): Promise<{ revision: number }>;
  postResolution(
    id: string,
    revision: number,
    relationId: string,
    decision: "accept" | "both" | "reject",
    acceptedAnnotator?: string,
  ): Promise<{
    revision: number;
    resolution: { outcome: string; chosen: string[]; rng_seed: number | null };
  }>;
  getReport(id: string): Promise<AgreementReport>;
  getDistributions(id: string, stage?: number): Promise<Distributions>;
}

export class ApiClient implements ServiceClient {
  baseUrl: string;
  token: string | null;

  constructor(baseUrl: string, token: string | null = null) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.token = token;
  }

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Annotator-Token"] = this.token;
    return headers;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: this.headers(),
    });
    if (!response.ok) await raiseFor(response);
    return response.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (!response.ok) await raiseFor(response);
    return response.json() as Promise<T>;
  }

  async getCatalog(): Promise<Pattern[]> {
    const body = await this.get<{ patterns: Pattern[] }>("/catalog");
    return body.patterns;
  }

  async listProjects(): Promise<ProjectSummary[]> {
    const body = await this.get<{ projects: ProjectSummary[] }>("/projects");
    return body.projects;
  }

  async getProject(
    id: string,
  ): Promise<{ id: string; revision: number; project: ProjectDoc }> {
    return this.get(`/projects/${id}`);
  }

  async getQueue(
    id: string,
    annotator: string,
    stage: number,
  ): Promise<{ revision: number; items: WorkItem[] }> {
    const params = new URLSearchParams({
      annotator,
      stage: String(stage),
    });
    return this.get(`/projects/${id}/queue?${params}`);
  }

  async postAnnotation(
    id: string,
    revision: number,
    annotation: Annotation,
  ): Promise<{ revision: number; diagnostics: Diagnostic[] }> {
    return this.post(`/projects/${id}/annotations`, { revision, annotation });
  }

  async postCrossCheck(
    id: string,
    revision: number,
    relationId: string,
    annotator: string,
    response: "yes" | "no" | "unsure",
  ): Promise<{ revision: number }> {
    return this.post(`/projects/${id}/crosschecks`, {
      revision,
      relation_id: relationId,
      annotator,
      response,
    });
  }

  async postResolution(
    id: string,
    revision: number,
    relationId: string,
    decision: "accept" | "both" | "reject",
    acceptedAnnotator?: string,
  ): Promise<{
    revision: number;
    resolution: { outcome: string; chosen: string[]; rng_seed: number | null };
  }> {
    return this.post(`/projects/${id}/resolutions`, {
      revision,
      relation_id: relationId,
      stage: 3,
      decision,
      accepted_annotator: acceptedAnnotator ?? null,
    });
  }

  async getReport(id: string): Promise<AgreementReport> {
    return this.get(`/projects/${id}/report`);
  }

  async getDistributions(id: string, stage = 3): Promise<Distributions> {
    return this.get(`/projects/${id}/distributions?stage=${stage}`);
  }
}

// Optimistic-concurrency helper: run the submit against the freshest
// revision, refetching after each stale-revision rejection.
export async function submitWithRetry<T>(
  fetchRevision: () => Promise<number>,
  submit: (revision: number) => Promise<T>,
  attempts = 3,
): Promise<T> {
  let lastError: unknown = null;
  for (let i = 0; i < attempts; i++) {
    const revision = await fetchRevision();
    try {
      return await submit(revision);
    } catch (error) {
      if (error instanceof StaleRevisionError) {
        lastError = error;
        continue;
      }
      throw error;
    }
  }
  throw lastError ?? new Error("submit failed");
}
