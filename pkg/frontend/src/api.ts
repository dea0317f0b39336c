/** Typed client for the job service HTTP API. */

import type {
  ArtifactKind,
  DensityJson,
  IterateBody,
  JobSummary,
  KlmBreakdown,
  Metrics,
  SubmitSketchBody,
  SubmitSpecBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly issues: string[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  let issues: string[] = [];
  try {
    const body = (await resp.json()) as { error?: string; issues?: string[] };
    if (Array.isArray(body.issues)) {
      issues = body.issues.map(String);
      message = issues.join("; ");
    } else if (body.error) {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, message, issues);
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
}

export class StudioClient {
  readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async submit(body: SubmitSpecBody | SubmitSketchBody): Promise<string> {
    const out = await this.post<{ id: string }>("/api/v1/jobs", body);
    return out.id;
  }

  async iterate(jobId: string, body: IterateBody): Promise<string> {
    const out = await this.post<{ id: string }>(`/api/v1/jobs/${jobId}/iterate`, body);
    return out.id;
  }

  jobStatus(jobId: string): Promise<JobSummary> {
    return this.json<JobSummary>(`/api/v1/jobs/${jobId}`);
  }

  async pollUntilDone(jobId: string, options: PollOptions = {}): Promise<JobSummary> {
    const intervalMs = options.intervalMs ?? 250;
    const timeoutMs = options.timeoutMs ?? 120_000;
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.jobStatus(jobId);
      if (job.state === "DONE") return job;
      if (job.state === "FAILED") {
        throw new ApiError(500, job.error ?? "job failed");
      }
      if (Date.now() > deadline) {
        throw new ApiError(408, `job ${jobId} still ${job.state} after ${timeoutMs} ms`);
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }

  artifactUrl(jobId: string, kind: ArtifactKind): string {
    return `${this.baseUrl}/api/v1/jobs/${jobId}/artifacts/${kind}`;
  }

  density(jobId: string): Promise<DensityJson> {
    return this.json<DensityJson>(`/api/v1/jobs/${jobId}/artifacts/density.json`);
  }

  metrics(jobId: string): Promise<Metrics> {
    return this.json<Metrics>(`/api/v1/jobs/${jobId}/artifacts/metrics.json`);
  }

  klm(workflow: string, iterations: number): Promise<KlmBreakdown> {
    return this.json<KlmBreakdown>(
      `/api/v1/klm?workflow=${encodeURIComponent(workflow)}&n=${iterations}`,
    );
  }

  health(): Promise<{ status: string; version: string; kernel: string }> {
    return this.json("/api/v1/health");
  }
}
