/** Result cards. Cards are frozen on insert: once rendered, a card never
 * changes, and re-selecting it re-uses the same artifact URLs. */

import type { JobSummary, Metrics } from "./types.js";

export interface ResultCard {
  readonly jobId: string;
  readonly parentId: string | null;
  readonly backend: string;
  readonly seed: number;
  readonly compliance: number;
  readonly achievedVolfrac: number;
  readonly iterations: number;
  readonly converged: boolean;
  readonly previewUrl: string;
  readonly stlUrl: string;
}

export function cardFromJob(
  job: JobSummary,
  metrics: Metrics,
  artifactUrl: (jobId: string, kind: "preview.png" | "model.stl") => string,
): ResultCard {
  return Object.freeze({
    jobId: job.id,
    parentId: job.parent_id,
    backend: metrics.backend,
    seed: metrics.seed,
    compliance: metrics.compliance,
    achievedVolfrac: metrics.achieved_volfrac,
    iterations: metrics.iterations,
    converged: metrics.converged,
    previewUrl: artifactUrl(job.id, "preview.png"),
    stlUrl: artifactUrl(job.id, "model.stl"),
  });
}

export class Gallery {
  private items: ResultCard[] = [];

  add(card: ResultCard): ResultCard {
    if (this.get(card.jobId)) {
      throw new Error(`card for job ${card.jobId} already present`);
    }
    const frozen = Object.isFrozen(card) ? card : Object.freeze({ ...card });
    this.items.push(frozen);
    return frozen;
  }

  get(jobId: string): ResultCard | undefined {
    return this.items.find((c) => c.jobId === jobId);
  }

  get cards(): readonly ResultCard[] {
    return this.items.slice();
  }

  get size(): number {
    return this.items.length;
  }
}
