import { describe, expect, it } from "vitest";

import { Gallery, cardFromJob } from "../src/gallery.js";
import type { JobSummary, Metrics } from "../src/types.js";

const job: JobSummary = {
  id: "abc123",
  state: "DONE",
  backend: "stochastic",
  parent_id: null,
  created_at: 1,
  finished_at: 2,
  error: null,
  metrics: null,
};

const metrics: Metrics = {
  backend: "stochastic",
  compliance: 181.25,
  achieved_volfrac: 0.3002,
  iterations: 54,
  seed: 11,
  converged: true,
};

const urlOf = (id: string, kind: string) => `http://svc/api/v1/jobs/${id}/artifacts/${kind}`;

describe("gallery", () => {
  it("builds frozen cards with artifact urls", () => {
    const card = cardFromJob(job, metrics, urlOf);
    expect(card.previewUrl).toBe("http://svc/api/v1/jobs/abc123/artifacts/preview.png");
    expect(card.stlUrl).toBe("http://svc/api/v1/jobs/abc123/artifacts/model.stl");
    expect(card.achievedVolfrac).toBeCloseTo(0.3002, 12);
    expect(Object.isFrozen(card)).toBe(true);
    expect(() => {
      (card as { compliance: number }).compliance = 0;
    }).toThrow();
  });

  it("keeps insertion order and rejects duplicate job ids", () => {
    const gallery = new Gallery();
    gallery.add(cardFromJob(job, metrics, urlOf));
    gallery.add(cardFromJob({ ...job, id: "def456", parent_id: "abc123" }, metrics, urlOf));
    expect(gallery.cards.map((c) => c.jobId)).toEqual(["abc123", "def456"]);
    expect(gallery.get("def456")?.parentId).toBe("abc123");
    expect(() => gallery.add(cardFromJob(job, metrics, urlOf))).toThrow(/already/);
  });

  it("hands out snapshots, not its internal list", () => {
    const gallery = new Gallery();
    gallery.add(cardFromJob(job, metrics, urlOf));
    const snapshot = gallery.cards;
    gallery.add(cardFromJob({ ...job, id: "ghi789" }, metrics, urlOf));
    expect(snapshot).toHaveLength(1);
    expect(gallery.size).toBe(2);
  });
});
