/** Wire types matching the job service's JSON formats. */

export interface GridDims {
  nelx: number;
  nely: number;
}

export interface LoadJson {
  node: number;
  fx: number;
  fy: number;
}

export interface SupportJson {
  node: number;
  fix_x: boolean;
  fix_y: boolean;
}

export interface SpecJson {
  dims: GridDims;
  shape: number[];
  mask: number[];
  loads: LoadJson[];
  supports: SupportJson[];
  volfrac: number;
  strength: number;
  seed: number;
}

export type BackendName = "deterministic" | "stochastic";

export type JobState = "QUEUED" | "RUNNING" | "DONE" | "FAILED";

export interface Metrics {
  backend: string;
  compliance: number;
  achieved_volfrac: number;
  iterations: number;
  seed: number;
  converged: boolean;
}

export interface JobSummary {
  id: string;
  state: JobState;
  backend: string;
  parent_id: string | null;
  created_at: number;
  finished_at: number | null;
  error: string | null;
  metrics: Metrics | null;
}

export interface SubmitSpecBody {
  spec: SpecJson;
  backend?: string;
  seed?: number;
  strength?: number;
  volfrac?: number;
  height?: number;
}

export interface SubmitSketchBody {
  sketch: string; // base64 PNG
  dims?: GridDims;
  volfrac: number;
  backend?: string;
  seed?: number;
  strength?: number;
  height?: number;
}

export interface IterateBody {
  mask?: number[];
  mask_sketch?: string;
  volfrac?: number;
  strength?: number;
  seed?: number;
  backend?: string;
}

export interface DensityJson {
  dims: GridDims;
  values: number[];
}

export interface KlmBreakdown {
  workflow: string;
  iterations: number;
  total_s: number;
  per_operator: Record<string, number>;
}

export type ArtifactKind =
  | "density.json"
  | "preview.png"
  | "model.stl"
  | "metrics.json";
