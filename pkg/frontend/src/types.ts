/** Shared data shapes mirrored from the service's textual formats. */

export interface Point {
  x: number; // axis 1, minutes (first dimension)
  y: number; // axis 2, seconds (second dimension)
}

export interface Blob {
  name: string;
  family: string;
  vertices: Point[];
}

export interface TemplateMask {
  blobs: Blob[];
}

export interface AreaOfInterest {
  label: string;
  vertices: Point[];
}

export interface Peak {
  axis1: number;
  axis2: number;
  intensity: number;
}

export interface GridGeometry {
  rows: number;
  cols: number;
  axis1_origin: number;
  axis1_step: number;
  axis2_origin: number;
  axis2_step: number;
}

export interface RegistrationRequest {
  w: number;
  beta: number;
  lambda: number;
  mode: "hybrid" | "rigid" | "nonrigid";
  kernel: "as-printed" | "squared";
  h: number;
  max_iter?: number;
  swap_axes?: boolean;
}

export type JobStatus = "pending" | "running" | "done" | "error";

export interface JobState {
  job_id: string;
  session_id: string;
  status: JobStatus;
  error?: string;
  summary?: Record<string, unknown>;
}
