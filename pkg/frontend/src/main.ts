/** Browser wiring: canvases, forms, and the interaction loop.
 *
 * All geometry/serialization logic lives in the pure modules; this file only
 * routes DOM events into them and paints the results.
 */

import { AlignmentClient, ServiceError } from "./api.js";
import { aoiToText, maskToText, parseMask, parsePeaksCsv } from "./formats.js";
import { vectorizeStroke } from "./geometry.js";
import { changedBlobs, hitTestVertex, moveVertex, type VertexRef } from "./editor.js";
import { composeOverlay, DEFAULT_OVERLAY, type OverlayState } from "./overlay.js";
import { canvasToData, dataToCanvas, type ViewScale } from "./view.js";
import type { GridGeometry, Peak, Point, TemplateMask } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
};

interface AppState {
  client: AlignmentClient;
  sessionId: string | null;
  geometryRef: GridGeometry | null;
  geometryTarget: GridGeometry | null;
  mask: TemplateMask | null;
  maskBaseline: TemplateMask | null;
  peaksRef: Peak[] | null;
  overlay: OverlayState;
  stroke: Point[];
  drawingOn: "ref" | "target" | null;
  dragging: VertexRef | null;
  images: { reference: HTMLImageElement | null; aligned: HTMLImageElement | null };
}

const state: AppState = {
  client: new AlignmentClient(""),
  sessionId: null,
  geometryRef: null,
  geometryTarget: null,
  mask: null,
  maskBaseline: null,
  peaksRef: null,
  overlay: { ...DEFAULT_OVERLAY },
  stroke: [],
  drawingOn: null,
  dragging: null,
  images: { reference: null, aligned: null },
};

function log(msg: string): void {
  const el = $("log");
  el.textContent = `${msg}\n${el.textContent ?? ""}`.slice(0, 4000);
}

function refView(): ViewScale | null {
  if (state.geometryRef === null) return null;
  const canvas = $("overlay-canvas") as unknown as HTMLCanvasElement;
  return {
    geometry: state.geometryRef,
    canvasWidth: canvas.width,
    canvasHeight: canvas.height,
  };
}

async function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`cannot load ${url}`));
    img.src = `${url}?t=${Date.now()}`; // bypass cache after each job
  });
}

async function loadSession(): Promise<void> {
  const sid = ($("session-id") as unknown as HTMLInputElement).value.trim();
  if (sid === "") return;
  state.sessionId = sid;
  state.geometryRef = await state.client.geometry(sid, "reference");
  state.geometryTarget = await state.client.geometry(sid, "target");
  state.images.reference = await loadImage(state.client.renderUrl(sid, "reference"));
  paintSide("ref-canvas", state.images.reference);
  const target = await loadImage(state.client.renderUrl(sid, "target"));
  paintSide("target-canvas", target);
  try {
    state.mask = parseMask(await state.client.getMask(sid));
    state.maskBaseline = state.mask;
  } catch (err) {
    if (!(err instanceof ServiceError && err.status === 409)) throw err;
    state.mask = null;
  }
  log(`session ${sid} loaded`);
  repaintOverlay();
}

function paintSide(canvasId: string, img: HTMLImageElement): void {
  const canvas = $(canvasId) as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
}

function strokeHandlers(canvasId: string, which: "ref" | "target"): void {
  const canvas = $(canvasId) as unknown as HTMLCanvasElement;
  const geometryOf = () => (which === "ref" ? state.geometryRef : state.geometryTarget);
  canvas.addEventListener("mousedown", (ev) => {
    if (geometryOf() === null) return;
    state.drawingOn = which;
    state.stroke = [];
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (state.drawingOn !== which) return;
    const g = geometryOf();
    if (g === null) return;
    const rect = canvas.getBoundingClientRect();
    const view: ViewScale = {
      geometry: g,
      canvasWidth: canvas.width,
      canvasHeight: canvas.height,
    };
    const p = canvasToData(
      view,
      ((ev.clientX - rect.left) / rect.width) * canvas.width,
      ((ev.clientY - rect.top) / rect.height) * canvas.height,
    );
    state.stroke.push(p);
    const ctx = canvas.getContext("2d");
    if (ctx !== null && state.stroke.length >= 2) {
      const a = dataToCanvas(view, state.stroke[state.stroke.length - 2]);
      const b = dataToCanvas(view, p);
      ctx.strokeStyle = "#bb00bb";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(a.px, a.py);
      ctx.lineTo(b.px, b.py);
      ctx.stroke();
    }
  });
  canvas.addEventListener("mouseup", () => {
    if (state.drawingOn !== which) return;
    state.drawingOn = null;
    void submitStroke(which);
  });
}

async function submitStroke(which: "ref" | "target"): Promise<void> {
  if (state.sessionId === null) return;
  const g = which === "ref" ? state.geometryRef : state.geometryTarget;
  if (g === null) return;
  const spacing = Math.max(g.axis1_step, g.axis2_step) * 1.5;
  try {
    const polygon = vectorizeStroke(state.stroke, {
      minSpacing: spacing,
      collinearArea: 0,
    });
    const text = aoiToText({ label: `drawn in browser (${which})`, vertices: polygon });
    await state.client.putAoi(state.sessionId, which, text);
    log(`AOI (${which}): ${polygon.length} vertices stored`);
  } catch (err) {
    log(`AOI rejected: ${(err as Error).message}`);
  }
}

async function launchRegistration(): Promise<void> {
  if (state.sessionId === null) return;
  const num = (id: string) => Number(($(id) as unknown as HTMLInputElement).value);
  const str = (id: string) => ($(id) as unknown as HTMLSelectElement).value;
  try {
    const jobId = await state.client.register(state.sessionId, {
      w: num("cfg-w"),
      beta: num("cfg-beta"),
      lambda: num("cfg-lambda"),
      h: num("cfg-h"),
      mode: str("cfg-mode") as "hybrid" | "rigid" | "nonrigid",
      kernel: str("cfg-kernel") as "as-printed" | "squared",
    });
    log(`job ${jobId} submitted`);
    const done = await state.client.waitForJob(jobId, { intervalMs: 500 });
    if (done.status === "error") {
      log(`job failed: ${done.error ?? "unknown error"}`);
      return;
    }
    log("job done; fetching artifacts");
    await refreshArtifacts();
  } catch (err) {
    log(`registration failed: ${(err as Error).message}`);
  }
}

async function refreshArtifacts(): Promise<void> {
  if (state.sessionId === null) return;
  const sid = state.sessionId;
  state.images.aligned = await loadImage(state.client.renderUrl(sid, "aligned"));
  try {
    const warped = await state.client.artifactText(sid, "warped-mask");
    state.mask = parseMask(warped);
    state.maskBaseline = state.mask;
  } catch (err) {
    if (!(err instanceof ServiceError && err.status === 409)) throw err;
  }
  try {
    state.peaksRef = parsePeaksCsv(await state.client.artifactText(sid, "peaks-ref"));
  } catch (err) {
    if (!(err instanceof ServiceError && err.status === 409)) throw err;
  }
  repaintOverlay();
}

function repaintOverlay(): void {
  const canvas = $("overlay-canvas") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  const view = refView();
  if (ctx === null || view === null) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const ops = composeOverlay(state.overlay, state.mask, state.peaksRef);
  for (const op of ops) {
    if (op.kind === "image") {
      const img = state.images[op.source];
      if (img === null) continue;
      ctx.globalAlpha = op.opacity;
      ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
      ctx.globalAlpha = 1.0;
    } else if (op.kind === "mask-outlines") {
      ctx.strokeStyle = op.color;
      ctx.lineWidth = 1.5;
      for (const blob of op.mask.blobs) {
        ctx.beginPath();
        blob.vertices.forEach((v, i) => {
          const { px, py } = dataToCanvas(view, v);
          if (i === 0) ctx.moveTo(px, py);
          else ctx.lineTo(px, py);
        });
        ctx.closePath();
        ctx.stroke();
      }
    } else {
      ctx.fillStyle = op.color;
      for (const peak of op.peaks) {
        const { px, py } = dataToCanvas(view, { x: peak.axis1, y: peak.axis2 });
        ctx.beginPath();
        ctx.arc(px, py, 2.5, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  }
}

function vertexDragHandlers(): void {
  const canvas = $("overlay-canvas") as unknown as HTMLCanvasElement;
  canvas.addEventListener("mousedown", (ev) => {
    const view = refView();
    if (view === null || state.mask === null) return;
    const rect = canvas.getBoundingClientRect();
    const p = canvasToData(
      view,
      ((ev.clientX - rect.left) / rect.width) * canvas.width,
      ((ev.clientY - rect.top) / rect.height) * canvas.height,
    );
    const radius =
      3 * Math.max(view.geometry.axis1_step, view.geometry.axis2_step);
    state.dragging = hitTestVertex(state.mask, p, radius);
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (state.dragging === null || state.mask === null) return;
    const view = refView();
    if (view === null) return;
    const rect = canvas.getBoundingClientRect();
    const p = canvasToData(
      view,
      ((ev.clientX - rect.left) / rect.width) * canvas.width,
      ((ev.clientY - rect.top) / rect.height) * canvas.height,
    );
    try {
      state.mask = moveVertex(state.mask, state.dragging, p);
      repaintOverlay();
    } catch {
      // rejected edit (would fold the blob); ignore the sample
    }
  });
  canvas.addEventListener("mouseup", () => {
    if (state.dragging === null) return;
    state.dragging = null;
    void submitMaskEdit();
  });
}

async function submitMaskEdit(): Promise<void> {
  if (state.sessionId === null || state.mask === null) return;
  const touched =
    state.maskBaseline === null ? [] : changedBlobs(state.maskBaseline, state.mask);
  if (touched.length === 0) return;
  await state.client.putMask(state.sessionId, maskToText(state.mask));
  state.maskBaseline = state.mask;
  log(`mask stored (edited: ${touched.join(", ")})`);
}

function wireControls(): void {
  $("btn-load").addEventListener("click", () => void loadSession());
  $("btn-register").addEventListener("click", () => void launchRegistration());
  const toggles: Array<[string, keyof OverlayState]> = [
    ["toggle-reference", "showReference"],
    ["toggle-aligned", "showAligned"],
    ["toggle-mask", "showMask"],
    ["toggle-peaks", "showPeaks"],
  ];
  for (const [id, key] of toggles) {
    const box = $(id) as unknown as HTMLInputElement;
    box.addEventListener("change", () => {
      (state.overlay[key] as boolean) = box.checked;
      repaintOverlay();
    });
  }
  const slider = $("opacity") as unknown as HTMLInputElement;
  slider.addEventListener("input", () => {
    state.overlay.alignedOpacity = Number(slider.value) / 100;
    repaintOverlay();
  });
}

export function start(baseUrl: string): void {
  state.client = new AlignmentClient(baseUrl);
  wireControls();
  strokeHandlers("ref-canvas", "ref");
  strokeHandlers("target-canvas", "target");
  vertexDragHandlers();
  log("ready; enter a session id and press Load");
}

if (typeof document !== "undefined" && document.getElementById("btn-load") !== null) {
  const base = (document.getElementById("service-url") as HTMLInputElement | null)
    ?.value ?? "http://127.0.0.1:8077";
  start(base);
}
