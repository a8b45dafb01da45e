/** Overlay composition: which layers to paint, in what order, at what
 * opacity. Kept free of canvas calls so the policy is unit-testable; the
 * renderer in main.ts just executes the returned operations. */

import type { Peak, TemplateMask } from "./types.js";

export interface OverlayState {
  showReference: boolean;
  showAligned: boolean;
  showMask: boolean;
  showPeaks: boolean;
  alignedOpacity: number; // 0..1
}

export type DrawOp =
  | { kind: "image"; source: "reference" | "aligned"; opacity: number }
  | { kind: "mask-outlines"; mask: TemplateMask; color: string }
  | { kind: "peak-markers"; peaks: Peak[]; color: string };

export const DEFAULT_OVERLAY: OverlayState = {
  showReference: true,
  showAligned: true,
  showMask: true,
  showPeaks: false,
  alignedOpacity: 0.5,
};

export function composeOverlay(
  state: OverlayState,
  mask: TemplateMask | null,
  peaks: Peak[] | null,
): DrawOp[] {
  const ops: DrawOp[] = [];
  if (state.showReference) {
    ops.push({ kind: "image", source: "reference", opacity: 1.0 });
  }
  if (state.showAligned) {
    const opacity = Math.min(1, Math.max(0, state.alignedOpacity));
    // With no reference underneath, the aligned image is the base layer.
    ops.push({
      kind: "image",
      source: "aligned",
      opacity: state.showReference ? opacity : 1.0,
    });
  }
  if (state.showMask && mask !== null) {
    ops.push({ kind: "mask-outlines", mask, color: "#ff5a00" });
  }
  if (state.showPeaks && peaks !== null) {
    ops.push({ kind: "peak-markers", peaks, color: "#2b6cff" });
  }
  return ops;
}
