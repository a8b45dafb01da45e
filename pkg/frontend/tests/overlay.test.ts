import { describe, expect, it } from "vitest";

import { composeOverlay, DEFAULT_OVERLAY } from "../src/overlay.js";
import type { Peak, TemplateMask } from "../src/types.js";

const mask: TemplateMask = {
  blobs: [{ name: "a", family: "f", vertices: [
    { x: 0, y: 0 }, { x: 1, y: 0 }, { x: 0.5, y: 1 },
  ] }],
};
const peaks: Peak[] = [{ axis1: 1, axis2: 2, intensity: 10 }];

describe("composeOverlay", () => {
  it("stacks reference under the half-transparent aligned image", () => {
    const ops = composeOverlay(DEFAULT_OVERLAY, mask, peaks);
    expect(ops[0]).toEqual({ kind: "image", source: "reference", opacity: 1.0 });
    expect(ops[1]).toEqual({ kind: "image", source: "aligned", opacity: 0.5 });
    expect(ops[2].kind).toBe("mask-outlines");
  });

  it("renders aligned fully opaque when it is the only image layer", () => {
    const ops = composeOverlay(
      { ...DEFAULT_OVERLAY, showReference: false },
      null,
      null,
    );
    expect(ops).toEqual([{ kind: "image", source: "aligned", opacity: 1.0 }]);
  });

  it("omits layers that are toggled off or missing", () => {
    const ops = composeOverlay(
      { ...DEFAULT_OVERLAY, showMask: false, showPeaks: true },
      mask,
      null,
    );
    expect(ops.some((o) => o.kind === "mask-outlines")).toBe(false);
    expect(ops.some((o) => o.kind === "peak-markers")).toBe(false); // no peaks yet
  });

  it("clamps the opacity slider", () => {
    const ops = composeOverlay(
      { ...DEFAULT_OVERLAY, alignedOpacity: 42 },
      null,
      null,
    );
    expect(ops[1]).toEqual({ kind: "image", source: "aligned", opacity: 1 });
  });
});
