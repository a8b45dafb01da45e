/** Pure mask-editing operations behind the vertex-drag interaction.
 *
 * All edits are non-destructive: they return a new mask that shares every
 * untouched blob, so serialization diffs stay minimal and undo is a matter
 * of keeping the previous object.
 */

import type { Point, TemplateMask } from "./types.js";
import { simplicityViolation } from "./geometry.js";

export interface VertexRef {
  blobIndex: number;
  vertexIndex: number;
}

/** Nearest vertex within `radius` of p, or null. Distances in data units. */
export function hitTestVertex(
  mask: TemplateMask,
  p: Point,
  radius: number,
): VertexRef | null {
  let best: VertexRef | null = null;
  let bestDist = radius;
  mask.blobs.forEach((blob, bi) => {
    blob.vertices.forEach((v, vi) => {
      const d = Math.hypot(v.x - p.x, v.y - p.y);
      if (d <= bestDist) {
        bestDist = d;
        best = { blobIndex: bi, vertexIndex: vi };
      }
    });
  });
  return best;
}

/** Replace one vertex; untouched blobs are shared by reference. */
export function moveVertex(
  mask: TemplateMask,
  ref: VertexRef,
  to: Point,
): TemplateMask {
  const blobs = mask.blobs.map((blob, bi) => {
    if (bi !== ref.blobIndex) return blob;
    const vertices = blob.vertices.map((v, vi) =>
      vi === ref.vertexIndex ? { x: to.x, y: to.y } : v,
    );
    const err = simplicityViolation(vertices);
    if (err !== null) {
      throw new Error(`edit would break blob '${blob.name}': ${err}`);
    }
    return { ...blob, vertices };
  });
  return { blobs };
}

/** Names of blobs whose vertex arrays differ between two masks. */
export function changedBlobs(a: TemplateMask, b: TemplateMask): string[] {
  const out: string[] = [];
  const byName = new Map(a.blobs.map((blob) => [blob.name, blob]));
  for (const blob of b.blobs) {
    const old = byName.get(blob.name);
    if (old === undefined) {
      out.push(blob.name);
      continue;
    }
    const same =
      old.vertices.length === blob.vertices.length &&
      old.vertices.every(
        (v, i) => v.x === blob.vertices[i].x && v.y === blob.vertices[i].y,
      );
    if (!same || old.family !== blob.family) out.push(blob.name);
  }
  for (const blob of a.blobs) {
    if (!b.blobs.some((nb) => nb.name === blob.name)) out.push(blob.name);
  }
  return out;
}
