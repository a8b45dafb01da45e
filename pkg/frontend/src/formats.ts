/** Readers/writers for the service's textual interchange formats.
 *
 * The UI writes only these formats; every number crosses the wire as the
 * shortest round-trip decimal, which the service parses back to the exact
 * same double. Serialization is deterministic, so re-serializing an edited
 * document changes only the lines whose values actually changed.
 */

import { simplicityViolation } from "./geometry.js";
import type { AreaOfInterest, Blob, Peak, Point, TemplateMask } from "./types.js";

export const MASK_HEADER = "chromalign-mask 1";
export const AOI_HEADER = "chromalign-aoi 1";

function contentLines(text: string, where: string): string[] {
  const lines = text
    .split("\n")
    .filter((ln) => ln.trim() !== "" && !ln.trimStart().startsWith("#"));
  if (lines.length === 0) throw new Error(`${where}: empty document`);
  return lines;
}

function parseVertices(tokens: string, where: string): Point[] {
  const pts: Point[] = [];
  for (const tok of tokens.split(/\s+/).filter((t) => t !== "")) {
    const parts = tok.split(",");
    if (parts.length !== 2) throw new Error(`${where}: bad vertex token '${tok}'`);
    const x = Number(parts[0]);
    const y = Number(parts[1]);
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new Error(`${where}: non-numeric vertex '${tok}'`);
    }
    pts.push({ x, y });
  }
  if (pts.length < 3) throw new Error(`${where}: polygon needs at least 3 vertices`);
  return pts;
}

function formatVertices(vertices: Point[]): string {
  return vertices.map((p) => `${p.x},${p.y}`).join(" ");
}

function validatePolygon(vertices: Point[], where: string): void {
  const err = simplicityViolation(vertices);
  if (err !== null) throw new Error(`${where}: polygon is not simple: ${err}`);
}

export function parseMask(text: string): TemplateMask {
  const lines = contentLines(text, "mask");
  if (lines[0].trim() !== MASK_HEADER) {
    throw new Error(`mask: expected header '${MASK_HEADER}'`);
  }
  const blobs: Blob[] = [];
  const seen = new Set<string>();
  for (const line of lines.slice(1)) {
    const parts = line.split("\t");
    if (parts.length !== 4 || parts[0] !== "blob") {
      throw new Error(`mask: malformed blob record '${line}'`);
    }
    const [, name, family, verts] = parts;
    if (seen.has(name)) throw new Error(`mask: duplicate blob name '${name}'`);
    seen.add(name);
    const vertices = parseVertices(verts, `blob '${name}'`);
    validatePolygon(vertices, `blob '${name}'`);
    blobs.push({ name, family, vertices });
  }
  return { blobs };
}

export function maskToText(mask: TemplateMask): string {
  const lines = [MASK_HEADER];
  for (const blob of mask.blobs) {
    lines.push(`blob\t${blob.name}\t${blob.family}\t${formatVertices(blob.vertices)}`);
  }
  return lines.join("\n") + "\n";
}

export function parseAoi(text: string): AreaOfInterest {
  const lines = contentLines(text, "aoi");
  if (lines[0].trim() !== AOI_HEADER) {
    throw new Error(`aoi: expected header '${AOI_HEADER}'`);
  }
  let label = "";
  let vertices: Point[] | null = null;
  for (const line of lines.slice(1)) {
    const parts = line.split("\t");
    if (parts[0] === "label" && parts.length === 2) {
      label = parts[1];
    } else if (parts[0] === "polygon" && parts.length === 2) {
      if (vertices !== null) throw new Error("aoi: more than one polygon record");
      vertices = parseVertices(parts[1], "aoi polygon");
      validatePolygon(vertices, "aoi polygon");
    } else {
      throw new Error(`aoi: malformed record '${line}'`);
    }
  }
  if (vertices === null) throw new Error("aoi: missing polygon record");
  return { label, vertices };
}

export function aoiToText(aoi: AreaOfInterest): string {
  validatePolygon(aoi.vertices, "aoi polygon");
  const lines = [AOI_HEADER];
  if (aoi.label !== "") lines.push(`label\t${aoi.label}`);
  lines.push(`polygon\t${formatVertices(aoi.vertices)}`);
  return lines.join("\n") + "\n";
}

export function parsePeaksCsv(text: string): Peak[] {
  const lines = text.split("\n").filter((ln) => ln.trim() !== "");
  if (lines.length === 0 || lines[0].trim() !== "axis1,axis2,intensity") {
    throw new Error("peaks: expected header 'axis1,axis2,intensity'");
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",").map(Number);
    if (parts.length !== 3 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error(`peaks: malformed row ${i + 2}`);
    }
    return { axis1: parts[0], axis2: parts[1], intensity: parts[2] };
  });
}
