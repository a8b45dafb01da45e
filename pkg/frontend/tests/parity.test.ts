/**
 * End-to-end parity against the real service and CLI:
 *
 *  - an AOI drawn in the browser, exported to a file, and fed to the CLI's
 *    extract stage must yield a peak set byte-identical to the service's
 *    peaks artifact for the same session;
 *  - a blob-vertex drag, PUT through /mask and re-quantified, must change
 *    only the touched blob's volume.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AlignmentClient } from "../src/api.js";
import { aoiToText, maskToText, parseMask } from "../src/formats.js";
import { vectorizeStroke } from "../src/geometry.js";
import { moveVertex } from "../src/editor.js";
import type { Point } from "../src/types.js";

const PY = process.env.PYTHON ?? "python3";
const PORT = 8750 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let work: string;
let dataDir: string;
let synthDir: string;
let server: ChildProcess | null = null;
let client: AlignmentClient;
let sessionId: string;

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/jobs/warmup-probe`);
      if (resp.status === 404) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 200));
  }
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "chromalign-ui-"));
  dataDir = join(work, "service-data");
  synthDir = join(work, "synth");
  execFileSync(PY, [
    "-m", "chromalign.cli", "synth",
    "--seed", "21", "--peaks", "90", "--shape", "100x150",
    "--out-dir", synthDir,
  ]);
  server = spawn(
    PY,
    ["-m", "chromalign.service", "--port", String(PORT), "--data-dir", dataDir],
    { stdio: "ignore" },
  );
  await waitForServer();
  client = new AlignmentClient(BASE);

  const form = new FormData();
  for (const [field, file] of [
    ["reference", "reference.csv"],
    ["target", "target.csv"],
    ["reference_meta", "reference.csv.meta.json"],
    ["target_meta", "target.csv.meta.json"],
  ] as const) {
    form.append(field, new Blob([readFileSync(join(synthDir, file))]), file);
  }
  sessionId = await client.createSession(form);
}, 60_000);

afterAll(() => {
  server?.kill();
});

/** A lasso stroke surrounding most of the retention plane, as the canvas
 * handler would deliver it (dense, slightly noisy, closed). */
function lassoStroke(): Point[] {
  const pts: Point[] = [];
  const cx = 35.0;
  const cy = 4.0;
  for (let i = 0; i <= 300; i++) {
    const a = (2 * Math.PI * i) / 300;
    const wobble = 1 + 0.03 * Math.sin(7 * a);
    pts.push({
      x: cx + 28.0 * wobble * Math.cos(a),
      y: cy + 3.2 * wobble * Math.sin(a),
    });
  }
  return pts;
}

describe("UI parity with the CLI", () => {
  it(
    "drawn AOI: service peaks artifact equals cmd_extract on the exported file",
    async () => {
      const polygon = vectorizeStroke(lassoStroke(), {
        minSpacing: 0.5,
        collinearArea: 0,
      });
      const aoiText = aoiToText({ label: "browser lasso", vertices: polygon });
      await client.putAoi(sessionId, "target", aoiText);
      await client.putAoi(sessionId, "ref", aoiText);
      const exported = join(work, "exported.aoi");
      writeFileSync(exported, aoiText);

      const jobId = await client.register(sessionId, {
        w: 0.3, beta: 2, lambda: 2, h: 40,
        mode: "hybrid", kernel: "as-printed",
      });
      const done = await client.waitForJob(jobId, { timeoutMs: 120_000 });
      expect(done.status).toBe("done");

      const serviceCsv = await client.artifactText(sessionId, "peaks-target");
      const cliOut = join(work, "cli_peaks.csv");
      execFileSync(PY, [
        "-m", "chromalign.cli", "extract",
        "--grid", join(synthDir, "target.csv"),
        "--h", "40",
        "--aoi", exported,
        "--out", cliOut,
      ]);
      expect(serviceCsv).toBe(readFileSync(cliOut, "utf8"));
    },
    180_000,
  );

  it(
    "vertex drag round-trips through PUT /mask and changes only that blob",
    async () => {
      // Two well-separated square blobs over signal-bearing regions.
      const maskText = [
        "chromalign-mask 1",
        "blob\tleft\tfamL\t15,2 30,2 30,6 15,6",
        "blob\tright\tfamR\t40,2 55,2 55,6 40,6",
        "",
      ].join("\n");
      await client.putMask(sessionId, maskText);

      const quantify = (maskFile: string, out: string) => {
        execFileSync(PY, [
          "-m", "chromalign.cli", "quantify",
          "--grid", join(synthDir, "target.csv"),
          "--mask", maskFile,
          "--out", out,
        ]);
        return readFileSync(out, "utf8");
      };

      const storedBefore = await client.getMask(sessionId);
      expect(storedBefore).toBe(maskText);
      const beforeFile = join(work, "before.mask");
      writeFileSync(beforeFile, storedBefore);
      const quantBefore = quantify(beforeFile, join(work, "qb.csv"));

      // Drag one vertex of the left blob far enough to change membership.
      const mask = parseMask(storedBefore);
      const edited = moveVertex(mask, { blobIndex: 0, vertexIndex: 2 }, {
        x: 30, y: 4.5,
      });
      const editedText = maskToText(edited);
      await client.putMask(sessionId, editedText);
      const storedAfter = await client.getMask(sessionId);
      expect(storedAfter).toBe(editedText);

      // The serialized documents differ only in the dragged blob's record.
      const beforeLines = storedBefore.split("\n");
      const afterLines = storedAfter.split("\n");
      expect(afterLines.length).toBe(beforeLines.length);
      const changed = beforeLines.flatMap((ln, i) =>
        ln === afterLines[i] ? [] : [i],
      );
      expect(changed).toEqual([1]); // only the 'left' blob record

      const afterFile = join(work, "after.mask");
      writeFileSync(afterFile, storedAfter);
      const quantAfter = quantify(afterFile, join(work, "qa.csv"));

      const volumes = (csv: string): Map<string, string> => {
        const rows = csv.split("\n");
        const out = new Map<string, string>();
        for (const row of rows.slice(1)) {
          if (row === "" || row.startsWith("family")) break;
          const [blob, , volume] = row.split(",");
          out.set(blob, volume);
        }
        return out;
      };
      const vb = volumes(quantBefore);
      const va = volumes(quantAfter);
      expect(va.get("right")).toBe(vb.get("right")); // untouched blob unchanged
      expect(va.get("left")).not.toBe(vb.get("left")); // dragged blob re-integrated
    },
    120_000,
  );
});
