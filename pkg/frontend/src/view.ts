/** Mapping between canvas pixels and retention-time coordinates.
 *
 * The rendered PNG has one image pixel per grid cell; the canvas may scale
 * it. Row 0 (lowest second-dimension time) is drawn at the top, matching
 * the raw image orientation.
 */

import type { GridGeometry, Point } from "./types.js";

export interface ViewScale {
  geometry: GridGeometry;
  canvasWidth: number;
  canvasHeight: number;
}

export function canvasToData(view: ViewScale, px: number, py: number): Point {
  const g = view.geometry;
  const col = (px / view.canvasWidth) * (g.cols - 1);
  const row = (py / view.canvasHeight) * (g.rows - 1);
  return {
    x: g.axis1_origin + col * g.axis1_step,
    y: g.axis2_origin + row * g.axis2_step,
  };
}

export function dataToCanvas(view: ViewScale, p: Point): { px: number; py: number } {
  const g = view.geometry;
  const col = (p.x - g.axis1_origin) / g.axis1_step;
  const row = (p.y - g.axis2_origin) / g.axis2_step;
  return {
    px: (col / (g.cols - 1)) * view.canvasWidth,
    py: (row / (g.rows - 1)) * view.canvasHeight,
  };
}
