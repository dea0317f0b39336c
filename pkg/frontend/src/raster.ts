/** Rasterize a document to RGBA pixels in the color legend the service's
 * PNG file-input path understands:
 *
 *   black part, cyan preserved region, yellow x-roller, blue y-roller,
 *   green pinned, red load arrows, white background.
 *
 * Cells map to zoom x zoom pixel blocks and arrow endpoints to node
 * pixels, so exporting a document and re-parsing the PNG reproduces the
 * same element classes and support nodes the document serializes itself.
 */

import type { CanvasDocument, LayerName } from "./document.js";
import { clip } from "./grid.js";

export type Rgb = [number, number, number];

export const LAYER_COLORS: Record<LayerName, Rgb> = {
  shape: [0, 0, 0],
  mask: [0, 255, 255],
  fixX: [255, 255, 0],
  fixY: [0, 0, 255],
  fixXY: [0, 255, 0],
};

export const ARROW_COLOR: Rgb = [255, 0, 0];
export const BACKGROUND_COLOR: Rgb = [255, 255, 255];

export interface RasterImage {
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA
}

function put(img: RasterImage, x: number, y: number, rgb: Rgb): void {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const o = (y * img.width + x) * 4;
  img.data[o] = rgb[0];
  img.data[o + 1] = rgb[1];
  img.data[o + 2] = rgb[2];
  img.data[o + 3] = 255;
}

function fillCell(img: RasterImage, ex: number, ey: number, zoom: number, rgb: Rgb): void {
  for (let y = ey * zoom; y < (ey + 1) * zoom; y++) {
    for (let x = ex * zoom; x < (ex + 1) * zoom; x++) {
      put(img, x, y, rgb);
    }
  }
}

function drawLine(img: RasterImage, x0: number, y0: number, x1: number, y1: number, rgb: Rgb): void {
  let x = x0;
  let y = y0;
  const dx = Math.abs(x1 - x0);
  const dy = -Math.abs(y1 - y0);
  const sx = x0 < x1 ? 1 : -1;
  const sy = y0 < y1 ? 1 : -1;
  let err = dx + dy;
  for (;;) {
    put(img, x, y, rgb);
    if (x === x1 && y === y1) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

/** Filled 45-degree arrowhead, apex at (tipX, tipY), symmetric about the
 * axis so straight arrows re-parse to exact unit directions. */
function drawHead(
  img: RasterImage,
  tipX: number,
  tipY: number,
  ux: number,
  uy: number,
  headLen: number,
  rgb: Rgb,
): void {
  const r = headLen + 1;
  for (let y = Math.floor(tipY - r); y <= Math.ceil(tipY + r); y++) {
    for (let x = Math.floor(tipX - r); x <= Math.ceil(tipX + r); x++) {
      const vx = tipX - x;
      const vy = tipY - y;
      const s = vx * ux + vy * uy; // distance behind the tip
      const perp = -vx * uy + vy * ux;
      if (s >= 0 && s <= headLen && Math.abs(perp) <= s) put(img, x, y, rgb);
    }
  }
}

export function rasterize(doc: CanvasDocument, zoom = 4): RasterImage {
  const width = doc.dims.nelx * zoom;
  const height = doc.dims.nely * zoom;
  const img: RasterImage = {
    width,
    height,
    data: new Uint8ClampedArray(width * height * 4),
  };
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) put(img, x, y, BACKGROUND_COLOR);
  }

  const order: LayerName[] = ["shape", "mask", "fixX", "fixY", "fixXY"];
  for (const name of order) {
    const layer = doc.layers[name];
    for (let ey = 0; ey < doc.dims.nely; ey++) {
      for (let ex = 0; ex < doc.dims.nelx; ex++) {
        if (layer[ey * doc.dims.nelx + ex]) fillCell(img, ex, ey, zoom, LAYER_COLORS[name]);
      }
    }
  }

  for (const arrow of doc.arrows) {
    const tx = clip(Math.round(arrow.tail.x * zoom), 0, width - 1);
    const ty = clip(Math.round(arrow.tail.y * zoom), 0, height - 1);
    const hx = clip(Math.round(arrow.head.x * zoom), 0, width - 1);
    const hy = clip(Math.round(arrow.head.y * zoom), 0, height - 1);
    const len = Math.hypot(hx - tx, hy - ty);
    if (len < 1) continue;
    const ux = (hx - tx) / len;
    const uy = (hy - ty) / len;
    const headLen = Math.min(9, Math.max(4, Math.floor(len / 3)));
    const baseX = Math.round(hx - ux * headLen);
    const baseY = Math.round(hy - uy * headLen);
    drawLine(img, tx, ty, baseX, baseY, ARROW_COLOR);
    drawHead(img, hx, hy, ux, uy, headLen, ARROW_COLOR);
  }
  return img;
}
