/** Grid math shared by the document model and its raster export.
 *
 * Node snapping uses round-half-to-even so the structured specs this UI
 * submits land on the same nodes as the service's raster parser when the
 * canvas is exported as a PNG and re-read through the file-input path.
 */

import type { GridDims } from "./types.js";

export function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const frac = x - floor;
  if (frac < 0.5) return floor;
  if (frac > 0.5) return floor + 1;
  return floor % 2 === 0 ? floor : floor + 1;
}

export function clip(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/** Row-major node index for node column ix, node row iy. */
export function nodeIndex(dims: GridDims, ix: number, iy: number): number {
  return iy * (dims.nelx + 1) + ix;
}

export function nodeCoords(dims: GridDims, node: number): [number, number] {
  return [node % (dims.nelx + 1), Math.floor(node / (dims.nelx + 1))];
}

/** Snap a point in grid coordinates to the nearest mesh node. */
export function nearestNode(dims: GridDims, gx: number, gy: number): number {
  const ix = clip(roundHalfEven(gx), 0, dims.nelx);
  const iy = clip(roundHalfEven(gy), 0, dims.nely);
  return nodeIndex(dims, ix, iy);
}

export interface CellComponent {
  cells: Array<[number, number]>; // (ex, ey)
  centroid: [number, number];
}

/** 4-connected components of set cells in a row-major nelx*nely layer. */
export function connectedComponents(
  layer: Uint8Array,
  dims: GridDims,
): CellComponent[] {
  const { nelx, nely } = dims;
  const seen = new Uint8Array(layer.length);
  const out: CellComponent[] = [];
  for (let start = 0; start < layer.length; start++) {
    if (!layer[start] || seen[start]) continue;
    const cells: Array<[number, number]> = [];
    const queue = [start];
    seen[start] = 1;
    while (queue.length) {
      const idx = queue.pop()!;
      const ex = idx % nelx;
      const ey = Math.floor(idx / nelx);
      cells.push([ex, ey]);
      const neighbors = [
        ex > 0 ? idx - 1 : -1,
        ex < nelx - 1 ? idx + 1 : -1,
        ey > 0 ? idx - nelx : -1,
        ey < nely - 1 ? idx + nelx : -1,
      ];
      for (const n of neighbors) {
        if (n >= 0 && layer[n] && !seen[n]) {
          seen[n] = 1;
          queue.push(n);
        }
      }
    }
    let sx = 0;
    let sy = 0;
    for (const [ex, ey] of cells) {
      sx += ex;
      sy += ey;
    }
    out.push({
      cells,
      centroid: [sx / cells.length, sy / cells.length],
    });
  }
  return out;
}

/** Node a painted constraint component anchors to: its cell centroid,
 * shifted to cell-center coordinates, snapped half-even. */
export function componentNode(dims: GridDims, comp: CellComponent): number {
  return nearestNode(dims, comp.centroid[0] + 0.5, comp.centroid[1] + 0.5);
}
