/** The drawing document: constraint layers, load arrows, parameters.
 *
 * Layers live on the element grid itself; the view applies a zoom factor
 * but the document never stores screen pixels. Arrows are exact vectors
 * (two clicks, snapped to mesh nodes), so submitted load directions carry
 * no raster ambiguity.
 */

import {
  clip,
  componentNode,
  connectedComponents,
  nearestNode,
  nodeCoords,
  roundHalfEven,
} from "./grid.js";
import type { BackendName, GridDims, SpecJson, SupportJson } from "./types.js";

export type LayerName = "shape" | "mask" | "fixX" | "fixY" | "fixXY";
export type BrushName = LayerName | "arrow" | "erase";

export const LAYER_NAMES: LayerName[] = ["shape", "mask", "fixX", "fixY", "fixXY"];

export interface Point {
  x: number;
  y: number;
}

export interface Arrow {
  tail: Point; // node coordinates
  head: Point;
}

export interface Params {
  volfrac: number;
  strength: number;
  seed: number;
  backend: BackendName;
}

export class CanvasDocument {
  readonly dims: GridDims;
  readonly layers: Record<LayerName, Uint8Array>;
  arrows: Arrow[] = [];
  params: Params = { volfrac: 0.3, strength: 0.8, seed: 0, backend: "stochastic" };
  brush: BrushName = "shape";
  brushSize = 2;

  constructor(nelx: number, nely: number) {
    if (nelx < 1 || nely < 1) throw new Error("grid must be at least 1x1");
    this.dims = { nelx, nely };
    this.layers = {
      shape: new Uint8Array(nelx * nely),
      mask: new Uint8Array(nelx * nely),
      fixX: new Uint8Array(nelx * nely),
      fixY: new Uint8Array(nelx * nely),
      fixXY: new Uint8Array(nelx * nely),
    };
  }

  /** Stamp a disc of cells. Erase clears every layer under the disc. */
  paint(ex: number, ey: number, brush?: BrushName, radius?: number): void {
    const b = brush ?? this.brush;
    if (b === "arrow") return;
    const r = Math.max(0, (radius ?? this.brushSize) - 1);
    const { nelx, nely } = this.dims;
    const cx = clip(Math.floor(ex), 0, nelx - 1);
    const cy = clip(Math.floor(ey), 0, nely - 1);
    for (let y = Math.max(0, cy - r); y <= Math.min(nely - 1, cy + r); y++) {
      for (let x = Math.max(0, cx - r); x <= Math.min(nelx - 1, cx + r); x++) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        const idx = y * nelx + x;
        if (b === "erase") {
          for (const name of LAYER_NAMES) this.layers[name][idx] = 0;
        } else {
          this.layers[b][idx] = 1;
        }
      }
    }
  }

  /** Two-click load arrow; endpoints snap to mesh nodes. */
  placeArrow(tail: Point, head: Point): Arrow {
    const { nelx, nely } = this.dims;
    const snap = (p: Point): Point => ({
      x: clip(roundHalfEven(p.x), 0, nelx),
      y: clip(roundHalfEven(p.y), 0, nely),
    });
    const a: Arrow = { tail: snap(tail), head: snap(head) };
    if (a.tail.x === a.head.x && a.tail.y === a.head.y) {
      throw new Error("arrow needs two distinct points");
    }
    this.arrows.push(a);
    return a;
  }

  removeArrow(index: number): void {
    this.arrows.splice(index, 1);
  }

  /** Wipe layers and arrows. Parameters and brush selection survive. */
  clear(): void {
    for (const name of LAYER_NAMES) this.layers[name].fill(0);
    this.arrows = [];
  }

  /** Constraint marks imply material beneath them. */
  effectiveShape(): Uint8Array {
    const out = new Uint8Array(this.layers.shape);
    for (const name of LAYER_NAMES) {
      if (name === "shape") continue;
      const layer = this.layers[name];
      for (let i = 0; i < out.length; i++) if (layer[i]) out[i] = 1;
    }
    return out;
  }

  supports(): SupportJson[] {
    const out: SupportJson[] = [];
    const flags: Array<[LayerName, boolean, boolean]> = [
      ["fixX", true, false],
      ["fixY", false, true],
      ["fixXY", true, true],
    ];
    for (const [name, fixX, fixY] of flags) {
      for (const comp of connectedComponents(this.layers[name], this.dims)) {
        out.push({ node: componentNode(this.dims, comp), fix_x: fixX, fix_y: fixY });
      }
    }
    return out;
  }

  /** Everything that should disable generate, with stable messages. */
  localIssues(): string[] {
    const issues: string[] = [];
    const shape = this.effectiveShape();
    let shapeCount = 0;
    for (let i = 0; i < shape.length; i++) shapeCount += shape[i];
    if (shapeCount === 0) issues.push("empty shape");
    if (this.supports().length === 0) issues.push("no supports drawn");
    if (this.arrows.length === 0) issues.push("no load arrows placed");
    const { volfrac } = this.params;
    if (!(volfrac > 0 && volfrac <= 1)) {
      issues.push("volume fraction out of range (0, 1]");
    } else if (shapeCount > 0) {
      let maskCount = 0;
      const mask = this.layers.mask;
      for (let i = 0; i < mask.length; i++) maskCount += mask[i];
      if (maskCount / shapeCount > volfrac) {
        issues.push("preserved region exceeds the volume target");
      }
    }
    return issues;
  }

  serialize(): SpecJson {
    const shape = this.effectiveShape();
    return {
      dims: { ...this.dims },
      shape: Array.from(shape),
      mask: Array.from(this.layers.mask),
      loads: this.arrows.map((a) => ({
        node: nearestNode(this.dims, a.tail.x, a.tail.y),
        fx: a.head.x - a.tail.x,
        fy: a.head.y - a.tail.y,
      })),
      supports: this.supports(),
      volfrac: this.params.volfrac,
      strength: this.params.strength,
      seed: this.params.seed,
    };
  }

  /** Human-readable node label for debugging and card tooltips. */
  describeNode(node: number): string {
    const [ix, iy] = nodeCoords(this.dims, node);
    return `(${ix}, ${iy})`;
  }
}
