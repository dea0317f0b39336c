import { describe, expect, it } from "vitest";

import { CanvasDocument } from "../src/document.js";
import { nodeIndex } from "../src/grid.js";

function dotted(): CanvasDocument {
  const doc = new CanvasDocument(24, 12);
  for (let y = 2; y < 10; y++) {
    for (let x = 1; x < 23; x++) doc.paint(x, y, "shape", 1);
  }
  doc.paint(2, 2, "fixXY", 1);
  doc.paint(2, 9, "fixXY", 1);
  doc.placeArrow({ x: 22, y: 6 }, { x: 14, y: 6 });
  return doc;
}

describe("CanvasDocument", () => {
  it("starts with every generate precondition violated", () => {
    const doc = new CanvasDocument(16, 8);
    const issues = doc.localIssues();
    expect(issues).toContain("empty shape");
    expect(issues).toContain("no supports drawn");
    expect(issues).toContain("no load arrows placed");
  });

  it("constraint marks imply material beneath them", () => {
    const doc = new CanvasDocument(16, 8);
    doc.paint(5, 5, "fixXY", 1);
    expect(doc.layers.shape[5 * 16 + 5]).toBe(0);
    expect(doc.effectiveShape()[5 * 16 + 5]).toBe(1);
  });

  it("serializes supports at parser-identical nodes", () => {
    const doc = dotted();
    const spec = doc.serialize();
    // single-cell pins at (2,2) and (2,9): centers (2.5, 2.5)/(2.5, 9.5)
    // snap half-even to nodes (2,2) and (2,10)
    expect(spec.supports).toEqual([
      { node: nodeIndex(doc.dims, 2, 2), fix_x: true, fix_y: true },
      { node: nodeIndex(doc.dims, 2, 10), fix_x: true, fix_y: true },
    ]);
  });

  it("serializes arrows as exact vectors anchored at the tail", () => {
    const doc = dotted();
    const spec = doc.serialize();
    expect(spec.loads).toEqual([
      { node: nodeIndex(doc.dims, 22, 6), fx: -8, fy: 0 },
    ]);
  });

  it("snaps arrow endpoints to nodes and rejects zero-length arrows", () => {
    const doc = new CanvasDocument(16, 8);
    const arrow = doc.placeArrow({ x: 10.4, y: 3.6 }, { x: 10.4, y: 7.2 });
    expect(arrow.tail).toEqual({ x: 10, y: 4 });
    expect(arrow.head).toEqual({ x: 10, y: 7 });
    expect(() => doc.placeArrow({ x: 1.1, y: 1.1 }, { x: 0.9, y: 0.9 })).toThrow(
      /distinct/,
    );
  });

  it("keeps the preserved region inside the part in serialized specs", () => {
    const doc = new CanvasDocument(16, 8);
    doc.paint(3, 3, "mask", 2);
    const spec = doc.serialize();
    for (let i = 0; i < spec.mask.length; i++) {
      if (spec.mask[i]) expect(spec.shape[i]).toBe(1);
    }
  });

  it("flags an infeasible preserve/volume combination", () => {
    const doc = dotted();
    doc.params.volfrac = 0.05;
    for (let y = 3; y < 9; y++) {
      for (let x = 4; x < 20; x++) doc.paint(x, y, "mask", 1);
    }
    expect(doc.localIssues()).toContain("preserved region exceeds the volume target");
  });

  it("clear wipes geometry but retains parameters and brush", () => {
    const doc = dotted();
    doc.params = { volfrac: 0.42, strength: 0.6, seed: 7, backend: "deterministic" };
    doc.brush = "mask";
    doc.clear();
    expect(Array.from(doc.effectiveShape()).every((v) => v === 0)).toBe(true);
    expect(doc.arrows).toHaveLength(0);
    expect(doc.params).toEqual({
      volfrac: 0.42,
      strength: 0.6,
      seed: 7,
      backend: "deterministic",
    });
    expect(doc.brush).toBe("mask");
    expect(doc.localIssues()).toContain("empty shape");
  });

  it("produces a clean issue list once shape, support, and load exist", () => {
    expect(dotted().localIssues()).toEqual([]);
  });
});
