/** DOM wiring: brush palette, drawing canvas, parameter panel, gallery. */

import { ApiError, StudioClient } from "./api.js";
import { CanvasDocument, LAYER_NAMES } from "./document.js";
import type { BrushName, Point } from "./document.js";
import { Gallery, cardFromJob } from "./gallery.js";
import type { ResultCard } from "./gallery.js";
import { LAYER_COLORS, rasterize } from "./raster.js";
import type { BackendName } from "./types.js";

const ZOOM = 10;
const EXPORT_ZOOM = 4;

const BRUSHES: Array<{ name: BrushName; label: string; hint: string }> = [
  { name: "shape", label: "Part", hint: "black: material region" },
  { name: "mask", label: "Preserve", hint: "cyan: keep these cells solid" },
  { name: "fixXY", label: "Pin", hint: "green: fix both directions" },
  { name: "fixX", label: "Roller X", hint: "yellow: fix x only" },
  { name: "fixY", label: "Roller Y", hint: "blue: fix y only" },
  { name: "arrow", label: "Load", hint: "red: click tail, then head" },
  { name: "erase", label: "Erase", hint: "clear cells under the brush" },
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://127.0.0.1:8765";
}

export class StudioApp {
  readonly doc = new CanvasDocument(64, 32);
  readonly gallery = new Gallery();
  readonly client: StudioClient;
  private canvas!: HTMLCanvasElement;
  private galleryEl!: HTMLElement;
  private toastEl!: HTMLElement;
  private generateBtn!: HTMLButtonElement;
  private iterateBtn!: HTMLButtonElement;
  private brushButtons = new Map<BrushName, HTMLButtonElement>();
  private pendingTail: Point | null = null;
  private selectedCard: ResultCard | null = null;
  private busy = false;

  constructor(private root: HTMLElement, client?: StudioClient) {
    this.client = client ?? new StudioClient(apiBase());
    this.build();
    this.redraw();
    this.refreshActions();
  }

  private build(): void {
    const toolbar = el("div", "toolbar");
    for (const { name, label, hint } of BRUSHES) {
      const btn = el("button", "brush", label);
      btn.title = hint;
      btn.addEventListener("click", () => {
        this.doc.brush = name;
        this.pendingTail = null;
        this.refreshBrushes();
      });
      this.brushButtons.set(name, btn);
      toolbar.append(btn);
    }
    const size = el("input") as HTMLInputElement;
    size.type = "range";
    size.min = "1";
    size.max = "5";
    size.value = String(this.doc.brushSize);
    size.title = "brush size";
    size.addEventListener("input", () => {
      this.doc.brushSize = Number(size.value);
    });
    toolbar.append(size);

    this.canvas = el("canvas", "board");
    this.canvas.width = this.doc.dims.nelx * ZOOM;
    this.canvas.height = this.doc.dims.nely * ZOOM;
    this.bindPointer();

    const panel = this.buildPanel();
    this.toastEl = el("div", "toasts");
    this.galleryEl = el("div", "gallery");

    const main = el("div", "main");
    main.append(toolbar, this.canvas, panel);
    this.root.append(main, this.galleryEl, this.toastEl);
    this.refreshBrushes();
  }

  private buildPanel(): HTMLElement {
    const panel = el("div", "panel");
    const addNumber = (
      label: string,
      value: number,
      step: string,
      apply: (v: number) => void,
    ): void => {
      const row = el("label", "field", label);
      const input = el("input") as HTMLInputElement;
      input.type = "number";
      input.step = step;
      input.value = String(value);
      input.addEventListener("change", () => {
        apply(Number(input.value));
        this.refreshActions();
      });
      row.append(input);
      panel.append(row);
    };
    addNumber("volume fraction", this.doc.params.volfrac, "0.01", (v) => {
      this.doc.params.volfrac = v;
    });
    addNumber("strength", this.doc.params.strength, "0.05", (v) => {
      this.doc.params.strength = v;
    });
    addNumber("seed", this.doc.params.seed, "1", (v) => {
      this.doc.params.seed = Math.max(0, Math.round(v));
    });

    const backendRow = el("label", "field", "backend");
    const backend = el("select") as HTMLSelectElement;
    for (const name of ["stochastic", "deterministic"]) {
      const opt = el("option", undefined, name) as HTMLOptionElement;
      opt.value = name;
      backend.append(opt);
    }
    backend.value = this.doc.params.backend;
    backend.addEventListener("change", () => {
      this.doc.params.backend = backend.value as BackendName;
    });
    backendRow.append(backend);
    panel.append(backendRow);

    this.generateBtn = el("button", "action", "Generate");
    this.generateBtn.addEventListener("click", () => void this.generate());
    this.iterateBtn = el("button", "action", "Iterate");
    this.iterateBtn.addEventListener("click", () => void this.iterate());
    const clearBtn = el("button", "action", "Clear");
    clearBtn.addEventListener("click", () => {
      this.doc.clear();
      this.pendingTail = null;
      this.redraw();
      this.refreshActions();
    });
    const exportBtn = el("button", "action", "Export PNG");
    exportBtn.addEventListener("click", () => this.exportPng());
    panel.append(this.generateBtn, this.iterateBtn, clearBtn, exportBtn);
    return panel;
  }

  private bindPointer(): void {
    let drawing = false;
    const toGrid = (ev: PointerEvent): Point => {
      const rect = this.canvas.getBoundingClientRect();
      return {
        x: ((ev.clientX - rect.left) / rect.width) * this.doc.dims.nelx,
        y: ((ev.clientY - rect.top) / rect.height) * this.doc.dims.nely,
      };
    };
    this.canvas.addEventListener("pointerdown", (ev) => {
      const p = toGrid(ev);
      if (this.doc.brush === "arrow") {
        if (this.pendingTail === null) {
          this.pendingTail = p;
        } else {
          try {
            this.doc.placeArrow(this.pendingTail, p);
          } catch (exc) {
            this.toast(String((exc as Error).message));
          }
          this.pendingTail = null;
        }
      } else {
        drawing = true;
        this.doc.paint(p.x, p.y);
      }
      this.redraw();
      this.refreshActions();
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!drawing) return;
      const p = toGrid(ev);
      this.doc.paint(p.x, p.y);
      this.redraw();
    });
    window.addEventListener("pointerup", () => {
      if (drawing) {
        drawing = false;
        this.refreshActions();
      }
    });
  }

  redraw(): void {
    const ctx = this.canvas.getContext("2d")!;
    const { nelx, nely } = this.doc.dims;
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    for (const name of LAYER_NAMES) {
      const [r, g, b] = LAYER_COLORS[name];
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      const layer = this.doc.layers[name];
      for (let ey = 0; ey < nely; ey++) {
        for (let ex = 0; ex < nelx; ex++) {
          if (layer[ey * nelx + ex]) ctx.fillRect(ex * ZOOM, ey * ZOOM, ZOOM, ZOOM);
        }
      }
    }
    ctx.strokeStyle = "rgb(255,0,0)";
    ctx.fillStyle = "rgb(255,0,0)";
    ctx.lineWidth = 2;
    for (const arrow of this.doc.arrows) {
      const tx = arrow.tail.x * ZOOM;
      const ty = arrow.tail.y * ZOOM;
      const hx = arrow.head.x * ZOOM;
      const hy = arrow.head.y * ZOOM;
      ctx.beginPath();
      ctx.moveTo(tx, ty);
      ctx.lineTo(hx, hy);
      ctx.stroke();
      const angle = Math.atan2(hy - ty, hx - tx);
      ctx.beginPath();
      ctx.moveTo(hx, hy);
      ctx.lineTo(hx - 10 * Math.cos(angle - 0.4), hy - 10 * Math.sin(angle - 0.4));
      ctx.lineTo(hx - 10 * Math.cos(angle + 0.4), hy - 10 * Math.sin(angle + 0.4));
      ctx.closePath();
      ctx.fill();
    }
  }

  private refreshBrushes(): void {
    for (const [name, btn] of this.brushButtons) {
      btn.classList.toggle("active", name === this.doc.brush);
    }
  }

  refreshActions(): void {
    const issues = this.doc.localIssues();
    this.generateBtn.disabled = this.busy || issues.length > 0;
    this.generateBtn.title = issues.join("; ");
    this.iterateBtn.disabled = this.busy || this.selectedCard === null;
  }

  private toast(message: string): void {
    const t = el("div", "toast", message);
    this.toastEl.append(t);
    setTimeout(() => t.remove(), 6000);
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    this.refreshActions();
  }

  async generate(): Promise<void> {
    if (this.busy) return;
    this.setBusy(true);
    try {
      const id = await this.client.submit({
        spec: this.doc.serialize(),
        backend: this.doc.params.backend,
      });
      await this.finishJob(id);
    } catch (exc) {
      this.reportError(exc);
    } finally {
      this.setBusy(false);
    }
  }

  async iterate(): Promise<void> {
    if (this.busy || !this.selectedCard) return;
    this.setBusy(true);
    try {
      const id = await this.client.iterate(this.selectedCard.jobId, {
        mask: Array.from(this.doc.layers.mask),
        volfrac: this.doc.params.volfrac,
        strength: this.doc.params.strength,
        seed: this.doc.params.seed,
        backend: this.doc.params.backend,
      });
      await this.finishJob(id);
    } catch (exc) {
      this.reportError(exc);
    } finally {
      this.setBusy(false);
    }
  }

  private async finishJob(id: string): Promise<void> {
    const job = await this.client.pollUntilDone(id);
    const metrics = await this.client.metrics(id);
    const card = this.gallery.add(
      cardFromJob(job, metrics, (jobId, kind) => this.client.artifactUrl(jobId, kind)),
    );
    this.renderCard(card);
    this.selectCard(card);
  }

  private reportError(exc: unknown): void {
    if (exc instanceof ApiError && exc.issues.length) {
      for (const issue of exc.issues) this.toast(issue);
    } else {
      this.toast(String((exc as Error).message ?? exc));
    }
  }

  private renderCard(card: ResultCard): void {
    const box = el("div", "card");
    box.dataset.jobId = card.jobId;
    const img = el("img") as HTMLImageElement;
    img.src = card.previewUrl;
    img.alt = `result ${card.jobId}`;
    const caption = el("div", "caption");
    caption.append(
      el("div", undefined, `compliance ${card.compliance.toPrecision(5)}`),
      el("div", undefined, `volume ${card.achievedVolfrac.toFixed(3)}`),
      el(
        "div",
        undefined,
        `${card.backend} seed ${card.seed}` + (card.parentId ? ` < ${card.parentId}` : ""),
      ),
    );
    const downloads = el("div", "downloads");
    const stl = el("a", undefined, "STL") as HTMLAnchorElement;
    stl.href = card.stlUrl;
    stl.setAttribute("download", `${card.jobId}.stl`);
    const png = el("a", undefined, "PNG") as HTMLAnchorElement;
    png.href = card.previewUrl;
    png.setAttribute("download", `${card.jobId}.png`);
    downloads.append(stl, png);
    box.append(img, caption, downloads);
    box.addEventListener("click", () => this.selectCard(card));
    this.galleryEl.append(box);
  }

  private selectCard(card: ResultCard): void {
    this.selectedCard = card;
    for (const child of Array.from(this.galleryEl.children)) {
      (child as HTMLElement).classList.toggle(
        "selected",
        (child as HTMLElement).dataset.jobId === card.jobId,
      );
    }
    this.refreshActions();
  }

  private exportPng(): void {
    const raster = rasterize(this.doc, EXPORT_ZOOM);
    const off = document.createElement("canvas");
    off.width = raster.width;
    off.height = raster.height;
    const ctx = off.getContext("2d")!;
    const pixels = new Uint8ClampedArray(raster.data);
    ctx.putImageData(new ImageData(pixels, raster.width, raster.height), 0, 0);
    off.toBlob((blob) => {
      if (!blob) return;
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.setAttribute("download", "sketch.png");
      a.click();
      URL.revokeObjectURL(a.href);
    }, "image/png");
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  new StudioApp(document.getElementById("app")!);
}
