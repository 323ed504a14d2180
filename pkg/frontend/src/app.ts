// Application bootstrap: wires the session client to the renderer, the
// circular slider, the gallery, manual handles, and the lasso overlay.

import { SessionClient } from "./client.js";
import { TwoDColormap, categoricalColor, continuousColor } from "./encoding.js";
import { layoutGallery, previewClickMessage } from "./gallery.js";
import { dragDirection, handlePositions, residualAngle } from "./handles.js";
import { LassoTrace } from "./lasso.js";
import { ScatterRenderer } from "./render/scatter.js";
import { arcPath, pointerToT, segmentArcs, tickAngles, wheelToT } from "./slider.js";
import { toPixels, type ViewModel } from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  return node;
}

export class App {
  private client: SessionClient;
  private renderer: ScatterRenderer | null = null;
  private vm: ViewModel | null = null;
  private canvas: HTMLCanvasElement;
  private ring: SVGSVGElement;
  private handleLayer: SVGSVGElement;
  private galleryLayer: HTMLDivElement;
  private statusBar: HTMLDivElement;
  private twod: TwoDColormap | null = null;
  private lasso: LassoTrace | null = null;
  private needsDraw = false;

  constructor(root: HTMLElement, url: string) {
    this.canvas = el("canvas", "scatter");
    this.ring = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.ring.setAttribute("class", "ring");
    this.handleLayer = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.handleLayer.setAttribute("class", "handles");
    this.galleryLayer = el("div", "gallery");
    this.statusBar = el("div", "status");
    root.append(this.canvas, this.handleLayer, this.ring, this.galleryLayer, this.statusBar);

    this.client = new SessionClient(url);
    this.client.on("ready", (vm) => this.onReady(vm));
    this.client.on("basis", () => this.scheduleDraw());
    this.client.on("selection", (mask) => {
      this.renderer?.uploadSelection(mask);
      this.scheduleDraw();
    });
    this.client.on("previews", (frame) => this.renderGallery(frame.frames));
    this.client.on("error", (code, message) => {
      this.statusBar.textContent = `${code}: ${message}`;
    });
    this.client.on("state", (msg) => {
      const mode = (msg as { mode?: unknown }).mode;
      if (this.vm && typeof mode === "string") this.vm.mode = mode;
    });
  }

  private onReady(vm: ViewModel): void {
    this.vm = vm;
    const gl = this.canvas.getContext("webgl2");
    if (!gl) {
      this.statusBar.textContent = "WebGL2 is required";
      return;
    }
    this.renderer = new ScatterRenderer(gl);
    this.renderer.uploadColumns(vm.columns);
    const pos = vm.applyBasis(vm.basis);
    const [x0, y0, x1, y1] = vm.bounds(pos);
    const halfSpan = Math.max(x1 - x0, y1 - y0) / 2 || 1;
    this.renderer.setViewport((x0 + x1) / 2, (y0 + y1) / 2, halfSpan * 1.1, 3);
    this.applyEncoding();
    this.renderRing();
    this.attachInteraction();
    this.client.requestPreviews();
    this.scheduleDraw();
    const loop = () => {
      if (this.needsDraw && this.renderer && this.vm) {
        this.renderer.setBasis(this.vm.basis);
        this.renderer.draw();
        this.renderHandles();
        this.needsDraw = false;
      }
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  private scheduleDraw(): void {
    this.needsDraw = true;
  }

  private applyEncoding(): void {
    const vm = this.vm;
    if (!vm || !this.renderer) return;
    const rgb = new Uint8Array(vm.n * 3);
    const categorical = vm.labels.find((l) => l.kind === "categorical");
    const continuous = vm.labels.find((l) => l.kind === "continuous");
    if (categorical?.codes) {
      for (let i = 0; i < vm.n; i++) {
        const [r, g, b] = categoricalColor(categorical.codes[i]);
        rgb.set([r, g, b], 3 * i);
      }
    } else if (continuous?.values) {
      let min = Infinity;
      let max = -Infinity;
      for (const v of continuous.values) {
        if (v < min) min = v;
        if (v > max) max = v;
      }
      for (let i = 0; i < vm.n; i++) {
        rgb.set(continuousColor(continuous.values[i], min, max), 3 * i);
      }
    } else {
      // 2D colormap anchored at the opening frame; computed once.
      const ref = vm.applyBasis(vm.basis);
      this.twod = new TwoDColormap(ref.x, ref.y);
      rgb.set(this.twod.colors);
    }
    this.renderer.uploadColors(rgb);
  }

  private renderRing(): void {
    const vm = this.vm;
    if (!vm) return;
    const size = 720;
    const radius = 330;
    this.ring.setAttribute("viewBox", `${-size / 2} ${-size / 2} ${size} ${size}`);
    this.ring.innerHTML = "";
    for (const arc of segmentArcs(vm.segmentLengths)) {
      const path = document.createElementNS(SVG_NS, "path");
      path.setAttribute("d", arcPath(0, 0, radius, arc));
      path.setAttribute("class", "ring-segment");
      this.ring.appendChild(path);
    }
    for (const angle of tickAngles(vm.keyframePositions)) {
      const tick = document.createElementNS(SVG_NS, "line");
      tick.setAttribute("x1", String((radius - 10) * Math.sin(angle)));
      tick.setAttribute("y1", String(-(radius - 10) * Math.cos(angle)));
      tick.setAttribute("x2", String((radius + 10) * Math.sin(angle)));
      tick.setAttribute("y2", String(-(radius + 10) * Math.cos(angle)));
      tick.setAttribute("class", "ring-tick");
      this.ring.appendChild(tick);
    }
  }

  private renderGallery(previews: Float32Array[]): void {
    const vm = this.vm;
    if (!vm) return;
    this.galleryLayer.innerHTML = "";
    const slots = layoutGallery(vm.keyframePositions, vm.keyframeMeta, vm.dimNames, 400);
    const thumb = 96;
    slots.forEach((slot, k) => {
      const card = el("div", "preview");
      card.style.left = `calc(50% + ${slot.x}px - ${thumb / 2}px)`;
      card.style.top = `calc(50% + ${slot.y}px - ${thumb / 2}px)`;
      const cv = el("canvas");
      cv.width = thumb;
      cv.height = thumb;
      const ctx = cv.getContext("2d");
      const pts = previews[k];
      if (ctx && pts) {
        ctx.fillStyle = "#15151a";
        ctx.fillRect(0, 0, thumb, thumb);
        ctx.fillStyle = "#9ecbff";
        let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
        for (let i = 0; i < pts.length; i += 2) {
          if (pts[i] < x0) x0 = pts[i];
          if (pts[i] > x1) x1 = pts[i];
          if (pts[i + 1] < y0) y0 = pts[i + 1];
          if (pts[i + 1] > y1) y1 = pts[i + 1];
        }
        for (let i = 0; i < pts.length; i += 2) {
          const [px, py] = toPixels(pts[i], pts[i + 1], [x0, y0, x1, y1], thumb);
          ctx.fillRect(px, py, 1, 1);
        }
      }
      const caption = el("div", "caption");
      caption.textContent = slot.label;
      const loadings = el("div", "loadings");
      loadings.textContent = slot.loadingsText;
      card.append(cv, caption, loadings);
      card.onclick = () => this.client.send(previewClickMessage(slot, 0));
      this.galleryLayer.appendChild(card);
    });
  }

  private renderHandles(): void {
    const vm = this.vm;
    if (!vm || vm.mode !== "manual") {
      this.handleLayer.innerHTML = "";
      return;
    }
    const size = 600;
    this.handleLayer.setAttribute("viewBox", `${-size / 2} ${-size / 2} ${size} ${size}`);
    this.handleLayer.innerHTML = "";
    const scale = size / 2 - 40;
    for (const handle of handlePositions(vm.basis, vm.p, vm.dimNames, scale)) {
      const line = document.createElementNS(SVG_NS, "line");
      line.setAttribute("x1", "0");
      line.setAttribute("y1", "0");
      line.setAttribute("x2", String(handle.x));
      line.setAttribute("y2", String(-handle.y));
      line.setAttribute("class", "handle-line");
      const knob = document.createElementNS(SVG_NS, "circle");
      knob.setAttribute("cx", String(handle.x));
      knob.setAttribute("cy", String(-handle.y));
      knob.setAttribute("r", "7");
      knob.setAttribute("class", "handle-knob");
      knob.addEventListener("pointerdown", (down) => {
        down.preventDefault();
        const startX = down.clientX;
        const move = (ev: PointerEvent) => {
          if (ev.shiftKey) {
            this.client.rotateResidual(residualAngle(ev.clientX - startX, size));
            return;
          }
          const rect = this.handleLayer.getBoundingClientRect();
          const px = ev.clientX - rect.left - rect.width / 2;
          const py = -(ev.clientY - rect.top - rect.height / 2);
          this.client.drag(handle.dim, dragDirection(px, py, scale));
        };
        const up = () => {
          window.removeEventListener("pointermove", move);
          window.removeEventListener("pointerup", up);
        };
        window.addEventListener("pointermove", move);
        window.addEventListener("pointerup", up);
      });
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(handle.x * 1.08));
      label.setAttribute("y", String(-handle.y * 1.08));
      label.setAttribute("class", "handle-label");
      label.textContent = handle.name;
      this.handleLayer.append(line, knob, label);
    }
  }

  private attachInteraction(): void {
    const vm = this.vm;
    if (!vm) return;
    this.ring.addEventListener("pointerdown", (ev) => {
      const rect = this.ring.getBoundingClientRect();
      const dx = ev.clientX - rect.left - rect.width / 2;
      const dy = ev.clientY - rect.top - rect.height / 2;
      const scale = 720 / rect.width;
      const t = pointerToT(dx * scale, dy * scale, 280, 380);
      if (t !== null) this.client.setT(t);
    });
    window.addEventListener("wheel", (ev) => {
      if (!this.vm) return;
      this.client.setT(wheelToT(this.vm.t, ev.deltaY, this.vm.cyclic));
    });
    window.addEventListener("keydown", (ev) => {
      if (ev.key === " ") {
        this.vm?.playing ? this.client.pause() : this.client.play();
      } else if (ev.key === "m") {
        this.client.setMode("manual");
      } else if (ev.key === "g") {
        this.client.setMode("guided");
      } else if (ev.key === "r") {
        this.client.setMode("grand");
      }
    });
    this.canvas.addEventListener("pointerdown", (ev) => {
      if (this.vm?.mode === "manual") return;
      this.lasso = new LassoTrace();
      const move = (m: PointerEvent) => {
        const rect = this.canvas.getBoundingClientRect();
        this.lasso?.add(m.clientX - rect.left, m.clientY - rect.top);
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
        if (this.lasso?.valid) {
          const rect = this.canvas.getBoundingClientRect();
          const pos = this.vm!.positions();
          const bounds = this.vm!.bounds(pos);
          const polygon = this.lasso.polygon().map(([px, py]) => {
            const [x0, y0, x1, y1] = bounds;
            const span = Math.max(x1 - x0, y1 - y0) || 1;
            const x = x0 + ((px / rect.width) - 0.5) * span + (x1 - x0) / 2;
            const y = y0 + (0.5 - py / rect.height) * span + (y1 - y0) / 2;
            return [x, y] as [number, number];
          });
          this.client.send({ type: "lasso", polygon, combine: ev.shiftKey ? "add" : "replace" });
        }
        this.lasso = null;
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    });
  }
}

declare global {
  interface Window {
    dtourApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const url = `ws://${location.host}/ws`;
  window.dtourApp = new App(document.getElementById("app")!, url);
}
