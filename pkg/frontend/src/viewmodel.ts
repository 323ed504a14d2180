// Client-side session state: the dataset columns uploaded once, the
// current 2p-float basis, and derived positions. The renderer applies
// the basis on the GPU; applyBasis here is the CPU reference used for
// previews, picking, and tests. Points are identified by index, so a
// basis change moves them — it never re-creates them.

import type { HelloMessage } from "./protocol.js";

export interface LabelData {
  name: string;
  kind: "categorical" | "continuous";
  categories: string[] | null;
  codes?: Uint16Array;
  values?: Float32Array;
}

export class ViewModel {
  readonly n: number;
  readonly p: number;
  readonly dimNames: string[];
  readonly columns: Float32Array[];
  readonly labels: LabelData[];
  readonly cyclic: boolean;
  readonly segmentLengths: number[];
  readonly keyframePositions: number[];
  readonly keyframeMeta: { label: string; loadings: [number, number][] | null }[];

  t: number;
  mode: string;
  playing: boolean;
  speed: number;
  basis: Float32Array; // column-major 2p floats
  selection: Uint8Array;

  constructor(hello: HelloMessage, columns: Float32Array[], labels: LabelData[]) {
    if (columns.length !== hello.p) {
      throw new Error(`expected ${hello.p} embedded columns, got ${columns.length}`);
    }
    this.n = hello.n;
    this.p = hello.p;
    this.dimNames = hello.dim_names;
    this.columns = columns;
    this.labels = labels;
    this.cyclic = hello.cyclic;
    this.segmentLengths = hello.segment_lengths;
    this.keyframePositions = hello.keyframe_positions;
    this.keyframeMeta = hello.keyframes;
    this.t = hello.t;
    this.mode = hello.mode;
    this.playing = hello.playing;
    this.speed = hello.speed;
    this.basis = new Float32Array(2 * hello.p);
    this.selection = new Uint8Array(hello.n);
  }

  setBasis(basis: Float32Array, t: number): void {
    if (basis.length !== 2 * this.p) {
      throw new Error(`basis must have ${2 * this.p} floats, got ${basis.length}`);
    }
    this.basis = basis;
    this.t = t;
  }

  /**
   * Project every point through a basis on the CPU: x_i = sum_j c_j[i] * bx[j].
   * Accumulates in doubles and rounds to f32, matching the server's math.
   */
  applyBasis(basis: Float32Array, out?: { x: Float32Array; y: Float32Array }): { x: Float32Array; y: Float32Array } {
    const { n, p, columns } = this;
    const x = out?.x ?? new Float32Array(n);
    const y = out?.y ?? new Float32Array(n);
    const ax = new Float64Array(n);
    const ay = new Float64Array(n);
    for (let j = 0; j < p; j++) {
      const col = columns[j];
      const wx = basis[j];
      const wy = basis[p + j];
      for (let i = 0; i < n; i++) {
        ax[i] += col[i] * wx;
        ay[i] += col[i] * wy;
      }
    }
    for (let i = 0; i < n; i++) {
      x[i] = Math.fround(ax[i]);
      y[i] = Math.fround(ay[i]);
    }
    return { x, y };
  }

  positions(): { x: Float32Array; y: Float32Array } {
    return this.applyBasis(this.basis);
  }

  bounds(pos: { x: Float32Array; y: Float32Array }): [number, number, number, number] {
    let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
    for (let i = 0; i < pos.x.length; i++) {
      if (pos.x[i] < x0) x0 = pos.x[i];
      if (pos.x[i] > x1) x1 = pos.x[i];
      if (pos.y[i] < y0) y0 = pos.y[i];
      if (pos.y[i] > y1) y1 = pos.y[i];
    }
    return [x0, y0, x1, y1];
  }
}

/** Map data-space positions to pixel coordinates inside a square viewport. */
export function toPixels(
  x: number,
  y: number,
  bounds: [number, number, number, number],
  sizePx: number,
): [number, number] {
  const [x0, y0, x1, y1] = bounds;
  const span = Math.max(x1 - x0, y1 - y0) || 1;
  const cx = (x0 + x1) / 2;
  const cy = (y0 + y1) / 2;
  const px = ((x - cx) / span + 0.5) * sizePx;
  const py = ((cy - y) / span + 0.5) * sizePx; // screen y grows downward
  return [px, py];
}
