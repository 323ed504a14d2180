// Point color encodings: categorical palette, continuous colormap, and
// a 2D colormap anchored to one reference projection. The 2D colors are
// derived once from the reference positions and never recomputed while
// scrubbing, so they stay stable across the whole tour.

export type RGB = [number, number, number];

// 12-class qualitative palette; beyond 12 the hues cycle and the UI
// shows a legend note.
export const CATEGORICAL_PALETTE: RGB[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
  [188, 189, 34],
  [23, 190, 207],
  [174, 199, 232],
  [255, 187, 120],
];

export function categoricalColor(code: number): RGB {
  return CATEGORICAL_PALETTE[code % CATEGORICAL_PALETTE.length];
}

export function categoricalCycles(nCategories: number): boolean {
  return nCategories > CATEGORICAL_PALETTE.length;
}

// Compact viridis-like stops, linearly interpolated.
const CONTINUOUS_STOPS: RGB[] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function continuousColor(value: number, min: number, max: number): RGB {
  const span = max - min;
  let u = span > 0 ? (value - min) / span : 0.5;
  u = Math.min(Math.max(u, 0), 1);
  const scaled = u * (CONTINUOUS_STOPS.length - 1);
  const i = Math.min(Math.floor(scaled), CONTINUOUS_STOPS.length - 2);
  const f = scaled - i;
  const a = CONTINUOUS_STOPS[i];
  const b = CONTINUOUS_STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/**
 * 2D colormap over a reference frame: hue from the angle around the
 * reference centroid, lightness from the radius. Colors are computed in
 * the constructor, from reference positions only.
 */
export class TwoDColormap {
  readonly colors: Uint8Array; // n * 3

  constructor(refX: Float32Array, refY: Float32Array) {
    const n = refX.length;
    let cx = 0;
    let cy = 0;
    for (let i = 0; i < n; i++) {
      cx += refX[i];
      cy += refY[i];
    }
    cx /= n || 1;
    cy /= n || 1;
    let rmax = 1e-12;
    for (let i = 0; i < n; i++) {
      const r = Math.hypot(refX[i] - cx, refY[i] - cy);
      if (r > rmax) rmax = r;
    }
    this.colors = new Uint8Array(n * 3);
    for (let i = 0; i < n; i++) {
      const dx = refX[i] - cx;
      const dy = refY[i] - cy;
      const hue = (Math.atan2(dy, dx) / (2 * Math.PI) + 0.5) * 360;
      const radius = Math.hypot(dx, dy) / rmax;
      const [r, g, b] = hslToRgb(hue, 0.65, 0.75 - 0.45 * radius);
      this.colors[3 * i] = r;
      this.colors[3 * i + 1] = g;
      this.colors[3 * i + 2] = b;
    }
  }

  color(i: number): RGB {
    return [this.colors[3 * i], this.colors[3 * i + 1], this.colors[3 * i + 2]];
  }
}

export function hslToRgb(h: number, s: number, l: number): RGB {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const hp = (((h % 360) + 360) % 360) / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  let rgb: [number, number, number];
  if (hp < 1) rgb = [c, x, 0];
  else if (hp < 2) rgb = [x, c, 0];
  else if (hp < 3) rgb = [0, c, x];
  else if (hp < 4) rgb = [0, x, c];
  else if (hp < 5) rgb = [x, 0, c];
  else rgb = [c, 0, x];
  const m = l - c / 2;
  return [
    Math.round((rgb[0] + m) * 255),
    Math.round((rgb[1] + m) * 255),
    Math.round((rgb[2] + m) * 255),
  ];
}
