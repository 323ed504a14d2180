// Lasso capture: accumulate pointer samples into a polygon in data
// space, decimated so the server message stays small. Selection logic
// itself lives server-side; the UI just ships the polygon.

export class LassoTrace {
  private points: [number, number][] = [];
  private minStep: number;

  constructor(minStepDataUnits = 0) {
    this.minStep = minStepDataUnits;
  }

  add(x: number, y: number): void {
    const last = this.points[this.points.length - 1];
    if (last && Math.hypot(x - last[0], y - last[1]) < this.minStep) return;
    this.points.push([x, y]);
  }

  get valid(): boolean {
    return this.points.length >= 3;
  }

  polygon(): [number, number][] {
    return this.points.slice();
  }

  message(seq: number, combine: "replace" | "add" | "subtract" = "replace") {
    return { type: "lasso", seq, polygon: this.polygon(), combine };
  }
}
