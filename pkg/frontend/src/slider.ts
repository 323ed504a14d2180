// Circular tour slider geometry. The ring is split into one arc per
// segment with angular width proportional to its geodesic length, so
// thin arcs mark stretched regions of projection space. Tick marks sit
// at the keyframe positions. Angles are radians, measured clockwise
// from 12 o'clock (screen convention).

export interface Arc {
  index: number;
  startAngle: number;
  endAngle: number;
}

const TAU = 2 * Math.PI;

export function positionToAngle(t: number): number {
  return (((t % 1) + 1) % 1) * TAU;
}

export function angleToPosition(angle: number): number {
  return (((angle % TAU) + TAU) % TAU) / TAU;
}

/** One ring arc per segment, widths proportional to segment lengths. */
export function segmentArcs(segmentLengths: number[]): Arc[] {
  const total = segmentLengths.reduce((a, b) => a + b, 0);
  const arcs: Arc[] = [];
  let acc = 0;
  for (let i = 0; i < segmentLengths.length; i++) {
    const width = total > 0 ? (segmentLengths[i] / total) * TAU : 0;
    arcs.push({ index: i, startAngle: acc, endAngle: acc + width });
    acc += width;
  }
  return arcs;
}

export function tickAngles(keyframePositions: number[]): number[] {
  return keyframePositions.map(positionToAngle);
}

/**
 * Pointer position (relative to the ring center, screen coordinates)
 * to a tour position. Returns null outside the ring band.
 */
export function pointerToT(
  dx: number,
  dy: number,
  innerRadius: number,
  outerRadius: number,
): number | null {
  const r = Math.hypot(dx, dy);
  if (r < innerRadius || r > outerRadius) return null;
  // atan2 with 0 at 12 o'clock, increasing clockwise
  const angle = Math.atan2(dx, -dy);
  return angleToPosition(angle);
}

/** Scroll-wheel scrubbing: monotone in deltaY, wraps around the loop. */
export function wheelToT(t: number, deltaY: number, cyclic: boolean, sensitivity = 1 / 1200): number {
  const next = t + deltaY * sensitivity;
  if (cyclic) return ((next % 1) + 1) % 1;
  return Math.min(Math.max(next, 0), 1);
}

/** SVG arc path for a ring sector (stroke-based rendering). */
export function arcPath(cx: number, cy: number, radius: number, arc: Arc, gap = 0.02): string {
  const a0 = arc.startAngle + gap / 2;
  const a1 = Math.max(arc.endAngle - gap / 2, a0 + 1e-4);
  const x0 = cx + radius * Math.sin(a0);
  const y0 = cy - radius * Math.cos(a0);
  const x1 = cx + radius * Math.sin(a1);
  const y1 = cy - radius * Math.cos(a1);
  const large = a1 - a0 > Math.PI ? 1 : 0;
  return `M ${x0.toFixed(3)} ${y0.toFixed(3)} A ${radius} ${radius} 0 ${large} 1 ${x1.toFixed(3)} ${y1.toFixed(3)}`;
}
