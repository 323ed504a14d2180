// Manual-tour axis handles: one per data dimension, drawn at that
// dimension's row of the basis scaled to the plot radius. Row norms of
// an orthonormal basis never exceed 1, so handles stay inside the unit
// disc. Dragging reports the new target direction in basis units.

export interface Handle {
  dim: number;
  name: string;
  x: number; // in plot units, |(x, y)| <= scale
  y: number;
  length: number; // row norm in [0, 1]
}

export function handlePositions(basis: Float32Array, p: number, dimNames: string[], scale = 1): Handle[] {
  const handles: Handle[] = [];
  for (let j = 0; j < p; j++) {
    const hx = basis[j];
    const hy = basis[p + j];
    handles.push({
      dim: j,
      name: dimNames[j] ?? `dim ${j}`,
      x: hx * scale,
      y: hy * scale,
      length: Math.hypot(hx, hy),
    });
  }
  return handles;
}

/**
 * Convert a pointer position (plot units) into a drag target direction,
 * clamped to the unit disc the orthonormality constraint allows.
 */
export function dragDirection(px: number, py: number, scale = 1): [number, number] {
  let dx = px / scale;
  let dy = py / scale;
  const norm = Math.hypot(dx, dy);
  if (norm > 1) {
    dx /= norm;
    dy /= norm;
  }
  return [dx, dy];
}

/**
 * Shift-drag rotation angle about the residual axis: horizontal pointer
 * motion maps to rotation, one plot width = pi radians.
 */
export function residualAngle(dxPixels: number, plotWidthPixels: number): number {
  return (dxPixels / plotWidthPixels) * Math.PI;
}
