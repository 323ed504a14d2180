// Keyframe gallery: preview thumbnails arranged around the circular
// slider at their keyframe angles, acting as lookahead and orientation.
// Clicking a preview glides the central view to that keyframe.

import { positionToAngle } from "./slider.js";

export interface PreviewSlot {
  index: number;
  label: string;
  loadingsText: string;
  angle: number;
  x: number;
  y: number;
  t: number;
}

export function layoutGallery(
  keyframePositions: number[],
  keyframeMeta: { label: string; loadings: [number, number][] | null }[],
  dimNames: string[],
  radius: number,
): PreviewSlot[] {
  return keyframePositions.map((t, index) => {
    const angle = positionToAngle(t);
    const loadings = keyframeMeta[index]?.loadings ?? null;
    const loadingsText = loadings
      ? loadings
          .slice(0, 3)
          .map(([dim, w]) => `${dimNames[dim] ?? `d${dim}`} ${w.toFixed(2)}`)
          .join(", ")
      : "";
    return {
      index,
      label: keyframeMeta[index]?.label ?? `keyframe ${index}`,
      loadingsText,
      angle,
      x: radius * Math.sin(angle),
      y: -radius * Math.cos(angle),
      t,
    };
  });
}

/** Message emitted when a preview is clicked: animated glide to its t. */
export function previewClickMessage(slot: PreviewSlot, seq: number) {
  return { type: "set_t", seq, t: slot.t, animate: true };
}
