/** Payload -> display list -> canvas.
 *
 * The display list is pure data derived from the latest session payload:
 * every label string embeds server-sent numbers unchanged.  The canvas
 * painter consumes the list but computes nothing, which keeps rendering
 * assertable in tests without a graphics context.
 */

import { bandColor, MASK_FILL, NEUTRAL_BOX, REJECTED_BOX } from "./colors";
import { rleDecode } from "./rle";
import { DetectionPayload, SessionView } from "./types";

export interface BoxItem {
  kind: "box";
  detectionId: string;
  x: number;
  y: number;
  width: number;
  height: number;
  color: string;
  label: string; // "<class> <confidence>"
}

export interface MaskItem {
  kind: "mask";
  detectionId: string;
  x: number;
  y: number;
  width: number;
  height: number;
  bits: Uint8Array;
  fill: string;
}

export interface BadgeItem {
  kind: "badge";
  detectionId: string;
  x: number;
  y: number;
  color: string;
  text: string; // "<band> <CS>" from the assessment payload
}

export type OverlayItem = BoxItem | MaskItem | BadgeItem;

export function confidenceLabel(det: DetectionPayload): string {
  return `${det.class} ${det.confidence.toFixed(2)}`;
}

export function boxColor(det: DetectionPayload): string {
  if (det.review === "Rejected") return REJECTED_BOX;
  if (det.assessment) return bandColor(det.assessment.band);
  return NEUTRAL_BOX;
}

/** Build the overlay purely from the payload; no client-side inference. */
export function buildOverlay(view: SessionView): OverlayItem[] {
  const items: OverlayItem[] = [];
  for (const det of view.visible) {
    const [x0, y0, x1, y1] = det.box;
    if (det.mask && det.review === "Confirmed") {
      items.push({
        kind: "mask",
        detectionId: det.id,
        x: Math.floor(x0),
        y: Math.floor(y0),
        width: det.mask.width,
        height: det.mask.height,
        bits: rleDecode(det.mask.rle, det.mask.width, det.mask.height),
        fill: MASK_FILL,
      });
    }
    items.push({
      kind: "box",
      detectionId: det.id,
      x: x0,
      y: y0,
      width: x1 - x0,
      height: y1 - y0,
      color: boxColor(det),
      label: confidenceLabel(det),
    });
    if (det.assessment) {
      items.push({
        kind: "badge",
        detectionId: det.id,
        x: x0,
        y: Math.max(y0 - 14, 0),
        color: bandColor(det.assessment.band),
        text: badgeText(det),
      });
    }
  }
  return items;
}

export function badgeText(det: DetectionPayload): string {
  const a = det.assessment;
  if (!a) return "";
  const state = a.condition_label ? `${a.condition_state} ${a.condition_label}` : "not graded";
  return `${a.band} | ${state}`;
}

/** Paint a display list onto a 2D context (no-op items never re-derive data). */
export function paintOverlay(
  ctx: CanvasRenderingContext2D,
  items: OverlayItem[],
  scale: number,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const item of items) {
    if (item.kind === "mask") {
      ctx.fillStyle = item.fill;
      for (let r = 0; r < item.height; r++) {
        let runStart = -1;
        for (let c = 0; c <= item.width; c++) {
          const on = c < item.width && item.bits[r * item.width + c] === 1;
          if (on && runStart < 0) runStart = c;
          if (!on && runStart >= 0) {
            ctx.fillRect(
              (item.x + runStart) * scale,
              (item.y + r) * scale,
              (c - runStart) * scale,
              scale,
            );
            runStart = -1;
          }
        }
      }
    } else if (item.kind === "box") {
      ctx.strokeStyle = item.color;
      ctx.lineWidth = 2;
      ctx.strokeRect(item.x * scale, item.y * scale, item.width * scale, item.height * scale);
      ctx.fillStyle = item.color;
      ctx.font = "12px sans-serif";
      ctx.fillText(item.label, item.x * scale + 2, Math.max(item.y * scale - 4, 10));
    } else {
      ctx.fillStyle = item.color;
      ctx.font = "bold 12px sans-serif";
      ctx.fillText(item.text, item.x * scale + 2, item.y * scale + 10);
    }
  }
}

/** Map a pointer position on the canvas to image pixel coordinates. */
export function canvasPointToImage(
  rect: { left: number; top: number; width: number; height: number },
  imageSize: [number, number],
  clientX: number,
  clientY: number,
): [number, number] {
  const [iw, ih] = imageSize;
  const sx = rect.width > 0 ? iw / rect.width : 1;
  const sy = rect.height > 0 ? ih / rect.height : 1;
  return [(clientX - rect.left) * sx, (clientY - rect.top) * sy];
}
