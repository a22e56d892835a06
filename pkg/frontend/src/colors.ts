/** Fixed severity-band color mapping (documented for test stability).
 *
 * None -> green, Hairline-Minor -> blue, Narrow-Moderate -> amber,
 * Medium-Severe -> red.  Box strokes reuse the band color once a detection
 * is assessed; unassessed boxes are neutral, rejected boxes grey.
 */

import { Band } from "./types";

export const BAND_COLORS: Record<Band, string> = {
  None: "#2ea043",
  "Hairline-Minor": "#0969da",
  "Narrow-Moderate": "#d4a72c",
  "Medium-Severe": "#cf222e",
};

export const NEUTRAL_BOX = "#8250df";
export const REJECTED_BOX = "#6e7781";
export const MASK_FILL = "rgba(9, 105, 218, 0.45)";

export function bandColor(band: Band | null | undefined): string {
  return band ? BAND_COLORS[band] : NEUTRAL_BOX;
}
