/** Payload types mirroring the assessment service JSON, verbatim.
 *
 * The UI never computes measurements or grades; every number it renders is
 * a field from one of these payloads.
 */

export type Phase = "Created" | "Proposed" | "Reviewing" | "Finalized";
export type Review = "Proposed" | "Confirmed" | "Rejected";
export type Band = "None" | "Hairline-Minor" | "Narrow-Moderate" | "Medium-Severe";

export interface MeasurementPayload {
  kind: "Crack" | "Spall";
  length_mm: number | null;
  max_width_mm: number | null;
  area_mm2: number | null;
  equivalent_diameter_mm: number | null;
  depth_mm: number | null;
  exposed_rebar: boolean | null;
}

export interface AssessmentPayload {
  detection_id: string;
  class: string;
  measurement: MeasurementPayload | null;
  band: Band;
  condition_state: string | null;
  condition_label: string | null;
  actions: string[];
  guideline: string;
  note: string;
}

export interface MaskPayload {
  width: number;
  height: number;
  area_px: number;
  rle: number[];
  edit_count: number;
}

export interface DetectionPayload {
  id: string;
  class: string;
  box: [number, number, number, number];
  confidence: number;
  review: Review;
  mask_threshold: number;
  mask: MaskPayload | null;
  attributes: { depth_mm: number | null; exposed_rebar: boolean | null };
  assessment: AssessmentPayload | null;
}

export interface SessionView {
  id: string;
  image_id: string;
  phase: Phase;
  version: number;
  detection_threshold: number;
  image_size: [number, number];
  visible: DetectionPayload[];
  raw_count: number;
  result?: unknown;
}

export interface ReportPayload {
  session_id: string;
  image_ref: string;
  image_checksum: string;
  detection_threshold: number;
  detections: Array<
    {
      id: string;
      class: string;
      box: number[];
      confidence: number;
      mask_threshold: number;
      mask_area_px: number;
    } & AssessmentPayload
  >;
  crack_density: {
    mean_spacing_ft: number;
    band: Band;
    condition_state: string;
    condition_label: string;
    actions: string[];
  } | null;
}

export interface MaskEditPayload {
  mode: "add" | "remove";
  shape: "rect" | "polygon";
  region: number[] | number[][];
}

export type Command =
  | { command: "propose"; payload?: Record<string, never> }
  | { command: "set_detection_threshold"; payload: { threshold: number } }
  | { command: "review"; payload: { detection_id: string; verdict: "confirm" | "reject" } }
  | { command: "segment"; payload: { detection_id: string } }
  | { command: "set_mask_threshold"; payload: { detection_id: string; threshold: number } }
  | { command: "edit_mask"; payload: { detection_id: string; edit: MaskEditPayload } }
  | { command: "undo_edit"; payload: { detection_id: string } }
  | {
      command: "set_attributes";
      payload: { detection_id: string; depth_mm?: number | null; exposed_rebar?: boolean | null };
    }
  | { command: "assess"; payload: { detection_id: string } }
  | { command: "finalize"; payload?: Record<string, never> };

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    message: string,
  ) {
    super(message);
  }
}
