/** Pure-logic tests: no server, mocked fetch where needed. */

import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { InspectorApp } from "../src/app";
import { BAND_COLORS, bandColor, NEUTRAL_BOX, REJECTED_BOX } from "../src/colors";
import { debounce } from "../src/debounce";
import {
  badgeText,
  buildOverlay,
  canvasPointToImage,
  confidenceLabel,
} from "../src/overlay";
import { foregroundCount, rleDecode } from "../src/rle";
import { DetectionPayload, SessionView } from "../src/types";

function detection(overrides: Partial<DetectionPayload> = {}): DetectionPayload {
  return {
    id: "d0",
    class: "Spalling",
    box: [29, 29, 51, 51],
    confidence: 0.8235,
    review: "Proposed",
    mask_threshold: 0.5,
    mask: null,
    attributes: { depth_mm: null, exposed_rebar: null },
    assessment: null,
    ...overrides,
  };
}

function view(detections: DetectionPayload[], phase: SessionView["phase"] = "Proposed"): SessionView {
  return {
    id: "s1",
    image_id: "img",
    phase,
    version: 1,
    detection_threshold: 0.5,
    image_size: [200, 200],
    visible: detections,
    raw_count: detections.length,
  };
}

describe("rle", () => {
  it("decodes alternating skip/run counts", () => {
    const bits = rleDecode([1, 3, 2], 3, 2);
    expect(Array.from(bits)).toEqual([0, 1, 1, 1, 0, 0]);
    expect(foregroundCount(bits)).toBe(3);
  });

  it("rejects counts that do not cover the mask", () => {
    expect(() => rleDecode([1, 1], 3, 2)).toThrow(/expected 6/);
  });
});

describe("colors", () => {
  it("fixes the documented band mapping", () => {
    expect(BAND_COLORS["None"]).toBe("#2ea043");
    expect(BAND_COLORS["Medium-Severe"]).toBe("#cf222e");
    expect(bandColor(null)).toBe(NEUTRAL_BOX);
  });
});

describe("overlay display list", () => {
  it("renders one box per detection with the payload confidence", () => {
    const dets = [detection(), detection({ id: "d1", box: [129, 129, 151, 151], confidence: 0.3529 })];
    const items = buildOverlay(view(dets));
    const boxes = items.filter((i) => i.kind === "box");
    expect(boxes).toHaveLength(2);
    expect(boxes[0]).toMatchObject({ x: 29, y: 29, width: 22, height: 22 });
    expect(boxes[0].label).toBe("Spalling 0.82");
    expect(boxes[1].label).toBe("Spalling 0.35");
  });

  it("is empty for an empty payload", () => {
    expect(buildOverlay(view([]))).toEqual([]);
  });

  it("fills confirmed masks and badges assessed detections", () => {
    const det = detection({
      review: "Confirmed",
      mask: { width: 2, height: 1, area_px: 1, rle: [0, 1, 1], edit_count: 0 },
      assessment: {
        detection_id: "d0",
        class: "Spalling",
        measurement: null,
        band: "Medium-Severe",
        condition_state: "CS4",
        condition_label: "Severe",
        actions: ["do nothing", "repair", "rehab", "replace"],
        guideline: "AASHTO",
        note: "",
      },
    });
    const items = buildOverlay(view([det], "Reviewing"));
    const mask = items.find((i) => i.kind === "mask");
    const badge = items.find((i) => i.kind === "badge");
    const box = items.find((i) => i.kind === "box");
    expect(mask).toBeDefined();
    expect(Array.from(mask!.kind === "mask" ? mask.bits : [])).toEqual([1, 0]);
    expect(badge?.kind === "badge" && badge.text).toBe("Medium-Severe | CS4 Severe");
    expect(badge?.kind === "badge" && badge.color).toBe(BAND_COLORS["Medium-Severe"]);
    expect(box?.kind === "box" && box.color).toBe(BAND_COLORS["Medium-Severe"]);
  });

  it("greys out rejected detections", () => {
    const items = buildOverlay(view([detection({ review: "Rejected" })]));
    const box = items.find((i) => i.kind === "box");
    expect(box?.kind === "box" && box.color).toBe(REJECTED_BOX);
  });

  it("labels and badges use payload values verbatim", () => {
    const det = detection({ confidence: 0.125 });
    expect(confidenceLabel(det)).toBe("Spalling 0.13");
    expect(badgeText(det)).toBe("");
  });
});

describe("canvas coordinate mapping", () => {
  it("scales client coordinates into image pixels", () => {
    const rect = { left: 10, top: 20, width: 100, height: 50 };
    const [x, y] = canvasPointToImage(rect, [200, 100], 60, 45);
    expect(x).toBe(100);
    expect(y).toBe(50);
  });

  it("passes through when the element has no layout box", () => {
    const rect = { left: 0, top: 0, width: 0, height: 0 };
    expect(canvasPointToImage(rect, [200, 100], 42, 7)).toEqual([42, 7]);
  });
});

describe("debounce", () => {
  it("collapses a burst into the trailing call", () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    fn(1);
    fn(2);
    vi.advanceTimersByTime(100);
    fn(3);
    vi.advanceTimersByTime(149);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([3]);
    vi.useRealTimers();
  });
});

describe("slider networking rules", () => {
  afterEach(() => {
    vi.unstubAllGlobals();
    vi.useRealTimers();
  });

  function appWithView(v: SessionView) {
    document.body.innerHTML = '<div id="app"></div>';
    const app = new InspectorApp(
      document.getElementById("app")!,
      new ApiClient("http://unused"),
      { debounceMs: 150 },
    );
    app.view = v;
    app.render();
    return app;
  }

  it("a slider at the server value issues no network call", () => {
    vi.useFakeTimers();
    const fetchMock = vi.fn();
    vi.stubGlobal("fetch", fetchMock);
    const app = appWithView(view([detection()]));
    app.onDetectionSliderInput(0.5); // equals detection_threshold
    vi.advanceTimersByTime(1000);
    expect(fetchMock).not.toHaveBeenCalled();
  });

  it("a moved slider issues exactly one debounced command", async () => {
    vi.useFakeTimers();
    const fetchMock = vi
      .fn()
      .mockImplementation(() =>
        Promise.resolve(new Response(JSON.stringify(view([detection()])), { status: 200 })),
      );
    vi.stubGlobal("fetch", fetchMock);
    const app = appWithView(view([detection()]));
    app.onDetectionSliderInput(0.4);
    app.onDetectionSliderInput(0.3);
    app.onDetectionSliderInput(0.2);
    expect(fetchMock).not.toHaveBeenCalled();
    await vi.advanceTimersByTimeAsync(150);
    const commandCalls = fetchMock.mock.calls.filter(([url]) =>
      String(url).includes("/commands"),
    );
    expect(commandCalls).toHaveLength(1);
    expect(JSON.parse(commandCalls[0][1].body)).toEqual({
      command: "set_detection_threshold",
      payload: { threshold: 0.2 },
    });
  });

  it("sliders are disabled after finalize", () => {
    const app = appWithView(view([detection()], "Finalized"));
    const slider = document.querySelector("#det-slider") as HTMLInputElement;
    expect(slider.disabled).toBe(true);
  });
});
