/** Inspector application: DOM wiring over the service API.
 *
 * All analysis lives server-side; this class forwards inspector intents as
 * commands, re-fetches the session view, and re-renders.  Threshold slider
 * moves are debounced (150 ms by default) and skipped entirely when the
 * slider sits at the server's current value.
 */

import { ApiClient } from "./api";
import { debounce } from "./debounce";
import { buildOverlay, canvasPointToImage, OverlayItem, paintOverlay } from "./overlay";
import {
  ApiError,
  DetectionPayload,
  MaskEditPayload,
  ReportPayload,
  SessionView,
} from "./types";

export type EditTool = "add-rect" | "remove-rect" | "add-polygon" | "remove-polygon";

export interface AppOptions {
  debounceMs?: number;
}

export class InspectorApp {
  readonly api: ApiClient;
  view: SessionView | null = null;
  report: ReportPayload | null = null;
  selectedId: string | null = null;
  tool: EditTool = "add-rect";
  lastOverlay: OverlayItem[] = [];

  private root: HTMLElement;
  private finalizing = false;
  private dragStart: [number, number] | null = null;
  private polygon: [number, number][] = [];
  private debouncedDetection: (value: number) => void;
  private debouncedMask: (value: number) => void;

  constructor(root: HTMLElement, api: ApiClient, options: AppOptions = {}) {
    this.root = root;
    this.api = api;
    const wait = options.debounceMs ?? 150;
    this.debouncedDetection = debounce((v: number) => {
      void this.setDetectionThreshold(v);
    }, wait);
    this.debouncedMask = debounce((v: number) => {
      void this.setMaskThreshold(v);
    }, wait);
    this.buildDom();
  }

  // -- session lifecycle ----------------------------------------------------

  async startSession(png: Blob | ArrayBuffer | Uint8Array, mmPerPixel: number): Promise<void> {
    const imageId = await this.api.uploadImage(png);
    this.view = await this.api.createSession(imageId, mmPerPixel);
    this.report = null;
    this.selectedId = null;
    await this.command({ command: "propose" });
  }

  async openSession(sessionId: string): Promise<void> {
    this.view = await this.api.getSession(sessionId);
    this.report = null;
    this.selectedId = this.view.visible[0]?.id ?? null;
    this.render();
  }

  async refresh(): Promise<void> {
    if (!this.view) return;
    this.view = await this.api.getSession(this.view.id);
    this.render();
  }

  /** Issue a command, then poll the authoritative view and re-render. */
  async command(cmd: Parameters<ApiClient["command"]>[1]): Promise<SessionView | null> {
    if (!this.view) return null;
    try {
      const response = await this.api.command(this.view.id, cmd);
      this.view = await this.api.getSession(this.view.id);
      this.render();
      return response;
    } catch (err) {
      this.toast(err instanceof ApiError ? err.message : String(err));
      this.render();
      return null;
    }
  }

  // -- threshold controls ---------------------------------------------------

  onDetectionSliderInput(value: number): void {
    if (!this.view || this.view.phase === "Finalized") return;
    this.el("#det-slider-value").textContent = value.toFixed(2);
    if (value === this.view.detection_threshold) return; // no network call
    this.debouncedDetection(value);
  }

  onMaskSliderInput(value: number): void {
    const det = this.selected();
    if (!det || !this.view || this.view.phase === "Finalized") return;
    this.el("#mask-slider-value").textContent = value.toFixed(2);
    if (value === det.mask_threshold) return;
    this.debouncedMask(value);
  }

  async setDetectionThreshold(value: number): Promise<void> {
    await this.command({ command: "set_detection_threshold", payload: { threshold: value } });
  }

  async setMaskThreshold(value: number): Promise<void> {
    if (!this.selectedId) return;
    await this.command({
      command: "set_mask_threshold",
      payload: { detection_id: this.selectedId, threshold: value },
    });
  }

  // -- review / segmentation / assessment -----------------------------------

  async review(detectionId: string, verdict: "confirm" | "reject"): Promise<void> {
    await this.command({ command: "review", payload: { detection_id: detectionId, verdict } });
  }

  async segment(detectionId: string): Promise<void> {
    this.selectedId = detectionId;
    await this.command({ command: "segment", payload: { detection_id: detectionId } });
  }

  async assess(detectionId: string): Promise<void> {
    await this.command({ command: "assess", payload: { detection_id: detectionId } });
  }

  async applyAttributes(detectionId: string, depthMm: number | null, rebar: boolean): Promise<void> {
    await this.command({
      command: "set_attributes",
      payload: { detection_id: detectionId, depth_mm: depthMm, exposed_rebar: rebar },
    });
  }

  // -- mask editing ----------------------------------------------------------

  async applyEdit(detectionId: string, edit: MaskEditPayload): Promise<boolean> {
    const before = this.toastText();
    const res = await this.command({
      command: "edit_mask",
      payload: { detection_id: detectionId, edit },
    });
    if (res === null && this.toastText() !== before) {
      this.toast(`${this.toastText()} (draw inside the detection box)`);
      return false;
    }
    return res !== null;
  }

  async undoEdit(detectionId: string): Promise<void> {
    await this.command({ command: "undo_edit", payload: { detection_id: detectionId } });
  }

  /** Convert an image-space drag into a box-local rectangle edit. */
  rectEditFor(det: DetectionPayload, a: [number, number], b: [number, number]): MaskEditPayload {
    const [bx, by] = [Math.floor(det.box[0]), Math.floor(det.box[1])];
    const x0 = Math.min(a[0], b[0]) - bx;
    const y0 = Math.min(a[1], b[1]) - by;
    const x1 = Math.max(a[0], b[0]) - bx;
    const y1 = Math.max(a[1], b[1]) - by;
    return {
      mode: this.tool.startsWith("add") ? "add" : "remove",
      shape: "rect",
      region: [x0, y0, x1, y1],
    };
  }

  polygonEditFor(det: DetectionPayload, points: [number, number][]): MaskEditPayload {
    const [bx, by] = [Math.floor(det.box[0]), Math.floor(det.box[1])];
    return {
      mode: this.tool.startsWith("add") ? "add" : "remove",
      shape: "polygon",
      region: points.map(([x, y]) => [x - bx, y - by]),
    };
  }

  // -- finalize flow -----------------------------------------------------------

  canFinalize(): boolean {
    if (!this.view || this.view.phase !== "Reviewing" || this.finalizing) return false;
    const confirmed = this.view.visible.filter((d) => d.review === "Confirmed");
    return confirmed.length > 0 && confirmed.every((d) => d.assessment !== null);
  }

  requestFinalize(): void {
    if (!this.canFinalize()) return;
    this.el("#finalize-confirm").classList.remove("hidden");
  }

  cancelFinalize(): void {
    this.el("#finalize-confirm").classList.add("hidden");
  }

  async confirmFinalize(): Promise<void> {
    if (this.finalizing) return; // double submit guard
    this.finalizing = true;
    this.el("#finalize-confirm").classList.add("hidden");
    try {
      const res = await this.command({ command: "finalize" });
      const result = res?.result as { report: ReportPayload } | undefined;
      if (result) {
        this.report = result.report;
      }
    } finally {
      this.finalizing = false;
    }
    this.render();
  }

  // -- DOM ------------------------------------------------------------------

  private buildDom(): void {
    this.root.innerHTML = `
      <header>
        <span id="phase" class="badge">no session</span>
        <label>detection threshold
          <input id="det-slider" type="range" min="0" max="1" step="0.01" value="0.5">
          <span id="det-slider-value">0.50</span>
        </label>
        <label>mask threshold
          <input id="mask-slider" type="range" min="0" max="1" step="0.01" value="0.5">
          <span id="mask-slider-value">0.50</span>
        </label>
      </header>
      <main>
        <div id="viewer">
          <canvas id="image-layer"></canvas>
          <canvas id="overlay-layer"></canvas>
        </div>
        <aside>
          <ul id="detections"></ul>
          <section id="editor">
            <select id="tool">
              <option value="add-rect">add rectangle</option>
              <option value="remove-rect">remove rectangle</option>
              <option value="add-polygon">add polygon</option>
              <option value="remove-polygon">remove polygon</option>
            </select>
            <button id="btn-undo">undo edit</button>
          </section>
          <section id="attributes">
            <label>depth (mm) <input id="attr-depth" type="number" min="0" step="0.1"></label>
            <label><input id="attr-rebar" type="checkbox"> exposed rebar</label>
            <button id="btn-attributes">apply attributes</button>
          </section>
          <button id="btn-finalize" disabled>finalize</button>
          <div id="finalize-confirm" class="hidden">
            <span>Finalize this session? It becomes read-only.</span>
            <button id="btn-finalize-yes">confirm</button>
            <button id="btn-finalize-no">cancel</button>
          </div>
          <div id="toast"></div>
        </aside>
      </main>
      <section id="report" class="hidden"></section>
    `;

    this.input("#det-slider").addEventListener("input", () => {
      this.onDetectionSliderInput(parseFloat(this.input("#det-slider").value));
    });
    this.input("#mask-slider").addEventListener("input", () => {
      this.onMaskSliderInput(parseFloat(this.input("#mask-slider").value));
    });
    this.el("#tool").addEventListener("change", () => {
      this.tool = (this.el("#tool") as HTMLSelectElement).value as EditTool;
      this.polygon = [];
    });
    this.el("#btn-undo").addEventListener("click", () => {
      if (this.selectedId) void this.undoEdit(this.selectedId);
    });
    this.el("#btn-attributes").addEventListener("click", () => {
      if (!this.selectedId) return;
      const depth = this.input("#attr-depth").value;
      const rebar = (this.el("#attr-rebar") as HTMLInputElement).checked;
      void this.applyAttributes(this.selectedId, depth ? parseFloat(depth) : null, rebar);
    });
    this.el("#btn-finalize").addEventListener("click", () => this.requestFinalize());
    this.el("#btn-finalize-yes").addEventListener("click", () => void this.confirmFinalize());
    this.el("#btn-finalize-no").addEventListener("click", () => this.cancelFinalize());

    const overlay = this.el("#overlay-layer") as HTMLCanvasElement;
    overlay.addEventListener("mousedown", (ev) => this.onPointerDown(ev as MouseEvent));
    overlay.addEventListener("mouseup", (ev) => this.onPointerUp(ev as MouseEvent));
    overlay.addEventListener("dblclick", () => void this.closePolygon());
  }

  private onPointerDown(ev: MouseEvent): void {
    const point = this.eventToImage(ev);
    if (this.tool.endsWith("rect")) {
      this.dragStart = point;
    } else {
      this.polygon.push(point);
    }
  }

  private onPointerUp(ev: MouseEvent): void {
    if (!this.tool.endsWith("rect") || !this.dragStart) return;
    const det = this.selected();
    const start = this.dragStart;
    this.dragStart = null;
    if (!det || !det.mask) return;
    void this.applyEdit(det.id, this.rectEditFor(det, start, this.eventToImage(ev)));
  }

  private async closePolygon(): Promise<void> {
    const det = this.selected();
    if (!det || !det.mask || this.polygon.length < 3) {
      this.polygon = [];
      return;
    }
    const points = this.polygon;
    this.polygon = [];
    await this.applyEdit(det.id, this.polygonEditFor(det, points));
  }

  private eventToImage(ev: MouseEvent): [number, number] {
    const overlay = this.el("#overlay-layer") as HTMLCanvasElement;
    const rect = overlay.getBoundingClientRect();
    const size = this.view?.image_size ?? [overlay.width || 1, overlay.height || 1];
    return canvasPointToImage(rect, size, ev.clientX, ev.clientY);
  }

  selected(): DetectionPayload | null {
    if (!this.view || !this.selectedId) return null;
    return this.view.visible.find((d) => d.id === this.selectedId) ?? null;
  }

  select(detectionId: string): void {
    this.selectedId = detectionId;
    this.render();
  }

  // -- rendering ---------------------------------------------------------------

  render(): void {
    const view = this.view;
    this.el("#phase").textContent = view ? view.phase : "no session";
    const finalized = !view || view.phase === "Finalized";

    this.input("#det-slider").disabled = finalized;
    this.input("#mask-slider").disabled = finalized || !this.selected()?.mask;
    if (view) {
      this.input("#det-slider").value = String(view.detection_threshold);
      this.el("#det-slider-value").textContent = view.detection_threshold.toFixed(2);
    }
    const sel = this.selected();
    if (sel) {
      this.input("#mask-slider").value = String(sel.mask_threshold);
      this.el("#mask-slider-value").textContent = sel.mask_threshold.toFixed(2);
    }

    this.renderDetectionList();
    this.renderOverlay();
    (this.el("#btn-finalize") as HTMLButtonElement).disabled = !this.canFinalize();
    this.el("#btn-finalize").title = this.canFinalize()
      ? ""
      : "every confirmed detection must be assessed first";
    this.renderReport();
  }

  private renderDetectionList(): void {
    const list = this.el("#detections");
    list.innerHTML = "";
    if (!this.view) return;
    const finalized = this.view.phase === "Finalized";
    for (const det of this.view.visible) {
      const li = document.createElement("li");
      li.dataset.id = det.id;
      if (det.id === this.selectedId) li.classList.add("selected");
      const badge = det.assessment
        ? `<span class="badge band" data-band="${det.assessment.band}">` +
          `${det.assessment.band} ${det.assessment.condition_state ?? ""}</span>`
        : "";
      li.innerHTML = `
        <span class="det-class">${det.class}</span>
        <span class="det-confidence">${det.confidence.toFixed(2)}</span>
        <span class="review-state">${det.review}</span>
        <span class="mask-area">${det.mask ? `${det.mask.area_px} px` : ""}</span>
        ${badge}
        <button class="btn-select">select</button>
        <button class="btn-confirm" ${finalized ? "disabled" : ""}>confirm</button>
        <button class="btn-reject" ${finalized ? "disabled" : ""}>reject</button>
        <button class="btn-segment" ${finalized ? "disabled" : ""}>segment</button>
        <button class="btn-assess" ${finalized ? "disabled" : ""}>assess</button>
      `;
      li.querySelector(".btn-select")!.addEventListener("click", () => this.select(det.id));
      li.querySelector(".btn-confirm")!.addEventListener("click", () => void this.review(det.id, "confirm"));
      li.querySelector(".btn-reject")!.addEventListener("click", () => void this.review(det.id, "reject"));
      li.querySelector(".btn-segment")!.addEventListener("click", () => void this.segment(det.id));
      li.querySelector(".btn-assess")!.addEventListener("click", () => void this.assess(det.id));
      list.appendChild(li);
    }
  }

  private renderOverlay(): void {
    if (!this.view) {
      this.lastOverlay = [];
      return;
    }
    this.lastOverlay = buildOverlay(this.view);
    const overlay = this.el("#overlay-layer") as HTMLCanvasElement;
    const [w, h] = this.view.image_size;
    overlay.width = w;
    overlay.height = h;
    const ctx = overlay.getContext?.("2d");
    if (ctx) {
      paintOverlay(ctx, this.lastOverlay, 1);
    }
    this.paintImageLayer(w, h);
  }

  private paintImageLayer(w: number, h: number): void {
    const layer = this.el("#image-layer") as HTMLCanvasElement;
    layer.width = w;
    layer.height = h;
    const ctx = layer.getContext?.("2d");
    if (!ctx || !this.view) return;
    const img = new Image();
    img.onload = () => ctx.drawImage(img, 0, 0);
    img.src = this.api.imageUrl(this.view.image_id);
  }

  private renderReport(): void {
    const section = this.el("#report");
    if (!this.report) {
      section.classList.add("hidden");
      section.innerHTML = "";
      return;
    }
    section.classList.remove("hidden");
    const rows = this.report.detections
      .map((d) => {
        const m = d.measurement;
        const dims = m
          ? m.kind === "Crack"
            ? `length ${fmt(m.length_mm)} mm, max width ${fmt(m.max_width_mm)} mm`
            : `area ${fmt(m.area_mm2)} mm2, diameter ${fmt(m.equivalent_diameter_mm)} mm`
          : "no measurement";
        return (
          `<tr class="report-row" data-id="${d.id}">` +
          `<td>${d.id}</td><td>${d.class}</td><td class="report-dims">${dims}</td>` +
          `<td class="report-band">${d.band}</td>` +
          `<td class="report-state">${d.condition_state ?? "-"} ${d.condition_label ?? ""}</td>` +
          `<td class="report-actions">${d.actions.join(" / ")}</td></tr>`
        );
      })
      .join("");
    const density = this.report.crack_density
      ? `<p id="report-density">crack spacing ${fmt(this.report.crack_density.mean_spacing_ft)} ft: ` +
        `${this.report.crack_density.band} (${this.report.crack_density.condition_state})</p>`
      : "";
    section.innerHTML = `
      <h2>Assessment report</h2>
      <p>session ${this.report.session_id}, detection threshold ${this.report.detection_threshold}</p>
      <table><tbody>${rows}</tbody></table>
      ${density}
    `;
  }

  toast(message: string): void {
    this.el("#toast").textContent = message;
  }

  toastText(): string {
    return this.el("#toast").textContent ?? "";
  }

  private el(selector: string): HTMLElement {
    const node = this.root.querySelector(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node as HTMLElement;
  }

  private input(selector: string): HTMLInputElement {
    return this.el(selector) as HTMLInputElement;
  }
}

function fmt(value: number | null): string {
  return value === null ? "-" : value.toFixed(2);
}
