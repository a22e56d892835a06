/** Thin typed client for the /api/v1 service routes. */

import { ApiError, Command, SessionView } from "./types";

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`;
  }

  private async parse<T>(res: Response): Promise<T> {
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      const err = body as { error?: string; kind?: string };
      throw new ApiError(res.status, err.kind ?? "", err.error ?? res.statusText);
    }
    return body as T;
  }

  async uploadImage(png: Blob | ArrayBuffer | Uint8Array): Promise<string> {
    const res = await fetch(this.url("/images"), {
      method: "POST",
      headers: { "content-type": "image/png" },
      body: png as BodyInit,
    });
    const body = await this.parse<{ image_id: string }>(res);
    return body.image_id;
  }

  async createSession(imageId: string, mmPerPixel: number): Promise<SessionView> {
    const res = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        image_id: imageId,
        calibration: { mm_per_pixel: mmPerPixel },
      }),
    });
    return this.parse<SessionView>(res);
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const res = await fetch(this.url(`/sessions/${sessionId}`));
    return this.parse<SessionView>(res);
  }

  async command(sessionId: string, command: Command): Promise<SessionView> {
    const res = await fetch(this.url(`/sessions/${sessionId}/commands`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(command),
    });
    return this.parse<SessionView>(res);
  }

  imageUrl(imageId: string): string {
    return this.url(`/images/${imageId}`);
  }
}
