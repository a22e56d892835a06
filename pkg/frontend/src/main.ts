/** Browser bootstrap: upload form plus the inspector app. */

import { ApiClient } from "./api";
import { InspectorApp } from "./app";

function bootstrap(): void {
  const api = new ApiClient("");
  const mount = document.getElementById("app");
  if (!mount) throw new Error("missing #app mount point");
  const app = new InspectorApp(mount, api);

  const fileInput = document.getElementById("upload-file") as HTMLInputElement;
  const scaleInput = document.getElementById("upload-scale") as HTMLInputElement;
  const startButton = document.getElementById("upload-start") as HTMLButtonElement;
  const sessionInput = document.getElementById("open-id") as HTMLInputElement;
  const openButton = document.getElementById("open-session") as HTMLButtonElement;

  startButton.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    const scale = parseFloat(scaleInput.value);
    if (!file || !(scale > 0)) {
      app.toast("choose a PNG and a positive mm-per-pixel scale");
      return;
    }
    void app.startSession(file, scale).catch((err) => app.toast(String(err)));
  });

  openButton.addEventListener("click", () => {
    const id = sessionInput.value.trim();
    if (id) void app.openSession(id).catch((err) => app.toast(String(err)));
  });
}

document.addEventListener("DOMContentLoaded", bootstrap);
