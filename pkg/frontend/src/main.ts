// One-screen annotation client: load an image, drag a seed ellipse to get the
// 7 contour candidates, pick one, refine with wand strokes, undo, save.
// The working mask always mirrors the last service response.

import { ApiClient, ApiError, CandidateRef, Stroke } from "./api.js";
import { StrokeBatcher } from "./throttle.js";
import { decodePng, drawOverlay } from "./overlay.js";

type ToolMode = "ellipse" | "wand" | "review";

const api = new ApiClient("");

const state = {
  sessionId: null as string | null,
  mode: "ellipse" as ToolMode,
  tolerance: 0.08,
  brushRadius: 4,
  overlayOpacity: 0.45,
  image: null as ImageBitmap | null,
  mask: null as ImageBitmap | null,
  candidates: [] as CandidateRef[],
  dragStart: null as [number, number] | null,
  strokePoints: [] as [number, number][],
};

const el = {
  file: document.getElementById("file") as HTMLInputElement,
  canvas: document.getElementById("canvas") as HTMLCanvasElement,
  thumbs: document.getElementById("thumbs") as HTMLDivElement,
  tolerance: document.getElementById("tolerance") as HTMLInputElement,
  toleranceLabel: document.getElementById("tolerance-label") as HTMLSpanElement,
  radius: document.getElementById("radius") as HTMLInputElement,
  opacity: document.getElementById("opacity") as HTMLInputElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  save: document.getElementById("save") as HTMLButtonElement,
  savePath: document.getElementById("save-path") as HTMLInputElement,
  status: document.getElementById("status") as HTMLDivElement,
  modeButtons: Array.from(
    document.querySelectorAll("button[data-mode]")
  ) as HTMLButtonElement[],
};

function toast(message: string, isError = false): void {
  el.status.textContent = message;
  el.status.className = isError ? "status error" : "status";
}

function setMode(mode: ToolMode): void {
  state.mode = mode;
  for (const button of el.modeButtons) {
    button.classList.toggle("active", button.dataset.mode === mode);
  }
}

async function refreshMask(): Promise<void> {
  if (!state.sessionId) return;
  const bytes = await api.fetchBytes(`/sessions/${state.sessionId}/mask`);
  state.mask = await decodePng(bytes);
  render();
  el.save.disabled = !(await maskHasForeground(bytes));
}

async function maskHasForeground(bytes: Uint8Array): Promise<boolean> {
  const bitmap = await decodePng(bytes);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, canvas.width, canvas.height).data;
  for (let i = 0; i < data.length; i += 4) {
    if (data[i] > 127) return true;
  }
  return false;
}

function render(): void {
  if (!state.image) return;
  const ctx = el.canvas.getContext("2d")!;
  drawOverlay(ctx, state.image, state.mask, state.overlayOpacity);
}

function canvasPoint(event: MouseEvent): [number, number] {
  const rect = el.canvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * el.canvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * el.canvas.height;
  return [Math.round(x), Math.round(y)];
}

// ------------------------------------------------------------------ upload

el.file.addEventListener("change", async () => {
  const file = el.file.files?.[0];
  if (!file) return;
  try {
    const bytes = await file.arrayBuffer();
    state.sessionId = await api.createSession(bytes);
    state.image = await decodePng(
      await api.fetchBytes(`/sessions/${state.sessionId}/image`)
    );
    state.mask = null;
    state.candidates = [];
    el.thumbs.replaceChildren();
    render();
    toast(`session ${state.sessionId.slice(0, 8)} ready; drag an ellipse inside the track`);
  } catch (err) {
    toast(`upload failed: ${err}`, true);
  }
});

// ------------------------------------------------------------ ellipse tool

async function runMgacFromDrag(start: [number, number], end: [number, number]) {
  if (!state.sessionId || !state.image) return;
  const cx = (start[0] + end[0]) / 2;
  const cy = (start[1] + end[1]) / 2;
  const a = Math.max(Math.abs(end[0] - start[0]) / 2, 2);
  const b = Math.max(Math.abs(end[1] - start[1]) / 2, 2);
  const margin = Math.max(a, b);
  if (
    cx - margin < 0 ||
    cy - margin < 0 ||
    cx + margin >= state.image.width ||
    cy + margin >= state.image.height
  ) {
    toast("seed ellipse must stay inside the image");
    return;
  }
  toast("evolving 7 contour candidates...");
  try {
    const result = await api.runMgac(state.sessionId, { cx, cy, a, b, rot: 0 });
    state.candidates = result.candidates;
    await showThumbnails();
    toast("pick the best candidate");
  } catch (err) {
    if (err instanceof ApiError) toast(`contour failed: ${err.message}`, true);
    else toast(String(err), true);
  }
}

async function showThumbnails(): Promise<void> {
  el.thumbs.replaceChildren();
  for (const candidate of state.candidates) {
    const bytes = await api.fetchBytes(candidate.url);
    const bitmap = await decodePng(bytes);
    const thumb = document.createElement("canvas");
    thumb.width = 96;
    thumb.height = 96;
    thumb.title = candidate.label;
    const tctx = thumb.getContext("2d")!;
    if (state.image) tctx.drawImage(state.image, 0, 0, 96, 96);
    tctx.globalAlpha = 0.5;
    tctx.drawImage(bitmap, 0, 0, 96, 96);
    thumb.addEventListener("click", async () => {
      if (!state.sessionId) return;
      await api.selectCandidate(state.sessionId, candidate.index);
      await refreshMask();
      setMode("wand");
      toast(`candidate ${candidate.index} selected; refine with the wand`);
    });
    el.thumbs.appendChild(thumb);
  }
}

// --------------------------------------------------------------- wand tool

const batcher = new StrokeBatcher(async (points, final) => {
  if (!state.sessionId) {
    batcher.notifyDone();
    return;
  }
  const stroke: Stroke = { points, radius: state.brushRadius };
  try {
    await api.wand(state.sessionId, [stroke], state.tolerance);
    await refreshMask();
  } catch (err) {
    toast(`wand failed: ${err}`, true);
  } finally {
    batcher.notifyDone();
    if (final) toast("selection updated");
  }
}, 250);

let painting = false;

el.canvas.addEventListener("mousedown", (event) => {
  if (!state.sessionId) return;
  const point = canvasPoint(event);
  if (state.mode === "ellipse") {
    state.dragStart = point;
  } else if (state.mode === "wand") {
    painting = true;
    batcher.start();
    batcher.add(point[0], point[1]);
  }
});

el.canvas.addEventListener("mousemove", (event) => {
  if (state.mode === "wand" && painting) {
    const [x, y] = canvasPoint(event);
    batcher.add(x, y);
  }
});

window.addEventListener("mouseup", (event) => {
  if (state.mode === "ellipse" && state.dragStart) {
    const end = canvasPoint(event as MouseEvent);
    const start = state.dragStart;
    state.dragStart = null;
    void runMgacFromDrag(start, end);
  } else if (state.mode === "wand" && painting) {
    painting = false;
    batcher.end();
  }
});

// ----------------------------------------------------------------- controls

el.tolerance.addEventListener("input", () => {
  state.tolerance = Number(el.tolerance.value) / 100;
  el.toleranceLabel.textContent = state.tolerance.toFixed(2);
});

el.radius.addEventListener("input", () => {
  state.brushRadius = Number(el.radius.value);
});

el.opacity.addEventListener("input", () => {
  state.overlayOpacity = Number(el.opacity.value) / 100;
  render();
});

el.undo.addEventListener("click", async () => {
  if (!state.sessionId) return;
  await api.undo(state.sessionId);
  await refreshMask();
  toast("undone");
});

el.save.addEventListener("click", async () => {
  if (!state.sessionId) return;
  try {
    const path = await api.save(state.sessionId, el.savePath.value);
    toast(`saved ${path}`);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) toast("nothing to save", true);
    else toast(`save failed: ${err}`, true);
  }
});

for (const button of el.modeButtons) {
  button.addEventListener("click", () => setMode(button.dataset.mode as ToolMode));
}
setMode("ellipse");
el.save.disabled = true;
toast("load a cross-section image to start");
