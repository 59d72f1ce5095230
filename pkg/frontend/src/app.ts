/**
 * Browser entry point: wires the audition and performance views to the DOM
 * and the service endpoints.  Service base URLs come from query parameters
 * (?http=...&) so the page works against any host.
 */

import { AuditionBackend, AuditionController, GridInfo } from "./audition";
import { cellAt, drawHeatmap } from "./heatmap";
import { PerformanceController, SessionTransport, attachAudioOutput } from "./performance";
import { XYPad, sliderToPitch } from "./xypad";

function httpBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("http") ?? "http://127.0.0.1:8765";
}

function makeBackend(base: string): AuditionBackend {
  return {
    async listGrids(): Promise<GridInfo[]> {
      const resp = await fetch(`${base}/grids`);
      if (!resp.ok) throw new Error(`GET /grids -> ${resp.status}`);
      return resp.json();
    },
    async diffField(gridId, stage) {
      const resp = await fetch(`${base}/grids/${gridId}/diff-field?stage=${stage}`);
      if (!resp.ok) throw new Error(`diff-field -> ${resp.status}`);
      return resp.json();
    },
    cellAudioUrl(gridId, i, j) {
      return `${base}/grids/${gridId}/cells/${i}/${j}/audio`;
    },
  };
}

function makeTransport(base: string): SessionTransport {
  return {
    async createSession(modelId) {
      const resp = await fetch(`${base}/sessions`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ model_id: modelId }),
      });
      if (!resp.ok) throw new Error(`POST /sessions -> ${resp.status}`);
      return resp.json();
    },
    async connect(url, onText, onBinary, onClose) {
      const ws = new WebSocket(url);
      ws.binaryType = "arraybuffer";
      ws.onmessage = (event) => {
        if (event.data instanceof ArrayBuffer) onBinary(event.data);
        else onText(JSON.parse(event.data));
      };
      ws.onclose = onClose;
      await new Promise<void>((res, rej) => {
        ws.onopen = () => res();
        ws.onerror = () => rej(new Error("websocket failed"));
      });
      return (msg: string) => ws.send(msg);
    },
  };
}

async function setupAudition(base: string): Promise<void> {
  const backend = makeBackend(base);
  const canvas = document.getElementById("heatmap") as HTMLCanvasElement;
  const player = document.getElementById("player") as HTMLAudioElement;
  const status = document.getElementById("audition-status") as HTMLElement;
  const controller = new AuditionController(backend, (url) => {
    player.src = url;
    void player.play();
  });

  const grids = await backend.listGrids();
  const select = document.getElementById("grid-select") as HTMLSelectElement;
  for (const grid of grids) {
    const opt = document.createElement("option");
    opt.value = grid.id;
    opt.textContent = `${grid.id} (${grid.resolution}x${grid.resolution}, MIDI ${grid.pitch})`;
    select.appendChild(opt);
  }

  const redraw = () => {
    const ctx = canvas.getContext("2d");
    if (ctx && controller.view.heatmap) {
      drawHeatmap(ctx, controller.view.heatmap, canvas.width, canvas.height,
        controller.view.selected);
    }
    status.textContent = controller.view.status;
  };

  const openSelected = async () => {
    const grid = grids.find((g) => g.id === select.value);
    if (grid) {
      await controller.open(grid);
      redraw();
    }
  };
  select.onchange = openSelected;
  if (grids.length) {
    select.value = grids[0].id;
    await openSelected();
  }

  (document.getElementById("stage-toggle") as HTMLButtonElement).onclick = async () => {
    await controller.toggleStage();
    redraw();
  };

  canvas.onclick = (event) => {
    const grid = controller.view.grid;
    if (!grid) return;
    const rect = canvas.getBoundingClientRect();
    const cell = cellAt(event.clientX - rect.left, event.clientY - rect.top,
      rect.width, rect.height, grid.resolution);
    if (cell) {
      controller.clickCell(cell.i, cell.j);
      redraw();
    }
  };
}

async function setupPerformance(base: string): Promise<void> {
  const controller = new PerformanceController(makeTransport(base));
  const status = document.getElementById("perf-status") as HTMLElement;
  const meter = document.getElementById("meter") as HTMLElement;

  (document.getElementById("start") as HTMLButtonElement).onclick = async () => {
    const modelId = (document.getElementById("model-id") as HTMLInputElement).value || "model";
    await controller.start(modelId);
    const context = new AudioContext({ sampleRate: 16000 });
    attachAudioOutput(controller, context);
    status.textContent = `session ${controller.state.sessionId}`;
    const tick = () => {
      meter.style.width = `${Math.round(controller.state.level * 100)}%`;
      if (controller.state.protocolError) {
        status.textContent = controller.state.protocolError;
      }
      if (controller.state.connected) requestAnimationFrame(tick);
      else status.textContent = "disconnected (reload to reconnect)";
    };
    requestAnimationFrame(tick);
  };

  const padEl = document.getElementById("xypad") as HTMLCanvasElement;
  const pad = new XYPad({ width: padEl.width, height: padEl.height },
    (u, v) => controller.setParams(u, v));
  padEl.onpointerdown = (e) => {
    padEl.setPointerCapture(e.pointerId);
    const r = padEl.getBoundingClientRect();
    pad.pointerDown(e.clientX - r.left, e.clientY - r.top);
  };
  padEl.onpointermove = (e) => {
    const r = padEl.getBoundingClientRect();
    pad.pointerMove(e.clientX - r.left, e.clientY - r.top);
  };
  padEl.onpointerup = () => pad.pointerUp();

  const slider = document.getElementById("pitch") as HTMLInputElement;
  slider.oninput = () => controller.setPitch(sliderToPitch(Number(slider.value) / 100));
}

export async function main(): Promise<void> {
  const base = httpBase();
  await setupAudition(base).catch((err) => {
    const status = document.getElementById("audition-status");
    if (status) status.textContent = `service unreachable: ${err}`;
  });
  await setupPerformance(base);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", () => void main());
}
