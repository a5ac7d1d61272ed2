// DOM wiring: buttons in, canvases out. Everything interesting happens
// in the pure modules; this file only connects them to the page.

import { PanelConnection, serverUrl } from "./connection.js";
import { drawHexapod } from "./hexapod-view.js";
import { readouts } from "./metrics.js";
import { GaitId } from "./protocol.js";
import { Ctx2D, drawRaster } from "./raster.js";

const NEURON_COUNT = 39;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function ctxOf(canvas: HTMLCanvasElement): Ctx2D {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  return ctx as unknown as Ctx2D;
}

export function start(): void {
  const rasterCanvas = byId<HTMLCanvasElement>("raster");
  const worldCanvas = byId<HTMLCanvasElement>("world");
  const metricsList = byId<HTMLElement>("metrics");
  const banner = byId<HTMLElement>("banner");

  const connection = new PanelConnection(serverUrl(window.location), {
    onState: () => undefined,
  });
  connection.connect();

  const sendGait = (gait: GaitId) => () =>
    connection.send({ type: "set_gait", gait });
  byId("btn-walk").onclick = sendGait(0);
  byId("btn-trot").onclick = sendGait(1);
  byId("btn-run").onclick = sendGait(2);
  byId("btn-up").onclick = () => connection.send({ type: "button_up" });
  byId("btn-down").onclick = () => connection.send({ type: "button_down" });
  byId("btn-reset").onclick = () => connection.send({ type: "reset" });

  const render = () => {
    const state = connection.state;
    banner.textContent =
      state.connection === "connected" ? "" : `⚠ ${state.connection}`;
    banner.style.display = state.connection === "connected" ? "none" : "block";

    drawRaster(ctxOf(rasterCanvas), state.spikes, state.tick, {
      width: rasterCanvas.width,
      height: rasterCanvas.height,
      windowTicks: state.spikeWindowTicks,
      neuronCount: NEURON_COUNT,
    });
    if (state.pose) {
      drawHexapod(ctxOf(worldCanvas), state.pose, {
        width: worldCanvas.width,
        height: worldCanvas.height,
        scale: 16,
      });
    }
    metricsList.innerHTML = readouts(state)
      .map((r) => `<dt>${r.label}</dt><dd>${r.value}</dd>`)
      .join("");
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
