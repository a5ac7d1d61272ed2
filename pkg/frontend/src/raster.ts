// Scrolling spike raster. Pure over (buffer, nowTick): the same inputs
// paint the same pixels, which the tests check with a recording context.

import { SpikeSample } from "./state.js";

// Just the 2D-context members the renderers touch, so tests can fake it.
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface RasterOptions {
  width: number;
  height: number;
  windowTicks: number;
  neuronCount: number;
}

const BG = "#11151a";
const GRID = "#2a3138";
const SPIKE = "#ffb454";
const MOTOR = "#53d769";

export function drawRaster(
  ctx: Ctx2D,
  spikes: SpikeSample[],
  nowTick: number,
  opts: RasterOptions,
): void {
  const { width, height, windowTicks, neuronCount } = opts;
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, width, height);

  const rowH = height / neuronCount;
  ctx.fillStyle = GRID;
  for (let n = 0; n < neuronCount; n += 8) {
    ctx.fillRect(0, n * rowH, width, 1);
  }

  const t0 = nowTick - windowTicks;
  const dotW = Math.max(1, width / windowTicks);
  for (const sample of spikes) {
    if (sample.tick < t0) continue;
    const x = ((sample.tick - t0) / windowTicks) * width;
    for (const neuron of sample.neurons) {
      if (neuron >= neuronCount) continue;
      // motor layer sits at ids 27..38 in the default network
      ctx.fillStyle = neuron >= 27 ? MOTOR : SPIKE;
      ctx.fillRect(x, neuron * rowH, dotW, Math.max(1, rowH - 1));
    }
  }
}
