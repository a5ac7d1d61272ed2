// Top-down hexapod view: body outline, legs/feet, support polygon and
// the stability margin. Draws entirely from a pose message.

import { Pose } from "./protocol.js";
import { Ctx2D } from "./raster.js";

export interface ViewOptions {
  width: number;
  height: number;
  scale: number; // pixels per cm
}

const BODY = "#3b4754";
const CONTACT = "#53d769";
const SWING = "#d75356";
const SUPPORT = "rgba(83, 215, 105, 0.15)";
const SUPPORT_EDGE = "#2f7d3c";
const TEXT = "#c9d1d9";

function toScreen(
  x: number,
  y: number,
  pose: Pose,
  opts: ViewOptions,
): [number, number] {
  // Body frame: x forward (screen up), y left (screen left).
  const sx = opts.width / 2 - (y - pose.body_xy[1]) * opts.scale;
  const sy = opts.height / 2 - (x - pose.body_xy[0]) * opts.scale;
  return [sx, sy];
}

export function drawHexapod(ctx: Ctx2D, pose: Pose, opts: ViewOptions): void {
  ctx.fillStyle = "#11151a";
  ctx.fillRect(0, 0, opts.width, opts.height);

  const bx = pose.body_xy[0];
  const by = pose.body_xy[1];

  if (pose.support.length >= 3) {
    ctx.beginPath();
    const [sx, sy] = toScreen(pose.support[0][0] + bx, pose.support[0][1] + by, pose, opts);
    ctx.moveTo(sx, sy);
    for (const [px, py] of pose.support.slice(1)) {
      const [qx, qy] = toScreen(px + bx, py + by, pose, opts);
      ctx.lineTo(qx, qy);
    }
    ctx.closePath();
    ctx.fillStyle = SUPPORT;
    ctx.fill();
    ctx.strokeStyle = SUPPORT_EDGE;
    ctx.lineWidth = 1;
    ctx.stroke();
  }

  // body outline (9.0 cm deep x 8.9 cm wide, centred on body_xy)
  const [xA, yA] = toScreen(bx + 4.5, by + 4.45, pose, opts);
  const [xB, yB] = toScreen(bx - 4.5, by - 4.45, pose, opts);
  ctx.fillStyle = BODY;
  ctx.fillRect(Math.min(xA, xB), Math.min(yA, yB), Math.abs(xB - xA), Math.abs(yB - yA));

  pose.feet_xy.forEach(([fx, fy], leg) => {
    const [px, py] = toScreen(fx + bx, fy + by, pose, opts);
    ctx.fillStyle = pose.contacts[leg] ? CONTACT : SWING;
    ctx.fillRect(px - 3, py - 3, 6, 6);
  });

  ctx.fillStyle = TEXT;
  ctx.font = "12px monospace";
  const margin = pose.stability_margin;
  ctx.fillText(
    margin === null ? "margin: airborne" : `margin: ${margin.toFixed(2)} cm`,
    8,
    opts.height - 10,
  );
  ctx.fillText(`x: ${bx.toFixed(2)} cm`, 8, opts.height - 26);
}
