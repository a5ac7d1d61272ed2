// Message types for the live-service socket protocol. The JSON examples
// in ../../protocol/fixtures/ are the shared source of truth; the test
// suite checks these validators against them.

export type GaitId = 0 | 1 | 2;

export const GAIT_NAMES: readonly string[] = ["walk", "trot", "run"];

export const CONVERGENCE_REFERENCE_MS = 23;

export type CommandMessage =
  | { type: "set_gait"; gait: GaitId }
  | { type: "button_up" }
  | { type: "button_down" }
  | { type: "reset" }
  | { type: "set_scale"; factor: number };

export interface Pose {
  t_sim_ms: number;
  t_wall_ms: number;
  body_xy: [number, number];
  servo_angles: number[];
  contacts: boolean[];
  stability_margin: number | null;
  feet_xy: [number, number][];
  support: [number, number][];
}

export interface Convergence {
  target: string;
  tick: number;
  ticks: number | null;
  saturated: boolean;
  reference_ms: number;
}

export interface SnapshotMsg {
  type: "snapshot";
  seq: number;
  protocol: number;
  epoch: number;
  tick: number;
  gait: GaitId | null;
  commanded_gait: number;
  scale: number;
  pose: Pose;
  pwm: { servo: string; current: string; latched_width_us: number }[];
  link: unknown;
  wall_actual_ms: number;
}

export interface SpikeMsg {
  type: "spike";
  seq: number;
  tick: number;
  neurons: number[];
}

export interface MotorMsg {
  type: "motor";
  seq: number;
  tick: number;
  events: [number, number][];
}

export interface PoseMsg extends Pose {
  type: "pose";
  seq: number;
  tick: number;
  wall_actual_ms: number;
}

export interface MetricsMsg {
  type: "metrics";
  seq: number;
  tick: number;
  gait: GaitId | null;
  commanded_gait: number;
  period_ticks: number | null;
  speed_cm_s: number | null;
  stability_margin: number | null;
  convergence: Convergence | null;
  link: unknown;
  wall_actual_ms: number;
}

export interface AckMsg {
  type: "ack";
  seq: number;
  tick: number;
  cmd: string;
  ok: boolean;
  [extra: string]: unknown;
}

export interface ErrorMsg {
  type: "error";
  seq: number | null;
  message: string;
}

export type EventMessage =
  | SnapshotMsg
  | SpikeMsg
  | MotorMsg
  | PoseMsg
  | MetricsMsg
  | AckMsg
  | ErrorMsg;

const EVENT_TYPES = new Set([
  "snapshot",
  "spike",
  "motor",
  "pose",
  "metrics",
  "ack",
  "error",
]);

function isGait(value: unknown): value is GaitId {
  return value === 0 || value === 1 || value === 2;
}

// The panel must never put a malformed command on the wire.
export function validateCommand(cmd: unknown): cmd is CommandMessage {
  if (typeof cmd !== "object" || cmd === null) return false;
  const c = cmd as Record<string, unknown>;
  switch (c.type) {
    case "set_gait":
      return isGait(c.gait);
    case "button_up":
    case "button_down":
    case "reset":
      return true;
    case "set_scale":
      return typeof c.factor === "number" && c.factor >= 1;
    default:
      return false;
  }
}

export function parseEvent(data: string): EventMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (typeof msg.type !== "string" || !EVENT_TYPES.has(msg.type)) return null;
  if (msg.type !== "error" && typeof msg.seq !== "number") return null;
  return msg as unknown as EventMessage;
}
