// Panel state store. All render state derives from received events via
// the pure reducer below; socket plumbing lives in connection.ts.

import {
  Convergence,
  EventMessage,
  GaitId,
  Pose,
  SnapshotMsg,
} from "./protocol.js";

export interface SpikeSample {
  tick: number;
  neurons: number[];
}

export interface PanelMetrics {
  periodTicks: number | null;
  speedCmS: number | null;
  stabilityMargin: number | null;
  convergence: Convergence | null;
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface PanelState {
  connection: ConnectionStatus;
  epoch: number;
  tick: number;
  lastSeq: number | null;
  needsResync: boolean;
  resyncCount: number;
  commandedGait: number | null;
  classifiedGait: GaitId | null;
  scale: number;
  pose: Pose | null;
  spikes: SpikeSample[];
  spikeWindowTicks: number;
  metrics: PanelMetrics;
  lastAck: { cmd: string; tick: number } | null;
  lastError: string | null;
}

export function initialState(spikeWindowTicks = 200): PanelState {
  return {
    connection: "connecting",
    epoch: 0,
    tick: 0,
    lastSeq: null,
    needsResync: false,
    resyncCount: 0,
    commandedGait: null,
    classifiedGait: null,
    scale: 100,
    pose: null,
    spikes: [],
    spikeWindowTicks,
    metrics: {
      periodTicks: null,
      speedCmS: null,
      stabilityMargin: null,
      convergence: null,
    },
    lastAck: null,
    lastError: null,
  };
}

function applySnapshot(state: PanelState, msg: SnapshotMsg): PanelState {
  return {
    ...state,
    connection: "connected",
    epoch: msg.epoch,
    tick: msg.tick,
    lastSeq: msg.seq,
    needsResync: false,
    commandedGait: msg.commanded_gait,
    classifiedGait: msg.gait,
    scale: msg.scale,
    pose: msg.pose,
    spikes: [],
    metrics: {
      periodTicks: null,
      speedCmS: null,
      stabilityMargin: msg.pose.stability_margin,
      convergence: state.metrics.convergence,
    },
  };
}

function trimSpikes(spikes: SpikeSample[], nowTick: number, window: number): SpikeSample[] {
  const cutoff = nowTick - window;
  let start = 0;
  while (start < spikes.length && spikes[start].tick < cutoff) start++;
  return start > 0 ? spikes.slice(start) : spikes;
}

export function reduce(state: PanelState, msg: EventMessage): PanelState {
  // A sequence gap means missed events: flag for a snapshot resync and
  // ignore the message (the reconnect will rebuild everything).
  if (
    msg.type !== "error" &&
    msg.type !== "snapshot" &&
    state.lastSeq !== null &&
    msg.seq !== state.lastSeq + 1
  ) {
    return { ...state, needsResync: true };
  }

  switch (msg.type) {
    case "snapshot":
      return applySnapshot(state, msg);
    case "spike": {
      const spikes = trimSpikes(
        [...state.spikes, { tick: msg.tick, neurons: msg.neurons }],
        msg.tick,
        state.spikeWindowTicks,
      );
      return { ...state, spikes, tick: msg.tick, lastSeq: msg.seq };
    }
    case "motor":
      return { ...state, tick: msg.tick, lastSeq: msg.seq };
    case "pose": {
      const { type: _type, seq, tick, wall_actual_ms: _wall, ...pose } = msg;
      return { ...state, pose: pose as Pose, tick, lastSeq: seq };
    }
    case "metrics":
      return {
        ...state,
        tick: msg.tick,
        lastSeq: msg.seq,
        classifiedGait: msg.gait,
        commandedGait: msg.commanded_gait,
        metrics: {
          periodTicks: msg.period_ticks,
          speedCmS: msg.speed_cm_s,
          stabilityMargin: msg.stability_margin,
          convergence: msg.convergence,
        },
      };
    case "ack":
      return {
        ...state,
        tick: msg.tick,
        lastSeq: msg.seq,
        lastAck: { cmd: msg.cmd, tick: msg.tick },
      };
    case "error":
      return { ...state, lastError: msg.message };
  }
}

export function markDisconnected(state: PanelState): PanelState {
  return { ...state, connection: "disconnected", lastSeq: null };
}

export function markResyncing(state: PanelState): PanelState {
  return {
    ...state,
    connection: "connecting",
    lastSeq: null,
    resyncCount: state.resyncCount + 1,
  };
}
