// Readout formatting for the metrics panel.

import { CONVERGENCE_REFERENCE_MS, GAIT_NAMES } from "./protocol.js";
import { PanelState } from "./state.js";

export interface Readout {
  label: string;
  value: string;
}

export function readouts(state: PanelState): Readout[] {
  const gait =
    state.classifiedGait === null ? "-" : GAIT_NAMES[state.classifiedGait];
  const commanded =
    state.commandedGait === null ? "-" : GAIT_NAMES[state.commandedGait] ?? "-";
  const m = state.metrics;
  const conv = m.convergence;
  let convText = "-";
  if (conv !== null) {
    convText = conv.saturated
      ? `did not settle (ref ${CONVERGENCE_REFERENCE_MS} ms)`
      : `${conv.ticks} ms to ${conv.target} (ref ${conv.reference_ms} ms)`;
  }
  return [
    { label: "connection", value: state.connection },
    { label: "tick", value: String(state.tick) },
    { label: "gait", value: gait },
    { label: "commanded", value: commanded },
    { label: "period", value: m.periodTicks === null ? "-" : `${m.periodTicks} ticks` },
    {
      label: "speed",
      value: m.speedCmS === null ? "-" : `${m.speedCmS.toFixed(2)} cm/s`,
    },
    {
      label: "stability",
      value:
        m.stabilityMargin === null ? "-" : `${m.stabilityMargin.toFixed(2)} cm`,
    },
    { label: "convergence", value: convText },
    { label: "resyncs", value: String(state.resyncCount) },
  ];
}
