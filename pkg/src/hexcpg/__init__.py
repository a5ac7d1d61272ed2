"""hexcpg: deterministic spiking-CPG hexapod simulator.

Subsystems:
  snn        - tick-driven LIF network engine (compiled/pure kernel)
  cpg        - gait network builder and spike-train analysis
  aer        - AER events, REQ/ACK handshake, 2-of-7 link codec
  controller - behavioural servo-controller model (decode, PWM, latency)
  hexapod    - slew-limited servos, leg kinematics, stability
  scenario   - batch pipeline, config files, reports
  service    - real-time socket service (NDJSON + WebSocket)
"""

from ._kernel import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
