// WebSocket session: validates outgoing commands, reduces incoming
// events into the panel state, reconnects with snapshot resync on
// drops and on sequence gaps.

import { CommandMessage, parseEvent, validateCommand } from "./protocol.js";
import {
  PanelState,
  initialState,
  markDisconnected,
  markResyncing,
  reduce,
} from "./state.js";

// The subset of the WebSocket API the panel uses; tests inject a
// node-side implementation, the browser passes the global one.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionOptions {
  factory?: SocketFactory;
  reconnectDelayMs?: number;
  onState?: (state: PanelState) => void;
}

function defaultFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

export class PanelConnection {
  state: PanelState = initialState();

  private socket: SocketLike | null = null;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly options: ConnectionOptions = {},
  ) {}

  connect(): void {
    this.closed = false;
    const factory = this.options.factory ?? defaultFactory;
    const socket = factory(this.url);
    this.socket = socket;
    this.setState({ ...this.state, connection: "connecting" });
    socket.onopen = () => {
      // connected state proper arrives with the snapshot
    };
    socket.onmessage = (event) => this.handleData(String(event.data));
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.closed) return;
      this.setState(markDisconnected(this.state));
      this.scheduleReconnect();
    };
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.socket = null;
    this.setState(markDisconnected(this.state));
  }

  send(cmd: CommandMessage): boolean {
    if (!validateCommand(cmd) || this.socket === null) return false;
    this.socket.send(JSON.stringify(cmd));
    return true;
  }

  private handleData(data: string): void {
    const msg = parseEvent(data);
    if (msg === null) return;
    const next = reduce(this.state, msg);
    if (next.needsResync) {
      // Missed events: drop the socket and rebuild from a fresh snapshot.
      this.setState(markResyncing(next));
      this.socket?.close();
      return;
    }
    this.setState(next);
  }

  private scheduleReconnect(): void {
    const delay = this.options.reconnectDelayMs ?? 500;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.closed) this.connect();
    }, delay);
  }

  private setState(state: PanelState): void {
    this.state = state;
    this.options.onState?.(state);
  }
}

// URL resolution for the browser: `?server=ws://host:port` beats the
// page origin.
export function serverUrl(location: { search: string; host: string }): string {
  const params = new URLSearchParams(location.search);
  return params.get("server") ?? `ws://${location.host}`;
}
