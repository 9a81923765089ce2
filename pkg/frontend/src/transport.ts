// Reconnecting WebSocket with the constructor injected, so tests and
// the node integration harness can supply their own socket class.

import { ClientFrame, ServerFrame, parseServerFrame } from "./protocol.js";
import { ConnectionStatus } from "./model.js";

// Browser WebSocket and the ws package both fit this shape.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: any;
  onmessage: any;
  onclose: any;
  onerror: any;
}

export type SocketFactory = (url: string) => SocketLike;

export const RETRY_MS = 1000;

export class Transport {
  onFrame: (frame: ServerFrame) => void = () => {};
  onStatus: (status: ConnectionStatus) => void = () => {};
  private socket: SocketLike | null = null;
  private url = "";
  private open = false;
  private closedByUser = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private factory: SocketFactory,
    private retryMs: number = RETRY_MS,
  ) {}

  connect(url: string): void {
    this.url = url;
    this.closedByUser = false;
    this.dial();
  }

  private dial(): void {
    this.onStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.open = true;
      this.onStatus("open");
    };
    socket.onmessage = (event: { data: unknown }) => {
      const frame = parseServerFrame(String(event.data));
      if (frame !== null) this.onFrame(frame); // junk frames are dropped
    };
    socket.onerror = () => {}; // the close handler does the bookkeeping
    socket.onclose = () => {
      if (this.socket !== socket) return; // superseded by a newer dial
      this.open = false;
      this.socket = null;
      this.onStatus("closed");
      if (!this.closedByUser) {
        this.retryTimer = setTimeout(() => this.dial(), this.retryMs);
      }
    };
  }

  send(frame: ClientFrame): boolean {
    if (!this.open || this.socket === null) return false;
    this.socket.send(JSON.stringify(frame));
    return true;
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    if (this.socket !== null) this.socket.close();
  }
}
