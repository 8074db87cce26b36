/**
 * WebSocket connection to the gateway: FIFO request/reply correlation,
 * pushed events fanned out to a handler, automatic reconnect with backoff.
 */
import { GatewayEvent, Reply, isEvent } from "./protocol.js";

export interface Connection {
  request(msg: Record<string, unknown>): Promise<Reply>;
  onEvent: (ev: GatewayEvent) => void;
  onStatus: (status: "connecting" | "open" | "closed") => void;
  close(): void;
}

interface Pending {
  resolve: (r: Reply) => void;
  reject: (e: Error) => void;
}

export class WsConnection implements Connection {
  onEvent: (ev: GatewayEvent) => void = () => {};
  onStatus: (status: "connecting" | "open" | "closed") => void = () => {};
  onOpen: () => void = () => {};

  private ws: WebSocket | null = null;
  private pending: Pending[] = [];
  private closed = false;
  private backoffMs = 250;

  constructor(private url: string) {}

  connect(): void {
    if (this.closed) return;
    this.onStatus("connecting");
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.backoffMs = 250;
      this.onStatus("open");
      this.onOpen();
    };
    this.ws.onmessage = (message: MessageEvent) => {
      const msg = JSON.parse(String(message.data));
      if (isEvent(msg)) {
        this.onEvent(msg as GatewayEvent);
      } else {
        const waiter = this.pending.shift();
        waiter?.resolve(msg as Reply);
      }
    };
    this.ws.onclose = () => {
      this.onStatus("closed");
      for (const waiter of this.pending.splice(0)) {
        waiter.reject(new Error("connection closed"));
      }
      if (!this.closed) {
        setTimeout(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 5000);
      }
    };
  }

  request(msg: Record<string, unknown>): Promise<Reply> {
    return new Promise((resolve, reject) => {
      if (!this.ws || this.ws.readyState !== WebSocket.OPEN) {
        reject(new Error("not connected"));
        return;
      }
      this.pending.push({ resolve, reject });
      this.ws.send(JSON.stringify(msg));
    });
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

export function gatewayUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}
