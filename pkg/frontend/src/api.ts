import type { Frame, StateSnapshot } from "./types";

export interface StreamSocket {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => StreamSocket;

export class HttpError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`HTTP ${status}`);
  }
}

/** Thin client for the ground-control service. */
export class Api {
  constructor(
    private base: string,
    private socketFactory?: SocketFactory,
  ) {}

  private async req(method: string, path: string, body?: unknown): Promise<unknown> {
    const res = await fetch(this.base + path, {
      method,
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new HttpError(res.status, parsed);
    }
    return parsed;
  }

  getState(): Promise<StateSnapshot> {
    return this.req("GET", "/state") as Promise<StateSnapshot>;
  }

  submitUpdate(text: string, manifest: unknown[] = [], autoSwap?: boolean): Promise<unknown> {
    return this.req("POST", "/update", { text, manifest, auto_swap: autoSwap ?? null });
  }

  hotswap(): Promise<unknown> {
    return this.req("POST", "/hotswap");
  }

  uploadModule(module: unknown): Promise<unknown> {
    return this.req("POST", "/module", { module });
  }

  command(label: string): Promise<unknown> {
    return this.req("POST", "/command/" + label);
  }

  connect(onFrame: (f: Frame) => void, onClose: () => void): StreamSocket {
    const url = this.base.replace(/^http/, "ws") + "/stream";
    const make: SocketFactory =
      this.socketFactory ?? ((u) => new WebSocket(u) as unknown as StreamSocket);
    const ws = make(url);
    ws.onmessage = (ev) => {
      try {
        onFrame(JSON.parse(String(ev.data)) as Frame);
      } catch {
        // tolerate malformed frames
      }
    };
    ws.onclose = onClose;
    return ws;
  }
}
