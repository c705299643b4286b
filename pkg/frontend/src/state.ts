import type { EventRecord, Frame, StateSnapshot, Telemetry, UpdateStatus } from "./types";

const TELEMETRY_CAP = 600;
const EVENT_CAP = 2000;

/**
 * Mirror of the server state plus the streamed buffers.
 *
 * Only server-confirmed data is ever rendered: the snapshot comes from
 * GET /state, everything else accumulates from stream frames, and drafts
 * (the update text) are clearly separate until submitted.  Closing and
 * reopening the panel reconstructs the view from a fresh snapshot plus the
 * stream, so no mission logic lives here.
 */
export class PanelState {
  snapshot: StateSnapshot | null = null;
  telemetry: Telemetry[] = [];
  events: EventRecord[] = [];
  trail: number[] = [];
  trailCap: number;
  synth: UpdateStatus = { state: "idle" };
  busyToast: string | null = null;
  connectionLost = false;
  draftUpdate = "";
  private pendingArrival = false;

  constructor(trailCap = 24) {
    this.trailCap = trailCap;
  }

  applySnapshot(s: StateSnapshot): void {
    this.snapshot = s;
    this.synth = s.update ?? { state: "idle" };
    this.connectionLost = false;
  }

  applyFrame(f: Frame): void {
    switch (f.type) {
      case "telemetry": {
        this.telemetry.push(f.payload);
        if (this.telemetry.length > TELEMETRY_CAP) {
          this.telemetry.splice(0, this.telemetry.length - TELEMETRY_CAP);
        }
        if (this.pendingArrival && f.payload.cell !== null) {
          this.pushTrail(f.payload.cell);
          this.pendingArrival = false;
        }
        if (this.snapshot) {
          this.snapshot.telemetry = f.payload;
        }
        break;
      }
      case "event": {
        this.events.push(f.payload);
        if (this.events.length > EVENT_CAP) {
          this.events.splice(0, this.events.length - EVENT_CAP);
        }
        if (f.payload.dir === "in" && f.payload.label.startsWith("at.")) {
          this.pendingArrival = true;
        }
        if (f.payload.dir === "note" && f.payload.label === "hotSwap" && this.snapshot) {
          this.snapshot.update = { state: "swapped" };
          this.synth = { state: "swapped" };
        }
        break;
      }
      case "synth-progress":
      case "verdict": {
        this.synth = f.payload;
        if (this.snapshot) {
          this.snapshot.update = f.payload;
        }
        break;
      }
    }
  }

  private pushTrail(cell: number): void {
    if (this.trail[this.trail.length - 1] !== cell) {
      this.trail.push(cell);
      if (this.trail.length > this.trailCap) {
        this.trail.splice(0, this.trail.length - this.trailCap);
      }
    }
  }

  /** Arrival cells per the event stream: the oracle the trail must match. */
  arrivalsFromLog(): number {
    return this.events.filter((e) => e.dir === "in" && e.label.startsWith("at.")).length;
  }

  markBusy(message: string): void {
    this.busyToast = message;
  }

  clearBusy(): void {
    this.busyToast = null;
  }

  markDisconnected(): void {
    this.connectionLost = true;
  }

  hotswapEnabled(): boolean {
    return this.synth.state === "ready";
  }
}
