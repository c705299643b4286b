export interface GridInfo {
  rows: number;
  cols: number;
  cell_size: number;
  origin: [number, number];
  angle: number;
  cells: number[];
  regions: Record<string, number[]>;
}

export interface Telemetry {
  t: number;
  x: number;
  y: number;
  alt: number;
  battery: number;
  flying: boolean;
  cell: number | null;
  target: number | null;
  bound: string[];
  held: number[];
}

export interface UpdateStatus {
  state: string;
  diagnostic?: string;
  wall_time?: number;
  new_controller_states?: number;
}

export interface StateSnapshot {
  mode: string;
  tick: number;
  controller_state: number;
  controller_states: number;
  update: UpdateStatus;
  bound: string[];
  telemetry: Telemetry;
  grid: GridInfo;
  log_length: number;
}

export interface EventRecord {
  tick: number;
  dir: "in" | "out" | "note";
  label: string;
  before: number;
  after: number;
}

export type Frame =
  | { type: "telemetry"; payload: Telemetry }
  | { type: "event"; payload: EventRecord }
  | { type: "synth-progress"; payload: UpdateStatus }
  | { type: "verdict"; payload: UpdateStatus };
