/**
 * End-to-end smoke against a real ground-control service.
 *
 * Spawns `python3 -m skyweave.cli serve` with the inconsistent-patrol
 * mission, then drives the panel state machine through the real HTTP and
 * WebSocket surfaces: telemetry streams in, a standard-transition update
 * is reported unrealizable inline, a valid update becomes ready, and the
 * hot-swap is reflected in the map trail reaching the new patrol cells.
 */

import { spawn, execFileSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { Api, HttpError } from "../src/api";
import { PanelState } from "../src/state";
import type { Frame } from "../src/types";

const PORT = 8943;
const BASE = process.env.SKYWEAVE_URL ?? `http://127.0.0.1:${PORT}`;
const REPO = join(__dirname, "..", "..");

let server: ChildProcess | null = null;

function py(code: string): string {
  return execFileSync("python3", ["-c", code], {
    cwd: REPO,
    env: { ...process.env, PYTHONPATH: join(REPO, "src") },
  }).toString();
}

async function waitFor<T>(fn: () => Promise<T | null>, timeoutMs = 60000, everyMs = 150): Promise<T> {
  const t0 = Date.now();
  for (;;) {
    const value = await fn().catch(() => null);
    if (value !== null && value !== undefined) {
      return value;
    }
    if (Date.now() - t0 > timeoutMs) {
      throw new Error("timed out");
    }
    await new Promise((r) => setTimeout(r, everyMs));
  }
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "skyweave-e2e-"));
  const world = {
    workspace: [[0, 0], [20, 0], [20, 30], [0, 30]],
    cell_size: 10,
    initial_xy: [5, 5],
    vehicle: { speed: 25.0, start_flying: true },
    modules: ["motion", { type: "flightops", climb_time: 0.3 }],
  };
  writeFileSync(join(dir, "world.json"), JSON.stringify(world));
  const mission = py("from skyweave import catalog; print(catalog.example3_mission_doc())");
  writeFileSync(join(dir, "mission.fsl"), mission);
  server = spawn(
    "python3",
    ["-m", "skyweave.cli", "serve",
     "--bind", `127.0.0.1:${PORT}`,
     "--world", join(dir, "world.json"),
     "--mission", join(dir, "mission.fsl"),
     "--sim-speed", "40", "--no-auto-swap"],
    { cwd: REPO, env: { ...process.env, PYTHONPATH: join(REPO, "src") }, stdio: "ignore" },
  );
  const api = new Api(BASE);
  await waitFor(async () => {
    const s = await api.getState();
    return s.mode === "running" && s.tick > 2 ? s : null;
  });
}, 90000);

afterAll(() => {
  server?.kill();
});

describe("control panel against a live service", () => {
  it("streams telemetry, reports unrealizable inline, hot-swaps and tracks the new patrol", async () => {
    const state = new PanelState(64);
    const api = new Api(BASE, (url) => new WebSocket(url) as never);
    state.applySnapshot(await api.getState());
    expect(state.snapshot?.grid.rows).toBe(3);
    const socket = api.connect(
      (f: Frame) => state.applyFrame(f),
      () => state.markDisconnected(),
    );

    // telemetry flows
    await waitFor(async () => (state.telemetry.length >= 5 ? true : null));
    // the old mission patrols cells 0 and 4 only
    await waitFor(async () => (state.trail.includes(4) ? true : null));
    expect(state.trail.every((c) => [0, 2, 4].includes(c))).toBe(true);

    // standard transition requirement: unrealizable, shown inline
    const bad = py("from skyweave import catalog; print(catalog.example3_update_doc('empty'))");
    await api.submitUpdate(bad, [], false);
    await waitFor(async () => (state.synth.state === "unrealizable" ? true : null));
    expect(state.synth.diagnostic ?? "").not.toBe("");
    expect(state.hotswapEnabled()).toBe(false);

    // a valid update becomes ready; double submit while in flight is Busy
    const good = py("from skyweave import catalog; print(catalog.example3_update_doc('eq1'))");
    await api.submitUpdate(good, [], false);
    let busy = false;
    try {
      await api.submitUpdate(good, [], false);
    } catch (e) {
      busy = e instanceof HttpError && e.status === 409;
      if (busy) state.markBusy("Busy");
    }
    await waitFor(async () => (state.synth.state === "ready" ? true : null));
    expect(busy).toBe(true);
    expect(state.busyToast).toBe("Busy");
    expect(state.hotswapEnabled()).toBe(true);

    // hot-swap executes and the trail reaches the new patrol area {3,5}
    await api.hotswap();
    await waitFor(async () => (state.synth.state === "swapped" ? true : null));
    await waitFor(async () => (state.trail.includes(3) && state.trail.includes(5) ? true : null));
    const tail = state.trail.slice(-8);
    expect(tail.some((c) => c === 3 || c === 5)).toBe(true);
    expect(state.connectionLost).toBe(false);
    socket.close();
  }, 120000);
});
