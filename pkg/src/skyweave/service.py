"""Ground-control service: HTTP uploads/commands plus JSON-over-WebSocket
push for telemetry, events, synthesis progress and verdicts.

One scheduler thread advances the simulated world and the enactment loop in
fixed sim-time steps (wall pace scaled by sim_speed); one synthesis worker
computes mission updates while the vehicle keeps flying; WebSocket clients
receive frames {type: telemetry|event|synth-progress|verdict, payload}.
All cross-boundary traffic goes through queues; handlers never mutate
enactment state directly."""

from __future__ import annotations

import json
import pathlib
import queue
import threading
import time

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .dcu import dcu_problem_from_doc, solve_update, verify_update
from .enactor import Enactor, build_fallback
from .problems import control_problem
from .scenario import build_world, _module_from_spec
from .speclang import SpecError, UpdateDecl, parse, validate
from .simworld import UnhandledCommandError
from .synthesis import controller_table, solve_control_problem, verify_closed_loop

__all__ = ["GroundControl", "create_app"]


class SpecUpload(BaseModel):
    text: str


class UpdateUpload(BaseModel):
    text: str
    manifest: list[dict] = []
    auto_swap: bool | None = None


class ModuleUpload(BaseModel):
    module: dict


class GroundControl:
    """Owns the sim/enactment scheduler, the synthesis worker and the
    broadcast fan-out."""

    def __init__(self, world_cfg: dict, mission: str | None = None, seed: int = 0,
                 sim_speed: float = 10.0, auto_swap: bool = True,
                 runs_dir: str | None = None, dt: float = 0.1):
        self.world_cfg = world_cfg
        self.seed = seed
        self.dt = dt
        self.sim_speed = sim_speed
        self.auto_swap = auto_swap
        self.runs_dir = pathlib.Path(runs_dir) if runs_dir else None
        self.lock = threading.RLock()
        self.clients: list[queue.Queue] = []
        self.world = None
        self.disc = None
        self.enactor: Enactor | None = None
        self.problem = None
        self.update_status = {"state": "idle"}
        self.ready_solution = None
        self._log_cursor = 0
        self._stop = threading.Event()
        self._work: queue.Queue = queue.Queue()
        self.snapshot: dict = {"mode": "idle"}
        self.tick = 0
        if mission:
            self.start_mission(mission)

    # -- mission lifecycle ---------------------------------------------------

    def start_mission(self, text: str) -> dict:
        doc = parse(text)
        diags = validate(doc)
        if diags:
            raise SpecError("; ".join(str(d) for d in diags))
        problem = control_problem(doc)
        verdict = solve_control_problem(problem)
        if not verdict.realizable:
            raise SpecError("mission unrealizable: " + " ".join(verdict.witness or []))
        check = verify_closed_loop(problem.env, verdict.controller, problem)
        if not check.realizable:
            raise SpecError(f"mission failed closed-loop verification: {check.detail}")
        with self.lock:
            self.world, self.disc = build_world(self.world_cfg, self.seed)
            fallback = build_fallback(self.disc.initial_cell, problem.alphabet.uncontrolled)
            self.enactor = Enactor(verdict.controller, fallback)
            self.enactor.bind_initial_modules(self.world.bound)
            self.problem = problem
            self.update_status = {"state": "idle"}
            self.ready_solution = None
            self._log_cursor = 0
            self.tick = 0
        return {"controller_states": verdict.controller.lts.n_states}

    # -- scheduler -------------------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        threading.Thread(target=self._sim_loop, daemon=True, name="sim").start()
        threading.Thread(target=self._synth_loop, daemon=True, name="synth").start()

    def stop(self) -> None:
        self._stop.set()

    def _sim_loop(self) -> None:
        while not self._stop.is_set():
            start = time.monotonic()
            self.step()
            budget = self.dt / max(self.sim_speed, 1e-6)
            delay = budget - (time.monotonic() - start)
            if delay > 0:
                time.sleep(delay)

    def step(self) -> None:
        with self.lock:
            if self.enactor is None or self.world is None:
                return
            self.tick += 1
            if self.ready_solution is not None and self.auto_swap \
                    and self.enactor.pending_swap is None and self.enactor.mode == "running":
                self.enactor.request_swap(self.ready_solution)
                self.ready_solution = None
                self.update_status = {"state": "swapped"}
            for ev in self.world.step(self.dt):
                self.enactor.enqueue(ev)
            for cmd in self.enactor.tick():
                if cmd in ("stopOld", "startNew"):
                    continue
                if cmd == "reconfig":
                    self.world.apply_binding(self.enactor.bound_modules)
                    continue
                try:
                    for ev in self.world.dispatch(cmd):
                        self.enactor.enqueue(ev)
                except UnhandledCommandError:
                    self.enactor.on_unexpected(f"undeliverable:{cmd}")
            new_records = self.enactor.log[self._log_cursor:]
            self._log_cursor = len(self.enactor.log)
            self.snapshot = self._snapshot()
        for rec in new_records:
            self.broadcast("event", {
                "tick": rec.tick, "dir": rec.direction, "label": rec.label,
                "before": rec.before, "after": rec.after,
            })
        self.broadcast("telemetry", self.snapshot["telemetry"])

    def _snapshot(self) -> dict:
        grid = self.world.grid
        return {
            "mode": self.enactor.mode,
            "tick": self.tick,
            "controller_state": self.enactor.current,
            "controller_states": self.enactor.controller.lts.n_states,
            "update": dict(self.update_status),
            "bound": sorted(self.enactor.bound_modules),
            "telemetry": self.world.telemetry(),
            "grid": {
                "rows": grid.rows, "cols": grid.cols, "cell_size": grid.cell_size,
                "origin": list(grid.origin), "angle": grid.angle,
                "cells": sorted(grid.cells),
                "regions": {k: sorted(v) for k, v in sorted(grid.regions.items())},
            },
            "log_length": self._log_cursor,
        }

    # -- synthesis worker -------------------------------------------------------

    def submit_update(self, text: str, manifest: list[dict], auto_swap: bool | None) -> None:
        doc = parse(text)
        if not isinstance(doc.problem, UpdateDecl):
            raise SpecError("not an update document")
        diags = validate(doc)
        if diags:
            raise SpecError("; ".join(str(d) for d in diags))
        with self.lock:
            if self.update_status["state"] in ("queued", "synthesizing", "ready"):
                raise BusyError("an update is already in progress")
            if self.enactor is None or self.enactor.mode != "running":
                raise SpecError("no running mission to update")
            if auto_swap is not None:
                self.auto_swap = auto_swap
            self.update_status = {"state": "queued"}
            current = self.enactor.controller
        self._work.put((doc, manifest, current))

    def _synth_loop(self) -> None:
        while not self._stop.is_set():
            try:
                doc, manifest, current = self._work.get(timeout=0.05)
            except queue.Empty:
                continue
            with self.lock:
                self.update_status = {"state": "synthesizing"}
            self.broadcast("synth-progress", {"state": "synthesizing"})
            t0 = time.perf_counter()
            try:
                dp = dcu_problem_from_doc(doc, current=current)
                verdict, sol = solve_update(dp)
                wall = round(time.perf_counter() - t0, 3)
                if not verdict.realizable:
                    with self.lock:
                        self.update_status = {
                            "state": "unrealizable",
                            "diagnostic": " ".join(verdict.witness or []) or verdict.detail,
                            "wall_time": wall,
                        }
                    self.broadcast("verdict", dict(self.update_status))
                    continue
                check = verify_update(sol, dp)
                if not check.realizable:
                    with self.lock:
                        self.update_status = {"state": "failed-verification",
                                              "diagnostic": check.detail}
                    self.broadcast("verdict", dict(self.update_status))
                    continue
                sol.reconfig_manifest = tuple(manifest)
                with self.lock:
                    self.ready_solution = sol
                    self.update_status = {
                        "state": "ready", "wall_time": wall,
                        "new_controller_states": sol.new_controller.lts.n_states,
                    }
                self.broadcast("verdict", dict(self.update_status))
            except Exception as e:  # noqa: BLE001 - surfaced to the client
                with self.lock:
                    self.update_status = {"state": "error", "diagnostic": str(e)}
                self.broadcast("verdict", dict(self.update_status))

    def request_hotswap(self) -> dict:
        with self.lock:
            if self.ready_solution is None:
                raise BusyError("no update is ready")
            self.enactor.request_swap(self.ready_solution)
            self.ready_solution = None
            self.update_status = {"state": "swapped"}
            return {"state": "swapped"}

    # -- misc -------------------------------------------------------------------

    def upload_module(self, spec: dict) -> dict:
        with self.lock:
            mod = _module_from_spec(spec, self.world, self.world.grid)
            self.world.register(mod)
            self.enactor.upload_module(mod.module_id)
            return {"module": mod.module_id}

    def inject(self, label: str) -> None:
        with self.lock:
            if self.enactor is None:
                raise SpecError("no mission running")
            self.enactor.enqueue(label)

    def broadcast(self, kind: str, payload: dict) -> None:
        frame = {"type": kind, "payload": payload}
        for q in list(self.clients):
            try:
                q.put_nowait(frame)
            except queue.Full:
                pass

    def attach(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=4096)
        self.clients.append(q)
        return q

    def detach(self, q: queue.Queue) -> None:
        if q in self.clients:
            self.clients.remove(q)


class BusyError(Exception):
    pass


def create_app(control: GroundControl) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app):
        control.start()
        yield
        control.stop()

    app = FastAPI(title="skyweave ground control", lifespan=lifespan)

    def guard(fn):
        try:
            return fn()
        except BusyError as e:
            raise HTTPException(409, detail={"error": "Busy", "message": str(e)})
        except SpecError as e:
            raise HTTPException(422, detail={"error": "spec", "message": str(e)})

    @app.post("/spec")
    def post_spec(body: SpecUpload):
        return guard(lambda: control.start_mission(body.text))

    @app.post("/module")
    def post_module(body: ModuleUpload):
        return guard(lambda: control.upload_module(body.module))

    @app.post("/update")
    def post_update(body: UpdateUpload):
        guard(lambda: control.submit_update(body.text, body.manifest, body.auto_swap))
        return {"state": "queued"}

    @app.post("/hotswap")
    def post_hotswap():
        return guard(control.request_hotswap)

    @app.post("/command/{label}")
    def post_command(label: str):
        guard(lambda: control.inject(label))
        return {"injected": label}

    @app.get("/state")
    def get_state():
        return control.snapshot

    @app.get("/controller")
    def get_controller():
        with control.lock:
            if control.enactor is None:
                raise HTTPException(404, detail="no mission")
            return {"table": controller_table(control.enactor.controller)}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        if control.runs_dir is None:
            raise HTTPException(404, detail="no runs directory")
        path = control.runs_dir / run_id / "record.json"
        if not path.exists():
            raise HTTPException(404, detail=f"run {run_id} not found")
        return json.loads(path.read_text())

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        import asyncio

        await ws.accept()
        q = control.attach()
        try:
            while True:
                try:
                    frame = q.get_nowait()
                except queue.Empty:
                    await asyncio.sleep(0.01)
                    continue
                await ws.send_json(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            control.detach(q)

    return app
