"""Scenario runner: build the world, synthesize, enact, execute a scripted
timeline (mission updates, module uploads, injected events) and evaluate
assertions.  Deterministic under a fixed seed: update synthesis completes
after a scripted number of sim ticks rather than wall time, which is also
the knob that reproduces the early/late hand-over regimes."""

from __future__ import annotations

import json
import pathlib
import resource
import time
from dataclasses import dataclass, field

from .dcu import dcu_problem_from_doc, solve_update, verify_update
from .enactor import Enactor, build_fallback
from .problems import control_problem
from .simworld import (
    FlightModule,
    HeightModule,
    IteratorModule,
    MotionModule,
    NextMotionModule,
    PackageModule,
    PersonSensorModule,
    RegionSensorModule,
    SpinModule,
    UnhandledCommandError,
    VehicleState,
    World,
    discretize,
)
from .speclang import parse
from .synthesis import solve_control_problem, verify_closed_loop

__all__ = ["RunRecord", "Scenario", "ScenarioError", "load_scenario", "run_scenario"]


class ScenarioError(Exception):
    """Failing step; `code` matches the CLI exit codes (2 unrealizable,
    3 verification failure, 4 assertion failure)."""

    def __init__(self, message: str, step: int | None = None, code: int = 1):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.code = code


@dataclass
class Scenario:
    scenario_id: str
    world: dict
    mission: str
    timeline: list[dict] = field(default_factory=list)
    assertions: list[dict] = field(default_factory=list)
    max_ticks: int = 3000
    dt: float = 0.1

    def __post_init__(self):
        ticks = [a["tick"] for a in self.timeline]
        if ticks != sorted(ticks) or len(set(ticks)) != len(ticks):
            raise ScenarioError("timeline ticks must be strictly increasing")

    def save(self, directory: str | pathlib.Path) -> None:
        d = pathlib.Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "mission.fsl").write_text(self.mission)
        meta = {
            "id": self.scenario_id,
            "world": self.world,
            "timeline": [
                {k: v for k, v in act.items() if k != "update"}
                | ({"update_file": f"update{i}.fsl"} if "update" in act else {})
                for i, act in enumerate(self.timeline)
            ],
            "assertions": self.assertions,
            "max_ticks": self.max_ticks,
            "dt": self.dt,
        }
        for i, act in enumerate(self.timeline):
            if "update" in act:
                (d / f"update{i}.fsl").write_text(act["update"])
        (d / "scenario.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_scenario(directory: str | pathlib.Path) -> Scenario:
    d = pathlib.Path(directory)
    meta = json.loads((d / "scenario.json").read_text())
    timeline = []
    for act in meta.get("timeline", []):
        act = dict(act)
        if "update_file" in act:
            act["update"] = (d / act.pop("update_file")).read_text()
        timeline.append(act)
    return Scenario(
        meta["id"], meta["world"], (d / "mission.fsl").read_text(),
        timeline, meta.get("assertions", []), meta.get("max_ticks", 3000),
        meta.get("dt", 0.1),
    )


@dataclass
class SynthRecord:
    kind: str
    wall_time: float
    arena_states: int
    peak_rss_kb: int
    realizable: bool
    verified: bool


@dataclass
class RunRecord:
    scenario_id: str
    seed: int
    events: list[str]
    trail: list[tuple[int, int]]
    synth: list[SynthRecord]
    assertion_results: list[dict]
    final_mode: str
    controllers: list = field(default_factory=list)  # transient, for replay
    log_records: list = field(default_factory=list)
    fallback_controller: object = None

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.assertion_results)

    def event_log_bytes(self) -> bytes:
        return ("\n".join(self.events) + "\n").encode()

    def save(self, directory: str | pathlib.Path) -> None:
        d = pathlib.Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "events.log").write_bytes(self.event_log_bytes())
        (d / "record.json").write_text(json.dumps({
            "scenario": self.scenario_id,
            "seed": self.seed,
            "final_mode": self.final_mode,
            "trail": self.trail,
            "synth": [vars(s) for s in self.synth],
            "assertions": self.assertion_results,
        }, indent=2, sort_keys=True))

    def replay_ok(self) -> bool:
        """Feed the log back through the recorded controllers and check the
        recorded state sequence reproduces exactly."""
        controllers = list(self.controllers)
        if not controllers:
            return False
        cur_controller = controllers.pop(0)
        state = cur_controller.lts.initial
        for rec in self.log_records:
            if rec.direction == "note":
                if rec.label == "hotSwap":
                    if not controllers:
                        return False
                    cur_controller = controllers.pop(0)
                    state = rec.after
                elif rec.label.startswith("fallback:"):
                    if self.fallback_controller is None:
                        return False
                    cur_controller = self.fallback_controller
                    state = rec.after
                continue
            if rec.before != state:
                return False
            succs = cur_controller.lts.succ(rec.before, rec.label)
            if len(succs) != 1 or succs[0] != rec.after:
                return False
            state = rec.after
        return True


# ---------------------------------------------------------------------------
# world construction


def _module_from_spec(spec, world: World, grid) -> object:
    if isinstance(spec, str):
        spec = {"type": spec}
    kind = spec["type"]
    if kind == "motion":
        return MotionModule(grid)
    if kind == "flightops":
        return FlightModule(spec.get("climb_time", 1.0), spec.get("cruise_alt", 10.0))
    if kind == "height":
        return HeightModule(spec.get("low", 1.5), spec.get("high", 100.0))
    if kind == "package":
        return PackageModule(spec["index"])
    if kind == "spin":
        return SpinModule(spec.get("spin_time", 1.0))
    if kind == "iterator":
        return IteratorModule(spec["order"])
    if kind == "next_motion":
        it = world.modules["iterator"]
        return NextMotionModule(it)
    if kind == "region_sensor":
        it = world.modules["iterator"]
        return RegionSensorModule(spec["name"], frozenset(spec["cells"]), it)
    if kind == "person_sensor":
        return PersonSensorModule(frozenset(spec.get("cells", [])))
    raise ScenarioError(f"unknown module type {kind!r}")


def build_world(cfg: dict, seed: int):
    disc = discretize(
        [tuple(p) for p in cfg["workspace"]],
        cfg["cell_size"],
        cfg.get("angle", 0.0),
        {k: [tuple(p) for p in v] for k, v in cfg.get("region_polygons", {}).items()},
        tuple(cfg["initial_xy"]) if "initial_xy" in cfg else None,
    )
    vcfg = cfg.get("vehicle", {})
    vehicle = VehicleState(
        pos=disc.grid.center(disc.initial_cell),
        alt=vcfg.get("alt", 10.0 if vcfg.get("start_flying") else 0.0),
        speed=vcfg.get("speed", 8.0),
        flying=bool(vcfg.get("start_flying", False)),
        battery=vcfg.get("battery", 100.0),
    )
    world = World(
        disc.grid, vehicle, seed=seed,
        drain_rate=cfg.get("drain_rate", 0.0),
        low_threshold=cfg.get("low_threshold", 20.0),
        jitter=cfg.get("jitter", 0.0),
        emit_low_battery=cfg.get("emit_low_battery", False),
    )
    bound = []
    for spec in cfg.get("modules", []):
        mod = _module_from_spec(spec, world, disc.grid)
        world.register(mod)
        bound.append(mod.module_id)
    for mid in bound:
        world.bind(mid)
    return world, disc


# ---------------------------------------------------------------------------
# running


def _synthesize_mission(doc):
    from .synthesis import problem_arena, solve_gr1

    before = time.perf_counter()
    problem = control_problem(doc)
    arena = problem_arena(problem)
    verdict = solve_gr1(arena)
    wall = time.perf_counter() - before
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    verified = False
    if verdict.realizable:
        verified = verify_closed_loop(problem.env, verdict.controller, problem).realizable
    return problem, verdict, SynthRecord("mission", round(wall, 4), arena.n, rss,
                                         verdict.realizable, verified)


def run_scenario(sc: Scenario | str | pathlib.Path, seed: int = 0) -> RunRecord:
    """Deterministic end-to-end run; raises ScenarioError on a failing step."""
    if not isinstance(sc, Scenario):
        sc = load_scenario(sc)
    doc = parse(sc.mission)
    problem, verdict, synth0 = _synthesize_mission(doc)
    synth: list[SynthRecord] = [synth0]
    if not verdict.realizable:
        raise ScenarioError("mission unrealizable", code=2)
    if not synth0.verified:
        raise ScenarioError("mission controller failed closed-loop verification", code=3)
    controller = verdict.controller

    world, disc = build_world(sc.world, seed)
    launch = disc.initial_cell
    fallback = build_fallback(launch, problem.alphabet.uncontrolled)
    enactor = Enactor(controller, fallback)
    enactor.bind_initial_modules(world.bound)
    controllers = [controller]

    timeline = {act["tick"]: act for act in sc.timeline}
    ready: list[tuple[int, object]] = []
    trail: list[tuple[int, int]] = []
    step_index = {id(act): i for i, act in enumerate(sc.timeline)}

    for tick in range(1, sc.max_ticks + 1):
        act = timeline.get(tick)
        if act is not None:
            idx = step_index[id(act)]
            kind = act["action"]
            if kind == "inject_event":
                enactor.enqueue(act["label"])
            elif kind == "upload_module":
                mod = _module_from_spec(act["module"], world, world.grid)
                world.register(mod)
                enactor.upload_module(mod.module_id)
            elif kind == "submit_update":
                update_doc = parse(act["update"])
                before = time.perf_counter()
                try:
                    dp = dcu_problem_from_doc(update_doc, current=controller)
                    uv, sol = solve_update(dp)
                except Exception as e:  # noqa: BLE001 - surfaced as a step failure
                    raise ScenarioError(f"update construction failed: {e}", idx)
                wall = time.perf_counter() - before
                rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
                expect = act.get("expect", "ready")
                if not uv.realizable:
                    synth.append(SynthRecord("update", round(wall, 4), 0, rss, False, False))
                    if expect == "unrealizable":
                        continue
                    raise ScenarioError("update unrealizable", idx, code=2)
                if expect == "unrealizable":
                    raise ScenarioError("update unexpectedly realizable", idx)
                checked = verify_update(sol, dp)
                synth.append(SynthRecord(
                    "update", round(wall, 4), sol.combined.lts.n_states, rss,
                    True, checked.realizable,
                ))
                if not checked.realizable:
                    raise ScenarioError(f"update failed verification: {checked.detail}", idx, code=3)
                sol.reconfig_manifest = tuple(act.get("manifest", ()))
                ready.append((tick + act.get("synth_ticks", 0), sol))
            else:
                raise ScenarioError(f"unknown action {kind!r}", idx)

        for due, sol in list(ready):
            if tick >= due and enactor.pending_swap is None and enactor.mode == "running":
                enactor.request_swap(sol)
                ready.remove((due, sol))
                controllers.append(sol.new_controller)

        for ev in world.step(sc.dt):
            enactor.enqueue(ev)
            if ev.startswith("at."):
                cell = world.current_cell()
                if cell is not None:
                    trail.append((tick, cell))
        for cmd in enactor.tick():
            if cmd in ("stopOld", "startNew"):
                continue
            if cmd == "reconfig":
                world.apply_binding(enactor.bound_modules)
                continue
            try:
                for ev in world.dispatch(cmd):
                    enactor.enqueue(ev)
            except UnhandledCommandError:
                enactor.on_unexpected(f"undeliverable:{cmd}")
        if enactor.mode == "landed" and not ready and enactor.pending_swap is None:
            break

    results = [
        _evaluate_assertion(a, enactor, trail) | {"assertion": a}
        for a in sc.assertions
    ]
    record = RunRecord(
        sc.scenario_id, seed, enactor.log_lines(), trail, synth, results,
        enactor.mode, controllers, list(enactor.log), fallback.controller,
    )
    failing = [i for i, r in enumerate(results) if not r["ok"]]
    if failing:
        raise ScenarioError(
            f"assertions failed: {[results[i] for i in failing]}", failing[0], code=4
        )
    return record


# ---------------------------------------------------------------------------
# assertions


def _event_stream(enactor) -> list[str]:
    return [r.label for r in enactor.log if r.direction in ("in", "out")]


def _window(stream: list[str], after: str | None, before: str | None) -> list[str]:
    start = 0
    end = len(stream)
    if after is not None and after in stream:
        start = stream.index(after) + 1
    elif after is not None:
        return []
    if before is not None and before in stream[start:]:
        end = start + stream[start:].index(before)
    return stream[start:end]


def _evaluate_assertion(a: dict, enactor, trail) -> dict:
    kind = a["type"]
    stream = _event_stream(enactor)
    if kind == "never_event":
        window = _window(stream, a.get("after"), a.get("before"))
        bad = [ev for ev in window if ev in set(a["labels"])]
        return {"ok": not bad, "detail": bad[:5]}
    if kind == "eventually":
        window = _window(stream, a.get("after"), None)
        return {"ok": a["label"] in window, "detail": a["label"]}
    if kind == "final_mode":
        return {"ok": enactor.mode == a["mode"], "detail": enactor.mode}
    if kind == "fallback_count":
        return {"ok": enactor.fallback_entries == a["count"],
                "detail": enactor.fallback_entries}
    if kind == "coverage":
        after = a.get("after")
        cells = {c for _, c in trail}
        if after is not None:
            # restrict to arrivals after the pivot event's first occurrence
            pivot_tick = None
            for rec in enactor.log:
                if rec.label == after:
                    pivot_tick = rec.tick
                    break
            if pivot_tick is None:
                return {"ok": False, "detail": f"pivot {after} never occurred"}
            if a.get("include_before", True):
                cells = {c for _, c in trail}
            else:
                cells = {c for t, c in trail if t >= pivot_tick}
        missing = sorted(set(a["cells"]) - cells)
        return {"ok": not missing, "detail": missing[:8]}
    if kind == "tail_contains":
        frac = a.get("fraction", 3)
        tail = stream[-max(1, len(stream) // frac):]
        groups = a.get("groups") or [[l] for l in a.get("labels", ())]
        missing = [
            g for g in groups if sum(tail.count(l) for l in g) < 2
        ]
        return {"ok": not missing, "detail": missing}
    if kind == "never_pending":
        # `label` must never occur between `ask` and one of `answers`
        pending = False
        for ev in stream:
            if ev == a["ask"]:
                pending = True
            elif ev in set(a["answers"]):
                pending = False
            elif ev == a["label"] and pending:
                return {"ok": False, "detail": f"{a['label']} while {a['ask']} pending"}
        return {"ok": True, "detail": ""}
    if kind == "event_order":
        first, then = a["first"], a["then"]
        if first not in stream or then not in stream:
            return {"ok": False, "detail": "missing events"}
        return {"ok": stream.index(first) < stream.index(then), "detail": ""}
    raise ScenarioError(f"unknown assertion type {kind!r}")
