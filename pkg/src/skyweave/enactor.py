"""Runtime execution of discrete controllers.

Single-threaded loop over the enactment state: producers enqueue
uncontrolled events into a FIFO, control messages (hot-swap requests) are
queued separately and applied only at tick boundaries.  A tick drains the
inbox through the controller, then applies at most one pending swap, then
emits at most one controlled command.  Unexpected events engage the preset
fallback controller (return to launch, land); a swap is atomic by
construction because it happens between two drains.

The structured event log is append-only, one record per event or command:
(tick index, direction in|out, label, controller state before/after).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .dcu import RECONFIG, UpdateSolution
from .lts import Lts
from .synthesis import Controller

__all__ = [
    "Enactor",
    "EnactorError",
    "FallbackPlan",
    "LogRecord",
    "StaleSolutionError",
    "UnknownModuleError",
    "build_fallback",
]


class EnactorError(Exception):
    pass


class StaleSolutionError(EnactorError):
    """The swap map has no entry for the current state: the solution was
    computed against a different controller version."""


class UnknownModuleError(EnactorError):
    """Reconfiguration binds a module that was never uploaded."""


@dataclass(frozen=True)
class LogRecord:
    tick: int
    direction: str  # "in" | "out" | "note"
    label: str
    before: int
    after: int

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "dir": self.direction, "label": self.label,
             "before": self.before, "after": self.after},
            separators=(",", ":"), sort_keys=True,
        )


@dataclass(frozen=True)
class FallbackPlan:
    """Preset return-to-launch-then-land controller.

    Closed under all uncontrolled events, so engaging it can never raise a
    second exception.  `landed_state` marks mission end.
    """

    controller: Controller
    landed_state: int


def build_fallback(launch_cell: int, uncontrolled: Iterable[str]) -> FallbackPlan:
    """0: command go.<launch>; 1: await arrival; 2: command land; 3: landed.
    Every uncontrolled event is absorbed at every state."""
    home = f"go.{launch_cell}"
    arrive = f"at.{launch_cell}"
    unc = sorted(set(uncontrolled))
    transitions = [(0, home, 1), (2, "land", 3)]
    for s in range(4):
        for ev in unc:
            if s == 1 and ev == arrive:
                transitions.append((1, ev, 2))
            else:
                transitions.append((s, ev, s))
    alphabet = set(unc) | {home, "land", arrive}
    lts = Lts(4, 0, alphabet, transitions)
    ctl = Controller(lts, {0: home, 1: None, 2: "land", 3: None}, (0, 1, 2, 3), (0,) * 4)
    return FallbackPlan(ctl, 3)


class Enactor:
    """Discrete control component: runs the controller, reacts to monitored
    events, performs atomic hot-swaps and coordinates module loading."""

    def __init__(self, controller: Controller, fallback: FallbackPlan,
                 uploaded_modules: Iterable[str] = ()):
        self.controller = controller
        self.current = controller.lts.initial
        self.inbox: deque[str] = deque()
        self.pending_swap: UpdateSolution | None = None
        self.bound_modules: frozenset[str] = frozenset()
        self.uploaded: set[str] = set(uploaded_modules)
        self.mode = "running"
        self.fallback = fallback
        self.log: list[LogRecord] = []
        self.tick_index = 0
        self.fallback_entries = 0
        self.pending_manifest: list[dict] | None = None

    # -- producers ---------------------------------------------------------

    def enqueue(self, ev: str) -> None:
        self.inbox.append(ev)

    def request_swap(self, sol: UpdateSolution) -> None:
        if self.pending_swap is not None:
            raise EnactorError("a swap is already pending")
        self.pending_swap = sol

    def upload_module(self, module_id: str) -> None:
        self.uploaded.add(module_id)

    def bind_initial_modules(self, ids: Iterable[str]) -> None:
        ids = frozenset(ids)
        self.uploaded |= ids
        self.bound_modules |= ids

    # -- the loop ----------------------------------------------------------

    def tick(self) -> list[str]:
        """Drain the inbox, apply a pending swap, emit one command."""
        self.tick_index += 1
        if self.mode == "landed":
            self.inbox.clear()
            return []
        while self.inbox:
            ev = self.inbox.popleft()
            self._consume(ev)
            if self.mode == "landed":
                self.inbox.clear()
                return []
        if self.pending_swap is not None and self.mode == "running":
            self.hotswap(self.pending_swap)
        return self._emit()

    def _consume(self, ev: str) -> None:
        succs = self.controller.lts.succ(self.current, ev)
        if not succs:
            self.on_unexpected(ev)
            return
        (after,) = succs
        self.log.append(LogRecord(self.tick_index, "in", ev, self.current, after))
        self.current = after
        if self.mode == "fallback" and self.current == self.fallback.landed_state:
            self.mode = "landed"
            self.log.append(LogRecord(self.tick_index, "note", "landed", after, after))

    def _emit(self) -> list[str]:
        sel = self.controller.selection.get(self.current)
        if sel is None:
            return []
        succs = self.controller.lts.succ(self.current, sel)
        if not succs:
            raise EnactorError(f"selection {sel!r} has no transition at {self.current}")
        (after,) = succs
        self.log.append(LogRecord(self.tick_index, "out", sel, self.current, after))
        before = self.current
        self.current = after
        if sel == RECONFIG and self.pending_manifest is not None:
            self.apply_reconfig(self.pending_manifest)
            self.pending_manifest = None
        if self.mode == "fallback" and self.current == self.fallback.landed_state:
            self.mode = "landed"
            self.log.append(LogRecord(self.tick_index, "note", "landed", after, after))
        return [sel]

    # -- operations --------------------------------------------------------

    def hotswap(self, sol: UpdateSolution) -> None:
        """Atomic controller replacement; resumes at f(current)."""
        if self.mode != "running":
            raise EnactorError(f"cannot swap in mode {self.mode}")
        target = sol.f.get(self.current)
        if target is None:
            raise StaleSolutionError(
                f"swap map has no entry for controller state {self.current}"
            )
        self.log.append(LogRecord(self.tick_index, "note", "hotSwap", self.current, target))
        self.controller = sol.new_controller
        self.current = target
        self.pending_swap = None
        self.pending_manifest = list(sol.reconfig_manifest) or None

    def on_unexpected(self, ev: str) -> None:
        """Engage the preset fallback; the offending event is logged with
        state context and the fallback absorbs everything thereafter."""
        if self.mode in ("fallback", "landed"):
            self.log.append(LogRecord(self.tick_index, "note", f"absorbed:{ev}",
                                       self.current, self.current))
            return
        self.log.append(LogRecord(self.tick_index, "note", f"fallback:{ev}",
                                   self.current, self.fallback.controller.lts.initial))
        self.mode = "fallback"
        self.fallback_entries += 1
        self.controller = self.fallback.controller
        self.current = self.fallback.controller.lts.initial
        self.pending_swap = None

    def apply_reconfig(self, manifest: list[dict]) -> None:
        """Bind/unbind hybrid modules atomically with the reconfig emission."""
        bound = set(self.bound_modules)
        for entry in manifest:
            bind = entry.get("bind")
            unbind = entry.get("unbind")
            if bind is not None:
                if bind not in self.uploaded:
                    raise UnknownModuleError(f"module {bind!r} was never uploaded")
                bound.add(bind)
            if unbind is not None:
                bound.discard(unbind)
        self.bound_modules = frozenset(bound)
        self.log.append(LogRecord(self.tick_index, "note",
                                   "reconfig:" + ",".join(sorted(bound)),
                                   self.current, self.current))

    # -- introspection -----------------------------------------------------

    def log_lines(self) -> list[str]:
        return [r.to_json() for r in self.log]
