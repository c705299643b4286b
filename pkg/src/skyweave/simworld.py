"""Grid-discretized planar world with a simulated vehicle and hybrid modules.

The discretizer turns a polygonal workspace into a cell grid (membership by
cell-centre containment), a movement LTS with go/at command-event pairs
over 4-adjacency, location/region fluents and a coordinate map.  Hybrid
modules translate controlled commands into continuous effects and publish
uncontrolled events back; the world advances on a fixed-step clock, so runs
are deterministic under a fixed seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace

from .catalog import at_fluents, movement_process, region_fluent
from .fltl import FluentDef
from .lts import Lts
from .speclang import parse

__all__ = [
    "AmbiguousHandlerError",
    "DegenerateBoundsError",
    "Discretization",
    "FlightModule",
    "Grid",
    "HybridModule",
    "IteratorModule",
    "MotionModule",
    "NextMotionModule",
    "PackageModule",
    "PersonSensorModule",
    "RegionSensorModule",
    "SimError",
    "SpinModule",
    "UnhandledCommandError",
    "VehicleState",
    "World",
    "discretize",
    "point_in_polygon",
]


class SimError(Exception):
    pass


class DegenerateBoundsError(SimError):
    pass


class UnhandledCommandError(SimError):
    """No bound module handles the command; routes to the fallback."""


class AmbiguousHandlerError(SimError):
    pass


def point_in_polygon(pt: tuple[float, float], poly: list[tuple[float, float]]) -> bool:
    """Ray casting; boundary points count as inside on the lower-left rule."""
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = (x2 - x1) * (y - y1) / (y2 - y1) + x1
            if x < xin:
                inside = not inside
    return inside


@dataclass(frozen=True)
class Grid:
    """Row-major cell grid, possibly rotated, masked to a workspace."""

    origin: tuple[float, float]
    cell_size: float
    rows: int
    cols: int
    angle: float  # degrees
    cells: frozenset[int]
    regions: dict[str, frozenset[int]]

    def _axes(self):
        a = math.radians(self.angle)
        return (math.cos(a), math.sin(a)), (-math.sin(a), math.cos(a))

    def center(self, cell: int) -> tuple[float, float]:
        r, c = divmod(cell, self.cols)
        u = (c + 0.5) * self.cell_size
        v = (r + 0.5) * self.cell_size
        (ux, uy), (vx, vy) = self._axes()
        return (self.origin[0] + u * ux + v * vx, self.origin[1] + u * uy + v * vy)

    def cell_of(self, x: float, y: float) -> int | None:
        (ux, uy), (vx, vy) = self._axes()
        dx, dy = x - self.origin[0], y - self.origin[1]
        u = dx * ux + dy * uy
        v = dx * vx + dy * vy
        c = int(math.floor(u / self.cell_size))
        r = int(math.floor(v / self.cell_size))
        if 0 <= r < self.rows and 0 <= c < self.cols:
            cell = r * self.cols + c
            return cell if cell in self.cells else None
        return None

    def adjacency(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {c: [] for c in sorted(self.cells)}
        for cell in sorted(self.cells):
            r, c = divmod(cell, self.cols)
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < self.rows and 0 <= cc < self.cols:
                    n = rr * self.cols + cc
                    if n in self.cells:
                        out[cell].append(n)
        return out


@dataclass(frozen=True)
class Discretization:
    grid: Grid
    movement: Lts
    fluents: tuple[FluentDef, ...]
    fsl_fragments: tuple[str, ...]
    initial_cell: int


def discretize(
    bounds: list[tuple[float, float]],
    cell_size: float,
    angle: float = 0.0,
    regions: dict[str, list[tuple[float, float]]] | None = None,
    initial_xy: tuple[float, float] | None = None,
    process_name: str = "MOVE",
) -> Discretization:
    """Grid the workspace polygon; a cell belongs iff its centre is inside.

    Produces the movement process (go.i controlled / at.i uncontrolled with
    an in-flight state per leg), per-cell location fluents (true for the
    initial cell), one region fluent per named region, and the grid
    coordinate map."""
    if cell_size <= 0:
        raise DegenerateBoundsError("cell size must be positive")
    if len(bounds) < 3:
        raise DegenerateBoundsError("workspace polygon needs at least 3 vertices")
    a = math.radians(angle)
    ux, uy = math.cos(a), math.sin(a)
    vx, vy = -math.sin(a), math.cos(a)
    us = [(x * ux + y * uy) for x, y in bounds]
    vs = [(x * vx + y * vy) for x, y in bounds]
    # origin at the rotated bounding box corner, expressed back in world frame
    u0, v0 = min(us), min(vs)
    origin = (u0 * ux + v0 * vx, u0 * uy + v0 * vy)
    cols = max(1, math.ceil((max(us) - u0) / cell_size))
    rows = max(1, math.ceil((max(vs) - v0) / cell_size))
    probe = Grid(origin, cell_size, rows, cols, angle, frozenset(range(rows * cols)), {})
    cells = frozenset(
        c for c in range(rows * cols) if point_in_polygon(probe.center(c), bounds)
    )
    if not cells:
        raise DegenerateBoundsError("no cell centre falls inside the workspace")
    region_cells = {
        name: frozenset(c for c in cells if point_in_polygon(probe.center(c), poly))
        for name, poly in (regions or {}).items()
    }
    grid = Grid(origin, cell_size, rows, cols, angle, cells, region_cells)
    if initial_xy is None:
        initial = min(cells)
    else:
        initial = grid.cell_of(*initial_xy)
        if initial is None:
            raise DegenerateBoundsError("initial position outside the workspace")
    adj = grid.adjacency()
    fragments = [movement_process(process_name, adj, initial)]
    fragments.append(at_fluents(sorted(cells), initial, "patrol"))
    for name in sorted(region_cells):
        fragments.append(region_fluent(f"at{name}", sorted(region_cells[name]),
                                       sorted(cells), initial))
    doc = parse("\n".join(fragments))
    return Discretization(
        grid, doc.processes[process_name], tuple(doc.fluents.values()),
        tuple(fragments), initial,
    )


# ---------------------------------------------------------------------------
# vehicle


@dataclass
class VehicleState:
    pos: tuple[float, float]
    alt: float = 0.0
    speed: float = 5.0
    flying: bool = False
    target: int | None = None
    battery: float = 100.0

    def __post_init__(self):
        if self.speed < 0 or not (0 <= self.battery <= 100):
            raise SimError("invalid vehicle parameters")
        if self.target is not None and not self.flying:
            raise SimError("target set while grounded")


def vehicle_tick(
    v: VehicleState,
    dt: float,
    grid: Grid,
    drain_rate: float = 0.0,
    low_threshold: float = 20.0,
    jitter: float = 0.0,
    rng: random.Random | None = None,
) -> tuple[VehicleState, list[str]]:
    """Straight-line motion toward the target centre; arrival within
    cell_size/4 snaps to the centre and emits at.<cell>.  Battery drains
    linearly per airborne second; crossing the threshold emits low.bat once."""
    if dt <= 0:
        raise SimError("dt must be positive")
    events: list[str] = []
    pos = v.pos
    target = v.target
    if v.target is not None:
        tx, ty = grid.center(v.target)
        dx, dy = tx - pos[0], ty - pos[1]
        dist = math.hypot(dx, dy)
        step = v.speed * dt
        threshold = grid.cell_size / 4
        if dist <= max(step, threshold):
            pos = (tx, ty)
            events.append(f"at.{v.target}")
            target = None
        else:
            pos = (pos[0] + dx / dist * step, pos[1] + dy / dist * step)
            if jitter > 0 and rng is not None:
                bound = min(jitter, threshold / 2)
                pos = (pos[0] + rng.uniform(-bound, bound),
                       pos[1] + rng.uniform(-bound, bound))
    battery = v.battery
    if v.flying and drain_rate > 0:
        before = battery
        battery = max(0.0, battery - drain_rate * dt)
        if before > low_threshold >= battery:
            events.append("low.bat")
    return replace(v, pos=pos, target=target, battery=battery), events


# ---------------------------------------------------------------------------
# hybrid modules


class HybridModule:
    """Subscribes to controlled commands, publishes uncontrolled events."""

    module_id: str = ""
    handled: frozenset[str] = frozenset()
    produced: frozenset[str] = frozenset()

    def handle(self, cmd: str, world: "World") -> list[str]:
        raise NotImplementedError


class MotionModule(HybridModule):
    """Explicit-location motion: go.i sets the target cell."""

    def __init__(self, grid: Grid):
        self.module_id = "motion"
        self.handled = frozenset(f"go.{c}" for c in sorted(grid.cells))
        self.produced = frozenset(f"at.{c}" for c in sorted(grid.cells))

    def handle(self, cmd, world):
        cell = int(cmd.split(".")[1])
        world.vehicle.target = cell
        world.arrival_label = f"at.{cell}"
        return []


class NextMotionModule(HybridModule):
    """Iterator-based motion: go.next flies to the iterator cursor."""

    def __init__(self, iterator: "IteratorModule"):
        self.module_id = "motion.next"
        self.iterator = iterator
        self.handled = frozenset({"go.next"})
        self.produced = frozenset({"at.next"})

    def handle(self, cmd, world):
        cell = self.iterator.cursor
        if cell is None:
            raise SimError("go.next with no cursor")
        world.vehicle.target = cell
        world.arrival_label = "at.next"
        return []


class FlightModule(HybridModule):
    """takeOff/land control modes; takeOff completes after the climb time."""

    def __init__(self, climb_time: float = 2.0, cruise_alt: float = 10.0):
        self.module_id = "flightops"
        self.handled = frozenset({"takeOff", "land"})
        self.produced = frozenset({"takeOff.end"})
        self.climb_time = climb_time
        self.cruise_alt = cruise_alt

    def handle(self, cmd, world):
        if cmd == "takeOff":
            world.vehicle.flying = True
            world.vehicle.alt = self.cruise_alt
            world.schedule(self.climb_time, "takeOff.end")
        else:
            world.vehicle.target = None
            world.vehicle.flying = False
            world.vehicle.alt = 0.0
        return []


class HeightModule(HybridModule):
    """Altitude changes are telemetry-only; nothing in the kinematics
    depends on height."""

    def __init__(self, low: float = 1.5, high: float = 100.0):
        self.module_id = "height"
        self.handled = frozenset({"low.height", "high.height"})
        self.low, self.high = low, high

    def handle(self, cmd, world):
        world.vehicle.alt = self.low if cmd == "low.height" else self.high
        return []


class PackageModule(HybridModule):
    """Grab/release pair for one package type; strict alternation."""

    def __init__(self, index: int):
        self.module_id = f"package.{index}"
        self.index = index
        self.held = False
        self.handled = frozenset({f"grab.{index}", f"release.{index}"})

    def handle(self, cmd, world):
        grab = cmd.startswith("grab")
        if grab == self.held:
            raise SimError(f"package {self.index}: {cmd} out of order")
        self.held = grab
        return []


class SpinModule(HybridModule):
    def __init__(self, spin_time: float = 3.0):
        self.module_id = "spin"
        self.handled = frozenset({"do.spin"})
        self.produced = frozenset({"spin.ended"})
        self.spin_time = spin_time

    def handle(self, cmd, world):
        world.schedule(self.spin_time, "spin.ended")
        return []


class IteratorModule(HybridModule):
    """High-level iterator over a fixed cell order.

    has.next? answers y.next/n.next from the remaining suffix, remove.next
    drops the cursor, reset restores the full order."""

    def __init__(self, order: list[int]):
        self.module_id = "iterator"
        self.order = list(order)
        self.k = 0
        self.answer_pending = False
        self.handled = frozenset({"has.next?", "remove.next", "reset"})
        self.produced = frozenset({"y.next", "n.next"})

    @property
    def remaining(self) -> list[int]:
        return self.order[self.k :]

    @property
    def cursor(self) -> int | None:
        return self.order[self.k] if self.k < len(self.order) else None

    def handle(self, cmd, world):
        if cmd == "has.next?":
            return ["y.next" if self.k < len(self.order) else "n.next"]
        if cmd == "remove.next":
            if self.cursor is None:
                raise SimError("remove.next with no cursor")
            self.k += 1
            return []
        self.k = 0  # reset
        return []


class RegionSensorModule(HybridModule):
    """Answers is.next.in<Name>? by cursor membership in the region."""

    def __init__(self, name: str, region: frozenset[int], iterator: IteratorModule):
        self.module_id = f"sensor.{name}"
        self.name = name
        self.region = region
        self.iterator = iterator
        self.handled = frozenset({f"is.next.in{name}?"})
        self.produced = frozenset({f"yes.next.in{name}", f"no.next.in{name}"})

    def handle(self, cmd, world):
        cell = self.iterator.cursor
        if cell is None:
            raise SimError(f"{cmd} with no cursor")
        return [f"yes.next.in{self.name}" if cell in self.region else f"no.next.in{self.name}"]


class PersonSensorModule(HybridModule):
    """Scripted red-object detector: answers from a placement table."""

    def __init__(self, placement: frozenset[int]):
        self.module_id = "sensor.person"
        self.placement = placement
        self.handled = frozenset({"sense.person"})
        self.produced = frozenset({"found", "not.found"})

    def handle(self, cmd, world):
        cell = world.current_cell()
        return ["found" if cell in self.placement else "not.found"]


# ---------------------------------------------------------------------------
# the world


class World:
    """Fixed-step continuous world owning the vehicle and bound modules.

    Commands are dispatched to exactly one bound handler; produced events
    are returned to the caller (the scheduler forwards them to the
    enactor's FIFO)."""

    def __init__(self, grid: Grid, vehicle: VehicleState, seed: int = 0,
                 drain_rate: float = 0.0, low_threshold: float = 20.0,
                 jitter: float = 0.0, emit_low_battery: bool = False):
        self.grid = grid
        self.vehicle = vehicle
        self.time = 0.0
        self.rng = random.Random(seed)
        self.drain_rate = drain_rate
        self.low_threshold = low_threshold
        self.jitter = jitter
        self.emit_low_battery = emit_low_battery
        self.modules: dict[str, HybridModule] = {}
        self.bound: list[str] = []
        self.arrival_label: str | None = None
        self._schedule: list[tuple[float, int, str]] = []
        self._schedule_seq = 0

    # module lifecycle
    def register(self, module: HybridModule) -> None:
        self.modules[module.module_id] = module

    def bind(self, module_id: str) -> None:
        if module_id not in self.modules:
            raise SimError(f"module {module_id!r} not uploaded")
        mod = self.modules[module_id]
        for other_id in self.bound:
            other = self.modules[other_id]
            if mod.handled & other.handled or mod.produced & other.produced:
                raise AmbiguousHandlerError(
                    f"module {module_id!r} overlaps {other_id!r}"
                )
        self.bound.append(module_id)

    def unbind(self, module_id: str) -> None:
        if module_id in self.bound:
            self.bound.remove(module_id)

    def apply_binding(self, bound_ids) -> None:
        """Align the bound set with the enactor's reconfiguration outcome."""
        for mid in list(self.bound):
            if mid not in bound_ids:
                self.unbind(mid)
        for mid in sorted(bound_ids):
            if mid not in self.bound:
                self.bind(mid)

    def current_cell(self) -> int | None:
        return self.grid.cell_of(*self.vehicle.pos)

    def schedule(self, delay: float, label: str) -> None:
        self._schedule.append((self.time + delay, self._schedule_seq, label))
        self._schedule_seq += 1
        self._schedule.sort()

    def dispatch(self, cmd: str) -> list[str]:
        """Route a controlled command to its unique bound handler."""
        handlers = [self.modules[m] for m in self.bound if cmd in self.modules[m].handled]
        if not handlers:
            raise UnhandledCommandError(f"no bound module handles {cmd!r}")
        if len(handlers) > 1:
            raise AmbiguousHandlerError(f"{len(handlers)} modules handle {cmd!r}")
        return handlers[0].handle(cmd, self)

    def step(self, dt: float) -> list[str]:
        """Advance time: vehicle kinematics, then due scheduled events."""
        self.time += dt
        v2, raw = vehicle_tick(
            self.vehicle, dt, self.grid,
            self.drain_rate, self.low_threshold, self.jitter, self.rng,
        )
        self.vehicle.pos = v2.pos
        self.vehicle.battery = v2.battery
        self.vehicle.target = v2.target
        events: list[str] = []
        for ev in raw:
            if ev.startswith("at."):
                cell = int(ev.split(".")[1])
                here = self.current_cell()
                assert here == cell, f"arrival event at.{cell} away from cell {here}"
                label = self.arrival_label or ev
                self.arrival_label = None
                events.append(label)
            elif ev == "low.bat" and self.emit_low_battery:
                events.append(ev)
        while self._schedule and self._schedule[0][0] <= self.time + 1e-9:
            _, _, label = self._schedule.pop(0)
            events.append(label)
        return events

    def telemetry(self) -> dict:
        return {
            "t": round(self.time, 6),
            "x": round(self.vehicle.pos[0], 3),
            "y": round(self.vehicle.pos[1], 3),
            "alt": round(self.vehicle.alt, 2),
            "battery": round(self.vehicle.battery, 2),
            "flying": self.vehicle.flying,
            "cell": self.current_cell(),
            "target": self.vehicle.target,
            "bound": sorted(self.bound),
            "held": sorted(
                m.index for m in self.modules.values()
                if isinstance(m, PackageModule) and m.held and m.module_id in self.bound
            ),
        }
