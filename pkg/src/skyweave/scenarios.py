"""Bundled scenario definitions: the validation flights at desk scale.

Each builder returns a Scenario whose mission/update documents are produced
by the catalog generators, with the world configuration and the scripted
timeline and assertions wired to match.
"""

from __future__ import annotations

from . import catalog
from .scenario import Scenario

__all__ = [
    "cover_degradation_scenario",
    "delivery_update_scenario",
    "patrol_change_scenario",
    "spurious_event_scenario",
    "all_scenarios",
]


def _rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def patrol_change_scenario(synth_ticks: int = 5) -> Scenario:
    """Patrol goal change on a 6x6 workspace: patrol the two bottom corner
    areas avoiding a central obstacle and the top-row no-fly zone; mid-flight
    the goal changes to the top corners with the bottom row now closed."""
    cols = 6

    def block(r0, c0, r1, c1):
        return [r * cols + c for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)]

    adj = catalog.adjacency(6, 6)
    regions = {
        "A1": block(0, 0, 0, 1),
        "B1": block(0, 4, 0, 5),
        "NoF1": block(2, 2, 3, 3),
        "NoF4": block(5, 0, 5, 5),
        "C1": block(5, 0, 5, 1),
        "D1": block(5, 4, 5, 5),
        "NoF2": block(1, 2, 1, 3),
        "NoF3": block(0, 0, 0, 5),
    }
    mission, update = catalog.scaled_patrol_docs(
        adj, 0,
        (regions["A1"], regions["B1"]), {"NoF1": regions["NoF1"], "NoF4": regions["NoF4"]},
        (regions["C1"], regions["D1"]), {"NoF2": regions["NoF2"], "NoF3": regions["NoF3"]},
        ("NoF1", "NoF2"),
    )
    at = lambda cells: [f"at.{c}" for c in cells]
    return Scenario(
        scenario_id="patrol-change",
        world={
            "workspace": _rect(0, 0, 60, 60),
            "cell_size": 10,
            "initial_xy": [5, 5],
            "vehicle": {"speed": 14.0, "start_flying": False},
            "modules": ["motion", {"type": "flightops", "climb_time": 0.3}],
        },
        mission=mission,
        timeline=[
            {"tick": 120, "action": "submit_update", "update": update,
             "synth_ticks": synth_ticks},
        ],
        assertions=[
            {"type": "never_event", "labels": at(regions["NoF1"] + regions["NoF4"]),
             "before": "stopOld"},
            {"type": "never_event", "labels": at(regions["NoF1"] + regions["NoF2"]),
             "after": "stopOld", "before": "startNew"},
            {"type": "never_event", "labels": at(regions["NoF2"] + regions["NoF3"]),
             "after": "startNew"},
            {"type": "eventually", "label": "startNew"},
            {"type": "tail_contains",
             "groups": [at(regions["C1"]), at(regions["D1"])]},
            {"type": "never_event",
             "labels": at(regions["A1"] + regions["B1"]), "after": "startNew"},
            {"type": "final_mode", "mode": "running"},
            {"type": "fallback_count", "count": 0},
        ],
        max_ticks=2200,
    )


def cover_degradation_scenario(rows: int = 8, cols: int = 8,
                               synth_ticks: int = 3) -> Scenario:
    """Iterator-based cover of region A (20 cells of an 8x8 grid); a scripted
    degradation halves the target to region B, swapping the region sensor."""
    order = list(range(rows * cols))
    a_cells = sorted(r * cols + c for r in range(5) for c in range(4))
    b_cells = sorted(r * cols + c for r in range(2) for c in range(4))
    in_a = [c in set(a_cells) for c in order]
    in_b = [c in set(b_cells) for c in order]
    return Scenario(
        scenario_id="cover-degradation",
        world={
            "workspace": _rect(0, 0, cols * 10, rows * 10),
            "cell_size": 10,
            "initial_xy": [5, 5],
            "vehicle": {"speed": 40.0, "start_flying": True},
            "modules": [
                {"type": "iterator", "order": order},
                "next_motion",
                {"type": "flightops", "climb_time": 0.3},
                {"type": "region_sensor", "name": "A", "cells": a_cells},
            ],
        },
        mission=catalog.cover_mission_doc(in_a),
        timeline=[
            {"tick": 240, "action": "upload_module",
             "module": {"type": "region_sensor", "name": "B", "cells": b_cells}},
            {"tick": 241, "action": "submit_update",
             "update": catalog.cover_update_doc(in_a, in_b),
             "synth_ticks": synth_ticks,
             "manifest": [{"bind": "sensor.B", "unbind": "sensor.A"}]},
        ],
        assertions=[
            {"type": "eventually", "label": "startNew"},
            {"type": "never_pending", "label": "reconfig",
             "ask": "is.next.inA?",
             "answers": ["yes.next.inA", "no.next.inA"]},
            {"type": "coverage", "cells": b_cells},
            {"type": "eventually", "label": "n.next", "after": "startNew"},
            {"type": "final_mode", "mode": "running"},
            {"type": "fallback_count", "count": 0},
        ],
        max_ticks=6000,
    )


def delivery_update_scenario(synth_ticks: int = 4) -> Scenario:
    """Delivery service rerouted mid-flight (the weight-limited update)."""
    return Scenario(
        scenario_id="delivery-update",
        world={
            "workspace": _rect(0, 0, 40, 30),
            "cell_size": 10,
            "initial_xy": [5, 5],
            "vehicle": {"speed": 18.0, "start_flying": True},
            "modules": ["motion", {"type": "flightops", "climb_time": 0.3},
                        {"type": "package", "index": 1},
                        {"type": "package", "index": 2},
                        {"type": "package", "index": 3}],
        },
        mission=catalog.delivery_doc(),
        timeline=[
            {"tick": 90, "action": "submit_update",
             "update": catalog.delivery_update_doc(True),
             "synth_ticks": synth_ticks},
        ],
        assertions=[
            {"type": "eventually", "label": "startNew"},
            {"type": "event_order", "first": "startNew", "then": "stopOld"},
            {"type": "eventually", "label": "release.2", "after": "startNew"},
            {"type": "final_mode", "mode": "running"},
            {"type": "fallback_count", "count": 0},
        ],
        max_ticks=2500,
    )


def spurious_event_scenario(inject_tick: int = 160) -> Scenario:
    """Patrol with one spurious arrival event injected: the fallback engages
    exactly once, flies home and lands."""
    return Scenario(
        scenario_id="spurious-fallback",
        world={
            "workspace": _rect(0, 0, 30, 20),
            "cell_size": 10,
            "initial_xy": [5, 5],
            "vehicle": {"speed": 12.0, "start_flying": False},
            "modules": ["motion", {"type": "flightops", "climb_time": 0.3}],
        },
        mission=catalog.patrol_2x3_doc(),
        timeline=[
            {"tick": inject_tick, "action": "inject_event", "label": "at.5"},
        ],
        assertions=[
            {"type": "fallback_count", "count": 1},
            {"type": "final_mode", "mode": "landed"},
            {"type": "eventually", "label": "land"},
        ],
        max_ticks=1200,
    )


def all_scenarios() -> dict[str, Scenario]:
    out = {}
    for build in (patrol_change_scenario, cover_degradation_scenario,
                  delivery_update_scenario, spurious_event_scenario):
        sc = build()
        out[sc.scenario_id] = sc
    return out
