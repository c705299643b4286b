"""Mission documents for the bundled scenarios.

Builders return specification-language text so every consumer (tests,
scripts, the scenario runner) exercises the parser.  Grids are row-major;
movement processes model a go/at command-event pair per directed adjacency
with an in-flight state in between, the standard explicit-location
abstraction.
"""

from __future__ import annotations

__all__ = [
    "DELIVERY_CELLS",
    "adjacency",
    "capabilities_process",
    "cover_mission_doc",
    "cover_update_doc",
    "delivery_doc",
    "delivery_update_doc",
    "example2_update_doc",
    "example3_update_doc",
    "iterator_env_process",
    "movement_process",
    "patrol_2x3_doc",
    "scaled_patrol_docs",
    "sr_update_doc",
]


def adjacency(rows: int, cols: int, cells: set[int] | None = None) -> dict[int, list[int]]:
    """4-neighbour adjacency for a row-major grid, optionally masked."""
    live = set(range(rows * cols)) if cells is None else set(cells)
    out: dict[int, list[int]] = {c: [] for c in sorted(live)}
    for c in sorted(live):
        r, k = divmod(c, cols)
        for rr, kk in ((r - 1, k), (r + 1, k), (r, k - 1), (r, k + 1)):
            if 0 <= rr < rows and 0 <= kk < cols and rr * cols + kk in live:
                out[c].append(rr * cols + kk)
    return out


def movement_process(name: str, adj: dict[int, list[int]], initial: int) -> str:
    """State equations for grid movement: cell Cn, in-flight Fn_m states."""

    def cell(c: int) -> str:
        return name if c == initial else f"C{c}"

    eqs = []
    order = [initial] + [c for c in sorted(adj) if c != initial]
    for c in order:
        branches = [f"go.{d} -> F{c}_{d}" for d in sorted(adj[c])]
        eqs.append(f"{cell(c)} = ({' | '.join(branches)})" if branches else f"{cell(c)} = STOP")
    for c in order:
        for d in sorted(adj[c]):
            eqs.append(f"F{c}_{d} = (at.{d} -> {cell(d)})")
    return ",\n".join(eqs) + "."


def capabilities_process(name: str, n_cells: int) -> str:
    """takeOff/takeOff.end/land control modes gating go/at pairs."""
    hi = n_cells - 1
    return (
        f"{name} = (takeOff -> TOFF),\n"
        f"TOFF = (takeOff.end -> FLY),\n"
        f"FLY = (go[i:0..{hi}] -> MOV | land -> {name}),\n"
        f"MOV = (at[j:0..{hi}] -> FLY)."
    )


def at_fluents(cells, initial: int, style: str = "patrol", n_cells: int | None = None) -> str:
    """at_i fluent declarations.

    patrol style clears on any other at event; delivery style clears on any
    go command (true exactly while parked at the cell).
    """
    n = n_cells if n_cells is not None else (max(cells) + 1)
    lines = []
    for c in cells:
        if style == "patrol":
            others = ", ".join(f"at.{k}" for k in cells if k != c)
            term = "{" + others + "}"
        else:
            term = f"{{go[0..{n - 1}]}}"
        init = ", true" if c == initial else ""
        lines.append(f"fluent at{c} = <{{at.{c}}}, {term}{init}>.")
    return "\n".join(lines)


def region_fluent(name: str, cells, all_cells, initial_cell: int = 0) -> str:
    ini = ", ".join(f"at.{c}" for c in cells)
    term = ", ".join(f"at.{c}" for c in all_cells if c not in cells)
    init = ", true" if initial_cell in cells else ""
    return f"fluent {name} = <{{{ini}}}, {{{term}}}{init}>."


THETA_EMPTY = "assert safety ThetaEmpty = [](!OldStopped || NewStarted)."


def patrol_2x3_doc() -> str:
    """The introductory patrol mission: 2x3 grid, visit cells 0 and 2
    infinitely often, never enter the bottom-row no-fly region {3,4,5}."""
    adj = adjacency(2, 3)
    cells = range(6)
    return "\n".join(
        [
            movement_process("MOVE", adj, 0),
            capabilities_process("CAP", 6),
            "||ENV = (MOVE || CAP).",
            at_fluents(cells, 0, "patrol"),
            region_fluent("atNoFlyOld", (3, 4, 5), cells),
            "fluent Land = <{land}, {takeOff}>.",
            "assert safety NoFly = [](!atNoFlyOld).",
            "assert safety NoLanding = [](!Land).",
            "liveness Patrol = gr1(|- []<>at0, []<>at2).",
            "controllable = {go[0..5], takeOff, land}.",
            "uncontrolled = {at[0..5], takeOff.end}.",
            "problem control { env = ENV. safety = {NoFly, NoLanding}. liveness = Patrol. }",
        ]
    )


def example3_update_doc(theta: str = "eq1") -> str:
    """Inconsistent patrol update on a 3x2 grid.

    Old: patrol {0,4}, right column {1,3,5} is no-fly.  New: patrol {3,5},
    left column {0,2,4} is no-fly.  theta is "empty" (unrealizable) or
    "eq1": once the old mission is dropped the vehicle stays at cells 4 or
    5 until the new one starts.
    """
    adj = adjacency(3, 2)
    cells = range(6)
    theta_name = "ThetaEmpty" if theta == "empty" else "ThetaBottom"
    theta_decl = (
        THETA_EMPTY
        if theta == "empty"
        else "assert safety ThetaBottom = [](OldStopped -> ((at4 || at5) W NewStarted))."
    )
    return "\n".join(
        [
            movement_process("MOVE", adj, 0),
            at_fluents(cells, 0, "patrol"),
            region_fluent("atNoFlyOld", (1, 3, 5), cells),
            region_fluent("atNoFlyNew", (0, 2, 4), cells),
            "assert safety OldNoFly = [](!atNoFlyOld).",
            "assert safety NewNoFly = [](!atNoFlyNew).",
            "liveness OldPatrol = gr1(|- []<>at0, []<>at4).",
            "liveness NewPatrol = gr1(|- []<>at3, []<>at5).",
            theta_decl,
            "controllable = {go[0..5]}.",
            "uncontrolled = {at[0..5]}.",
            "problem update {",
            "  oldEnv = MOVE. newEnv = MOVE.",
            "  oldSafety = {OldNoFly}. oldLiveness = OldPatrol.",
            "  newSafety = {NewNoFly}. newLiveness = NewPatrol.",
            f"  theta = {{{theta_name}}}.",
            "  map MOVE -> MOVE identity.",
            "}",
        ]
    )


# Delivery workspace: 3 rows x 4 cols, A=0, B=2, C=10.
DELIVERY_CELLS = {"A": 0, "B": 2, "C": 10}


def _delivery_base() -> list[str]:
    adj = adjacency(3, 4)
    parts = [movement_process("MOVE", adj, 0)]
    for i in (1, 2, 3):
        parts.append(f"P{i} = (grab.{i} -> H{i}), H{i} = (release.{i} -> P{i}).")
    parts.append("||ENV = (MOVE || P1 || P2 || P3).")
    parts.append(at_fluents(sorted(DELIVERY_CELLS.values()), 0, "delivery", 12))
    parts.append("fluent Moving = <{go[0..11]}, {at[0..11]}>.")
    for i in (1, 2, 3):
        parts.append(f"fluent with{i} = <{{grab.{i}}}, {{release.{i}}}>.")
    parts.append(
        "assert safety NonEmptyTrips = [](Moving -> (with1 || with2 || with3))."
    )
    parts.append("controllable = {go[0..11], grab[1..3], release[1..3]}.")
    parts.append("uncontrolled = {at[0..11]}.")
    return parts


def _delivery_rules(tag: str, routes: dict[int, tuple[int, int]]) -> list[str]:
    """Location rules phi (grab/release cells) and immediate-drop rules psi."""
    out = []
    for i, (src, dst) in routes.items():
        out.append(
            f"assert safety Route{tag}{i} = []((grab.{i} -> at{src}) && (release.{i} -> at{dst}))."
        )
        out.append(
            f"assert safety Drop{tag}{i} = []((with{i} && at{dst}) -> (!Moving W release.{i}))."
        )
    return out


OLD_ROUTES = {1: (0, 10), 2: (10, 0), 3: (2, 10)}
NEW_ROUTES = {1: (0, 10), 2: (10, 2), 3: (2, 0)}


def _old_rule_names() -> list[str]:
    return (
        ["NonEmptyTrips", "UnloadOrder"]
        + [f"Route{i}" for i in OLD_ROUTES]
        + [f"Drop{i}" for i in OLD_ROUTES]
    )


def delivery_doc() -> str:
    """Delivery service: continuously move p1 A->C, p2 C->A, p3 B->C with
    immediate drop-off at targets, p1 unloaded before p3, no empty trips."""
    parts = _delivery_base()
    parts += _delivery_rules("", OLD_ROUTES)
    parts.append("assert safety UnloadOrder = [](release.3 -> !with1).")
    parts.append("liveness Deliver = gr1(|- []<>release.1, []<>release.2, []<>release.3).")
    parts.append(
        "problem control { env = ENV. safety = {"
        + ", ".join(_old_rule_names())
        + "}. liveness = Deliver. }"
    )
    return "\n".join(parts)


def delivery_update_doc(weight_rule: bool = True) -> str:
    """Delivery update: p2 now goes to B, p3 reverses to B->A territory
    (C->... becomes 2->0), p3 may not be flown off the old depot C, and
    optionally the three-package weight limit is added."""
    parts = _delivery_base()
    parts += _delivery_rules("", OLD_ROUTES)
    parts.append("assert safety UnloadOrder = [](release.3 -> !with1).")
    parts += _delivery_rules("N", NEW_ROUTES)
    parts.append(
        "assert safety KeepP3OffC = []((with3 && at10) -> (!Moving W release.3))."
    )
    new_safety = [f"RouteN{i}" for i in NEW_ROUTES] + [f"DropN{i}" for i in NEW_ROUTES]
    new_safety += ["NonEmptyTrips", "KeepP3OffC"]
    if weight_rule:
        parts.append("assert safety Weight = [](!(with1 && with2 && with3)).")
        new_safety.append("Weight")
    parts.append("liveness Deliver = gr1(|- []<>release.1, []<>release.2, []<>release.3).")
    parts.append(THETA_EMPTY)
    parts += [
        "problem update {",
        "  oldEnv = ENV. newEnv = ENV.",
        f"  oldSafety = {{{', '.join(_old_rule_names())}}}. oldLiveness = Deliver.",
        f"  newSafety = {{{', '.join(new_safety)}}}. newLiveness = Deliver.",
        "  theta = {ThetaEmpty}.",
        "  map MOVE -> MOVE identity.",
        "  map P1 -> P1 identity.",
        "  map P2 -> P2 identity.",
        "  map P3 -> P3 identity.",
        "}",
    ]
    return "\n".join(parts)


# Workspace reconfiguration toy (simplified re-discretization figure):
# old cells 0..5 (2x3); new cells 6..11 plus shared cell 5; old cell 2
# splits into 10 and 11, old cell 5 is kept.
OLD_ADJ_EX2 = {0: [1, 3], 1: [0, 2, 4], 2: [1, 5], 3: [0, 4], 4: [1, 3, 5], 5: [2, 4]}
NEW_ADJ_EX2 = {5: [9, 11], 6: [7, 10], 7: [6, 8], 8: [7, 9, 10, 11], 9: [5, 8], 10: [6, 8, 11], 11: [5, 8, 10]}


def example2_update_doc() -> str:
    """Re-discretization with a new capability: patrol {0,4}; the update moves
    to the new workspace, binds the p4 gripper module and delivers p4 from
    cell 7 to cell 11 while visiting cell 6 infinitely often.  Reconfiguration
    is possible only at the shared cells 2 (non-deterministically into 10 or
    11) and 5."""
    all_cells = sorted(set(OLD_ADJ_EX2) | set(NEW_ADJ_EX2))
    at_decl = []
    for c in (0, 4, 6, 7, 11):
        others = ", ".join(f"at.{k}" for k in all_cells if k != c)
        init = ", true" if c == 0 else ""
        at_decl.append(f"fluent at{c} = <{{at.{c}}}, {{{others}}}{init}>.")
    return "\n".join(
        [
            movement_process("MOLD", OLD_ADJ_EX2, 0),
            movement_process("MNEW", NEW_ADJ_EX2, 5),
            "P4L = STOP + {grab.4, release.4}.",
            "P4 = (grab.4 -> H4), H4 = (release.4 -> P4).",
            "||EOLD = (MOLD || P4L).",
            "||ENEW = (MNEW || P4).",
            "\n".join(at_decl),
            "assert safety P4Route = []((grab.4 -> at7) && (release.4 -> at11)).",
            "liveness OldPatrol = gr1(|- []<>at0, []<>at4).",
            "liveness NewMission = gr1(|- []<>at6, []<>release.4).",
            THETA_EMPTY,
            "controllable = {go[0..11], grab.4, release.4}.",
            "uncontrolled = {at[0..11]}.",
            "problem update {",
            "  oldEnv = EOLD. newEnv = ENEW.",
            "  oldSafety = {}. oldLiveness = OldPatrol.",
            "  newSafety = {P4Route}. newLiveness = NewMission.",
            "  theta = {ThetaEmpty}.",
            "  map MOLD -> MNEW { C2 -> {C10, C11}, C5 -> MNEW }.",
            "  map P4L -> P4 { P4L -> P4 }.",
            "}",
        ]
    )


# ---------------------------------------------------------------------------
# iterator-based cover missions


def iterator_env_process(name: str, in_region: list[bool], sensor: str) -> str:
    """Concrete iterator/sensor/motion product over a fixed visiting order.

    The iterator walks the discretization in a fixed order, so its state is
    the suffix position k plus the protocol phase: ready (has.next?/reset),
    answer pending, cursor valid (sense/fly/remove), sense pending, moving.
    Region answers are determined by the order position.
    """
    n = len(in_region)
    ask = f"is.next.in{sensor}?"
    yes, no = f"yes.next.in{sensor}", f"no.next.in{sensor}"

    def ready(k: int) -> str:
        return name if k == 0 else f"K{k}R"

    eqs = []
    for k in range(n + 1):
        eqs.append(f"{ready(k)} = (has.next? -> K{k}H | reset -> {ready(0)})")
        if k < n:
            eqs.append(f"K{k}H = (y.next -> K{k}V)")
            eqs.append(
                f"K{k}V = ({ask} -> K{k}Q | go.next -> K{k}M | remove.next -> {ready(k + 1)})"
            )
            answer = yes if in_region[k] else no
            eqs.append(f"K{k}Q = ({answer} -> K{k}V)")
            eqs.append(f"K{k}M = (at.next -> K{k}V)")
        else:
            eqs.append(f"K{k}H = (n.next -> K{k}X)")
            eqs.append(f"K{k}X = (reset -> {ready(0)})")
    extra = f" + {{{yes}, {no}}}" if all(in_region) or not any(in_region) else ""
    return ",\n".join(eqs) + extra + "."


def _cover_rules(sensor: str, tag: str = "") -> list[str]:
    # cursor-context fluents clear at the next protocol step (has.next? or
    # reset), never at the event a rule checks them on
    yes, no = f"yes.next.in{sensor}", f"no.next.in{sensor}"
    clear = "reset, has.next?"
    return [
        f"fluent In{sensor} = <{{{yes}}}, {{{no}, {clear}}}>.",
        f"fluent Ans{sensor} = <{{{yes}, {no}}}, {{{clear}}}>.",
        f"fluent Sensing{sensor} = <{{is.next.in{sensor}?}}, {{{yes}, {no}}}>.",
        f"assert safety Remove{tag} = [](remove.next -> (Ans{sensor} && (!In{sensor} || VisitedCur))).",
        f"assert safety Go{tag} = [](go.next -> In{sensor}).",
    ]


def _cover_shared() -> list[str]:
    return [
        "fluent VisitedCur = <{at.next}, {reset, has.next?, go.next}>.",
        "liveness Cover = gr1(|- []<>n.next).",
    ]


def cover_mission_doc(in_a: list[bool]) -> str:
    """Cover region A via the iterator API: sense each cursor, visit the
    in-A ones, remove, and exhaust the iteration over and over."""
    parts = [iterator_env_process("ITER", in_a, "A")]
    parts += _cover_shared()
    parts += _cover_rules("A")
    parts += [
        "controllable = {has.next?, remove.next, reset, is.next.inA?, go.next}.",
        "uncontrolled = {y.next, n.next, yes.next.inA, no.next.inA, at.next}.",
        "problem control { env = ITER. safety = {Remove, Go}. liveness = Cover. }",
    ]
    return "\n".join(parts)


def cover_update_doc(in_a: list[bool], in_b: list[bool]) -> str:
    """Degradation update: swap sensor A for sensor B (covering the smaller
    region B) with the standard transition requirement plus "reconfigure only
    while sensor A is not mid-answer"."""
    parts = [
        iterator_env_process("ITER", in_a, "A"),
        iterator_env_process("ITERB", in_b, "B"),
    ]
    parts += _cover_shared()
    parts += _cover_rules("A")
    parts += _cover_rules("B", tag="N")
    parts += [
        THETA_EMPTY,
        "assert safety ThetaSense = [](reconfig -> !SensingA).",
        "controllable = {has.next?, remove.next, reset, is.next.inA?, is.next.inB?, go.next}.",
        "uncontrolled = {y.next, n.next, yes.next.inA, no.next.inA, yes.next.inB, no.next.inB, at.next}.",
        "problem update {",
        "  oldEnv = ITER. newEnv = ITERB.",
        "  oldSafety = {Remove, Go}. oldLiveness = Cover.",
        "  newSafety = {RemoveN, GoN}. newLiveness = Cover.",
        "  theta = {ThetaEmpty, ThetaSense}.",
        "  map ITER -> ITERB identity.",
        "}",
    ]
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# scaled patrol (goal change over a masked workspace) and search & rescue


def _named_region_fluents(regions: dict[str, list[int]], cells: list[int], initial: int) -> list[str]:
    return [
        region_fluent(f"at{name}", sorted(rc), cells, initial)
        for name, rc in sorted(regions.items())
    ]


def scaled_patrol_docs(
    adj: dict[int, list[int]],
    initial: int,
    old_patrol: tuple[list[int], list[int]],
    old_nofly: dict[str, list[int]],
    new_patrol: tuple[list[int], list[int]],
    new_nofly: dict[str, list[int]],
    obstacle_names: tuple[str, str],
) -> tuple[str, str]:
    """(mission doc, update doc) for a patrol goal change: patrol two areas
    avoiding the old no-fly zones, then switch to two new areas and new
    zones; between missions the local obstacles stay prohibited."""
    cells = sorted(adj)
    hi = max(cells)
    move = movement_process("MOVE", adj, initial)
    caps = capabilities_process("CAP", hi + 1)
    regions = {"A1": old_patrol[0], "B1": old_patrol[1], **old_nofly,
               "C1": new_patrol[0], "D1": new_patrol[1], **new_nofly}
    fluents = _named_region_fluents(regions, cells, initial)
    fluents.append("fluent Land = <{land}, {takeOff}>.")
    old_rules = [
        "assert safety NoLand = [](!Land).",
        "assert safety OldZones = [](" + " && ".join(f"!at{n}" for n in sorted(old_nofly)) + ").",
        "liveness OldPatrol = gr1(|- []<>atA1, []<>atB1).",
    ]
    new_rules = [
        "assert safety NewZones = [](" + " && ".join(f"!at{n}" for n in sorted(new_nofly)) + ").",
        "liveness NewPatrol = gr1(|- []<>atC1, []<>atD1).",
    ]
    o1, o2 = obstacle_names
    theta = (
        f"assert safety ThetaObstacles = [](OldStopped -> ((!at{o1} && !at{o2}) W NewStarted))."
    )
    partition = [
        f"controllable = {{go[0..{hi}], takeOff, land}}.",
        f"uncontrolled = {{at[0..{hi}], takeOff.end}}.",
    ]
    header = [move, caps, "||ENV = (MOVE || CAP)."] + fluents
    mission = "\n".join(
        header + old_rules + partition
        + ["problem control { env = ENV. safety = {NoLand, OldZones}. liveness = OldPatrol. }"]
    )
    update = "\n".join(
        header + old_rules + new_rules + [theta] + partition
        + [
            "problem update {",
            "  oldEnv = ENV. newEnv = ENV.",
            "  oldSafety = {NoLand, OldZones}. oldLiveness = OldPatrol.",
            "  newSafety = {NoLand, NewZones}. newLiveness = NewPatrol.",
            "  theta = {ThetaObstacles}.",
            "  map MOVE -> MOVE identity.",
            "  map CAP -> CAP identity.",
            "}",
        ]
    )
    return mission, update


def sr_update_doc(rows: int = 6, cols: int = 8,
                  region1: list[int] | None = None,
                  region2: list[int] | None = None) -> str:
    """Search & rescue update: the high-height patrol gains an image
    processing module; after the switch every arrival must be sensed before
    moving on, and between missions only the height commands are allowed."""
    adj = adjacency(rows, cols)
    cells = sorted(adj)
    hi = max(cells)
    region1 = region1 if region1 is not None else [0, 1]
    region2 = region2 if region2 is not None else [hi - 1, hi]
    move = movement_process("MOVE", adj, 0)
    caps = capabilities_process("CAP", hi + 1)
    height = "HCAP = (low.height -> LOWS), LOWS = (high.height -> HCAP)."
    sense_locked = "SENSEL = STOP + {sense.person, found, not.found}."
    sense = "SENSE = (sense.person -> WAITP), WAITP = (found -> SENSE | not.found -> SENSE)."
    fluents = [at_fluents(cells, 0, "patrol")]
    fluents += _named_region_fluents({"R1": region1, "R2": region2}, cells, 0)
    fluents += [
        "fluent Land = <{land}, {takeOff}>.",
        "fluent LowAlt = <{low.height}, {high.height}>.",
        f"fluent ImgProcessed = <{{found, not.found}}, {{at[0..{hi}]}}>.",
    ]
    controlled = (
        [f"go.{c}" for c in cells] + ["takeOff", "land", "sense.person", "low.height", "high.height"]
    )
    gamma = " || ".join(ev for ev in controlled if ev not in ("low.height", "high.height"))
    rules = [
        "assert safety NoLand = [](!Land).",
        "liveness Patrol = gr1(|- []<>atR1, []<>atR2).",
        f"assert safety SenseEachCell = forall i:0..{hi}, j:0..{hi} where i != j :: "
        "[](at[i] -> (!at[j] W ImgProcessed)).",
        "assert safety FlyLow = [](NewStarted -> LowAlt).",
        f"assert safety ThetaQuiet = []((OldStopped && !NewStarted) -> !({gamma})).",
    ]
    partition = [
        f"controllable = {{go[0..{hi}], takeOff, land, sense.person, low.height, high.height}}.",
        f"uncontrolled = {{at[0..{hi}], takeOff.end, found, not.found}}.",
    ]
    return "\n".join(
        [move, caps, height, sense_locked, sense,
         "||EOLD = (MOVE || CAP || HCAP || SENSEL).",
         "||ENEW = (MOVE || CAP || HCAP || SENSE)."]
        + fluents + rules + partition
        + [
            "problem update {",
            "  oldEnv = EOLD. newEnv = ENEW.",
            "  oldSafety = {NoLand}. oldLiveness = Patrol.",
            "  newSafety = {NoLand, SenseEachCell, FlyLow}. newLiveness = Patrol.",
            "  theta = {ThetaQuiet}.",
            "  map MOVE -> MOVE identity.",
            "  map CAP -> CAP identity.",
            "  map HCAP -> HCAP identity.",
            "  map SENSEL -> SENSE { SENSEL -> SENSE }.",
            "}",
        ]
    )


def example3_mission_doc() -> str:
    """The standalone old mission of the inconsistent-patrol pair: patrol
    cells 0 and 4 of the 3x2 grid, right column is no-fly."""
    adj = adjacency(3, 2)
    cells = range(6)
    return "\n".join(
        [
            movement_process("MOVE", adj, 0),
            at_fluents(cells, 0, "patrol"),
            region_fluent("atNoFlyOld", (1, 3, 5), cells),
            "assert safety OldNoFly = [](!atNoFlyOld).",
            "liveness OldPatrol = gr1(|- []<>at0, []<>at4).",
            "controllable = {go[0..5]}.",
            "uncontrolled = {at[0..5]}.",
            "problem control { env = MOVE. safety = {OldNoFly}. liveness = OldPatrol. }",
        ]
    )
