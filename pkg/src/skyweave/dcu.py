"""Dynamic controller update: problem construction, solving and checking.

Given a running controller C for ⟨E, φ⟩, a reconfigurable environment
E ⇢g E' and a transition requirement Θ, build the update game whose
solution is the combined artifact C ⇢f,hotSwap C': before the uncontrolled
hotSwap the system behaves as C∥E (entirely adversarial here, because the
*old* controller is the one acting, so the update strategy must work from
every reachable state); after it the controllables are free, reconfig
switches E to E' through g, and stopOld/startNew may each occur once.

The goal conjoins: the old safety obligations checked only before stopOld,
Θ, the new safety armed from startNew, and the liveness rewrite
□◇HotSwap ⟹ □◇(OldStopped ∧ NewStarted ∧ Reconfigured) ∧ (startNew-armed
new recurrence goals), with the four distinguished fluents latching on
first occurrence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fltl import (
    Always,
    And,
    Conj,
    FluentDef,
    Gr1Liveness,
    Lit,
    Monitor,
    SafetyFormula,
    Var,
    arm_from,
    compile_safety,
)
from .lts import Alphabet, Lts, compose, interrupt, reachable
from .problems import alphabet_of_doc, conj_of
from .speclang import SpecDocument, UpdateDecl
from .synthesis import (
    Controller,
    ControlProblem,
    Verdict,
    build_arena,
    extract_controller,
    solve_control_problem,
    solve_gr1,
    verify_closed_loop,
)

__all__ = [
    "AmbiguousSwapStateError",
    "DcuProblem",
    "FreshnessViolationError",
    "HOT_SWAP",
    "PartialFError",
    "RECONFIG",
    "START_NEW",
    "STOP_OLD",
    "UnsupportedLivenessError",
    "UpdateError",
    "UpdateGoal",
    "UpdateSolution",
    "build_update_environment",
    "build_update_goal",
    "dcu_problem_from_doc",
    "gmap_from_doc",
    "solve_update",
    "verify_update",
]

HOT_SWAP = "hotSwap"
STOP_OLD = "stopOld"
START_NEW = "startNew"
RECONFIG = "reconfig"
_DISTINGUISHED = (HOT_SWAP, STOP_OLD, START_NEW, RECONFIG)
_LATCH_FLUENTS = {
    HOT_SWAP: "HotSwap",
    STOP_OLD: "OldStopped",
    START_NEW: "NewStarted",
    RECONFIG: "Reconfigured",
}


class UpdateError(Exception):
    pass


class FreshnessViolationError(UpdateError):
    """A distinguished update event already occurs in a model."""


class UnsupportedLivenessError(UpdateError):
    """New-mission liveness is not a pure recurrence conjunction."""


class AmbiguousSwapStateError(UpdateError):
    """The transition requirement tracks history the old controller state
    does not determine, so f is not a function of the controller state."""


class PartialFError(UpdateError):
    """Internal consistency failure: a reachable controller state has no
    hot-swap entry (bug trap, not a user error)."""


@dataclass(frozen=True)
class DcuProblem:
    current: Controller
    old_env: Lts
    new_env: Lts
    g_map: dict[int, tuple[int, ...]]
    fluents: tuple[FluentDef, ...]
    old_safety: SafetyFormula
    old_liveness: Gr1Liveness
    new_safety: SafetyFormula
    new_liveness: Gr1Liveness
    theta: SafetyFormula
    alphabet: Alphabet

    def __post_init__(self):
        for l, what in ((self.old_env, "old environment"), (self.new_env, "new environment"),
                        (self.current.lts, "controller")):
            clash = l.alphabet & set(_DISTINGUISHED)
            if clash:
                raise FreshnessViolationError(f"{what} already uses {sorted(clash)}")
        for d in self.fluents:
            if d.name in _LATCH_FLUENTS.values():
                raise FreshnessViolationError(f"fluent {d.name!r} is reserved for the update goal")
        if self.new_liveness.assumptions:
            raise UnsupportedLivenessError(
                "new-mission liveness must be a recurrence conjunction (no assumptions)"
            )


@dataclass(frozen=True)
class UpdateGoal:
    """The four conjuncts in solver form plus the GR(1) rewrite."""

    old_until_stop: SafetyFormula
    theta: SafetyFormula
    armed_new: SafetyFormula
    liveness: Gr1Liveness
    defs: tuple[FluentDef, ...]
    alphabet: Alphabet


@dataclass
class UpdateSolution:
    new_controller: Controller
    f: dict[int, int]
    combined: Controller
    update_env: Lts
    pre_env_states: frozenset[int]
    goal: UpdateGoal
    monitors: list[Monitor] = field(default_factory=list)
    state_valuations: tuple[frozenset[str], ...] = ()
    reconfig_manifest: tuple[dict, ...] = ()


def _with_id_provenance(l: Lts) -> Lts:
    return Lts(l.n_states, l.initial, l.alphabet, l.transitions,
               provenance=list(range(l.n_states)), state_names=l.state_names)


def build_update_environment(p: DcuProblem) -> tuple[Lts, frozenset[int]]:
    """E_u and its pre-hot-swap state set.

    Traces: a prefix of C∥E, one hotSwap (enabled at every prefix state),
    then free E behaviour with one reconfig switching to E' per g, with
    stopOld/startNew interleavable once each after the swap.
    """
    c = _with_id_provenance(p.current.lts)
    e = _with_id_provenance(p.old_env)
    e2 = _with_id_provenance(p.new_env)
    base = reachable(compose(c, e))
    continuation = interrupt(e, e2, RECONFIG, p.g_map, require_total=False)
    swap_map = {}
    for s in range(base.n_states):
        _c_id, e_id = base.provenance[s]
        swap_map[s] = e_id  # continuation pre-side states keep E's ids
    swapped = interrupt(base, continuation, HOT_SWAP, swap_map)
    stop_latch = Lts(3, 0, {HOT_SWAP, STOP_OLD}, [(0, HOT_SWAP, 1), (1, STOP_OLD, 2)])
    start_latch = Lts(3, 0, {HOT_SWAP, START_NEW}, [(0, HOT_SWAP, 1), (1, START_NEW, 2)])
    e_u = reachable(compose(compose(swapped, stop_latch), start_latch))
    pre = frozenset(
        s for s in range(e_u.n_states)
        if e_u.provenance[s][0][0][0] == "pre"
    )
    return e_u, pre


def build_update_goal(p: DcuProblem) -> UpdateGoal:
    base = p.alphabet
    alphabet = Alphabet(
        base.controlled | {STOP_OLD, START_NEW, RECONFIG},
        base.uncontrolled | {HOT_SWAP},
    )
    latches = tuple(
        FluentDef(name, frozenset({ev}), frozenset(), False)
        for ev, name in _LATCH_FLUENTS.items()
    )
    defs = p.fluents + latches
    armed = arm_from(p.new_safety, START_NEW, _LATCH_FLUENTS[START_NEW])
    switch_done = And(
        Var(_LATCH_FLUENTS[STOP_OLD]),
        Var(_LATCH_FLUENTS[START_NEW]),
        Var(_LATCH_FLUENTS[RECONFIG]),
    )
    guarantees = [switch_done]
    for g in p.new_liveness.guarantees:
        if g == Lit(True):
            continue
        guarantees.append(And(Var(_LATCH_FLUENTS[START_NEW]), g))
    liveness = Gr1Liveness(
        assumptions=(Var(_LATCH_FLUENTS[HOT_SWAP]),),
        guarantees=tuple(guarantees),
    )
    return UpdateGoal(p.old_safety, p.theta, armed, liveness, defs, alphabet)


def _update_monitors(goal: UpdateGoal) -> list[Monitor]:
    released_old = compile_safety(
        goal.old_until_stop, goal.defs, goal.alphabet, release_on=STOP_OLD
    )
    rest = compile_safety(Conj(goal.theta, goal.armed_new), goal.defs, goal.alphabet)
    return [released_old, rest]


def solve_update(p: DcuProblem) -> tuple[Verdict, UpdateSolution | None]:
    """Solve the update game and split its controller into C' and f."""
    e_u, pre = build_update_environment(p)
    goal = build_update_goal(p)
    monitors = _update_monitors(goal)
    arena = build_arena(e_u, goal.alphabet, goal.defs, monitors, goal.liveness,
                        adversarial_env=pre)
    verdict = solve_gr1(arena)
    if not verdict.realizable:
        return verdict, None
    c_u = verdict.controller

    # split at the hotSwap transitions: f maps the old controller's state to
    # the combined controller's landing state; C' is the post-swap part
    f_raw: dict[int, set[int]] = {}
    post_states: set[int] = set()
    pre_states: set[int] = set()
    for cs in range(c_u.lts.n_states):
        env_s = arena.env_state[c_u.arena_state[cs]]
        if env_s in pre:
            pre_states.add(cs)
        else:
            post_states.add(cs)
    for cs in sorted(pre_states):
        targets = c_u.lts.succ(cs, HOT_SWAP)
        if not targets:
            raise PartialFError(f"pre-swap state {cs} has no hotSwap transition")
        (tgt,) = targets
        env_s = arena.env_state[c_u.arena_state[cs]]
        c_id = e_u.provenance[env_s][0][0][1][0]
        f_raw.setdefault(c_id, set()).add(tgt)
    f: dict[int, int] = {}
    for c_id, targets in sorted(f_raw.items()):
        if len(targets) > 1:
            raise AmbiguousSwapStateError(
                f"controller state {c_id} reaches {len(targets)} distinct resumption "
                "states: the transition requirement tracks history the controller "
                "state does not determine"
            )
        (t,) = targets
        f[c_id] = t

    order = sorted(post_states)
    remap = {cs: i for i, cs in enumerate(order)}
    transitions = [
        (remap[s], ev, remap[t])
        for s, ev, t in c_u.lts.transitions
        if s in post_states and t in post_states
    ]
    initial_post = f.get(p.current.lts.initial)
    if initial_post is None:
        raise PartialFError("initial controller state missing from f")
    new_lts = Lts(
        len(order), remap[initial_post], c_u.lts.alphabet, transitions,
        provenance=[c_u.lts.provenance[s] for s in order],
    )
    new_controller = Controller(
        new_lts,
        {remap[s]: c_u.selection.get(s) for s in order},
        tuple(c_u.arena_state[s] for s in order),
        tuple(c_u.memory[s] for s in order),
    )
    f = {c_id: remap[t] for c_id, t in f.items()}
    valuations = tuple(
        arena.valuation[c_u.arena_state[cs]] for cs in range(c_u.lts.n_states)
    )
    sol = UpdateSolution(new_controller, f, c_u, e_u, pre, goal, monitors, valuations)
    return verdict, sol


def verify_update(sol: UpdateSolution, p: DcuProblem) -> Verdict:
    """Model-check the combined artifact against every update conjunct."""
    goal = sol.goal
    problem = ControlProblem(
        env=sol.update_env,
        alphabet=goal.alphabet,
        fluents=goal.defs,
        safety=Always(Lit(True)),
        liveness=goal.liveness,
    )
    return verify_closed_loop(
        sol.update_env, sol.combined, problem, monitors=sol.monitors
    )


# ---------------------------------------------------------------------------
# document plumbing


def gmap_from_doc(doc: SpecDocument, decl: UpdateDecl) -> dict[int, tuple[int, ...]]:
    """Product map over composed environment states from per-component maps."""
    old_env = doc.lts(decl.old_env)
    new_env = doc.lts(decl.new_env)
    old_comps = doc.components_of(decl.old_env)
    new_comps = doc.components_of(decl.new_env)
    pair: dict[str, tuple[str, dict[int, tuple[int, ...]] | None]] = {}
    for m in decl.maps:
        old_l, new_l = doc.lts(m.old), doc.lts(m.new)
        if m.identity:
            pair[m.old] = (m.new, None)
        else:
            entries: dict[int, tuple[int, ...]] = {}
            for src, tgts in m.entries:
                entries[old_l.state_by_name(src)] = tuple(
                    sorted(new_l.state_by_name(t) for t in tgts)
                )
            pair[m.old] = (m.new, entries)
    for comp in old_comps:
        if comp not in pair:
            if comp in new_comps:
                pair[comp] = (comp, None)  # shared component: identity
            else:
                raise UpdateError(f"component {comp!r} has no map into {decl.new_env}")
    new_order = {name: i for i, name in enumerate(new_comps)}
    src_order = [pair[c][0] for c in old_comps]
    if sorted(new_order) != sorted(src_order):
        raise UpdateError("component maps do not cover the new environment")

    def flatten(prov, k):
        out = []

        def rec(p, depth):
            if depth == 0:
                out.append(p)
                return
            rec(p[0], depth - 1)
            out.append(p[1])

        rec(prov, k - 1)
        return out

    new_index = {
        tuple(flatten(new_env.provenance[s], len(new_comps))): s
        for s in range(new_env.n_states)
    }
    g: dict[int, tuple[int, ...]] = {}
    for s in range(old_env.n_states):
        comps = flatten(old_env.provenance[s], len(old_comps))
        choices: list[tuple[tuple[str, int], ...]] = [()]
        ok = True
        per_comp_targets = []
        for name, cs in zip(old_comps, comps):
            new_name, entries = pair[name]
            if entries is None:
                tgts = (cs,)
            else:
                tgts = entries.get(cs)
                if tgts is None:
                    ok = False
                    break
            per_comp_targets.append((new_name, tgts))
        if not ok:
            continue
        combos = [[]]
        for new_name, tgts in per_comp_targets:
            combos = [c + [(new_name, t)] for c in combos for t in tgts]
        targets = []
        for combo in combos:
            by_name = dict(combo)
            flat = tuple(by_name[name] for name in new_comps)
            tid = new_index.get(flat)
            if tid is None:
                raise UpdateError(
                    f"g maps state {s} of {decl.old_env} to a state outside the "
                    f"reachable composition of {decl.new_env}"
                )
            targets.append(tid)
        g[s] = tuple(sorted(set(targets)))
    return g


def dcu_problem_from_doc(doc: SpecDocument, current: Controller | None = None) -> DcuProblem:
    """Build a DcuProblem; synthesizes the old controller when not supplied."""
    decl = doc.problem
    if not isinstance(decl, UpdateDecl):
        raise UpdateError("document does not declare an update problem")
    alphabet = alphabet_of_doc(doc)
    fluents = tuple(doc.fluents.values())
    old_liveness = doc.liveness[decl.old_liveness] if decl.old_liveness else Gr1Liveness()
    new_liveness = doc.liveness[decl.new_liveness] if decl.new_liveness else Gr1Liveness()
    old_env = doc.lts(decl.old_env)
    if current is None:
        old_problem = ControlProblem(
            env=old_env,
            alphabet=alphabet,
            fluents=fluents,
            safety=conj_of(doc, decl.old_safety),
            liveness=old_liveness,
        )
        v = solve_control_problem(old_problem)
        if not v.realizable:
            raise UpdateError("old mission itself is unrealizable")
        current = v.controller
    return DcuProblem(
        current=current,
        old_env=old_env,
        new_env=doc.lts(decl.new_env),
        g_map=gmap_from_doc(doc, decl),
        fluents=fluents,
        old_safety=conj_of(doc, decl.old_safety),
        old_liveness=old_liveness,
        new_safety=conj_of(doc, decl.new_safety),
        new_liveness=new_liveness,
        theta=conj_of(doc, decl.theta),
        alphabet=alphabet,
    )
