"""Control-problem arenas, GR(1) game solving and closed-loop checking.

The arena is the synchronous product of the environment with one or more
safety monitors; its states carry fluent valuations so liveness sides
become state sets.  Solving uses the rank-based generalized-reactivity(1)
fixpoint adapted to event-based games: the controller may offer at most
one controlled event on top of the always-enabled uncontrolled ones, and
the adversary schedules which enabled event fires.

Controllable predecessor: a state can be forced into S in one step iff all
its uncontrolled successors lie in S and either some uncontrolled event is
enabled (the controller may idle) or some controlled successor lies in S.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fltl import (
    Always,
    BoolExpr,
    Conj,
    FluentDef,
    Gr1Liveness,
    Lit,
    Monitor,
    SafetyFormula,
    compile_safety,
    event_fluent,
)
from .lts import Alphabet, Lts, compose

__all__ = [
    "Controller",
    "ControlProblem",
    "GameArena",
    "NondeterministicArenaError",
    "SynthesisError",
    "Verdict",
    "build_arena",
    "controller_table",
    "extract_controller",
    "load_controller_table",
    "problem_arena",
    "solve_control_problem",
    "solve_gr1",
    "verify_closed_loop",
]


class SynthesisError(Exception):
    pass


class NondeterministicArenaError(SynthesisError):
    """Two successors for one uncontrolled (state, event) pair."""


@dataclass(frozen=True)
class ControlProblem:
    """⟨E, φ, L⟩ with fluent context: environment, alphabet partition,
    fluent definitions, safety formula and GR(1) liveness."""

    env: Lts
    alphabet: Alphabet
    fluents: tuple[FluentDef, ...]
    safety: SafetyFormula
    liveness: Gr1Liveness

    def __post_init__(self):
        object.__setattr__(self, "fluents", tuple(self.fluents))
        extra = self.env.alphabet - self.alphabet.events
        if extra:
            raise SynthesisError(f"environment events outside the partition: {sorted(extra)}")


class GameArena:
    """Explicit product game.

    Per state: `unc[s]`/`ctl[s]` are (event, successor) move lists; moves on
    a controlled event with several successors are kept in `ctl_excluded`
    (they exist in the model but the controller cannot track their outcome,
    so it never selects them).  `adversarial[s]` marks states where even
    controlled events are scheduled by the adversary (the pre-hot-swap
    region of update games).
    """

    def __init__(self, n, initial, events, unc, ctl, ctl_excluded, err, valuation,
                 goal_sets, assumption_sets, env_state, declared, provenance):
        self.n = n
        self.initial = initial
        self.events = events
        self.unc = unc
        self.ctl = ctl
        self.ctl_excluded = ctl_excluded
        self.err = frozenset(err)
        self.valuation = valuation
        self.goal_sets = [frozenset(g) for g in goal_sets]
        self.assumption_sets = [frozenset(a) for a in assumption_sets]
        self.env_state = env_state
        self.declared = declared
        self.provenance = provenance

    def moves(self, s: int) -> list[tuple[str, int]]:
        return list(self.unc[s]) + list(self.ctl[s]) + list(self.ctl_excluded[s])


def build_arena(
    env: Lts,
    alphabet: Alphabet,
    defs: tuple[FluentDef, ...],
    monitors: list[Monitor],
    liveness: Gr1Liveness,
    adversarial_env: frozenset[int] = frozenset(),
) -> GameArena:
    """Synchronous product of env and monitors, stopped at monitor ERROR.

    The game is over the environment's traces: partition events outside the
    environment's scope never occur.  `adversarial_env` lists env states
    whose controlled moves the adversary schedules.
    """
    events = sorted(alphabet.events)
    declared = frozenset(d.name for d in defs)
    live_names = liveness.names()
    materialized = tuple(
        event_fluent(n, alphabet.events) for n in sorted(live_names - declared)
        if n in alphabet.events
    )
    unknown = live_names - declared - {d.name for d in materialized}
    if unknown:
        raise SynthesisError(f"liveness references unknown atoms: {sorted(unknown)}")
    all_defs = tuple(defs) + materialized
    tracker = compile_safety(
        Always(Lit(True)), all_defs, alphabet, track=sorted(live_names)
    )
    mons = list(monitors) + [tracker]
    all_declared = frozenset(d.name for d in all_defs)

    start = (env.initial, tuple(m.lts.initial for m in mons))
    index = {start: 0}
    order = [start]
    unc: list[tuple[tuple[str, int], ...]] = []
    ctl: list[tuple[tuple[str, int], ...]] = []
    ctl_ex: list[tuple[tuple[str, int], ...]] = []
    err: set[int] = set()
    frontier = [0]
    while frontier:
        sid = frontier.pop()
        while len(unc) <= sid:
            unc.append(())
            ctl.append(())
            ctl_ex.append(())
        e_s, m_s = order[sid]
        if any(ms == m.error_state for ms, m in zip(m_s, mons)):
            err.add(sid)
            continue
        row_unc: list[tuple[str, int]] = []
        row_ctl: list[tuple[str, int]] = []
        row_ex: list[tuple[str, int]] = []
        for ev in events:
            if ev not in env.alphabet:
                continue
            env_succs = env.succ(e_s, ev)
            if not env_succs:
                continue
            m_next = []
            for ms, m in zip(m_s, mons):
                (t,) = m.lts.succ(ms, ev)
                m_next.append(t)
            m_next = tuple(m_next)
            targets = []
            for e_t in env_succs:
                key = (e_t, m_next)
                tid = index.get(key)
                if tid is None:
                    tid = index[key] = len(order)
                    order.append(key)
                    frontier.append(tid)
                targets.append(tid)
            controlled = alphabet.is_controlled(ev)
            if len(targets) > 1:
                # a controlled event with several outcomes stays in the model
                # but cannot be selected (outcome untrackable); nondeterminism
                # the adversary schedules is rejected outright
                if not controlled or e_s in adversarial_env:
                    raise NondeterministicArenaError(
                        f"event {ev!r} has {len(targets)} adversarial successors at env state {e_s}"
                    )
                row_ex += [(ev, t) for t in targets]
            elif controlled and e_s not in adversarial_env:
                row_ctl.append((ev, targets[0]))
            else:
                row_unc.append((ev, targets[0]))
        while len(unc) <= sid:
            unc.append(())
            ctl.append(())
            ctl_ex.append(())
        unc[sid] = tuple(row_unc)
        ctl[sid] = tuple(row_ctl)
        ctl_ex[sid] = tuple(row_ex)
    n = len(order)
    while len(unc) < n:
        unc.append(())
        ctl.append(())
        ctl_ex.append(())

    valuation = []
    for e_s, m_s in order:
        true_set: set[str] = set()
        for ms, m in zip(m_s, mons):
            true_set |= m.valuations[ms]
        valuation.append(frozenset(true_set))

    def eval_set(exprs: tuple[BoolExpr, ...]) -> list[set[int]]:
        sets = []
        for e in exprs:
            sets.append(
                {
                    s
                    for s in range(n)
                    if s not in err and e.eval(valuation[s], None, all_declared)
                }
            )
        return sets

    guarantees = liveness.guarantees if liveness.guarantees else (Lit(True),)
    goal_sets = eval_set(guarantees)
    assumption_sets = eval_set(liveness.assumptions)
    env_state = tuple(e for e, _ in order)
    return GameArena(
        n, 0, tuple(events), [tuple(r) for r in unc], [tuple(r) for r in ctl],
        [tuple(r) for r in ctl_ex], err, valuation, goal_sets, assumption_sets,
        env_state, all_declared, tuple(order),
    )


def problem_arena(p: ControlProblem, adversarial_env: frozenset[int] = frozenset()) -> GameArena:
    mon = compile_safety(p.safety, p.fluents, p.alphabet)
    return build_arena(p.env, p.alphabet, p.fluents, [mon], p.liveness, adversarial_env)


# ---------------------------------------------------------------------------
# solving


@dataclass
class Controller:
    """Extracted winning strategy as an LTS.

    `selection[s]` is the single controlled event offered at state s (None
    to idle); all enabled uncontrolled events are always allowed.  State
    provenance is (arena state, guarantee-memory index).
    """

    lts: Lts
    selection: dict[int, str | None]
    arena_state: tuple[int, ...]
    memory: tuple[int, ...]


@dataclass
class Verdict:
    realizable: bool
    controller: Controller | None = None
    witness: list[str] | None = None
    detail: str = ""

    def __post_init__(self):
        if self.realizable and self.controller is None and self.detail != "verified":
            raise SynthesisError("realizable verdict without controller")


class _Solution:
    def __init__(self, Z, per_goal):
        self.Z = Z
        self.per_goal = per_goal  # per j: dict s -> (case, witness, rank)


def _feasible(s, S, unc, ctl, has_unc):
    return all(t in S for _, t in unc[s]) and (
        has_unc[s] or any(t in S for _, t in ctl[s])
    )


def _ctl_witness(s, S, ctl, rank=None):
    best = None
    for ev, t in ctl[s]:
        if t in S:
            key = (rank.get(t, 0) if rank is not None else 0, ev)
            if best is None or key < best[0]:
                best = (key, ev)
    return best[1] if best else None


def solve_gr1(arena: GameArena) -> Verdict:
    """Rank-based GR(1) fixpoint; realizable iff the initial state is won."""
    n = arena.n
    unc, ctl = arena.unc, arena.ctl
    has_unc = [bool(unc[s]) for s in range(n)]
    pred_unc: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    pred_ctl: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    for s in range(n):
        for ev, t in unc[s]:
            pred_unc[t].append((s, ev))
        for ev, t in ctl[s]:
            pred_ctl[t].append((s, ev))
    for t in range(n):
        pred_unc[t].sort(key=lambda p: (p[1], p[0]))
        pred_ctl[t].sort(key=lambda p: (p[1], p[0]))

    goal_sets = arena.goal_sets if arena.goal_sets else [frozenset(range(n)) - arena.err]
    assumptions = arena.assumption_sets  # may be empty: antecedent ⊤

    def mu_Y(j: int, Z: set[int], record: bool):
        """μY over guarantee j: attractor growth alternating with
        assumption-stay closures.  Optionally records strategy cases."""
        target = {s for s in goal_sets[j] if _feasible(s, Z, unc, ctl, has_unc)}
        Y: set[int] = set()
        info: dict[int, tuple] = {}
        rank: dict[int, int] = {}
        counter = 0

        def grow(seeds):
            nonlocal counter
            cnt = [0] * n
            for s in range(n):
                if s in Y:
                    continue
                cnt[s] = sum(1 for _, t in unc[s] if t not in Y)
            queue: list[int] = []

            def add(s, case, witness):
                nonlocal counter
                Y.add(s)
                if record and s not in info:
                    info[s] = (case, witness)
                    rank[s] = counter
                counter += 1
                queue.append(s)

            for s in sorted(seeds):
                if s not in Y:
                    add(s, "goal", None)
            # states already eligible against the current Y
            for s in range(n):
                if s in Y or s in arena.err:
                    continue
                if cnt[s] == 0 and has_unc[s]:
                    add(s, "attr", None)
                elif not has_unc[s]:
                    w = _ctl_witness(s, Y, ctl, rank)
                    if w is not None:
                        add(s, "attr", w)
            qi = 0
            while qi < len(queue):
                t = queue[qi]
                qi += 1
                for s, ev in pred_unc[t]:
                    if s in Y or s in arena.err:
                        continue
                    cnt[s] -= 1
                    if cnt[s] == 0 and has_unc[s]:
                        add(s, "attr", None)
                for s, ev in pred_ctl[t]:
                    if s in Y or s in arena.err or has_unc[s]:
                        continue
                    add(s, "attr", ev)

        def stay(i: int, A: frozenset[int]) -> set[int]:
            """νX. Y ∪ (¬A ∧ CPre(X)); returns the X∖Y states."""
            cand = {s for s in range(n) if s not in Y and s not in A and s not in arena.err}
            X = Y | cand
            bad: list[int] = []
            cnt_bad = {s: sum(1 for _, t in unc[s] if t not in X) for s in cand}
            ok_ctl = {s: sum(1 for _, t in ctl[s] if t in X) for s in cand}
            for s in cand:
                if cnt_bad[s] or not (has_unc[s] or ok_ctl[s]):
                    bad.append(s)
            alive = set(cand)
            while bad:
                s = bad.pop()
                if s not in alive:
                    continue
                alive.discard(s)
                X.discard(s)
                for p, _ in pred_unc[s]:
                    if p in alive:
                        cnt_bad[p] += 1
                        if cnt_bad[p] == 1:
                            bad.append(p)
                for p, _ in pred_ctl[s]:
                    if p in alive:
                        ok_ctl[p] -= 1
                        if not has_unc[p] and ok_ctl[p] == 0:
                            bad.append(p)
            return alive

        grow(target)
        while True:
            grew = False
            for i, A in enumerate(assumptions):
                extra = stay(i, A)
                if extra:
                    grew = True
                    for s in sorted(extra):
                        if record and s not in info:
                            if has_unc[s]:
                                info[s] = ("stay", (i, None))
                            else:
                                info[s] = ("stay", (i, _ctl_witness(s, Y | extra, ctl, rank)))
                            rank[s] = counter
                    Y |= extra
                    grow(set())
            if not grew:
                break
        if record:
            for s in target:
                w = None if has_unc[s] else _ctl_witness(s, Z, ctl, rank)
                info[s] = ("goal", w)
        return Y, info, rank

    m = len(goal_sets)
    Z = {s for s in range(n) if s not in arena.err}
    guard = 0
    while True:
        guard += 1
        if guard > n * m + 2:
            raise SynthesisError("fixpoint failed to converge")
        changed = False
        for j in range(m):
            Y, _, _ = mu_Y(j, Z, record=False)
            Ynew = Y & Z
            # the winning-region chain is monotone non-increasing
            assert Ynew <= Z
            if Ynew != Z:
                changed = True
            Z = Ynew
        if not changed:
            break

    if arena.initial not in Z:
        return Verdict(False, witness=_unrealizable_witness(arena, Z), detail="initial state not winning")

    per_goal = []
    for j in range(m):
        Y, info, rank = mu_Y(j, Z, record=True)
        assert Z <= Y
        per_goal.append((info, rank))
    ctrl = extract_controller(arena, _Solution(Z, per_goal))
    return Verdict(True, controller=ctrl)


def _unrealizable_witness(arena: GameArena, Z: set[int]) -> list[str]:
    """Best-effort diagnostic: a path from the initial state staying outside
    the winning region, ending at an error/dead state when one is found."""
    seen = {arena.initial}
    parent: dict[int, tuple[int, str]] = {}
    queue = [arena.initial]
    goal = None
    while queue:
        s = queue.pop(0)
        dead = s in arena.err or not (arena.unc[s] or arena.ctl[s] or arena.ctl_excluded[s])
        if dead:
            goal = s
            break
        for ev, t in arena.moves(s):
            if t not in seen and t not in Z:
                seen.add(t)
                parent[t] = (s, ev)
                queue.append(t)
    if goal is None:
        return []
    path: list[str] = []
    cur = goal
    while cur != arena.initial:
        cur, ev = parent[cur]
        path.append(ev)
    return list(reversed(path))


def extract_controller(arena: GameArena, sol: _Solution) -> Controller:
    """Winning strategy with guarantee-cycling memory.

    At a goal-j state the controller plays its into-Z witness and the memory
    advances to the next guarantee; elsewhere it follows the recorded
    attractor/stay move for the current memory.
    """
    m = len(sol.per_goal)
    index: dict[tuple[int, int], int] = {}
    order: list[tuple[int, int]] = []
    selection: dict[int, str | None] = {}
    transitions: list[tuple[int, str, int]] = []

    def sid(key: tuple[int, int]) -> int:
        if key not in index:
            index[key] = len(order)
            order.append(key)
            pending.append(key)
        return index[key]

    pending: list[tuple[int, int]] = []
    start = (arena.initial, 0)
    sid(start)
    while pending:
        s, j = key = pending.pop()
        cid = index[key]
        info, _rank = sol.per_goal[j]
        case, witness = info[s]
        j_next = (j + 1) % m if case == "goal" else j
        if case == "stay":
            _i, move = witness
        else:
            move = witness
        selection[cid] = move
        for ev, t in arena.unc[s]:
            transitions.append((cid, ev, sid((t, j_next))))
        if move is not None:
            succ = dict(arena.ctl[s]).get(move)
            if succ is None:
                raise SynthesisError(f"strategy move {move!r} not available at arena state {s}")
            transitions.append((cid, move, sid((succ, j_next))))
    lts = Lts(
        len(order), 0, set(arena.events), transitions,
        provenance=[(s, j) for s, j in order],
    )
    return Controller(
        lts,
        selection,
        tuple(s for s, _ in order),
        tuple(j for _, j in order),
    )


def solve_control_problem(p: ControlProblem) -> Verdict:
    return solve_gr1(problem_arena(p))


# ---------------------------------------------------------------------------
# closed-loop verification


def _tarjan_sccs(n: int, succ: list[list[int]]) -> list[list[int]]:
    """Iterative Tarjan; components in deterministic order."""
    indexv = [0] * n
    low = [0] * n
    onstack = [False] * n
    comp: list[list[int]] = []
    counter = [1]
    stack: list[int] = []
    for root in range(n):
        if indexv[root]:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                indexv[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                onstack[v] = True
            advanced = False
            for k in range(pi, len(succ[v])):
                w = succ[v][k]
                if not indexv[w]:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if onstack[w]:
                    low[v] = min(low[v], indexv[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == indexv[v]:
                c = []
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    c.append(w)
                    if w == v:
                        break
                comp.append(sorted(c))
    return comp


def verify_closed_loop(
    env: Lts, c: Controller, p: ControlProblem, monitors: list[Monitor] | None = None
) -> Verdict:
    """Model-check compose(env, controller): no monitor error, no deadlock,
    legality for uncontrolled events, and the GR(1) condition via cycle
    analysis: for each guarantee, the reachable subgraph without that
    guarantee's states must contain no cycle meeting every assumption set.

    `monitors` overrides the monitor compiled from p.safety (the update
    checker passes goal monitors with release semantics)."""
    closed = compose(env, c.lts)
    if monitors is None:
        monitors = [compile_safety(p.safety, p.fluents, p.alphabet)]
    try:
        arena = build_arena(closed, p.alphabet, p.fluents, monitors, p.liveness)
    except NondeterministicArenaError as e:
        return Verdict(False, witness=None, detail=f"closed loop nondeterministic: {e}")

    if arena.err:
        tr = _path_to(arena, arena.err)
        return Verdict(False, witness=tr, detail="safety violation reachable")

    dead = [
        s for s in range(arena.n)
        if not (arena.unc[s] or arena.ctl[s] or arena.ctl_excluded[s])
    ]
    if dead:
        return Verdict(False, witness=_path_to(arena, set(dead)), detail="deadlock reachable")

    # legality: uncontrolled events enabled in env stay enabled in the loop
    env_by_prov = {prov: i for i, prov in enumerate(env.provenance)}
    for s in range(arena.n):
        closed_state = arena.env_state[s]
        env_raw = env_by_prov[closed.provenance[closed_state][0]]
        enabled = {ev for ev, _ in arena.moves(s)}
        for ev in sorted(p.alphabet.uncontrolled):
            in_env = ev in env.alphabet and bool(env.succ(env_raw, ev))
            if in_env and ev not in enabled:
                return Verdict(
                    False,
                    witness=_path_to(arena, {s}) + [ev],
                    detail=f"controller blocks uncontrolled {ev!r}",
                )

    # GR(1): in the subgraph avoiding G_j, any SCC cycle meeting all A_i is
    # a violating fair lasso
    succ_all: list[list[int]] = [[t for _, t in arena.moves(s)] for s in range(arena.n)]
    for j, G in enumerate(arena.goal_sets):
        keep = [s for s in range(arena.n) if s not in G]
        keep_set = set(keep)
        remap = {s: i for i, s in enumerate(keep)}
        sub = [[remap[t] for t in succ_all[s] if t in keep_set] for s in keep]
        for compo in _tarjan_sccs(len(keep), sub):
            has_cycle = len(compo) > 1 or compo[0] in sub[compo[0]]
            if not has_cycle:
                continue
            sset = {keep[i] for i in compo}
            if all(sset & A for A in arena.assumption_sets):
                return Verdict(
                    False,
                    witness=_path_to(arena, {keep[compo[0]]}),
                    detail=f"fair cycle misses guarantee {j}",
                )
    return Verdict(True, detail="verified")


def _path_to(arena: GameArena, targets: set[int]) -> list[str]:
    if arena.initial in targets:
        return []
    seen = {arena.initial}
    parent: dict[int, tuple[int, str]] = {}
    queue = [arena.initial]
    goal = None
    while queue and goal is None:
        s = queue.pop(0)
        for ev, t in arena.moves(s):
            if t in seen:
                continue
            seen.add(t)
            parent[t] = (s, ev)
            if t in targets:
                goal = t
                break
            queue.append(t)
    if goal is None:
        return []
    path = []
    cur = goal
    while cur != arena.initial:
        cur, ev = parent[cur]
        path.append(ev)
    return list(reversed(path))


# ---------------------------------------------------------------------------
# controller export


def controller_table(c: Controller) -> str:
    """Compact tabular text: header with state count and full alphabet (the
    controller synchronises on, and may block, every listed event), then one
    state per line with its selected command and event->successor rows;
    consumed by the enactor and the control panel."""
    lines = [
        f"states {c.lts.n_states} initial {c.lts.initial}",
        "alphabet " + " ".join(sorted(c.lts.alphabet)),
    ]
    for s in range(c.lts.n_states):
        sel = c.selection.get(s)
        row = [f"state {s} select {sel if sel is not None else '-'}"]
        for ev in c.lts.enabled(s):
            (t,) = c.lts.succ(s, ev)
            row.append(f"{ev} -> {t}")
        lines.append(" | ".join(row))
    return "\n".join(lines) + "\n"


def load_controller_table(text: str) -> Controller:
    lines = [l for l in text.strip().splitlines() if l.strip()]
    head = lines[0].split()
    if head[0] != "states":
        raise SynthesisError("not a controller table")
    n, initial = int(head[1]), int(head[3])
    body = lines[1:]
    alphabet: set[str] = set()
    if body and body[0].startswith("alphabet"):
        alphabet = set(body[0].split()[1:])
        body = body[1:]
    selection: dict[int, str | None] = {}
    transitions: list[tuple[int, str, int]] = []
    for line in body:
        cells = [c.strip() for c in line.split("|")]
        w = cells[0].split()
        s = int(w[1])
        selection[s] = None if w[3] == "-" else w[3]
        for cell in cells[1:]:
            ev, _, t = cell.split()
            alphabet.add(ev)
            transitions.append((s, ev, int(t)))
    lts = Lts(n, initial, alphabet, transitions)
    return Controller(lts, selection, tuple(range(n)), tuple(0 for _ in range(n)))
