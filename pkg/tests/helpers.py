"""Shared test oracles: brute-force strategy enumeration and cycle checks."""

import itertools
import random

from skyweave.synthesis import GameArena


def random_arena(rng: random.Random, max_states=6, n_ctl=2, n_unc=2) -> GameArena:
    """Small random single-guarantee arena built directly."""
    n = rng.randrange(2, max_states + 1)
    ctl_events = [f"c{i}" for i in range(n_ctl)]
    unc_events = [f"u{i}" for i in range(n_unc)]
    unc, ctl = [], []
    for s in range(n):
        row_u, row_c = [], []
        for ev in unc_events:
            if rng.random() < 0.4:
                row_u.append((ev, rng.randrange(n)))
        for ev in ctl_events:
            if rng.random() < 0.6:
                row_c.append((ev, rng.randrange(n)))
        unc.append(tuple(row_u))
        ctl.append(tuple(row_c))
    err = frozenset(s for s in range(1, n) if rng.random() < 0.15)
    for s in err:
        unc[s] = ()
        ctl[s] = ()
    goal = frozenset(s for s in range(n) if s not in err and rng.random() < 0.4)
    return GameArena(
        n, 0, tuple(sorted(ctl_events + unc_events)), unc, ctl, [()] * n, err,
        [frozenset()] * n, [goal], [], tuple(range(n)), frozenset(), tuple(range(n)),
    )


def _induced_reachable(arena, selection):
    succ = {}
    seen = {arena.initial}
    stack = [arena.initial]
    while stack:
        s = stack.pop()
        moves = list(arena.unc[s])
        if selection[s] is not None:
            for ev, t in arena.ctl[s]:
                if ev == selection[s]:
                    moves.append((ev, t))
        succ[s] = moves
        for _, t in moves:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return succ


def _has_cycle(nodes, succ):
    color = {s: 0 for s in nodes}
    for root in nodes:
        if color[root]:
            continue
        stack = [(root, iter(succ.get(root, ())))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            found = False
            for _, t in it:
                if t not in color:
                    continue
                if color[t] == 1:
                    return True
                if color[t] == 0:
                    color[t] = 1
                    stack.append((t, iter(succ.get(t, ()))))
                    found = True
                    break
            if not found:
                color[node] = 2
                stack.pop()
    return False


def winning_selection(arena, selection) -> bool:
    """Does a memoryless selection win a single-guarantee, assumption-free
    game?  Checked directly: the induced reachable graph avoids error states,
    never deadlocks, and has no cycle avoiding the guarantee set."""
    succ = _induced_reachable(arena, selection)
    goal = arena.goal_sets[0]
    for s in succ:
        if s in arena.err:
            return False
        if not succ[s]:
            return False
    non_goal = [s for s in succ if s not in goal]
    sub = {s: [(ev, t) for ev, t in succ[s] if t not in goal] for s in non_goal}
    return not _has_cycle(non_goal, sub)


def brute_force_realizable(arena) -> bool:
    """Enumerate every memoryless controlled-event selection."""
    options = []
    for s in range(arena.n):
        opts = [None] + sorted({ev for ev, _ in arena.ctl[s]})
        options.append(opts)
    for combo in itertools.product(*options):
        if winning_selection(arena, list(combo)):
            return True
    return False


def atomicity_groups(problem, solution, n_schedules=1000, seed=17, ticks=12):
    """Run randomized hotswap/inbox interleavings of a scripted environment.

    Returns {(swap boundary, event-count profile): set of outcomes}; atomic
    swapping means every group has exactly one outcome."""
    import random as _random

    from skyweave.enactor import Enactor, build_fallback

    def run(schedule):
        unc = {f"at.{i}" for i in range(12)} | {"takeOff.end"}
        en = Enactor(problem.current, build_fallback(0, unc))
        pending = []
        outcome = []
        swap_tick = None
        for tick, (n_events, swap_here) in enumerate(schedule):
            for ev in pending[: n_events or None]:
                en.enqueue(ev)
            pending = pending[n_events or len(pending):] if pending else []
            if swap_here and en.pending_swap is None and en.controller is problem.current:
                en.request_swap(solution)
            for cmd in en.tick():
                outcome.append((tick, cmd))
                if cmd.startswith("go."):
                    pending.append("at." + cmd.split(".", 1)[1])
            if swap_tick is None and en.controller is solution.new_controller:
                swap_tick = tick
        return swap_tick, tuple(outcome), en.current, en.mode

    rng = _random.Random(seed)
    groups = {}
    for _ in range(n_schedules):
        schedule = [(rng.randrange(0, 3), False) for _ in range(ticks)]
        k = rng.randrange(0, ticks - 2)
        schedule[k] = (schedule[k][0], True)
        swap_tick, outcome, cur, mode = run(schedule)
        key = (swap_tick, tuple(s[0] for s in schedule))
        groups.setdefault(key, set()).add((outcome, cur, mode))
    return groups
