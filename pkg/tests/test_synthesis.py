"""Arena construction, GR(1) solving and closed-loop verification tests."""

import random

import pytest

from helpers import brute_force_realizable, random_arena, winning_selection
from skyweave import catalog
from skyweave.fltl import Always, Gr1Liveness, Lit, Var, compile_safety
from skyweave.lts import Alphabet, Lts, compose, reachable
from skyweave.problems import control_problem
from skyweave.speclang import parse
from skyweave.synthesis import (
    Controller,
    ControlProblem,
    NondeterministicArenaError,
    build_arena,
    controller_table,
    load_controller_table,
    problem_arena,
    solve_control_problem,
    solve_gr1,
    verify_closed_loop,
)


def patrol_problem():
    return control_problem(parse(catalog.patrol_2x3_doc()))


def delivery_problem():
    return control_problem(parse(catalog.delivery_doc()))


class TestBuildArena:
    def test_single_state_selfloop(self):
        env = Lts(1, 0, {"u"}, [(0, "u", 0)])
        p = ControlProblem(env, Alphabet(frozenset(), frozenset({"u"})), (),
                           Always(Lit(True)), Gr1Liveness())
        arena = problem_arena(p)
        assert arena.n == 1 and not arena.err

    def test_patrol_no_fly_states_are_error(self):
        arena = problem_arena(patrol_problem())
        for s in range(arena.n):
            if s in arena.err:
                continue
            assert "atNoFlyOld" not in arena.valuation[s]

    def test_delivery_state_count_against_compose_oracle(self):
        p = delivery_problem()
        arena = problem_arena(p)
        # independent construction through the generic composition operator
        from skyweave.fltl import event_fluent

        mon = compile_safety(p.safety, p.fluents, p.alphabet)
        live = sorted(p.liveness.names())
        defs = list(p.fluents) + [
            event_fluent(nm, p.alphabet.events)
            for nm in live
            if all(d.name != nm for d in p.fluents)
        ]
        tracker = compile_safety(Always(Lit(True)), defs, p.alphabet, track=live)
        prod = compose(compose(p.env, mon.lts), tracker.lts)
        # prune states only reachable through monitor errors
        seen = {prod.initial}
        stack = [prod.initial]
        while stack:
            s = stack.pop()
            (envm, trk) = prod.provenance[s]
            if envm[1] == mon.error_state or trk == tracker.error_state:
                continue
            for targets in prod.out(s).values():
                for t in targets:
                    if t not in seen:
                        seen.add(t)
                        stack.append(t)
        assert arena.n == len(seen)

    def test_nondeterministic_uncontrolled_rejected(self):
        env = Lts(3, 0, {"u"}, [(0, "u", 1), (0, "u", 2)])
        p = ControlProblem(env, Alphabet(frozenset(), frozenset({"u"})), (),
                           Always(Lit(True)), Gr1Liveness())
        with pytest.raises(NondeterministicArenaError):
            problem_arena(p)

    def test_nondeterministic_controlled_kept_but_unselectable(self):
        env = Lts(3, 0, {"c"}, [(0, "c", 1), (0, "c", 2), (1, "c", 1), (2, "c", 2)])
        p = ControlProblem(env, Alphabet(frozenset({"c"}), frozenset()), (),
                           Always(Lit(True)), Gr1Liveness())
        arena = problem_arena(p)
        assert arena.ctl[0] == ()
        assert len(arena.ctl_excluded[0]) == 2


class TestSolve:
    def test_trivial_guarantee_safe_arena(self):
        env = Lts(2, 0, {"c", "u"}, [(0, "c", 1), (1, "u", 0)])
        p = ControlProblem(env, Alphabet(frozenset({"c"}), frozenset({"u"})), (),
                           Always(Lit(True)), Gr1Liveness())
        v = solve_control_problem(p)
        assert v.realizable
        assert set(v.controller.selection.values()) <= {"c", None}

    def test_patrol_realizable_and_verified(self):
        p = patrol_problem()
        v = solve_control_problem(p)
        assert v.realizable
        check = verify_closed_loop(p.env, v.controller, p)
        assert check.realizable, check.detail
        closed = reachable(compose(p.env, v.controller.lts))
        # never enters cells 3..5: no at.3/at.4/at.5 edge at all
        labels = {ev for _, ev, _ in closed.transitions}
        assert not labels & {"at.3", "at.4", "at.5", "go.3", "go.4", "go.5"}
        # every cycle passes both patrol cells: dropping either's arrival
        # event leaves an acyclic graph
        for goal_ev in ("at.0", "at.2"):
            succ = [[] for _ in range(closed.n_states)]
            for s, ev, t in closed.transitions:
                if ev != goal_ev:
                    succ[s].append(("", t))
            from helpers import _has_cycle

            assert not _has_cycle(list(range(closed.n_states)), dict(enumerate(succ)))

    def test_park_forever_controller_fails_gr1(self):
        p = patrol_problem()
        v = solve_control_problem(p)
        good = v.controller
        # a controller that takes off then never moves: reuse the real one's
        # alphabet but loop on a single flying state
        alphabet = good.lts.alphabet
        lts = Lts(
            3, 0, alphabet,
            [(0, "takeOff", 1), (1, "takeOff.end", 2)],
        )
        bad = Controller(lts, {0: "takeOff", 1: None, 2: None}, (0, 1, 2), (0, 0, 0))
        res = verify_closed_loop(p.env, bad, p)
        assert not res.realizable

    def test_delivery_realizable_and_fair_cycles_release_everything(self):
        p = delivery_problem()
        v = solve_control_problem(p)
        assert v.realizable
        check = verify_closed_loop(p.env, v.controller, p)
        assert check.realizable, check.detail
        closed = reachable(compose(p.env, v.controller.lts))
        from helpers import _has_cycle

        for i in (1, 2, 3):
            succ = {s: [] for s in range(closed.n_states)}
            for s, ev, t in closed.transitions:
                if ev != f"release.{i}":
                    succ[s].append(("", t))
            assert not _has_cycle(list(range(closed.n_states)), succ), f"release.{i}"

    def test_controller_legality_and_single_selection(self):
        p = patrol_problem()
        v = solve_control_problem(p)
        c = v.controller
        arena = problem_arena(p)
        for cs in range(c.lts.n_states):
            astate = c.arena_state[cs]
            enabled = set(c.lts.enabled(cs))
            for ev, _ in arena.unc[astate]:
                assert ev in enabled, f"uncontrolled {ev} blocked"
            selected = [ev for ev in enabled if ev in p.alphabet.controlled]
            assert len(selected) <= 1
            assert set(selected) == ({c.selection[cs]} if c.selection[cs] else set())

    def test_verifier_rejects_blocked_uncontrolled(self):
        env = Lts(2, 0, {"c", "u"}, [(0, "c", 1), (1, "u", 0), (1, "c", 1)])
        p = ControlProblem(env, Alphabet(frozenset({"c"}), frozenset({"u"})), (),
                           Always(Lit(True)), Gr1Liveness())
        # blocks u at its second state but loops on c: illegal
        lts = Lts(2, 0, {"c", "u"}, [(0, "c", 1), (1, "c", 1)])
        bad = Controller(lts, {0: "c", 1: "c"}, (0, 1), (0, 0))
        res = verify_closed_loop(p.env, bad, p)
        assert not res.realizable and "blocks uncontrolled" in res.detail


class TestSolverOracle:
    def test_random_arenas_match_brute_force(self):
        rng = random.Random(1234)
        mismatches = []
        for k in range(150):
            arena = random_arena(rng)
            got = solve_gr1(arena)
            want = brute_force_realizable(arena)
            if got.realizable != want:
                mismatches.append((k, arena))
            if got.realizable:
                sel = [got.controller.selection.get(i) for i in range(arena.n)]
                # spot check the extracted strategy wins per the oracle's
                # win condition, projected to memoryless when possible
        assert not mismatches, f"{len(mismatches)} disagreements, first seed index {mismatches[0][0]}"

    def test_extracted_strategy_wins_by_oracle_criterion(self):
        rng = random.Random(99)
        checked = 0
        for _ in range(150):
            arena = random_arena(rng)
            v = solve_gr1(arena)
            if not v.realizable:
                continue
            c = v.controller
            if len(set(zip(c.arena_state, c.memory))) != len(set(c.arena_state)):
                continue  # memory actually used; oracle below is memoryless
            selection = [None] * arena.n
            for cs in range(c.lts.n_states):
                selection[c.arena_state[cs]] = c.selection.get(cs)
            assert winning_selection(arena, selection)
            checked += 1
        assert checked > 30


class TestControllerTable:
    def test_roundtrip(self):
        p = patrol_problem()
        v = solve_control_problem(p)
        text = controller_table(v.controller)
        back = load_controller_table(text)
        assert back.lts.n_states == v.controller.lts.n_states
        assert back.lts.transitions == v.controller.lts.transitions
        assert back.selection == v.controller.selection
