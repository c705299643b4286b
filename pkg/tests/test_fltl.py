"""Tests for fluents, valuations and the safety-monitor compiler.

The monitor is cross-checked against an independent per-position semantic
evaluator written here from the weak-until definitions directly.
"""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skyweave.fltl import (
    Always,
    AlwaysImplWeakUntil,
    And,
    Conj,
    DuplicateFluentError,
    FluentDef,
    Implies,
    Lit,
    Not,
    Or,
    UnknownFluentError,
    Var,
    WeakUntil,
    advance,
    arm_from,
    check_trace,
    compile_safety,
    initial_valuation,
)
from skyweave.lts import Alphabet


# --- independent finite-trace oracle ---------------------------------------


def values_along(trace, defs):
    """Per-position fluent values computed from scratch at each position."""
    out = []
    for i in range(len(trace)):
        vals = {}
        for d in defs:
            v = d.initial
            for ev in trace[: i + 1]:
                if ev in d.initiating:
                    v = True
                elif ev in d.terminating:
                    v = False
            vals[d.name] = v
        out.append(vals)
    return out


def expr_at(e, trace, vals, i, declared):
    if isinstance(e, Var):
        return vals[i][e.name] if e.name in declared else trace[i] == e.name
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Not):
        return not expr_at(e.body, trace, vals, i, declared)
    if isinstance(e, And):
        return all(expr_at(x, trace, vals, i, declared) for x in e.items)
    if isinstance(e, Or):
        return any(expr_at(x, trace, vals, i, declared) for x in e.items)
    if isinstance(e, Implies):
        return (not expr_at(e.lhs, trace, vals, i, declared)) or expr_at(
            e.rhs, trace, vals, i, declared
        )
    raise AssertionError(e)


def semantic_violation(f, trace, defs):
    """First violating position per the fragment's definitions, else None."""
    declared = {d.name for d in defs}
    vals = values_along(trace, defs)
    n = len(trace)

    def at(e, i):
        return expr_at(e, trace, vals, i, declared)

    def term_violation(t):
        if isinstance(t, Conj):
            hits = [term_violation(x) for x in t.items]
            hits = [h for h in hits if h is not None]
            return min(hits) if hits else None
        if isinstance(t, Always):
            for i in range(n):
                if not at(t.body, i):
                    return i
            return None
        if isinstance(t, WeakUntil):
            for i in range(n):
                if any(at(t.release, j) for j in range(i + 1)):
                    return None
                if not at(t.hold, i):
                    return i
            return None
        if isinstance(t, AlwaysImplWeakUntil):
            for i in range(n):
                if at(t.hold, i):
                    continue
                for p in range(i + 1):
                    if at(t.trigger, p) and not any(at(t.release, j) for j in range(p, i + 1)):
                        return i
            return None
        raise AssertionError(t)

    return term_violation(f)


# --- fixtures ----------------------------------------------------------------


def at_fluents(cells, initial_cell, extra_events=()):
    sigma = {f"at.{i}" for i in cells}
    defs = [
        FluentDef(f"at{i}", {f"at.{i}"}, sigma - {f"at.{i}"}, i == initial_cell) for i in cells
    ]
    return defs


def latch(name, event):
    return FluentDef(name, {event}, set(), False)


def alphabet_of(*events):
    return Alphabet(frozenset(), frozenset(events))


class TestValuations:
    def test_initially_true_at_start_cell(self):
        defs = at_fluents(range(6), 0)
        v = initial_valuation(defs)
        assert v["at0"] is True
        assert all(not v[f"at{i}"] for i in range(1, 6))

    def test_event_shorthand_initially_false(self):
        f = FluentDef("grab.1", {"grab.1"}, {"go.0", "at.0"}, False)
        assert initial_valuation([f]) == {"grab.1": False}

    def test_empty(self):
        assert initial_valuation([]) == {}

    def test_duplicate_rejected(self):
        d = latch("x", "e")
        with pytest.raises(DuplicateFluentError):
            initial_valuation([d, d])

    def test_other_at_terminates(self):
        defs = at_fluents(range(6), 0)
        v = advance(initial_valuation(defs), "at.1", defs)
        assert v["at0"] is False and v["at1"] is True

    def test_unrelated_event_is_identity(self):
        defs = at_fluents(range(6), 0)
        v0 = initial_valuation(defs)
        assert advance(v0, "grab.1", defs + [latch("g", "grab.1")])["at0"] is True

    def test_against_recompute_oracle(self):
        rng = random.Random(42)
        events = [f"e{i}" for i in range(8)]
        for _ in range(30):
            defs = []
            for k in range(5):
                ini = set(rng.sample(events, rng.randrange(1, 3)))
                ter = set(rng.sample([e for e in events if e not in ini], rng.randrange(1, 4)))
                defs.append(FluentDef(f"f{k}", ini, ter, rng.random() < 0.5))
            trace = [rng.choice(events) for _ in range(30)]
            v = initial_valuation(defs)
            for ev in trace:
                v = advance(v, ev, defs)
            assert v == values_along(trace, defs)[-1]

    @given(st.lists(st.sampled_from(["a", "b", "c"]), max_size=12),
           st.lists(st.sampled_from(["a", "b", "c"]), max_size=12))
    @settings(max_examples=50, deadline=None)
    def test_fold_concat_equals_sequential(self, t1, t2):
        defs = [FluentDef("x", {"a"}, {"b"}, False), FluentDef("y", {"c"}, {"a"}, True)]
        v = initial_valuation(defs)
        for ev in t1 + t2:
            v = advance(v, ev, defs)
        w = initial_valuation(defs)
        for ev in t1:
            w = advance(w, ev, defs)
        for ev in t2:
            w = advance(w, ev, defs)
        assert v == w


class TestCompile:
    def test_always_true_single_state(self):
        mon = compile_safety(Always(Lit(True)), [], alphabet_of("a", "b"))
        # one live state with self-loops on all events, plus the (unreachable) error
        live = {s for s, _, _ in mon.lts.transitions if s != mon.error_state}
        assert live == {0}
        assert all(t == 0 for s, _, t in mon.lts.transitions if s == 0)

    def test_theta_empty_set(self):
        defs = [latch("OldStopped", "stopOld"), latch("NewStarted", "startNew")]
        theta = Always(Or(Not(Var("OldStopped")), Var("NewStarted")))
        al = alphabet_of("stopOld", "startNew", "x")
        mon = compile_safety(theta, defs, al)
        assert mon.run(["stopOld"]) == 0
        assert mon.run(["startNew", "stopOld"]) is None

    def test_theta_transition_requirement_eq1(self):
        # UAV sits at cell 4 when the old specification is dropped
        defs = at_fluents(range(6), 4) + [
            latch("OldStopped", "stopOld"),
            latch("NewStarted", "startNew"),
        ]
        theta = AlwaysImplWeakUntil(
            Var("OldStopped"), Or(Var("at4"), Var("at5")), Var("NewStarted")
        )
        al = alphabet_of("stopOld", "startNew", "at.3", "at.4", "at.5", "go.3")
        mon = compile_safety(theta, defs, al)
        assert mon.run(["stopOld", "at.4", "at.3"]) == 2
        assert mon.run(["stopOld", "at.4", "at.5", "startNew", "at.3"]) is None

    def test_exhaustive_traces_against_semantics(self):
        defs = at_fluents((3, 4, 5), 4) + [
            latch("OldStopped", "stopOld"),
            latch("NewStarted", "startNew"),
        ]
        theta = AlwaysImplWeakUntil(
            Var("OldStopped"), Or(Var("at4"), Var("at5")), Var("NewStarted")
        )
        events = ["stopOld", "startNew", "at.3", "at.4", "at.5", "go.3"]
        mon = compile_safety(theta, defs, alphabet_of(*events))
        for n in range(7):
            for trace in itertools.product(events, repeat=n):
                got = mon.run(list(trace))
                want = semantic_violation(theta, list(trace), defs)
                assert got == want, trace

    def test_monitor_deterministic_and_complete(self):
        defs = at_fluents((0, 1), 0) + [latch("L", "lock")]
        f = Conj(
            Always(Implies(Var("L"), Var("at0"))),
            WeakUntil(Var("at0"), Var("lock")),
        )
        al = alphabet_of("at.0", "at.1", "lock", "noise")
        mon = compile_safety(f, defs, al)
        for s in range(mon.lts.n_states):
            for ev in sorted(al.events):
                assert len(mon.lts.succ(s, ev)) == 1
        assert mon.lts.deterministic

    def test_state_bound(self):
        defs = at_fluents((0, 1, 2), 0)
        f = Conj(
            AlwaysImplWeakUntil(Var("at1"), Not(Var("at2")), Var("at.0")),
            WeakUntil(Not(Var("at2")), Var("at.1")),
        )
        al = alphabet_of("at.0", "at.1", "at.2")
        mon = compile_safety(f, defs, al)
        n_fluents = len(mon.tracked)
        assert mon.lts.n_states <= 2**n_fluents * 2**2 + 1

    def test_unknown_fluent(self):
        with pytest.raises(UnknownFluentError):
            compile_safety(Always(Var("ghost")), [], alphabet_of("a"))

    def test_release_event_drops_all_obligations(self):
        defs = at_fluents((0, 1), 0)
        f = Always(Var("at0"))
        al = alphabet_of("at.0", "at.1", "stopOld")
        mon = compile_safety(f, defs, al, release_on="stopOld")
        assert mon.run(["at.1"]) == 0
        # released at stopOld: the violating position never arrives
        assert mon.run(["stopOld", "at.1", "at.1"]) is None
        assert mon.released_state is not None


class TestCheckTrace:
    def gamma(self):
        go = {f"go.{i}" for i in range(12)}
        at = {f"at.{i}" for i in range(12)}
        defs = [FluentDef("Moving", go, at, False)]
        for i in (1, 2, 3):
            defs.append(FluentDef(f"with{i}", {f"grab.{i}"}, {f"release.{i}"}, False))
        body = Implies(Var("Moving"), Or(Var("with1"), Var("with2"), Var("with3")))
        return Always(body), defs

    def test_loaded_trip_ok(self):
        f, defs = self.gamma()
        assert check_trace(f, ["grab.1", "go.8", "at.8"], defs).ok

    def test_empty_trip_violates_at_0(self):
        f, defs = self.gamma()
        v = check_trace(f, ["go.8"], defs)
        assert not v.ok and v.violated_at == 0

    def test_random_traces_agree_with_semantics(self):
        f, defs = self.gamma()
        events = ["go.8", "at.8", "grab.1", "release.1", "grab.2", "release.2"]
        rng = random.Random(9)
        for _ in range(500):
            trace = [rng.choice(events) for _ in range(rng.randrange(0, 12))]
            got = check_trace(f, trace, defs)
            want = semantic_violation(f, trace, defs)
            assert got.violated_at == want and got.ok == (want is None)


class TestArming:
    def test_armed_always_checks_from_start_event_inclusive(self):
        defs = at_fluents((0, 1), 0) + [latch("NewStarted", "startNew")]
        inner = Always(Not(Var("at1")))
        armed = arm_from(inner, "startNew", "NewStarted")
        al = alphabet_of("at.0", "at.1", "startNew")
        mon = compile_safety(armed, defs, al)
        # before startNew, at.1 is fine
        assert mon.run(["at.1", "at.0"]) is None
        # the startNew position itself is checked: at1 already true -> violation
        assert mon.run(["at.1", "startNew"]) == 1
        assert mon.run(["at.1", "at.0", "startNew", "at.1"]) == 3

    def test_armed_weak_until_triggers_at_event(self):
        defs = [latch("NewStarted", "startNew"), latch("Done", "done")]
        inner = WeakUntil(Not(Var("Done")), Var("done"))
        armed = arm_from(inner, "startNew", "NewStarted")
        al = alphabet_of("startNew", "done", "x")
        mon = compile_safety(armed, defs, al)
        assert mon.run(["done", "x"]) is None  # not armed yet
        assert mon.run(["startNew", "x", "done", "x"]) is None
