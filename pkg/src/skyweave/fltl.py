"""Fluents, boolean state expressions and the safety-fragment monitor compiler.

A fluent is set by initiating events, cleared by terminating events and has
an initial value.  Formulas are boolean combinations of fluents under a
fixed safety fragment (always / weak-until / triggered weak-until, closed
under conjunction); the compiler turns a formula into a deterministic,
complete monitor LTS with one absorbing ERROR state.  Monitors observe
violations, they never restrict behaviour.

A bare event name used as an atom denotes the standard shorthand fluent
that is true exactly at the positions where that event occurs; such atoms
are evaluated against the current event and need no stored state.

Finite-trace positions exist only *after* each event: the value of a
fluent at position i reflects events up to and including the i-th, and the
empty prefix is not a checked position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .lts import Alphabet, Lts, validate_label

__all__ = [
    "Always",
    "AlwaysImplWeakUntil",
    "And",
    "BoolExpr",
    "Conj",
    "DuplicateFluentError",
    "FltlError",
    "FluentDef",
    "Gr1Liveness",
    "Implies",
    "Lit",
    "Monitor",
    "Not",
    "Or",
    "SafetyFormula",
    "TraceVerdict",
    "UnknownFluentError",
    "UnsupportedFragmentError",
    "Var",
    "WeakUntil",
    "advance",
    "arm_from",
    "check_trace",
    "compile_safety",
    "event_fluent",
    "initial_valuation",
    "released_from",
]


class FltlError(Exception):
    """Base class for fluent/formula errors."""


class DuplicateFluentError(FltlError):
    pass


class UnknownFluentError(FltlError):
    pass


class UnsupportedFragmentError(FltlError):
    """Formula outside the supported safety fragment."""


@dataclass(frozen=True)
class FluentDef:
    """Fluent ⟨initiating, terminating, initial⟩."""

    name: str
    initiating: frozenset[str]
    terminating: frozenset[str]
    initial: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "initiating", frozenset(self.initiating))
        object.__setattr__(self, "terminating", frozenset(self.terminating))
        overlap = self.initiating & self.terminating
        if overlap:
            raise FltlError(
                f"fluent {self.name}: events in both initiating and terminating sets: {sorted(overlap)}"
            )
        for ev in self.initiating | self.terminating:
            validate_label(ev)


def event_fluent(event: str, alphabet: Iterable[str]) -> FluentDef:
    """The shorthand fluent for an event: true only just after its occurrence."""
    rest = frozenset(alphabet) - {event}
    return FluentDef(event, frozenset({event}), rest, False)


# ---------------------------------------------------------------------------
# boolean expressions over fluents


class BoolExpr:
    """AST over fluent names with ¬, ∧, ∨, ⇒."""

    def names(self) -> frozenset[str]:
        raise NotImplementedError

    def eval(self, true_set: frozenset[str], event: str | None, declared: frozenset[str]) -> bool:
        """Value at a position with the given stored-fluent values and current event."""
        raise NotImplementedError


@dataclass(frozen=True)
class Var(BoolExpr):
    name: str

    def names(self):
        return frozenset({self.name})

    def eval(self, true_set, event, declared):
        if self.name in declared:
            return self.name in true_set
        return self.name == event

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Lit(BoolExpr):
    value: bool

    def names(self):
        return frozenset()

    def eval(self, true_set, event, declared):
        return self.value

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not(BoolExpr):
    body: BoolExpr

    def names(self):
        return self.body.names()

    def eval(self, true_set, event, declared):
        return not self.body.eval(true_set, event, declared)

    def __str__(self):
        return f"!{paren(self.body)}"


@dataclass(frozen=True)
class And(BoolExpr):
    items: tuple[BoolExpr, ...]

    def __init__(self, *items: BoolExpr):
        object.__setattr__(self, "items", tuple(items))

    def names(self):
        return frozenset().union(*(i.names() for i in self.items)) if self.items else frozenset()

    def eval(self, true_set, event, declared):
        return all(i.eval(true_set, event, declared) for i in self.items)

    def __str__(self):
        return " && ".join(paren(i) for i in self.items) if self.items else "true"


@dataclass(frozen=True)
class Or(BoolExpr):
    items: tuple[BoolExpr, ...]

    def __init__(self, *items: BoolExpr):
        object.__setattr__(self, "items", tuple(items))

    def names(self):
        return frozenset().union(*(i.names() for i in self.items)) if self.items else frozenset()

    def eval(self, true_set, event, declared):
        return any(i.eval(true_set, event, declared) for i in self.items)

    def __str__(self):
        return " || ".join(paren(i) for i in self.items) if self.items else "false"


@dataclass(frozen=True)
class Implies(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr

    def names(self):
        return self.lhs.names() | self.rhs.names()

    def eval(self, true_set, event, declared):
        return (not self.lhs.eval(true_set, event, declared)) or self.rhs.eval(
            true_set, event, declared
        )

    def __str__(self):
        return f"{paren(self.lhs)} -> {paren(self.rhs)}"


def paren(e: BoolExpr) -> str:
    s = str(e)
    if isinstance(e, (Var, Lit, Not)):
        return s
    return f"({s})"


# ---------------------------------------------------------------------------
# the safety fragment


class SafetyFormula:
    """One of Always(B) | WeakUntil(B1, B2) | AlwaysImplWeakUntil | Conj."""

    def names(self) -> frozenset[str]:
        raise NotImplementedError

    def terms(self) -> list["SafetyFormula"]:
        return [self]


@dataclass(frozen=True)
class Always(SafetyFormula):
    body: BoolExpr

    def names(self):
        return self.body.names()

    def __str__(self):
        return f"[]({self.body})"


@dataclass(frozen=True)
class WeakUntil(SafetyFormula):
    hold: BoolExpr
    release: BoolExpr

    def names(self):
        return self.hold.names() | self.release.names()

    def __str__(self):
        return f"({self.hold}) W ({self.release})"


@dataclass(frozen=True)
class AlwaysImplWeakUntil(SafetyFormula):
    trigger: BoolExpr
    hold: BoolExpr
    release: BoolExpr

    def names(self):
        return self.trigger.names() | self.hold.names() | self.release.names()

    def __str__(self):
        return f"[](({self.trigger}) -> (({self.hold}) W ({self.release})))"


@dataclass(frozen=True)
class Conj(SafetyFormula):
    items: tuple[SafetyFormula, ...]

    def __init__(self, *items: SafetyFormula):
        flat: list[SafetyFormula] = []
        for it in items:
            flat.extend(it.items if isinstance(it, Conj) else [it])
        object.__setattr__(self, "items", tuple(flat))

    def names(self):
        return frozenset().union(*(i.names() for i in self.items)) if self.items else frozenset()

    def terms(self):
        return list(self.items)

    def __str__(self):
        return " && ".join(f"({i})" for i in self.items) if self.items else "[](true)"


@dataclass(frozen=True)
class Gr1Liveness:
    """⋀ □◇A_i ⟹ ⋀ □◇G_j with boolean-combination-of-fluents sides."""

    assumptions: tuple[BoolExpr, ...] = ()
    guarantees: tuple[BoolExpr, ...] = (Lit(True),)

    def __post_init__(self) -> None:
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        object.__setattr__(self, "guarantees", tuple(self.guarantees))
        if not self.guarantees:
            raise FltlError("GR(1) liveness needs at least one guarantee")

    def names(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for e in self.assumptions + self.guarantees:
            out |= e.names()
        return out


# ---------------------------------------------------------------------------
# valuations


def _check_defs(defs: Sequence[FluentDef]) -> dict[str, FluentDef]:
    by_name: dict[str, FluentDef] = {}
    for d in defs:
        if d.name in by_name:
            raise DuplicateFluentError(f"duplicate fluent definition {d.name!r}")
        by_name[d.name] = d
    return by_name


def initial_valuation(defs: Sequence[FluentDef]) -> dict[str, bool]:
    """Each fluent at its declared initial value."""
    return {d.name: d.initial for d in _check_defs(defs).values()}


def advance(valuation: Mapping[str, bool], event: str, defs: Sequence[FluentDef]) -> dict[str, bool]:
    """Fold one event into a valuation: initiating sets, terminating clears."""
    by_name = _check_defs(defs)
    out = dict(valuation)
    for name, d in by_name.items():
        if event in d.initiating:
            out[name] = True
        elif event in d.terminating:
            out[name] = False
    return out


# ---------------------------------------------------------------------------
# monitor compilation


@dataclass(frozen=True)
class Monitor:
    """Deterministic, complete observer automaton for a safety formula.

    `error_state` is the absorbing violation state (present even if it turns
    out unreachable); `valuations[s]` is the set of tracked fluents true at
    state `s`.  When a release event is given, `released_state` is the
    absorbing all-accepting sink entered on that event.
    """

    lts: Lts
    error_state: int
    valuations: tuple[frozenset[str], ...]
    tracked: tuple[str, ...]
    released_state: int | None = None

    def run(self, trace: Iterable[str]) -> int | None:
        """First position driving the monitor to ERROR, or None."""
        s = self.lts.initial
        for i, ev in enumerate(trace):
            succs = self.lts.succ(s, ev)
            if not succs:
                raise FltlError(f"monitor is not complete for event {ev!r}")
            (s,) = succs
            if s == self.error_state:
                return i
        return None


@dataclass(frozen=True)
class TraceVerdict:
    ok: bool
    violated_at: int | None = None


def _collect_w_terms(f: SafetyFormula) -> list[SafetyFormula]:
    return [t for t in f.terms() if isinstance(t, (WeakUntil, AlwaysImplWeakUntil))]


def _validate_names(f: SafetyFormula, declared: frozenset[str], events: frozenset[str]) -> None:
    for name in sorted(f.names()):
        if name not in declared and name not in events:
            raise UnknownFluentError(f"atom {name!r} is neither a fluent nor an event")


def compile_safety(
    f: SafetyFormula,
    defs: Sequence[FluentDef],
    alphabet: Alphabet,
    track: Iterable[str] = (),
    release_on: str | None = None,
) -> Monitor:
    """Compile a safety formula to its monitor over the full alphabet.

    States encode (valuation of tracked fluents, one memory bit per
    weak-until term); only reachable states are materialised.  `track` adds
    fluents to follow beyond those the formula references (the arena needs
    liveness fluents).  With `release_on`, every obligation is dropped at
    the first occurrence of that event: the monitor moves to an absorbing
    accepting sink, which is how (φ_S W stopOld) is realised.
    """
    by_name = _check_defs(defs)
    declared = frozenset(by_name)
    events = frozenset(alphabet.events)
    _validate_names(f, declared, events)
    if release_on is not None and release_on not in events:
        raise FltlError(f"release event {release_on!r} not in alphabet")

    referenced = sorted((f.names() & declared) | (frozenset(track) & declared))
    unknown_track = frozenset(track) - declared
    if unknown_track:
        raise UnknownFluentError(f"tracked names are not fluents: {sorted(unknown_track)}")
    tracked = tuple(referenced)
    tracked_defs = [by_name[n] for n in tracked]
    always_terms = [t for t in f.terms() if isinstance(t, Always)]
    w_terms = _collect_w_terms(f)

    # deduplicate boolean expressions so one step evaluates each once even
    # when thousands of weak-until conjuncts share their atoms
    expr_index: dict[BoolExpr, int] = {}

    def intern(e: BoolExpr) -> int:
        if e not in expr_index:
            expr_index[e] = len(expr_index)
        return expr_index[e]

    always_ix = [intern(t.body) for t in always_terms]
    w_rows = []  # (trigger index or None, hold index, release index)
    trigger_terms: dict[int, list[int]] = {}
    for k, t in enumerate(w_terms):
        if isinstance(t, WeakUntil):
            w_rows.append((None, intern(t.hold), intern(t.release)))
        else:
            ti = intern(t.trigger)
            w_rows.append((ti, intern(t.hold), intern(t.release)))
            trigger_terms.setdefault(ti, []).append(k)
    exprs = list(expr_index)

    # event -> (fluents switched on, fluents switched off) for fast advance
    on_by_event: dict[str, frozenset[str]] = {}
    off_by_event: dict[str, frozenset[str]] = {}
    for ev in sorted(events):
        on_by_event[ev] = frozenset(d.name for d in tracked_defs if ev in d.initiating)
        off_by_event[ev] = frozenset(d.name for d in tracked_defs if ev in d.terminating)

    init_true = frozenset(d.name for d in tracked_defs if d.initial)
    init_bits = frozenset(k for k, t in enumerate(w_terms) if isinstance(t, WeakUntil))

    def step(true_set: frozenset[str], armed: frozenset[int], ev: str):
        """One monitor step; None signals a violation."""
        on, offs = on_by_event[ev], off_by_event[ev]
        nxt = true_set
        if on or offs:
            nxt = (true_set | on) - offs
        vals = [e.eval(nxt, ev, declared) for e in exprs]
        for ix in always_ix:
            if not vals[ix]:
                return None
        candidates = set(armed)
        for ti, terms in trigger_terms.items():
            if vals[ti]:
                candidates.update(terms)
        new_armed = []
        for k in sorted(candidates):
            _, hi, ri = w_rows[k]
            if vals[ri]:
                continue
            if not vals[hi]:
                return None
            new_armed.append(k)
        return nxt, frozenset(new_armed)

    ordered_events = sorted(events)
    start = (init_true, init_bits)
    index: dict[tuple[frozenset[str], tuple[bool, ...]], int] = {start: 0}
    states = [start]
    transitions: list[tuple[int, str, int]] = []
    error = -1  # assigned after exploration
    released = -1 if release_on is not None else None
    pending = [start]
    error_edges: list[tuple[int, str]] = []
    released_edges: list[tuple[int, str]] = []
    while pending:
        cur = pending.pop()
        sid = index[cur]
        for ev in ordered_events:
            if release_on is not None and ev == release_on:
                released_edges.append((sid, ev))
                continue
            nxt = step(cur[0], cur[1], ev)
            if nxt is None:
                error_edges.append((sid, ev))
                continue
            tid = index.get(nxt)
            if tid is None:
                tid = index[nxt] = len(states)
                states.append(nxt)
                pending.append(nxt)
            transitions.append((sid, ev, tid))
    error = len(states)
    n = error + 1
    if release_on is not None:
        released = error + 1
        n = released + 1
    for sid, ev in error_edges:
        transitions.append((sid, ev, error))
    for ev in ordered_events:
        transitions.append((error, ev, error))
    if release_on is not None:
        for sid, ev in released_edges:
            transitions.append((sid, ev, released))
        for ev in ordered_events:
            transitions.append((released, ev, released))
    valuations = tuple(s[0] for s in states) + ((frozenset(),) * (n - len(states)))
    lts = Lts(n, 0, events, transitions)
    return Monitor(lts, error, valuations, tracked, released)


def check_trace(
    f: SafetyFormula,
    trace: Sequence[str],
    defs: Sequence[FluentDef],
    alphabet: Alphabet | None = None,
) -> TraceVerdict:
    """Finite-trace verdict: first index whose prefix violates `f`, else ok."""
    if alphabet is None:
        events = set(trace)
        for d in defs:
            events |= d.initiating | d.terminating
        for name in f.names():
            if all(d.name != name for d in defs):
                events.add(name)
        alphabet = Alphabet(frozenset(), frozenset(events))
    mon = compile_safety(f, defs, alphabet)
    hit = mon.run(trace)
    return TraceVerdict(hit is None, hit)


# ---------------------------------------------------------------------------
# rewrites used by the update-goal construction


def arm_from(f: SafetyFormula, start_event: str, latch_fluent: str) -> SafetyFormula:
    """Arm a safety formula from the first occurrence of `start_event` onward.

    `latch_fluent` must be the never-resetting fluent of that event.  The
    rewrite stays inside the fragment: □B becomes □(latch ⟹ B), a top-level
    weak-until becomes an obligation triggered by the event itself, and a
    triggered weak-until gets the latch conjoined to its trigger.
    """
    if isinstance(f, Conj):
        return Conj(*(arm_from(t, start_event, latch_fluent) for t in f.items))
    if isinstance(f, Always):
        return Always(Implies(Var(latch_fluent), f.body))
    if isinstance(f, WeakUntil):
        return AlwaysImplWeakUntil(Var(start_event), f.hold, f.release)
    if isinstance(f, AlwaysImplWeakUntil):
        return AlwaysImplWeakUntil(And(Var(latch_fluent), f.trigger), f.hold, f.release)
    raise UnsupportedFragmentError(f"cannot arm formula {f!r}")


def released_from(f: SafetyFormula) -> list[SafetyFormula]:
    """Terms of a conjunction, for monitors compiled with a release event."""
    return f.terms()
