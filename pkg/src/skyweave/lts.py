"""Finite labelled transition systems.

The substrate for environments, safety monitors and controllers: dense
integer states, string event labels, parallel composition with
synchronisation on shared labels, the interrupt operator used for
hot-swap/reconfiguration modelling, reachability pruning and stepping.

All values are immutable after construction and safe to share across
threads; every operation returns a fresh Lts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

LABEL_RE = re.compile(r"[A-Za-z0-9_.?]+\Z")

__all__ = [
    "Alphabet",
    "LABEL_RE",
    "LabelClashError",
    "Lts",
    "LtsError",
    "PartialMapError",
    "UnknownStateError",
    "compose",
    "deadlock_states",
    "interrupt",
    "reachable",
    "step",
    "to_dot",
    "validate_label",
]


class LtsError(Exception):
    """Base class for LTS construction/operation errors."""


class PartialMapError(LtsError):
    """An interrupt/reconfiguration map misses a required source state."""


class LabelClashError(LtsError):
    """The interrupt label already belongs to one of the operands."""


class UnknownStateError(LtsError):
    """A state id outside the LTS was referenced."""


def validate_label(name: str) -> str:
    """Check an event label against the allowed character set."""
    if not name or not LABEL_RE.match(name):
        raise LtsError(f"invalid event label {name!r}")
    return name


@dataclass(frozen=True)
class Alphabet:
    """Partition of the event universe into controlled and uncontrolled."""

    controlled: frozenset[str]
    uncontrolled: frozenset[str]

    def __post_init__(self) -> None:
        clash = self.controlled & self.uncontrolled
        if clash:
            raise LtsError(f"events both controlled and uncontrolled: {sorted(clash)}")
        for ev in self.controlled | self.uncontrolled:
            validate_label(ev)

    @property
    def events(self) -> frozenset[str]:
        return self.controlled | self.uncontrolled

    def is_controlled(self, ev: str) -> bool:
        return ev in self.controlled


class Lts:
    """Labelled transition system over dense integer state ids.

    `provenance[s]` carries an annotation for debugging and for state-map
    extraction (composition stores the pair of component annotations,
    interrupt tags states with the side they came from).  `state_names`
    optionally carries surface names from the spec language.
    """

    __slots__ = (
        "n_states",
        "initial",
        "alphabet",
        "transitions",
        "provenance",
        "state_names",
        "_succ",
        "_enabled",
        "deterministic",
    )

    def __init__(
        self,
        n_states: int,
        initial: int,
        alphabet: Iterable[str],
        transitions: Iterable[tuple[int, str, int]],
        provenance: Sequence[object] | None = None,
        state_names: Sequence[str] | None = None,
    ) -> None:
        self.n_states = n_states
        self.initial = initial
        self.alphabet = frozenset(alphabet)
        trans = sorted(set(transitions), key=lambda t: (t[0], t[1], t[2]))
        self.transitions = tuple(trans)
        if provenance is not None and len(provenance) != n_states:
            raise LtsError("provenance length does not match state count")
        if state_names is not None and len(state_names) != n_states:
            raise LtsError("state_names length does not match state count")
        self.provenance = tuple(provenance) if provenance is not None else tuple(range(n_states))
        self.state_names = tuple(state_names) if state_names is not None else None
        if not (0 <= initial < n_states):
            raise LtsError(f"initial state {initial} outside [0, {n_states})")
        for ev in self.alphabet:
            validate_label(ev)
        succ: list[dict[str, tuple[int, ...]]] = [{} for _ in range(n_states)]
        deterministic = True
        for s, ev, t in self.transitions:
            if not (0 <= s < n_states) or not (0 <= t < n_states):
                raise LtsError(f"transition ({s},{ev},{t}) endpoint outside state range")
            if ev not in self.alphabet:
                raise LtsError(f"transition label {ev!r} not in alphabet")
            prev = succ[s].get(ev, ())
            if prev:
                deterministic = False
            succ[s][ev] = prev + (t,)
        self._succ = tuple(succ)
        self._enabled = tuple(tuple(sorted(d)) for d in succ)
        self.deterministic = deterministic

    def succ(self, s: int, ev: str) -> tuple[int, ...]:
        """Successors of `s` on `ev` (empty tuple when disabled)."""
        if not (0 <= s < self.n_states):
            raise UnknownStateError(f"state {s} not in LTS")
        return self._succ[s].get(ev, ())

    def enabled(self, s: int) -> tuple[str, ...]:
        """Sorted labels with at least one outgoing transition at `s`."""
        if not (0 <= s < self.n_states):
            raise UnknownStateError(f"state {s} not in LTS")
        return self._enabled[s]

    def out(self, s: int) -> Mapping[str, tuple[int, ...]]:
        return self._succ[s]

    def name_of(self, s: int) -> str:
        if self.state_names is not None:
            return self.state_names[s]
        return str(s)

    def state_by_name(self, name: str) -> int:
        if self.state_names is None:
            raise UnknownStateError(f"LTS has no state names (looking for {name!r})")
        try:
            return self.state_names.index(name)
        except ValueError:
            raise UnknownStateError(f"no state named {name!r}") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lts):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.initial == other.initial
            and self.alphabet == other.alphabet
            and self.transitions == other.transitions
        )

    def __hash__(self) -> int:
        return hash((self.n_states, self.initial, self.alphabet, self.transitions))

    def __repr__(self) -> str:
        return (
            f"Lts(states={self.n_states}, initial={self.initial}, "
            f"|alphabet|={len(self.alphabet)}, |transitions|={len(self.transitions)})"
        )


def step(l: Lts, s: int, ev: str) -> set[int]:
    """All successors of `s` on `ev`; empty set when the event is disabled."""
    return set(l.succ(s, ev))


def compose(a: Lts, b: Lts) -> Lts:
    """Parallel composition: synchronise on shared labels, interleave the rest.

    Only pairs reachable from (a.initial, b.initial) are materialised;
    provenance of a product state is the pair of component provenances.
    """
    shared = a.alphabet & b.alphabet
    alphabet = a.alphabet | b.alphabet
    index: dict[tuple[int, int], int] = {(a.initial, b.initial): 0}
    order: list[tuple[int, int]] = [(a.initial, b.initial)]
    transitions: list[tuple[int, str, int]] = []
    frontier = [(a.initial, b.initial)]
    while frontier:
        sa, sb = pair = frontier.pop()
        sid = index[pair]
        moves: list[tuple[str, int, int]] = []
        for ev, ta_list in a.out(sa).items():
            if ev in shared:
                for tb in b.out(sb).get(ev, ()):
                    for ta in ta_list:
                        moves.append((ev, ta, tb))
            else:
                for ta in ta_list:
                    moves.append((ev, ta, sb))
        for ev, tb_list in b.out(sb).items():
            if ev not in shared:
                for tb in tb_list:
                    moves.append((ev, sa, tb))
        for ev, ta, tb in moves:
            tgt = (ta, tb)
            tid = index.get(tgt)
            if tid is None:
                tid = index[tgt] = len(order)
                order.append(tgt)
                frontier.append(tgt)
            transitions.append((sid, ev, tid))
    provenance = [(a.provenance[sa], b.provenance[sb]) for sa, sb in order]
    names = None
    if a.state_names is not None and b.state_names is not None:
        names = [f"{a.state_names[sa]}*{b.state_names[sb]}" for sa, sb in order]
    return Lts(len(order), 0, alphabet, transitions, provenance, names)


def interrupt(
    e: Lts,
    e2: Lts,
    label: str,
    mapping: Mapping[int, int | Iterable[int]],
    require_total: bool = True,
) -> Lts:
    """Disjoint union of `e` and `e2` plus `label` transitions `s -> mapping[s]`.

    Once `label` fires only `e2` behaviour is reachable.  Map values may be
    sets of targets (the reconfiguration model is explicitly
    nondeterministic).  With `require_total` the map must cover every state
    of `e`; otherwise `label` is enabled exactly on the map's domain, which
    is how reconfiguration restricted to shared workspace cells is modelled.
    """
    validate_label(label)
    if label in e.alphabet or label in e2.alphabet:
        raise LabelClashError(f"interrupt label {label!r} already in an operand alphabet")
    norm: dict[int, tuple[int, ...]] = {}
    for s, tgt in mapping.items():
        if not (0 <= s < e.n_states):
            raise UnknownStateError(f"map source {s} not a state of the interrupted LTS")
        targets = (tgt,) if isinstance(tgt, int) else tuple(sorted(set(tgt)))
        if not targets:
            raise PartialMapError(f"map for state {s} has no targets")
        for t in targets:
            if not (0 <= t < e2.n_states):
                raise UnknownStateError(f"map target {t} not a state of the continuation LTS")
        norm[s] = targets
    if require_total:
        missing = [s for s in range(e.n_states) if s not in norm]
        if missing:
            raise PartialMapError(f"interrupt map misses states {missing[:8]}")
    off = e.n_states
    transitions = list(e.transitions)
    transitions += [(s + off, ev, t + off) for s, ev, t in e2.transitions]
    for s in sorted(norm):
        for t in norm[s]:
            transitions.append((s, label, t + off))
    provenance = [("pre", p) for p in e.provenance] + [("post", p) for p in e2.provenance]
    names = None
    if e.state_names is not None and e2.state_names is not None:
        names = list(e.state_names) + [f"{n}'" for n in e2.state_names]
    alphabet = e.alphabet | e2.alphabet | {label}
    return Lts(e.n_states + e2.n_states, e.initial, alphabet, transitions, provenance, names)


def reachable(l: Lts) -> Lts:
    """Restriction to states reachable from the initial state; idempotent."""
    seen = {l.initial}
    frontier = [l.initial]
    while frontier:
        s = frontier.pop()
        for targets in l.out(s).values():
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    if len(seen) == l.n_states:
        return l
    order = sorted(seen)
    remap = {old: new for new, old in enumerate(order)}
    transitions = [
        (remap[s], ev, remap[t]) for s, ev, t in l.transitions if s in seen and t in seen
    ]
    provenance = [l.provenance[s] for s in order]
    names = [l.state_names[s] for s in order] if l.state_names is not None else None
    return Lts(len(order), remap[l.initial], l.alphabet, transitions, provenance, names)


def deadlock_states(l: Lts) -> set[int]:
    """Reachable states with no outgoing transitions."""
    seen = {l.initial}
    frontier = [l.initial]
    dead: set[int] = set()
    while frontier:
        s = frontier.pop()
        out = l.out(s)
        if not out:
            dead.add(s)
        for targets in out.values():
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    return dead


def to_dot(l: Lts, title: str = "lts") -> str:
    """Graphviz dump for debugging."""
    lines = [f"digraph {title} {{", "  rankdir=LR;", f'  __init [shape=point]; __init -> {l.initial};']
    for s in range(l.n_states):
        lines.append(f'  {s} [label="{l.name_of(s)}"];')
    for s, ev, t in l.transitions:
        lines.append(f'  {s} -> {t} [label="{ev}"];')
    lines.append("}")
    return "\n".join(lines)
