"""Build solver inputs from parsed specification documents."""

from __future__ import annotations

from .fltl import Always, Conj, Gr1Liveness, Lit, SafetyFormula
from .lts import Alphabet
from .speclang import ControlDecl, SpecDocument, UpdateDecl
from .synthesis import ControlProblem, SynthesisError

__all__ = ["alphabet_of_doc", "conj_of", "control_problem"]


def alphabet_of_doc(doc: SpecDocument, extra_events: frozenset[str] = frozenset()) -> Alphabet:
    events = doc.used_events() | extra_events
    controlled = frozenset(doc.controllable) & events
    uncontrolled = events - controlled
    return Alphabet(controlled, uncontrolled)


def conj_of(doc: SpecDocument, names) -> SafetyFormula:
    if not names:
        return Always(Lit(True))
    items = [doc.safety[n] for n in names]
    return items[0] if len(items) == 1 else Conj(*items)


def control_problem(doc: SpecDocument) -> ControlProblem:
    if not isinstance(doc.problem, ControlDecl):
        raise SynthesisError("document does not declare a control problem")
    decl = doc.problem
    liveness = doc.liveness[decl.liveness] if decl.liveness else Gr1Liveness()
    return ControlProblem(
        env=doc.lts(decl.env),
        alphabet=alphabet_of_doc(doc),
        fluents=tuple(doc.fluents.values()),
        safety=conj_of(doc, decl.safety),
        liveness=liveness,
    )
