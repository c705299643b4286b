"""Textual specification language for control and update problems.

Process-algebra style state equations for LTS, composition and interrupt
expressions, fluent definitions, safety assertions in the supported
fragment, GR(1) liveness blocks and problem declarations, e.g.::

    CAP = (takeOff -> takeOff.end -> FLY),
    FLY = (go[i:0..2] -> at[j:0..2] -> FLY | land -> CAP).
    ||E = (MOVE || CAP).
    fluent at0 = <{at.0}, {at.1, at.2}, true>.
    assert safety NoBottom = [](!atNoFly).
    liveness Patrol = gr1(|- []<>at0, []<>at2).
    controllable = {go[0..2], takeOff, land}.
    problem control { env = E. safety = {NoBottom}. liveness = Patrol. }

Indexed families expand at parse time: `go[0..2]` in a label set means
go.0, go.1, go.2; `go[i:0..2] -> at[i]` in a process binds i per branch;
`forall i:0..2, j:0..2 where i != j :: [](...)` expands to a conjunction.
One document per ``.fsl`` file.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import fltl
from .fltl import (
    Always,
    AlwaysImplWeakUntil,
    And,
    BoolExpr,
    Conj,
    FluentDef,
    Gr1Liveness,
    Implies,
    Lit,
    Not,
    Or,
    SafetyFormula,
    Var,
    WeakUntil,
)
from .lts import Lts, compose, interrupt

__all__ = [
    "ComponentMap",
    "CompositionDecl",
    "ControlDecl",
    "Diagnostic",
    "InterruptDecl",
    "SpecDocument",
    "SpecError",
    "SpecFragmentError",
    "SpecSyntaxError",
    "UpdateDecl",
    "emit",
    "parse",
    "validate",
]


class SpecError(Exception):
    """Base class; carries a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class SpecSyntaxError(SpecError):
    pass


class SpecNameError(SpecError):
    pass


class SpecFragmentError(SpecError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


# ---------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class CompositionDecl:
    name: str
    components: tuple[str, ...]


@dataclass(frozen=True)
class InterruptDecl:
    name: str
    pre: str
    post: str
    label: str
    entries: tuple[tuple[str, tuple[str, ...]], ...]  # state name -> target names
    identity: bool = False
    total: bool = True


@dataclass(frozen=True)
class ComponentMap:
    old: str
    new: str
    entries: tuple[tuple[str, tuple[str, ...]], ...] = ()
    identity: bool = False


@dataclass(frozen=True)
class ControlDecl:
    env: str
    safety: tuple[str, ...]
    liveness: str | None


@dataclass(frozen=True)
class UpdateDecl:
    old_env: str
    new_env: str
    old_safety: tuple[str, ...]
    old_liveness: str | None
    new_safety: tuple[str, ...]
    new_liveness: str | None
    theta: tuple[str, ...]
    maps: tuple[ComponentMap, ...]


@dataclass
class SpecDocument:
    """Parsed document: named models, formulas and the problem declaration."""

    processes: dict[str, Lts] = field(default_factory=dict)
    compositions: dict[str, CompositionDecl] = field(default_factory=dict)
    interrupts: dict[str, InterruptDecl] = field(default_factory=dict)
    fluents: dict[str, FluentDef] = field(default_factory=dict)
    safety: dict[str, SafetyFormula] = field(default_factory=dict)
    liveness: dict[str, Gr1Liveness] = field(default_factory=dict)
    controllable: tuple[str, ...] = ()
    uncontrolled: tuple[str, ...] = ()
    problem: ControlDecl | UpdateDecl | None = None
    order: list[tuple[str, str]] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, SpecDocument):
            return NotImplemented
        return (
            self.processes == other.processes
            and self.compositions == other.compositions
            and self.interrupts == other.interrupts
            and self.fluents == other.fluents
            and self.safety == other.safety
            and self.liveness == other.liveness
            and self.controllable == other.controllable
            and self.uncontrolled == other.uncontrolled
            and self.problem == other.problem
        )

    # -- resolution -----------------------------------------------------

    def model_names(self) -> list[str]:
        return list(self.processes) + list(self.compositions) + list(self.interrupts)

    def components_of(self, name: str) -> tuple[str, ...]:
        if name in self.compositions:
            return self.compositions[name].components
        return (name,)

    def lts(self, name: str) -> Lts:
        """Resolve a model name to its LTS (compositions/interrupts computed)."""
        if name in self.processes:
            return self.processes[name]
        if name in self.compositions:
            parts = [self.lts(c) for c in self.compositions[name].components]
            out = parts[0]
            for p in parts[1:]:
                out = compose(out, p)
            return out
        if name in self.interrupts:
            d = self.interrupts[name]
            pre, post = self.lts(d.pre), self.lts(d.post)
            if d.identity:
                mapping = {s: s for s in range(pre.n_states)}
            else:
                mapping = {
                    pre.state_by_name(src): tuple(post.state_by_name(t) for t in tgts)
                    for src, tgts in d.entries
                }
            return interrupt(pre, post, d.label, mapping, require_total=d.total)
        raise SpecNameError(f"unknown model {name!r}")

    def used_events(self) -> frozenset[str]:
        events: set[str] = set()
        for p in self.processes.values():
            events |= p.alphabet
        for d in self.interrupts.values():
            events.add(d.label)
        for f in self.fluents.values():
            events |= f.initiating | f.terminating
        return frozenset(events)


# ---------------------------------------------------------------------------
# lexer

_SYMBOLS = [
    ("[]<>", "BOXDIAMOND"),
    ("[]", "BOX"),
    ("||", "PARPAR"),
    ("|-", "TURNSTILE"),
    ("|", "PIPE"),
    ("->", "ARROW"),
    ("::", "COLONCOLON"),
    ("..", "DOTDOT"),
    ("&&", "AND"),
    ("!=", "NEQ"),
    ("!", "NOT"),
    ("<>", "DIAMOND"),
    ("<", "LT"),
    (">", "GT"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    ("{", "LBRACE"),
    ("}", "RBRACE"),
    ("[", "LBRACK"),
    ("]", "RBRACK"),
    (",", "COMMA"),
    (".", "DOT"),
    (":", "COLON"),
    ("=", "EQ"),
    ("+", "PLUS"),
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def ident_char(c: str) -> bool:
        return c.isalnum() or c in "_?"

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n:
                if ident_char(text[j]):
                    j += 1
                elif text[j] == "." and j + 1 < n and ident_char(text[j + 1]) and text[j + 1] != "?":
                    j += 2
                    while j < n and ident_char(text[j]):
                        j += 1
                else:
                    break
            toks.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym, kind in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token(kind, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise SpecSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        self.doc = SpecDocument()

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def take(self, kind: str, what: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise SpecSyntaxError(f"expected {what or kind}, found {t.text or t.kind!r}", t.line, t.col)
        self.pos += 1
        return t

    def take_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "IDENT" or t.text != word:
            raise SpecSyntaxError(f"expected {word!r}, found {t.text or t.kind!r}", t.line, t.col)
        self.pos += 1
        return t

    def error(self, msg: str) -> SpecSyntaxError:
        t = self.peek()
        return SpecSyntaxError(msg, t.line, t.col)

    # document
    def parse_document(self) -> SpecDocument:
        while not self.at("EOF"):
            self.parse_decl()
        return self.doc

    def parse_decl(self) -> None:
        t = self.peek()
        if t.kind == "PARPAR":
            self.parse_composition()
        elif t.kind == "IDENT" and t.text == "fluent":
            self.parse_fluent()
        elif t.kind == "IDENT" and t.text == "assert":
            self.parse_assert()
        elif t.kind == "IDENT" and t.text == "liveness":
            self.parse_liveness()
        elif t.kind == "IDENT" and t.text == "controllable":
            self.pos += 1
            self.take("EQ")
            self.doc.controllable = tuple(self.parse_label_set())
            self.take("DOT")
            self.doc.order.append(("controllable", ""))
        elif t.kind == "IDENT" and t.text == "uncontrolled":
            self.pos += 1
            self.take("EQ")
            self.doc.uncontrolled = tuple(self.parse_label_set())
            self.take("DOT")
            self.doc.order.append(("uncontrolled", ""))
        elif t.kind == "IDENT" and t.text == "problem":
            self.parse_problem()
        elif t.kind == "IDENT":
            if self.peek(1).kind == "EQ" and self.peek(2).kind == "IDENT" and self.peek(2).text == "interrupt":
                self.parse_interrupt()
            else:
                self.parse_process()
        else:
            raise self.error(f"unexpected {t.text or t.kind!r} at top level")

    # -- labels and label sets -------------------------------------------

    def parse_label_atom(self, env: dict[str, int] | None = None) -> list[str]:
        """A label possibly carrying [int], [var], or [lo..hi] expansions."""
        base = self.take("IDENT", "label").text
        labels = [base]
        while self.at("LBRACK"):
            self.pos += 1
            suffixes = self.parse_index_values(env)
            self.take("RBRACK")
            labels = [f"{l}.{s}" for l in labels for s in suffixes]
        return labels

    def parse_index_values(self, env: dict[str, int] | None) -> list[int]:
        t = self.peek()
        if t.kind == "INT":
            lo = int(self.take("INT").text)
            if self.at("DOTDOT"):
                self.pos += 1
                hi = int(self.take("INT").text)
                if hi < lo:
                    raise self.error(f"empty range {lo}..{hi}")
                return list(range(lo, hi + 1))
            return [lo]
        if t.kind == "IDENT":
            name = self.take("IDENT").text
            if self.at("COLON"):
                raise self.error("index binder not allowed here")
            if env is None or name not in env:
                raise SpecNameError(f"unbound index {name!r}", t.line, t.col)
            return [env[name]]
        raise self.error("expected index")

    def parse_label_set(self) -> list[str]:
        self.take("LBRACE")
        out: list[str] = []
        if not self.at("RBRACE"):
            out.extend(self.parse_label_atom())
            while self.at("COMMA"):
                self.pos += 1
                out.extend(self.parse_label_atom())
        self.take("RBRACE")
        seen = set()
        uniq = []
        for l in out:
            if l not in seen:
                seen.add(l)
                uniq.append(l)
        return uniq

    # -- processes ---------------------------------------------------------

    def parse_process(self) -> None:
        first = self.take("IDENT", "process name")
        name = first.text
        if name in self.doc.processes or name in self.doc.compositions or name in self.doc.interrupts:
            raise SpecNameError(f"model {name!r} already defined", first.line, first.col)
        self.take("EQ")
        # first pass: find the equation boundaries so state ids follow
        # equation order regardless of forward references in bodies
        equations: list[tuple[str, int]] = [(name, self.pos)]
        self.skip_body()
        while self.at("COMMA"):
            self.pos += 1
            t = self.take("IDENT", "local state name")
            self.take("EQ")
            equations.append((t.text, self.pos))
            self.skip_body()
        extra: list[str] = []
        if self.at("PLUS"):
            self.pos += 1
            extra = self.parse_label_set()
        self.take("DOT")
        end = self.pos
        builder = _ProcessBuilder(self, name)
        for local, _ in equations:
            builder.state(local)
        for local, start in equations:
            self.pos = start
            builder.equation(local)
        self.pos = end
        self.doc.processes[name] = builder.build(extra)
        self.doc.order.append(("process", name))

    def skip_body(self) -> None:
        """Skip one equation body: balanced parens up to depth-0 , + or ."""
        depth = 0
        while True:
            t = self.peek()
            if t.kind == "EOF":
                raise self.error("unterminated process body")
            if t.kind == "LPAREN":
                depth += 1
            elif t.kind == "RPAREN":
                depth -= 1
                if depth < 0:
                    raise self.error("unbalanced )")
            elif depth == 0 and t.kind in ("COMMA", "PLUS", "DOT"):
                return
            self.pos += 1

    def parse_composition(self) -> None:
        self.take("PARPAR")
        name = self.take("IDENT", "composition name").text
        self.take("EQ")
        self.take("LPAREN")
        comps = [self.take("IDENT", "component").text]
        while self.at("PARPAR"):
            self.pos += 1
            comps.append(self.take("IDENT", "component").text)
        self.take("RPAREN")
        self.take("DOT")
        for c in comps:
            if c not in self.doc.model_names():
                raise SpecNameError(f"unknown component {c!r}")
        self.doc.compositions[name] = CompositionDecl(name, tuple(comps))
        self.doc.order.append(("composition", name))

    def parse_interrupt(self) -> None:
        name = self.take("IDENT").text
        self.take("EQ")
        self.take_kw("interrupt")
        self.take("LPAREN")
        pre = self.take("IDENT", "interrupted model").text
        self.take("COMMA")
        post = self.take("IDENT", "continuation model").text
        self.take("COMMA")
        label = self.parse_label_atom()
        if len(label) != 1:
            raise self.error("interrupt label must be a single event")
        self.take("COMMA")
        identity = False
        entries: list[tuple[str, tuple[str, ...]]] = []
        if self.at("IDENT", "identity"):
            self.pos += 1
            identity = True
        else:
            self.take("LBRACE")
            if not self.at("RBRACE"):
                entries.append(self.parse_map_entry())
                while self.at("COMMA"):
                    self.pos += 1
                    entries.append(self.parse_map_entry())
            self.take("RBRACE")
        total = True
        if self.at("COMMA"):
            self.pos += 1
            self.take_kw("partial")
            total = False
        self.take("RPAREN")
        self.take("DOT")
        for m in (pre, post):
            if m not in self.doc.model_names():
                raise SpecNameError(f"unknown model {m!r}")
        self.doc.interrupts[name] = InterruptDecl(
            name, pre, post, label[0], tuple(entries), identity, total
        )
        self.doc.order.append(("interrupt", name))

    def parse_map_entry(self) -> tuple[str, tuple[str, ...]]:
        src = self.take("IDENT", "state name").text
        self.take("ARROW")
        if self.at("LBRACE"):
            self.pos += 1
            tgts = [self.take("IDENT", "state name").text]
            while self.at("COMMA"):
                self.pos += 1
                tgts.append(self.take("IDENT", "state name").text)
            self.take("RBRACE")
        else:
            tgts = [self.take("IDENT", "state name").text]
        return src, tuple(tgts)

    # -- fluents -----------------------------------------------------------

    def parse_fluent(self) -> None:
        self.take_kw("fluent")
        t = self.take("IDENT", "fluent name")
        name = t.text
        if name in self.doc.fluents:
            raise SpecNameError(f"fluent {name!r} already defined", t.line, t.col)
        self.take("EQ")
        self.take("LT")
        initiating = self.parse_label_set()
        self.take("COMMA")
        terminating = self.parse_label_set()
        initial = False
        if self.at("COMMA"):
            self.pos += 1
            w = self.take("IDENT", "true or false")
            if w.text not in ("true", "false"):
                raise SpecSyntaxError("expected true or false", w.line, w.col)
            initial = w.text == "true"
        self.take("GT")
        self.take("DOT")
        try:
            self.doc.fluents[name] = FluentDef(name, frozenset(initiating), frozenset(terminating), initial)
        except fltl.FltlError as e:
            raise SpecError(str(e), t.line, t.col) from e
        self.doc.order.append(("fluent", name))

    # -- formulas ------------------------------------------------------------

    def parse_assert(self) -> None:
        self.take_kw("assert")
        if self.at("IDENT", "safety"):
            self.pos += 1
        t = self.take("IDENT", "assertion name")
        name = t.text
        if name in self.doc.safety:
            raise SpecNameError(f"assertion {name!r} already defined", t.line, t.col)
        self.take("EQ")
        f = self.parse_safety_formula()
        self.take("DOT")
        self.doc.safety[name] = f
        self.doc.order.append(("safety", name))

    def parse_safety_formula(self, env: dict[str, int] | None = None) -> SafetyFormula:
        items = [self.parse_safety_unit(env)]
        while self.at("AND"):
            self.pos += 1
            items.append(self.parse_safety_unit(env))
        return items[0] if len(items) == 1 else Conj(*items)

    def parse_safety_unit(self, env: dict[str, int] | None) -> SafetyFormula:
        t = self.peek()
        if t.kind == "IDENT" and t.text == "forall":
            return self.parse_forall(env)
        if t.kind == "BOX":
            self.pos += 1
            self.take("LPAREN")
            e = self.parse_wexpr(env)
            self.take("RPAREN")
            return self.classify_boxed(e, t)
        if t.kind == "LPAREN":
            mark = self.pos
            try:
                e = self.parse_wexpr(env)
                if isinstance(e, _WExprNode):
                    return WeakUntil(self.no_w(e.lhs, t), self.no_w(e.rhs, t))
            except SpecError:
                pass
            self.pos = mark
            self.pos += 1
            f = self.parse_safety_formula(env)
            self.take("RPAREN")
            return f
        # top-level weak until
        e = self.parse_wexpr(env)
        if isinstance(e, _WExprNode):
            return WeakUntil(self.no_w(e.lhs, t), self.no_w(e.rhs, t))
        raise SpecFragmentError("formula outside the safety fragment (expected [] or W)", t.line, t.col)

    def classify_boxed(self, e, t: Token) -> SafetyFormula:
        if isinstance(e, _WExprNode):
            return AlwaysImplWeakUntil(Lit(True), self.no_w(e.lhs, t), self.no_w(e.rhs, t))
        if isinstance(e, Implies) and isinstance(e.rhs, _WExprNode):
            return AlwaysImplWeakUntil(
                self.no_w(e.lhs, t), self.no_w(e.rhs.lhs, t), self.no_w(e.rhs.rhs, t)
            )
        return Always(self.no_w(e, t))

    def no_w(self, e, t: Token) -> BoolExpr:
        if _contains_w(e):
            raise SpecFragmentError("W may not nest inside boolean operators", t.line, t.col)
        return e

    def parse_forall(self, outer_env: dict[str, int] | None) -> SafetyFormula:
        self.take_kw("forall")
        binders: list[tuple[str, int, int]] = []
        while True:
            var = self.take("IDENT", "index variable").text
            self.take("COLON")
            lo = int(self.take("INT").text)
            self.take("DOTDOT")
            hi = int(self.take("INT").text)
            binders.append((var, lo, hi))
            if self.at("COMMA"):
                self.pos += 1
                continue
            break
        conds: list[tuple[str, str]] = []
        if self.at("IDENT", "where"):
            self.pos += 1
            a = self.take("IDENT").text
            self.take("NEQ")
            b = self.take("IDENT").text
            conds.append((a, b))
        self.take("COLONCOLON")
        mark = self.pos
        items: list[SafetyFormula] = []
        end = mark
        for combo in itertools.product(*[range(lo, hi + 1) for _, lo, hi in binders]):
            env = dict(outer_env or {})
            env.update({var: val for (var, _, _), val in zip(binders, combo)})
            self.pos = mark
            f = self.parse_safety_unit(env)
            end = self.pos
            if any(env[a] == env[b] for a, b in conds):
                continue
            items.append(f)
        self.pos = end
        if not items:
            return Always(Lit(True))
        return Conj(*items) if len(items) > 1 else items[0]

    # boolean expressions, with W as the loosest binary operator
    def parse_wexpr(self, env):
        lhs = self.parse_impl(env)
        if self.at("IDENT", "W"):
            self.pos += 1
            rhs = self.parse_impl(env)
            return _WExprNode(lhs, rhs)
        return lhs

    def parse_impl(self, env):
        lhs = self.parse_or(env)
        if self.at("ARROW"):
            self.pos += 1
            return Implies(lhs, self.parse_impl(env))
        return lhs

    def parse_or(self, env):
        items = [self.parse_and(env)]
        while self.at("PARPAR"):
            self.pos += 1
            items.append(self.parse_and(env))
        return items[0] if len(items) == 1 else Or(*items)

    def parse_and(self, env):
        items = [self.parse_unary(env)]
        while self.at("AND"):
            self.pos += 1
            items.append(self.parse_unary(env))
        return items[0] if len(items) == 1 else And(*items)

    def parse_unary(self, env):
        t = self.peek()
        if t.kind in ("DIAMOND", "BOX", "BOXDIAMOND"):
            raise SpecFragmentError(
                "temporal operator inside a boolean expression is outside the "
                "supported fragment; encode liveness-referencing transition "
                "requirements as an explicit monitor process instead",
                t.line, t.col,
            )
        if t.kind == "NOT":
            self.pos += 1
            return Not(self.parse_unary(env))
        if t.kind == "LPAREN":
            self.pos += 1
            e = self.parse_wexpr(env)
            self.take("RPAREN")
            return e
        if t.kind == "IDENT" and t.text in ("true", "false"):
            self.pos += 1
            return Lit(t.text == "true")
        if t.kind == "IDENT":
            self.pos += 1
            name = t.text
            while self.at("LBRACK"):
                self.pos += 1
                vals = self.parse_index_values(env)
                if len(vals) != 1:
                    raise SpecSyntaxError("ranges not allowed on formula atoms", t.line, t.col)
                self.take("RBRACK")
                name = f"{name}{vals[0]}"
            return Var(name)
        raise self.error("expected boolean expression")

    # -- liveness -----------------------------------------------------------

    def parse_liveness(self) -> None:
        self.take_kw("liveness")
        t = self.take("IDENT", "liveness name")
        name = t.text
        if name in self.doc.liveness:
            raise SpecNameError(f"liveness {name!r} already defined", t.line, t.col)
        self.take("EQ")
        self.take_kw("gr1")
        self.take("LPAREN")
        assumptions: list[BoolExpr] = []
        guarantees: list[BoolExpr] = []
        if not self.at("TURNSTILE"):
            assumptions.append(self.parse_recurrence())
            while self.at("COMMA"):
                self.pos += 1
                assumptions.append(self.parse_recurrence())
        self.take("TURNSTILE")
        guarantees.append(self.parse_recurrence())
        while self.at("COMMA"):
            self.pos += 1
            guarantees.append(self.parse_recurrence())
        self.take("RPAREN")
        self.take("DOT")
        self.doc.liveness[name] = Gr1Liveness(tuple(assumptions), tuple(guarantees))
        self.doc.order.append(("liveness", name))

    def parse_recurrence(self) -> BoolExpr:
        self.take("BOXDIAMOND", "[]<>")
        e = self.parse_wexpr(None)
        if _contains_w(e):
            raise self.error("W not allowed in liveness")
        return e

    # -- problems -------------------------------------------------------------

    def parse_problem(self) -> None:
        self.take_kw("problem")
        kind = self.take("IDENT", "control or update").text
        if self.doc.problem is not None:
            raise self.error("document already declares a problem")
        if kind == "control":
            self.doc.problem = self.parse_control_block()
        elif kind == "update":
            self.doc.problem = self.parse_update_block()
        else:
            raise self.error("problem kind must be control or update")
        self.doc.order.append(("problem", ""))

    def parse_name_list(self) -> tuple[str, ...]:
        self.take("LBRACE")
        names = []
        if not self.at("RBRACE"):
            names.append(self.take("IDENT").text)
            while self.at("COMMA"):
                self.pos += 1
                names.append(self.take("IDENT").text)
        self.take("RBRACE")
        return tuple(names)

    def parse_control_block(self) -> ControlDecl:
        self.take("LBRACE")
        env = None
        safety: tuple[str, ...] = ()
        liveness = None
        while not self.at("RBRACE"):
            key = self.take("IDENT", "control-problem field").text
            self.take("EQ")
            if key == "env":
                env = self.take("IDENT").text
            elif key == "safety":
                safety = self.parse_name_list()
            elif key == "liveness":
                liveness = self.take("IDENT").text
            else:
                raise self.error(f"unknown control-problem field {key!r}")
            self.take("DOT")
        self.take("RBRACE")
        if env is None:
            raise self.error("control problem needs env")
        return ControlDecl(env, safety, liveness)

    def parse_update_block(self) -> UpdateDecl:
        self.take("LBRACE")
        fields: dict[str, object] = {
            "oldEnv": None, "newEnv": None, "oldLiveness": None, "newLiveness": None,
            "oldSafety": (), "newSafety": (), "theta": (),
        }
        maps: list[ComponentMap] = []
        while not self.at("RBRACE"):
            key = self.take("IDENT", "update-problem field").text
            if key == "map":
                old = self.take("IDENT").text
                self.take("ARROW")
                new = self.take("IDENT").text
                if self.at("IDENT", "identity"):
                    self.pos += 1
                    maps.append(ComponentMap(old, new, (), True))
                else:
                    self.take("LBRACE")
                    entries = []
                    if not self.at("RBRACE"):
                        entries.append(self.parse_map_entry())
                        while self.at("COMMA"):
                            self.pos += 1
                            entries.append(self.parse_map_entry())
                    self.take("RBRACE")
                    maps.append(ComponentMap(old, new, tuple(entries), False))
                self.take("DOT")
                continue
            self.take("EQ")
            if key in ("oldEnv", "newEnv", "oldLiveness", "newLiveness"):
                fields[key] = self.take("IDENT").text
            elif key in ("oldSafety", "newSafety", "theta"):
                fields[key] = self.parse_name_list()
            else:
                raise self.error(f"unknown update-problem field {key!r}")
            self.take("DOT")
        self.take("RBRACE")
        if fields["oldEnv"] is None or fields["newEnv"] is None:
            raise self.error("update problem needs oldEnv and newEnv")
        return UpdateDecl(
            fields["oldEnv"], fields["newEnv"],
            fields["oldSafety"], fields["oldLiveness"],
            fields["newSafety"], fields["newLiveness"],
            fields["theta"], tuple(maps),
        )


def _contains_w(e) -> bool:
    if isinstance(e, _WExprNode):
        return True
    if isinstance(e, Not):
        return _contains_w(e.body)
    if isinstance(e, (And, Or)):
        return any(_contains_w(i) for i in e.items)
    if isinstance(e, Implies):
        return _contains_w(e.lhs) or _contains_w(e.rhs)
    return False


@dataclass(frozen=True)
class _WExprNode:
    lhs: object
    rhs: object


# process body construction ---------------------------------------------------


class _ProcessBuilder:
    def __init__(self, parser: _Parser, name: str):
        self.p = parser
        self.name = name
        self.locals: dict[str, int] = {}
        self.names: list[str] = []
        self.bodies: dict[int, object] = {}
        self.transitions: list[tuple[int, str, int]] = []
        self.alphabet: set[str] = set()
        self.stop_state: int | None = None

    def state(self, name: str) -> int:
        if name not in self.locals:
            self.locals[name] = len(self.names)
            self.names.append(name)
        return self.locals[name]

    def fresh(self) -> int:
        sid = len(self.names)
        self.names.append(f"_{self.name}{sid}")
        return sid

    def equation(self, local: str) -> None:
        sid = self.state(local)
        if sid in self.bodies:
            raise self.p.error(f"state {local!r} defined twice")
        self.bodies[sid] = True
        t = self.p.peek()
        if t.kind == "IDENT" and t.text == "STOP":
            self.p.pos += 1
            return
        self.p.take("LPAREN")
        self.parse_choice(sid, {})
        self.p.take("RPAREN")

    def parse_choice(self, src: int, env: dict[str, int]) -> None:
        self.parse_branch(src, env)
        while self.p.at("PIPE"):
            self.p.pos += 1
            self.parse_branch(src, env)

    def parse_branch(self, src: int, env: dict[str, int]) -> None:
        # one step: label (with optional binders) then continuation
        labels_with_env = self.parse_step_labels(env)
        mark = self.p.pos
        for label, env2 in labels_with_env:
            self.p.pos = mark
            self.alphabet.add(label)
            self.p.take("ARROW")
            tgt = self.parse_continuation(env2)
            self.transitions.append((src, label, tgt))

    def parse_step_labels(self, env: dict[str, int]) -> list[tuple[str, dict[str, int]]]:
        t = self.p.take("IDENT", "event label")
        base = t.text
        combos: list[tuple[str, dict[str, int]]] = [(base, dict(env))]
        while self.p.at("LBRACK"):
            self.p.pos += 1
            nt = self.p.peek()
            if nt.kind == "IDENT" and self.p.peek(1).kind == "COLON":
                var = self.p.take("IDENT").text
                self.p.take("COLON")
                lo = int(self.p.take("INT").text)
                self.p.take("DOTDOT")
                hi = int(self.p.take("INT").text)
                combos = [
                    (f"{l}.{v}", {**e, var: v})
                    for l, e in combos
                    for v in range(lo, hi + 1)
                ]
            else:
                vals = self.p.parse_index_values(env)
                combos = [(f"{l}.{v}", e) for l, e in combos for v in vals]
            self.p.take("RBRACK")
        return combos

    def parse_continuation(self, env: dict[str, int]) -> int:
        t = self.p.peek()
        if t.kind == "IDENT" and t.text == "STOP":
            self.p.pos += 1
            if self.stop_state is None:
                self.stop_state = self.fresh()
            return self.stop_state
        if t.kind == "IDENT" and self.p.peek(1).kind in ("RPAREN", "PIPE"):
            self.p.pos += 1
            return self.state(t.text)
        if t.kind == "LPAREN":
            self.p.pos += 1
            sid = self.fresh()
            self.parse_choice(sid, env)
            self.p.take("RPAREN")
            return sid
        # a further step: label -> ...
        sid = self.fresh()
        labels_with_env = self.parse_step_labels_at(sid, env)
        return sid

    def parse_step_labels_at(self, src: int, env: dict[str, int]):
        labels_with_env = self.parse_step_labels(env)
        mark = self.p.pos
        for label, env2 in labels_with_env:
            self.p.pos = mark
            self.alphabet.add(label)
            self.p.take("ARROW")
            tgt = self.parse_continuation(env2)
            self.transitions.append((src, label, tgt))
        return labels_with_env

    def build(self, extra: list[str]) -> Lts:
        undefined = [
            n for n, sid in self.locals.items()
            if sid not in self.bodies and not n.startswith("_") and sid != self.stop_state
        ]
        if undefined:
            raise SpecNameError(f"undefined local state(s) {undefined} in process {self.name!r}")
        return Lts(
            len(self.names),
            0,
            self.alphabet | set(extra),
            self.transitions,
            state_names=self.names,
        )


# ---------------------------------------------------------------------------
# public API


def parse(text: str) -> SpecDocument:
    """Parse a document; raises SpecError subclasses with line/column."""
    try:
        return _Parser(text).parse_document()
    except SpecError:
        raise
    except fltl.FltlError as e:
        raise SpecError(str(e)) from e
    except RecursionError as e:
        raise SpecSyntaxError("nesting too deep") from e


def emit(doc: SpecDocument) -> str:
    """Canonical text for a document; declaration order is preserved."""
    chunks: list[str] = []
    emitted: set[tuple[str, str]] = set()
    order = list(doc.order)
    for kind, registry in (
        ("process", doc.processes),
        ("composition", doc.compositions),
        ("interrupt", doc.interrupts),
        ("fluent", doc.fluents),
        ("safety", doc.safety),
        ("liveness", doc.liveness),
    ):
        for name in registry:
            if (kind, name) not in order:
                order.append((kind, name))
    if ("controllable", "") not in order and doc.controllable:
        order.append(("controllable", ""))
    if ("uncontrolled", "") not in order and doc.uncontrolled:
        order.append(("uncontrolled", ""))
    if ("problem", "") not in order and doc.problem is not None:
        order.append(("problem", ""))
    for kind, name in order:
        if (kind, name) in emitted:
            continue
        emitted.add((kind, name))
        if kind == "process":
            chunks.append(_emit_process(name, doc.processes[name]))
        elif kind == "composition":
            d = doc.compositions[name]
            chunks.append(f"||{name} = ({' || '.join(d.components)}).")
        elif kind == "interrupt":
            chunks.append(_emit_interrupt(doc.interrupts[name]))
        elif kind == "fluent":
            f = doc.fluents[name]
            init = ", true" if f.initial else ""
            chunks.append(
                f"fluent {name} = <{{{', '.join(sorted(f.initiating))}}}, "
                f"{{{', '.join(sorted(f.terminating))}}}{init}>."
            )
        elif kind == "safety":
            chunks.append(f"assert safety {name} = {_emit_safety(doc.safety[name])}.")
        elif kind == "liveness":
            l = doc.liveness[name]
            a = ", ".join(f"[]<>{fltl.paren(e)}" for e in l.assumptions)
            g = ", ".join(f"[]<>{fltl.paren(e)}" for e in l.guarantees)
            chunks.append(f"liveness {name} = gr1({a} |- {g}).")
        elif kind == "controllable":
            chunks.append(f"controllable = {{{', '.join(doc.controllable)}}}.")
        elif kind == "uncontrolled":
            chunks.append(f"uncontrolled = {{{', '.join(doc.uncontrolled)}}}.")
        elif kind == "problem":
            chunks.append(_emit_problem(doc.problem))
    return "\n".join(chunks) + "\n"


def _emit_process(name: str, l: Lts) -> str:
    names = list(l.state_names) if l.state_names else [f"Q{i}" for i in range(l.n_states)]
    if l.initial != 0:
        order = [l.initial] + [s for s in range(l.n_states) if s != l.initial]
    else:
        order = list(range(l.n_states))
    remap = {old: i for i, old in enumerate(order)}
    eqs = []
    used_labels: set[str] = set()
    for pos, s in enumerate(order):
        lhs = name if pos == 0 else names[s]
        branches = []
        for ev in l.enabled(s):
            used_labels.add(ev)
            for t in l.succ(s, ev):
                tgt = name if remap[t] == 0 else names[t]
                branches.append(f"{ev} -> {tgt}")
        eqs.append(f"{lhs} = ({' | '.join(branches)})" if branches else f"{lhs} = STOP")
    extra = sorted(l.alphabet - used_labels)
    suffix = f" + {{{', '.join(extra)}}}" if extra else ""
    return ",\n".join(eqs) + suffix + "."


def _emit_interrupt(d: InterruptDecl) -> str:
    if d.identity:
        mp = "identity"
    else:
        parts = []
        for src, tgts in d.entries:
            rhs = tgts[0] if len(tgts) == 1 else "{" + ", ".join(tgts) + "}"
            parts.append(f"{src} -> {rhs}")
        mp = "{" + ", ".join(parts) + "}"
    partial = ", partial" if not d.total else ""
    return f"{d.name} = interrupt({d.pre}, {d.post}, {d.label}, {mp}{partial})."


def _emit_safety(f: SafetyFormula) -> str:
    if isinstance(f, Conj):
        return " && ".join(f"({_emit_safety(i)})" for i in f.items)
    if isinstance(f, Always):
        return f"[]({f.body})"
    if isinstance(f, WeakUntil):
        return f"({f.hold}) W ({f.release})"
    if isinstance(f, AlwaysImplWeakUntil):
        return f"[](({f.trigger}) -> (({f.hold}) W ({f.release})))"
    raise SpecError(f"cannot emit {f!r}")


def _emit_problem(p: ControlDecl | UpdateDecl) -> str:
    if isinstance(p, ControlDecl):
        lines = [f"problem control {{", f"  env = {p.env}."]
        if p.safety:
            lines.append(f"  safety = {{{', '.join(p.safety)}}}.")
        if p.liveness:
            lines.append(f"  liveness = {p.liveness}.")
        lines.append("}")
        return "\n".join(lines)
    lines = ["problem update {"]
    lines.append(f"  oldEnv = {p.old_env}.")
    lines.append(f"  newEnv = {p.new_env}.")
    if p.old_safety:
        lines.append(f"  oldSafety = {{{', '.join(p.old_safety)}}}.")
    if p.old_liveness:
        lines.append(f"  oldLiveness = {p.old_liveness}.")
    if p.new_safety:
        lines.append(f"  newSafety = {{{', '.join(p.new_safety)}}}.")
    if p.new_liveness:
        lines.append(f"  newLiveness = {p.new_liveness}.")
    if p.theta:
        lines.append(f"  theta = {{{', '.join(p.theta)}}}.")
    for m in p.maps:
        if m.identity:
            lines.append(f"  map {m.old} -> {m.new} identity.")
        else:
            parts = []
            for src, tgts in m.entries:
                rhs = tgts[0] if len(tgts) == 1 else "{" + ", ".join(tgts) + "}"
                parts.append(f"{src} -> {rhs}")
            lines.append(f"  map {m.old} -> {m.new} {{{', '.join(parts)}}}.")
    lines.append("}")
    return "\n".join(lines)


DCU_EVENTS = ("hotSwap", "stopOld", "startNew", "reconfig")
DCU_FLUENTS = ("HotSwap", "OldStopped", "NewStarted", "Reconfigured")


def validate(doc: SpecDocument) -> list[Diagnostic]:
    """Semantic diagnostics; empty list means the document is coherent."""
    out: list[Diagnostic] = []

    def diag(code: str, message: str) -> None:
        out.append(Diagnostic(code, message, 0, 0))

    events = doc.used_events()
    declared_fluents = frozenset(doc.fluents)
    if isinstance(doc.problem, UpdateDecl):
        # the update-goal builder injects the distinguished events and their
        # never-resetting fluents; update documents may reference them
        events |= frozenset(DCU_EVENTS)
        declared_fluents |= frozenset(DCU_FLUENTS)

    overlap = set(doc.controllable) & set(doc.uncontrolled)
    if overlap:
        diag("PartitionOverlap", f"events declared both controllable and uncontrolled: {sorted(overlap)}")
    if doc.controllable:
        rogue = set(doc.controllable) - events
        if rogue:
            diag("UnknownEvent", f"controllable events never used: {sorted(rogue)}")

    for name, f in doc.fluents.items():
        missing = (f.initiating | f.terminating) - events
        if missing:
            diag("UnknownEvent", f"fluent {name} references undeclared events {sorted(missing)}")

    def check_names(owner: str, names: frozenset[str]) -> None:
        for n in sorted(names):
            if n not in declared_fluents and n not in events:
                diag("UnresolvedName", f"{owner} references unknown atom {n!r}")

    for name, f in doc.safety.items():
        check_names(f"assertion {name}", f.names())
    for name, l in doc.liveness.items():
        check_names(f"liveness {name}", l.names())

    def check_model(owner: str, name: str) -> None:
        if name not in doc.model_names():
            diag("UnresolvedName", f"{owner} references unknown model {name!r}")

    def check_formula_ref(owner: str, name: str, registry: dict) -> None:
        if name not in registry:
            diag("UnresolvedName", f"{owner} references unknown formula {name!r}")

    p = doc.problem
    if isinstance(p, ControlDecl):
        check_model("control problem", p.env)
        for s in p.safety:
            check_formula_ref("control problem", s, doc.safety)
        if p.liveness:
            check_formula_ref("control problem", p.liveness, doc.liveness)
    elif isinstance(p, UpdateDecl):
        check_model("update problem", p.old_env)
        check_model("update problem", p.new_env)
        for s in p.old_safety + p.new_safety + p.theta:
            check_formula_ref("update problem", s, doc.safety)
        for lname in (p.old_liveness, p.new_liveness):
            if lname:
                check_formula_ref("update problem", lname, doc.liveness)
        if not out:
            old_comps = doc.components_of(p.old_env)
            new_comps = doc.components_of(p.new_env)
            mapped = {m.old for m in p.maps}
            for m in p.maps:
                if m.old not in old_comps:
                    diag("UnresolvedName", f"map source {m.old!r} is not a component of {p.old_env}")
                    continue
                if m.new not in new_comps:
                    diag("UnresolvedName", f"map target {m.new!r} is not a component of {p.new_env}")
                    continue
                old_l, new_l = doc.lts(m.old), doc.lts(m.new)
                if m.identity:
                    if old_l.n_states != new_l.n_states:
                        diag("PartialMap", f"identity map {m.old}->{m.new} over different state counts")
                    continue
                for src, tgts in m.entries:
                    if old_l.state_names is None or src not in old_l.state_names:
                        diag("PartialMap", f"map {m.old}->{m.new}: unknown source state {src!r}")
                    for t in tgts:
                        if new_l.state_names is None or t not in new_l.state_names:
                            diag("PartialMap", f"map {m.old}->{m.new}: unknown target state {t!r}")
            for comp in old_comps:
                if comp not in mapped and comp not in new_comps:
                    diag("PartialMap", f"component {comp!r} of {p.old_env} has no map into {p.new_env}")

    if doc.controllable and doc.uncontrolled:
        covered = set(doc.controllable) | set(doc.uncontrolled) | set(DCU_EVENTS)
        uncovered = events - covered
        if uncovered:
            diag("PartitionGap", f"events not covered by the declared partition: {sorted(uncovered)}")
    return out
