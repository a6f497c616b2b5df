"""Textual monitor specifications (``.mon`` files).

Grammar, version 1::

    file        := [pragma] statement*
    pragma      := "#! scengen-dsl v1"                    (first line)
    statement   := var | monitor | scenario | group
    var         := "var" NAME "in" "{" value ("," value)* "}"
    monitor     := ("monitor" | "constraint") NAME ( "=" call | fsm )
    call        := NAME "(" [arg ("," arg)*] ")"
    arg         := [NAME "="] argval
    argval      := value | "[" [argval ("," argval)*] "]"
    fsm         := "fsm" ["over" NAME ("," NAME)*] "{" item* "}"
    item        := "state" NAME ["initial"] ";"
                 | "on" pattern "from" NAME "to" NAME ";"
    pattern     := "*" | NAME "=" value ("," NAME "=" value)*
    scenario    := "scenario" [NAME] "=" term ("&" term)*
    group       := "group" NAME "=" term ("&" term)*
    term        := NAME                 (a monitor, or an earlier group)
    value       := WORD | STRING        WORD = [A-Za-z0-9_+\\-.]+
    NAME        := [A-Za-z_][A-Za-z0-9_]*

``#`` starts a line comment. ``constraint`` declares a monitor that narrows
the scenarios of interest (as opposed to an assumption); constraint
selectivity compares a scenario with and without its constraints. Variables
omitted from an FSM pattern are wildcards, expanded in declared domain order.
An FSM ranges over the ``over`` variables, or else over every variable its
patterns mention (in declaration order).

Composition is ``&`` (conjunction). At compile time the monitors of a
scenario are grouped into independent factors: monitors sharing a variable
(transitively) are conjoined into one factor, disjoint groups stay separate.
A group used as a term stands for its members; otherwise groups only name
factors for reporting.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MonitorError, ScengenError
from .monitor import Monitor, VariableDecl, conjoin, make_explicit_fsm
from .templates import REGISTRY

DSL_VERSION = "v1"
PRAGMA = f"#! scengen-dsl {DSL_VERSION}"
KEYWORDS = {
    "var", "in", "monitor", "constraint", "fsm", "over", "state", "initial",
    "on", "from", "to", "scenario", "group",
}
_TOP = {"var", "monitor", "constraint", "scenario", "group"}
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_WORD = re.compile(r"[A-Za-z0-9_+\-.]+\Z")


@dataclass(frozen=True)
class Location:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


@dataclass
class Diagnostic:
    severity: str
    location: Location
    message: str
    code: str

    def format(self, filename: str | None = None) -> str:
        where = f"{filename}:{self.location}" if filename else str(self.location)
        return f"{where}: {self.severity} {self.code}: {self.message}"

    def __str__(self):
        return self.format()


class SpecError(ScengenError):
    """A specification failed to parse or compile; carries the diagnostics."""

    def __init__(self, diagnostics, filename=None):
        self.diagnostics = list(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# AST

_loc = field(default=None, compare=False, repr=False)


@dataclass
class Value:
    text: str
    quoted: bool = False
    loc: Location | None = _loc


@dataclass
class ListArg:
    items: list
    loc: Location | None = _loc


@dataclass
class Arg:
    key: str | None
    value: object  # Value | ListArg
    loc: Location | None = _loc


@dataclass
class TemplateCall:
    name: str
    args: list
    loc: Location | None = _loc


@dataclass
class StateDecl:
    name: str
    initial: bool = False
    loc: Location | None = _loc


@dataclass
class Transition:
    bindings: list  # [(var name, Value)]; empty list = "*"
    source: str
    target: str
    loc: Location | None = _loc


@dataclass
class FsmBody:
    over: list | None
    states: list
    transitions: list
    loc: Location | None = _loc


@dataclass
class VarDef:
    name: str
    values: list  # [Value]
    loc: Location | None = _loc


@dataclass
class MonitorDef:
    name: str
    kind: str  # "monitor" | "constraint"
    body: object  # TemplateCall | FsmBody
    loc: Location | None = _loc

    @property
    def is_constraint(self):
        return self.kind == "constraint"


@dataclass
class ScenarioDef:
    name: str | None
    terms: list
    loc: Location | None = _loc
    term_locs: list = field(default_factory=list, compare=False, repr=False)


@dataclass
class GroupDef:
    name: str
    terms: list
    loc: Location | None = _loc


@dataclass
class MonitorSpec:
    variables: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    groups: list = field(default_factory=list)
    scenarios: list = field(default_factory=list)
    version: str | None = None

    def variable(self, name) -> VarDef | None:
        return next((v for v in self.variables if v.name == name), None)

    def monitor(self, name) -> MonitorDef | None:
        return next((m for m in self.monitors if m.name == name), None)

    def scenario(self, name=None) -> ScenarioDef:
        """The named scenario; by default the unnamed one, else the first."""
        if name is None:
            for s in self.scenarios:
                if s.name is None:
                    return s
            if self.scenarios:
                return self.scenarios[0]
            raise SpecError([Diagnostic("error", Location(1, 1), "no scenario defined", "E211")])
        for s in self.scenarios:
            if s.name == name:
                return s
        raise SpecError(
            [Diagnostic("error", Location(1, 1), f"unknown scenario {name!r}", "E211")]
        )

    def scenario_names(self) -> list:
        return [s.name for s in self.scenarios]

    def group(self, name) -> GroupDef | None:
        return next((g for g in self.groups if g.name == name), None)

    def expand(self, terms) -> list:
        """Monitor names of ``terms``, with group names replaced by their members."""
        out = []
        for t in terms:
            g = self.group(t) if self.monitor(t) is None else None
            for n in self.expand(g.terms) if g is not None else [t]:
                if n not in out:
                    out.append(n)
        return out


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"""
    (?P<nl>\n)
  | (?P<ws>[ \t\r\f]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<word>[A-Za-z0-9_+\-.]+)
  | (?P<punct>[{}()\[\],;=&*])
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # word | string | punct | eof
    text: str
    loc: Location


def tokenize(text: str, diags: list) -> tuple:
    tokens = []
    version = None
    line, col0 = 1, 0
    first = True
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        loc = Location(line, m.start() - col0 + 1)
        if kind == "nl":
            line += 1
            col0 = m.end()
            continue
        if kind == "ws":
            continue
        if kind == "comment":
            body = m.group()
            if body.startswith("#!"):
                parts = body[2:].split()
                if not first or len(parts) != 2 or parts[0] != "scengen-dsl":
                    diags.append(Diagnostic("error", loc, f"malformed pragma {body!r}", "E102"))
                elif parts[1] != DSL_VERSION:
                    diags.append(
                        Diagnostic("error", loc, f"unsupported DSL version {parts[1]!r}", "E102")
                    )
                else:
                    version = parts[1]
            first = False
            continue
        first = False
        if kind == "bad":
            ch = m.group()
            msg = "unterminated string" if ch == '"' else f"unexpected character {ch!r}"
            diags.append(Diagnostic("error", loc, msg, "E100"))
            continue
        if kind == "string":
            raw = m.group()[1:-1]
            tokens.append(Token("string", re.sub(r"\\(.)", r"\1", raw), loc))
        else:
            tokens.append(Token(kind, m.group(), loc))
    tokens.append(Token("eof", "", Location(line, len(text) - col0 + 1)))
    return tokens, version


# ---------------------------------------------------------------------------
# parser


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, tokens, diags):
        self.toks = tokens
        self.i = 0
        self.diags = diags

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg, loc=None, code="E101"):
        self.diags.append(Diagnostic("error", loc or self.tok.loc, msg, code))
        raise _Abort

    def describe(self, t):
        return "end of file" if t.kind == "eof" else repr(t.text)

    def is_punct(self, ch):
        return self.tok.kind == "punct" and self.tok.text == ch

    def is_kw(self, kw):
        return self.tok.kind == "word" and self.tok.text == kw

    def expect_punct(self, ch):
        if not self.is_punct(ch):
            self.error(f"expected {ch!r}, found {self.describe(self.tok)}")
        return self.advance()

    def expect_kw(self, kw):
        if not self.is_kw(kw):
            self.error(f"expected {kw!r}, found {self.describe(self.tok)}")
        return self.advance()

    def name(self, what="name"):
        t = self.tok
        if t.kind != "word" or not _NAME.match(t.text) or t.text in KEYWORDS:
            self.error(f"expected {what}, found {self.describe(t)}")
        return self.advance()

    def value(self):
        t = self.tok
        if t.kind == "string":
            self.advance()
            return Value(t.text, True, t.loc)
        if t.kind == "word":
            self.advance()
            return Value(t.text, False, t.loc)
        self.error(f"expected a value, found {self.describe(t)}")

    def sync(self):
        """Skip to the next top-level statement keyword."""
        depth = 0
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "punct" and t.text == "{":
                depth += 1
            elif t.kind == "punct" and t.text == "}":
                depth = max(0, depth - 1)
                if depth == 0:
                    self.advance()
                    continue
            elif depth == 0 and t.kind == "word" and t.text in _TOP:
                return
            self.advance()

    def parse(self) -> MonitorSpec:
        spec = MonitorSpec()
        while self.tok.kind != "eof":
            start = self.i
            try:
                self.statement(spec)
            except _Abort:
                if self.i == start:
                    self.advance()
                self.sync()
        return spec

    def statement(self, spec):
        t = self.tok
        if self.is_kw("var"):
            self.advance()
            name = self.name("variable name")
            self.expect_kw("in")
            self.expect_punct("{")
            values = [self.value()]
            while self.is_punct(","):
                self.advance()
                values.append(self.value())
            self.expect_punct("}")
            spec.variables.append(VarDef(name.text, values, t.loc))
        elif self.is_kw("monitor") or self.is_kw("constraint"):
            kind = self.advance().text
            name = self.name("monitor name")
            if self.is_punct("="):
                self.advance()
                body = self.call()
            elif self.is_kw("fsm"):
                body = self.fsm()
            else:
                self.error(f"expected '=' or 'fsm', found {self.describe(self.tok)}")
            spec.monitors.append(MonitorDef(name.text, kind, body, t.loc))
        elif self.is_kw("scenario"):
            self.advance()
            name = None
            if not self.is_punct("="):
                name = self.name("scenario name").text
            self.expect_punct("=")
            terms, locs = self.terms()
            spec.scenarios.append(ScenarioDef(name, terms, t.loc, locs))
        elif self.is_kw("group"):
            self.advance()
            name = self.name("group name").text
            self.expect_punct("=")
            terms, _ = self.terms()
            spec.groups.append(GroupDef(name, terms, t.loc))
        else:
            self.error(
                f"expected 'var', 'monitor', 'constraint', 'scenario' or 'group', "
                f"found {self.describe(t)}"
            )

    def terms(self):
        first = self.name("monitor name")
        terms, locs = [first.text], [first.loc]
        while self.is_punct("&"):
            self.advance()
            t = self.name("monitor name")
            terms.append(t.text)
            locs.append(t.loc)
        return terms, locs

    def call(self):
        t = self.name("template name")
        self.expect_punct("(")
        args = []
        if not self.is_punct(")"):
            args.append(self.arg())
            while self.is_punct(","):
                self.advance()
                args.append(self.arg())
        self.expect_punct(")")
        return TemplateCall(t.text, args, t.loc)

    def arg(self):
        loc = self.tok.loc
        key = None
        nxt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
        if self.tok.kind == "word" and nxt is not None and nxt.kind == "punct" and nxt.text == "=":
            key = self.name("argument name").text
            self.advance()
        return Arg(key, self.argval(), loc)

    def argval(self):
        if self.is_punct("["):
            loc = self.advance().loc
            items = []
            if not self.is_punct("]"):
                items.append(self.argval())
                while self.is_punct(","):
                    self.advance()
                    items.append(self.argval())
            self.expect_punct("]")
            return ListArg(items, loc)
        return self.value()

    def fsm(self):
        loc = self.expect_kw("fsm").loc
        over = None
        if self.is_kw("over"):
            self.advance()
            over = [self.name("variable name").text]
            while self.is_punct(","):
                self.advance()
                over.append(self.name("variable name").text)
        self.expect_punct("{")
        states, trans = [], []
        while not self.is_punct("}"):
            t = self.tok
            if self.is_kw("state"):
                self.advance()
                name = self.name("state name").text
                initial = False
                if self.is_kw("initial"):
                    self.advance()
                    initial = True
                self.expect_punct(";")
                states.append(StateDecl(name, initial, t.loc))
            elif self.is_kw("on"):
                self.advance()
                bindings = []
                if self.is_punct("*"):
                    self.advance()
                else:
                    while True:
                        v = self.name("variable name")
                        self.expect_punct("=")
                        bindings.append((v.text, self.value()))
                        if not self.is_punct(","):
                            break
                        self.advance()
                self.expect_kw("from")
                src = self.name("state name").text
                self.expect_kw("to")
                dst = self.name("state name").text
                self.expect_punct(";")
                trans.append(Transition(bindings, src, dst, t.loc))
            else:
                self.error(f"expected 'state', 'on' or '}}', found {self.describe(t)}")
        self.expect_punct("}")
        return FsmBody(over, states, trans, loc)


def _validate(spec: MonitorSpec, diags: list):
    def err(loc, msg, code):
        diags.append(Diagnostic("error", loc or Location(1, 1), msg, code))

    seen_vars = {}
    for v in spec.variables:
        if v.name in seen_vars:
            err(v.loc, f"duplicate variable {v.name!r}", "E200")
            continue
        seen_vars[v.name] = v
        texts = [x.text for x in v.values]
        for j, x in enumerate(v.values):
            if x.text in texts[:j]:
                err(x.loc, f"duplicate value {x.text!r} in the domain of {v.name!r}", "E212")
    seen_mons = {}
    for m in spec.monitors:
        if m.name in seen_mons or m.name in seen_vars:
            err(m.loc, f"duplicate definition of {m.name!r}", "E200")
            continue
        seen_mons[m.name] = m
        body = m.body
        if isinstance(body, TemplateCall):
            if body.name not in REGISTRY:
                err(body.loc, f"unknown template {body.name!r}", "E203")
        else:
            _validate_fsm(m, body, seen_vars, err)
    seen_groups = set()
    for g in spec.groups:
        if g.name in seen_groups or g.name in seen_mons or g.name in seen_vars:
            err(g.loc, f"duplicate definition of {g.name!r}", "E200")
        for t in g.terms:
            if t not in seen_mons and t not in seen_groups:
                err(g.loc, f"unknown monitor or group {t!r} in group {g.name!r}", "E202")
        seen_groups.add(g.name)
    names = set()
    for s in spec.scenarios:
        if s.name in names:
            err(s.loc, f"duplicate scenario {s.name or '(default)'!r}", "E200")
        names.add(s.name)
        locs = s.term_locs or [s.loc] * len(s.terms)
        for t, loc in zip(s.terms, locs):
            if t not in seen_mons and t not in seen_groups:
                err(loc, f"unknown monitor {t!r}", "E202")


def _validate_fsm(m, body, variables, err):
    states = {}
    initial = []
    for s in body.states:
        if s.name in states:
            err(s.loc, f"duplicate state {s.name!r} in {m.name!r}", "E200")
        states[s.name] = s
        if s.initial:
            initial.append(s)
    if not body.states:
        err(body.loc, f"fsm {m.name!r} declares no state", "E208")
    elif len(initial) != 1:
        err(body.loc, f"fsm {m.name!r} must have exactly one initial state", "E208")
    for name in body.over or []:
        if name not in variables:
            err(body.loc, f"unknown variable {name!r}", "E201")
    for t in body.transitions:
        for name, val in t.bindings:
            vd = variables.get(name)
            if vd is None:
                err(t.loc, f"unknown variable {name!r}", "E201")
            elif val.text not in [x.text for x in vd.values]:
                err(val.loc, f"value {val.text!r} is not in the domain of {name!r}", "E205")
            elif body.over is not None and name not in body.over:
                err(t.loc, f"variable {name!r} is not in the 'over' list of {m.name!r}", "E201")
        if len({n for n, _ in t.bindings}) != len(t.bindings):
            err(t.loc, "variable bound twice in one pattern", "E101")
        for st in (t.source, t.target):
            if st not in states:
                err(t.loc, f"unknown state {st!r} in {m.name!r}", "E206")


def parse(text: str, filename: str | None = None) -> MonitorSpec:
    """Parse and name-check a specification; raise :class:`SpecError` on failure."""
    diags: list = []
    tokens, version = tokenize(text, diags)
    spec = _Parser(tokens, diags).parse()
    spec.version = version
    _validate(spec, diags)
    if diags:
        raise SpecError(sorted(diags, key=lambda d: (d.location.line, d.location.column)), filename)
    return spec


def load(path) -> MonitorSpec:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------------------
# pretty printer


def _fmt_value(v: Value) -> str:
    if v.quoted or not _WORD.match(v.text):
        return '"' + v.text.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return v.text


def _fmt_arg(a) -> str:
    if isinstance(a, ListArg):
        return "[" + ", ".join(_fmt_arg(x) for x in a.items) + "]"
    return _fmt_value(a)


def pretty(spec: MonitorSpec) -> str:
    """Canonical text for ``spec``; parsing it gives back an equal AST."""
    out = [PRAGMA, ""] if spec.version else []
    for v in spec.variables:
        out.append(f"var {v.name} in {{ " + ", ".join(_fmt_value(x) for x in v.values) + " }")
    if spec.variables:
        out.append("")
    for m in spec.monitors:
        b = m.body
        if isinstance(b, TemplateCall):
            args = ", ".join(
                (f"{a.key}=" if a.key else "") + _fmt_arg(a.value) for a in b.args
            )
            out.append(f"{m.kind} {m.name} = {b.name}({args})")
            continue
        over = f" over {', '.join(b.over)}" if b.over is not None else ""
        out.append(f"{m.kind} {m.name} fsm{over} {{")
        for s in b.states:
            out.append(f"    state {s.name}{' initial' if s.initial else ''};")
        for t in b.transitions:
            pat = ", ".join(f"{n}={_fmt_value(x)}" for n, x in t.bindings) or "*"
            out.append(f"    on {pat} from {t.source} to {t.target};")
        out.append("}")
    for g in spec.groups:
        out.append(f"group {g.name} = " + " & ".join(g.terms))
    for s in spec.scenarios:
        head = f"scenario {s.name} =" if s.name else "scenario ="
        out.append(head + " " + " & ".join(s.terms))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# compilation


@dataclass
class Factor:
    """Independent part of a compiled scenario."""

    name: str
    members: list
    monitor: Monitor

    @property
    def variables(self):
        return self.monitor.variables


@dataclass
class CompiledScenario:
    name: str | None
    factors: list
    constraints: list  # names of constraint monitors in the scenario
    assumption_factors: list  # factors with every constraint monitor removed

    def monitor(self) -> Monitor:
        """The full conjunction (variables in factor order)."""
        return conjoin(*(f.monitor for f in self.factors))

    @property
    def variables(self):
        return tuple(v for f in self.factors for v in f.variables)


class _Compiler:
    def __init__(self, spec: MonitorSpec):
        self.spec = spec
        self.vars = {v.name: VariableDecl(v.name, tuple(x.text for x in v.values)) for v in spec.variables}
        self.order = {v.name: i for i, v in enumerate(spec.variables)}
        self.cache: dict = {}
        self.diags: list = []

    def err(self, loc, msg, code):
        self.diags.append(Diagnostic("error", loc or Location(1, 1), msg, code))

    def build(self, name) -> Monitor | None:
        if name in self.cache:
            return self.cache[name]
        mdef = self.spec.monitor(name)
        try:
            if isinstance(mdef.body, TemplateCall):
                mon = self.template(mdef)
            else:
                mon = self.fsm(mdef)
        except MonitorError as exc:
            self.err(mdef.loc, f"in {name!r}: {exc}", "E209")
            mon = None
        self.cache[name] = mon
        return mon

    def convert(self, kind, a, call):
        v = a.value

        def bad(msg):
            self.err(a.loc or call.loc, f"{call.name}: {msg}", "E204")
            raise _Abort

        def scalar(x):
            if isinstance(x, ListArg):
                bad("expected a single value, found a list")
            return x.text

        def to_int(x):
            s = scalar(x)
            try:
                return int(s)
            except ValueError:
                bad(f"expected an integer, found {s!r}")

        def to_var(x):
            s = scalar(x)
            if s not in self.vars:
                self.err(x.loc or call.loc, f"unknown variable {s!r}", "E201")
                raise _Abort
            return self.vars[s]

        items = v.items if isinstance(v, ListArg) else [v]
        if kind == "var":
            return to_var(v)
        if kind == "vars":
            return [to_var(x) for x in items]
        if kind == "int":
            return to_int(v)
        if kind == "optint":
            return None if scalar(v) == "none" else to_int(v)
        if kind == "value":
            return scalar(v)
        if kind == "values":
            return [scalar(x) for x in items]
        if kind == "ints":
            return [to_int(x) for x in items]
        if kind == "bool":
            s = scalar(v)
            if s not in ("true", "false"):
                bad(f"expected true or false, found {s!r}")
            return s == "true"
        raise AssertionError(kind)

    def template(self, mdef):
        call = mdef.body
        factory, schema = REGISTRY[call.name]
        names = [p[0] for p in schema]
        kinds = {p[0]: p[1] for p in schema}
        given: dict = {}
        try:
            for j, a in enumerate(call.args):
                if a.key is None:
                    if given and any(x.key for x in call.args[:j]):
                        self.err(a.loc, f"{call.name}: positional argument after keyword", "E204")
                        raise _Abort
                    if j >= len(names):
                        self.err(a.loc, f"{call.name}: too many arguments", "E204")
                        raise _Abort
                    key = names[j]
                else:
                    key = a.key
                    if key not in kinds:
                        self.err(a.loc, f"{call.name}: unknown parameter {key!r}", "E204")
                        raise _Abort
                if key in given:
                    self.err(a.loc, f"{call.name}: parameter {key!r} given twice", "E204")
                    raise _Abort
                given[key] = self.convert(kinds[key], a, call)
            missing = [n for n, _, d in schema if d is ... and n not in given]
            if missing:
                self.err(call.loc, f"{call.name}: missing parameter(s) {', '.join(missing)}", "E204")
                raise _Abort
        except _Abort:
            return None
        mon = factory(**given)
        mon.name = mdef.name
        return mon

    def fsm(self, mdef):
        body = mdef.body
        if body.over is not None:
            names = list(body.over)
        else:
            mentioned = {n for t in body.transitions for n, _ in t.bindings}
            names = sorted(mentioned, key=lambda n: self.order[n])
        if not names:
            self.err(body.loc, f"fsm {mdef.name!r} ranges over no variable; use 'over'", "E201")
            return None
        variables = [self.vars[n] for n in names]
        states = [s.name for s in body.states]
        initial = next(s.name for s in body.states if s.initial)
        table: dict = {}
        ok = True
        for t in body.transitions:
            bound = {n: x.text for n, x in t.bindings}
            choices = [[bound[v.name]] if v.name in bound else list(v.domain) for v in variables]
            for combo in itertools.product(*choices):
                key = (t.source, combo)
                prev = table.get(key)
                if prev is not None and prev[0] != t.target:
                    self.err(
                        t.loc,
                        f"nondeterministic fsm {mdef.name!r}: from {t.source!r} on "
                        f"{dict(zip(names, combo))} already goes to {prev[0]!r} (line {prev[1].line})",
                        "E207",
                    )
                    ok = False
                    break
                table.setdefault(key, (t.target, t.loc))
        if not ok:
            return None
        trans = [(s, combo, dst) for (s, combo), (dst, _) in table.items()]
        return make_explicit_fsm(variables, states, initial, trans, name=mdef.name)

    def factors(self, terms, groups) -> list:
        mons = []
        for t in terms:
            m = self.build(t)
            if m is not None and t not in [n for n, _ in mons]:
                mons.append((t, m))
        # union-find over shared variables, groups ordered by first appearance
        parent = list(range(len(mons)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        owner: dict = {}
        for j, (_, m) in enumerate(mons):
            for v in m.variables:
                if v.name in owner:
                    parent[find(j)] = find(owner[v.name])
                else:
                    owner[v.name] = j
        buckets: dict = {}
        for j in range(len(mons)):
            buckets.setdefault(find(j), []).append(j)
        out = []
        for members in sorted(buckets.values(), key=lambda b: b[0]):
            names = [mons[j][0] for j in members]
            try:
                mon = conjoin(*(mons[j][1] for j in members))
            except MonitorError as exc:
                self.err(self.spec.monitor(names[0]).loc, str(exc), "E210")
                continue
            out.append(Factor(self.label(names, groups), names, mon))
        return out

    def label(self, names, groups) -> str:
        """Factor name: largest contained groups first, then the remaining monitors."""
        left = list(names)
        parts = []
        sized = sorted(((self.spec.expand(g.terms), g.name) for g in groups), key=lambda p: -len(p[0]))
        for members, gname in sized:
            if members and set(members) <= set(left):
                parts.append(gname)
                left = [n for n in left if n not in members]
        return "&".join(parts + left)


def compile_spec(spec: MonitorSpec, scenario: str | None = None) -> CompiledScenario:
    """Build the monitors of one scenario, split into independent factors."""
    sc = spec.scenario(scenario)
    comp = _Compiler(spec)
    terms = spec.expand(sc.terms)
    factors = comp.factors(terms, spec.groups)
    constraints = [t for t in terms if spec.monitor(t).is_constraint]
    base_terms = [t for t in terms if t not in constraints]
    base = comp.factors(base_terms, spec.groups) if base_terms else []
    if comp.diags:
        raise SpecError(comp.diags)
    return CompiledScenario(sc.name, factors, constraints, base)


def check(text: str) -> list:
    """All diagnostics for ``text`` (parse, then compile every scenario)."""
    try:
        spec = parse(text)
    except SpecError as exc:
        return exc.diagnostics
    diags = []
    comp = _Compiler(spec)
    for m in spec.monitors:
        comp.build(m.name)
    for s in spec.scenarios:
        comp.factors(spec.expand(s.terms), spec.groups)
    diags.extend(comp.diags)
    return diags
