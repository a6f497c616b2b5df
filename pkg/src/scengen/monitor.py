"""Monitors: deterministic, partial, finite-memory acceptors of input sequences.

A monitor reads one assignment to its input variables per time unit. Its
transition function is partial: an assignment is *admissible* in a state when
the transition is defined. Infinite computation paths from the initial state
are the legal scenarios.

States are opaque to the algorithms but must be exposed through canonical
byte-string keys (equal states give equal keys), which is what makes
visited-set membership and product pairing well defined.

Assignments are ordered lexicographically: first by variable declaration
order, then by declared domain order.
"""

from __future__ import annotations

import re
from abc import ABC
from array import array
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Mapping, Sequence

from .errors import MonitorError

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Codes = tuple  # tuple[int, ...]: domain indices, one per variable


@dataclass(frozen=True)
class VariableDecl:
    """An input variable with an ordered finite domain of symbolic values."""

    name: str
    domain: tuple

    def __post_init__(self):
        if not isinstance(self.name, str) or not _NAME_RE.match(self.name):
            raise MonitorError(f"invalid variable name {self.name!r}")
        dom = tuple(str(v) for v in self.domain)
        if not dom:
            raise MonitorError(f"variable {self.name!r} has an empty domain")
        if len(set(dom)) != len(dom):
            raise MonitorError(f"variable {self.name!r} has duplicate domain values")
        object.__setattr__(self, "domain", dom)

    def __len__(self):
        return len(self.domain)

    def code(self, value) -> int:
        try:
            return self.domain.index(str(value))
        except ValueError:
            raise MonitorError(
                f"value {value!r} is not in the domain of {self.name!r} {list(self.domain)}"
            ) from None


def var(name: str, *domain) -> VariableDecl:
    """Shorthand: ``var("v", "-", "f", "r")`` or ``var("v", ["-", "f", "r"])``."""
    if len(domain) == 1 and not isinstance(domain[0], str):
        domain = tuple(domain[0])
    return VariableDecl(name, tuple(domain))


@total_ordering
class Assignment(Mapping):
    """A total binding of a variable set to domain values.

    Behaves as a read-only mapping ``name -> value``. Two assignments over the
    same variables compare lexicographically by declaration order, then by
    domain order.
    """

    __slots__ = ("variables", "codes")

    def __init__(self, variables: Sequence[VariableDecl], codes: Sequence[int]):
        self.variables = tuple(variables)
        self.codes = tuple(codes)
        if len(self.codes) != len(self.variables):
            raise MonitorError("assignment arity does not match its variables")

    @classmethod
    def from_values(cls, variables: Sequence[VariableDecl], values) -> "Assignment":
        """Build from a mapping ``name -> value`` or a sequence of values."""
        variables = tuple(variables)
        if isinstance(values, Mapping):
            extra = set(values) - {v.name for v in variables}
            if extra:
                raise MonitorError(f"unknown variable(s) {sorted(extra)}")
            missing = [v.name for v in variables if v.name not in values]
            if missing:
                raise MonitorError(f"assignment does not bind {missing}")
            values = [values[v.name] for v in variables]
        values = list(values)
        if len(values) != len(variables):
            raise MonitorError("assignment arity does not match its variables")
        return cls(variables, [v.code(x) for v, x in zip(variables, values)])

    @property
    def values(self) -> tuple:
        return tuple(v.domain[c] for v, c in zip(self.variables, self.codes))

    def __getitem__(self, name):
        for v, c in zip(self.variables, self.codes):
            if v.name == name:
                return v.domain[c]
        raise KeyError(name)

    def __iter__(self):
        return (v.name for v in self.variables)

    def __len__(self):
        return len(self.variables)

    def __hash__(self):
        return hash((tuple(v.name for v in self.variables), self.codes))

    def __eq__(self, other):
        if isinstance(other, Assignment):
            return self.variables == other.variables and self.codes == other.codes
        return Mapping.__eq__(self, other)

    def __lt__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        if self.variables != other.variables:
            raise TypeError("cannot order assignments over different variables")
        return self.codes < other.codes

    def __repr__(self):
        inner = ", ".join(f"{k}:{v}" for k, v in self.items())
        return "{" + inner + "}"


def project(u: Assignment, names: Iterable[str]) -> Assignment:
    """Restrict ``u`` to the variables in ``names`` (kept in ``u``'s order)."""
    names = set(names)
    known = {v.name for v in u.variables}
    unknown = names - known
    if unknown:
        raise MonitorError(f"cannot project onto unknown variable(s) {sorted(unknown)}")
    keep = [i for i, v in enumerate(u.variables) if v.name in names]
    return Assignment([u.variables[i] for i in keep], [u.codes[i] for i in keep])


@total_ordering
class TracePrefix:
    """A finite sequence of assignments over one variable set."""

    __slots__ = ("variables", "codes")

    def __init__(self, variables: Sequence[VariableDecl], codes: Iterable[Sequence[int]]):
        self.variables = tuple(variables)
        self.codes = tuple(tuple(c) for c in codes)
        n = len(self.variables)
        if any(len(c) != n for c in self.codes):
            raise MonitorError("every step of a trace prefix must bind the same variables")

    @classmethod
    def from_steps(cls, variables, steps) -> "TracePrefix":
        """Build from a list of mappings (or value sequences), one per time unit."""
        variables = tuple(variables)
        return cls(variables, [Assignment.from_values(variables, s).codes for s in steps])

    @property
    def h(self) -> int:
        return len(self.codes)

    def __len__(self):
        return len(self.codes)

    @property
    def steps(self) -> list:
        return [Assignment(self.variables, c) for c in self.codes]

    def __getitem__(self, j) -> Assignment:
        return Assignment(self.variables, self.codes[j])

    def as_dicts(self) -> list:
        return [
            {v.name: v.domain[c] for v, c in zip(self.variables, step)} for step in self.codes
        ]

    def project(self, names) -> "TracePrefix":
        names = set(names)
        keep = [i for i, v in enumerate(self.variables) if v.name in names]
        if len(keep) != len(names):
            raise MonitorError("cannot project onto unknown variables")
        return TracePrefix(
            [self.variables[i] for i in keep], [tuple(c[i] for i in keep) for c in self.codes]
        )

    def __eq__(self, other):
        if not isinstance(other, TracePrefix):
            return NotImplemented
        return self.variables == other.variables and self.codes == other.codes

    def __lt__(self, other):
        if not isinstance(other, TracePrefix):
            return NotImplemented
        if self.variables != other.variables:
            raise TypeError("cannot order trace prefixes over different variables")
        return self.codes < other.codes

    def __hash__(self):
        return hash((tuple(v.name for v in self.variables), self.codes))

    def __repr__(self):
        return f"TracePrefix(h={self.h}, {self.as_dicts()!r})"


# ---------------------------------------------------------------------------
# state keys


def pack_ints(state) -> bytes:
    """Canonical key for a tuple of small signed integers."""
    return array("i", state).tobytes()


def unpack_ints(key: bytes) -> tuple:
    a = array("i")
    a.frombytes(key)
    return tuple(a)


def pair_keys(ka: bytes, kb: bytes) -> bytes:
    return len(ka).to_bytes(4, "big") + ka + kb


def split_key(key: bytes) -> tuple:
    n = int.from_bytes(key[:4], "big")
    return key[4 : 4 + n], key[4 + n :]


def join_keys(keys) -> bytes:
    """Generalization of :func:`pair_keys` to any number of keys."""
    out = bytearray()
    for k in keys[:-1]:
        out += len(k).to_bytes(4, "big")
        out += k
    out += keys[-1]
    return bytes(out)


def split_keys(key: bytes, n: int) -> list:
    out = []
    at = 0
    for _ in range(n - 1):
        m = int.from_bytes(key[at : at + 4], "big")
        out.append(key[at + 4 : at + 4 + m])
        at += 4 + m
    out.append(key[at:])
    return out


# ---------------------------------------------------------------------------
# the monitor abstraction


class Monitor(ABC):
    """Black-box deterministic partial transition system.

    Subclasses provide ``variables`` and ``initial_key`` and override either
    :meth:`transitions` or the pair :meth:`admissible` / :meth:`step`.
    ``transitions(key)`` returns ``(codes, next_key)`` pairs sorted strictly by
    ``codes``; it is the fast path used by exploration.

    Implementations must be pure functions of the state key so that a single
    monitor can be queried from several threads.
    """

    variables: tuple
    initial_key: bytes

    @property
    def variable_names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    def transitions(self, key: bytes) -> list:
        if type(self).admissible is Monitor.admissible:
            raise NotImplementedError(
                f"{type(self).__name__} must override transitions() or admissible()/step()"
            )
        out = []
        for u in self.admissible(key):
            nxt = self.step(key, u)
            if nxt is None:
                raise MonitorError("admissible() listed an input for which step() is undefined")
            out.append((u.codes, nxt))
        return out

    def admissible(self, key: bytes) -> list:
        return [Assignment(self.variables, c) for c, _ in self.transitions(key)]

    def step(self, key: bytes, u) -> bytes | None:
        if not isinstance(u, Assignment):
            u = Assignment.from_values(self.variables, u)
        elif u.variables != self.variables:
            u = Assignment.from_values(self.variables, dict(u))
        for codes, nxt in self.transitions(key):
            if codes == u.codes:
                return nxt
        return None

    def alphabet_size(self) -> int:
        n = 1
        for v in self.variables:
            n *= len(v.domain)
        return n

    def __and__(self, other: "Monitor") -> "Monitor":
        return conjoin(self, other)


def _all_codes(variables) -> list:
    """Every assignment over ``variables`` in lexicographic order."""
    out = [()]
    for v in variables:
        out = [c + (i,) for c in out for i in range(len(v.domain))]
    return out


class ExplicitMonitor(Monitor):
    """Monitor backed by an explicit transition table."""

    def __init__(self, variables, states, initial, table, name=None):
        self.variables = tuple(variables)
        self.states = tuple(states)
        self.name = name
        self._keys = {s: str(s).encode() for s in self.states}
        self._by_key = {k: s for s, k in self._keys.items()}
        self.initial = initial
        self.initial_key = self._keys[initial]
        self._table = {s: sorted(row.items()) for s, row in table.items()}

    def key_of(self, state) -> bytes:
        return self._keys[state]

    def state_of(self, key: bytes):
        return self._by_key[key]

    def transitions(self, key):
        state = self._by_key.get(key)
        if state is None:
            return []
        return [(c, self._keys[t]) for c, t in self._table.get(state, ())]

    def __repr__(self):
        return f"ExplicitMonitor({self.name or ''!s}, states={len(self.states)})"


def make_explicit_fsm(variables, states, initial, transitions, name=None) -> ExplicitMonitor:
    """Build a monitor from an explicit table.

    ``transitions`` is an iterable of ``(source, assignment, target)`` where
    ``assignment`` is a mapping ``name -> value`` (or a value sequence in
    variable order), or a mapping ``{(source, assignment): target}`` with
    assignments given as value tuples.
    """
    variables = tuple(variables)
    states = list(states)
    if len(set(states)) != len(states):
        raise MonitorError("duplicate state names")
    known = set(states)
    if initial not in known:
        raise MonitorError(f"initial state {initial!r} is not declared")
    if isinstance(transitions, Mapping):
        transitions = [(s, a, t) for (s, a), t in transitions.items()]
    table: dict = {s: {} for s in states}
    for entry in transitions:
        try:
            src, assignment, dst = entry
        except (TypeError, ValueError):
            raise MonitorError(f"malformed transition {entry!r}") from None
        if src not in known:
            raise MonitorError(f"transition {entry!r}: unknown source state {src!r}")
        if dst not in known:
            raise MonitorError(f"transition {entry!r}: dangling target state {dst!r}")
        if isinstance(assignment, Assignment):
            assignment = dict(assignment)
        elif isinstance(assignment, str):
            assignment = (assignment,)
        try:
            codes = Assignment.from_values(variables, assignment).codes
        except MonitorError as exc:
            raise MonitorError(f"transition {entry!r}: {exc}") from None
        prev = table[src].get(codes)
        if prev is not None and prev != dst:
            raise MonitorError(
                f"nondeterministic transition {entry!r}: already leads to {prev!r}"
            )
        table[src][codes] = dst
    return ExplicitMonitor(variables, states, initial, table, name=name)


class ConjointMonitor(Monitor):
    """The product ``a ⋈ b ⋈ ...``: every component must accept its projection.

    Variables are listed by first appearance across the components. A state
    key concatenates the component keys, each but the last prefixed with its
    4-byte length (for two components this is :func:`pair_keys`).
    """

    def __init__(self, *parts: Monitor):
        if len(parts) < 2:
            raise MonitorError("a conjoint monitor needs at least two components")
        seen: dict = {}
        variables = []
        for m in parts:
            for v in m.variables:
                if v.name in seen:
                    if seen[v.name].domain != v.domain:
                        raise MonitorError(
                            f"shared variable {v.name!r} has different domains: "
                            f"{list(seen[v.name].domain)} vs {list(v.domain)}"
                        )
                else:
                    seen[v.name] = v
                    variables.append(v)
        self.parts = tuple(parts)
        self.variables = tuple(variables)
        pos = {v.name: i for i, v in enumerate(variables)}
        # per component after the first: (local shared idx, global shared idx, local new idx)
        self._plan = []
        bound = {v.name for v in parts[0].variables}
        for m in parts[1:]:
            names = [v.name for v in m.variables]
            shared = [i for i, n in enumerate(names) if n in bound]
            extra = [i for i, n in enumerate(names) if n not in bound]
            self._plan.append((shared, [pos[names[i]] for i in shared], extra))
            bound.update(names)
        self.initial_key = join_keys([m.initial_key for m in parts])

    @property
    def a(self) -> Monitor:
        return self.parts[0]

    @property
    def b(self) -> Monitor:
        return self.parts[1] if len(self.parts) == 2 else ConjointMonitor(*self.parts[1:])

    def transitions(self, key):
        keys = split_keys(key, len(self.parts))
        first = self.parts[0].transitions(keys[0])
        if not first:
            return []
        rows = [(tuple(c), (k,)) for c, k in first]
        for m, k, (ls, gs, le) in zip(self.parts[1:], keys[1:], self._plan):
            tm = m.transitions(k)
            if not tm:
                return []
            groups: dict = {}
            for c, nk in tm:
                groups.setdefault(tuple(c[i] for i in ls), []).append((tuple(c[i] for i in le), nk))
            nxt = []
            for codes, ks in rows:
                for extra, nk in groups.get(tuple(codes[i] for i in gs), ()):
                    nxt.append((codes + extra, ks + (nk,)))
            if not nxt:
                return []
            rows = nxt
        out = [(codes, join_keys(ks)) for codes, ks in rows]
        out.sort(key=lambda t: t[0])
        return out

    def __repr__(self):
        return f"ConjointMonitor({', '.join(repr(m) for m in self.parts)})"


def conjoin(*monitors: Monitor) -> Monitor:
    """Conjoin one or more monitors (a single monitor is returned as is)."""
    if not monitors:
        raise MonitorError("conjoin needs at least one monitor")
    if len(monitors) == 1:
        return monitors[0]
    return ConjointMonitor(*monitors)


class UnconstrainedMonitor(Monitor):
    """Single-state monitor accepting every assignment over its variables."""

    def __init__(self, variables):
        self.variables = tuple(variables)
        self.initial_key = b""
        self._moves = [(c, b"") for c in _all_codes(self.variables)]

    def transitions(self, key):
        return list(self._moves)
