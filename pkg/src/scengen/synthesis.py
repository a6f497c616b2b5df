"""Exploration of black-box monitors and synthesis of scenario generators.

A monitor may be *blocking*: some finite computations cannot be extended to
infinite ones. The scenario generator keeps only *safe* states, those from
which an infinite path exists (the greatest fixed point of
``safe(x) = exists u: f(x, u) defined and safe(f(x, u))``), and only the
transitions into them. The result is non-blocking and has exactly the traces
of the original monitor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .counting import CountTables, path_counts
from .errors import MonitorContractError, NoTracesError, ResourceLimitError
from .monitor import Assignment, Monitor, TracePrefix, conjoin

log = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_EDGES = 50_000_000


@dataclass
class ExploredGraph:
    """Reachable part of a monitor, in explicit form.

    ``succ[x]`` and ``inputs[x]`` are parallel lists: the ``j``-th edge out of
    state ``x`` reads ``alphabet[inputs[x][j]]`` and leads to ``succ[x][j]``.
    Edge lists are sorted by input index; ``alphabet`` holds the inputs that
    occur on some edge, in lexicographic order. State 0 is the initial state.
    """

    variables: tuple
    keys: list
    succ: list
    inputs: list
    alphabet: list

    @property
    def n_states(self) -> int:
        return len(self.keys)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    def edges(self, x):
        return list(zip(self.inputs[x], self.succ[x]))

    def declared_alphabet_size(self) -> int:
        n = 1
        for v in self.variables:
            n *= len(v.domain)
        return n

    def used_values(self) -> list:
        """Per variable, the set of value codes read on some edge."""
        used = [set() for _ in self.variables]
        for c in self.alphabet:
            for s, x in zip(used, c):
                s.add(x)
        return used

    def input_space_size(self) -> int:
        """Product over variables of the number of values they actually take.

        Variables pinned to one value count for 1, so a constraint that
        freezes some inputs shrinks the input space.
        """
        n = 1
        for s in self.used_values():
            n *= len(s)
        return n


def _check_sorted(monitor, key, moves):
    prev = None
    nvars = len(monitor.variables)
    for codes, _ in moves:
        if len(codes) != nvars or any(
            not 0 <= c < len(v.domain) for c, v in zip(codes, monitor.variables)
        ):
            raise MonitorContractError(f"monitor produced an assignment {codes!r} outside its domains")
        if prev is not None and codes <= prev:
            raise MonitorContractError(
                f"admissible inputs of state {key!r} are not strictly lexicographically sorted"
            )
        prev = codes


def explore(
    monitor: Monitor,
    max_states: int = DEFAULT_MAX_STATES,
    max_edges: int = DEFAULT_MAX_EDGES,
    check_contract: bool = True,
) -> ExploredGraph:
    """Depth-first exploration of every state reachable from the initial state."""
    index = {monitor.initial_key: 0}
    keys = [monitor.initial_key]
    raw: list = [None]
    moves_of: list = [None]
    verified = set()
    symbols: dict = {}
    n_edges = 0
    stack = [0]
    while stack:
        x = stack.pop()
        moves = monitor.transitions(keys[x])
        if check_contract:
            _check_sorted(monitor, keys[x], moves)
            moves_of[x] = moves
        row = []
        for codes, nkey in moves:
            y = index.get(nkey)
            if y is None:
                y = len(keys)
                if y >= max_states:
                    raise ResourceLimitError(
                        f"exploration exceeded max_states={max_states}", limit=max_states
                    )
                index[nkey] = y
                keys.append(nkey)
                raw.append(None)
                moves_of.append(None)
                stack.append(y)
            elif check_contract and y not in verified and moves_of[y] is not None:
                again = monitor.transitions(nkey)
                if again != moves_of[y]:
                    raise MonitorContractError(
                        f"state key {nkey!r} revisited with different admissible inputs"
                    )
                verified.add(y)
                moves_of[y] = None
            sid = symbols.get(codes)
            if sid is None:
                sid = symbols[codes] = len(symbols)
            row.append((sid, y))
        n_edges += len(row)
        if n_edges > max_edges:
            raise ResourceLimitError(f"exploration exceeded max_edges={max_edges}", limit=max_edges)
        raw[x] = row
    ordered = sorted(symbols, key=lambda c: c)
    remap = {symbols[c]: i for i, c in enumerate(ordered)}
    succ, inputs = [], []
    for row in raw:
        inputs.append([remap[s] for s, _ in row])
        succ.append([y for _, y in row])
    return ExploredGraph(tuple(monitor.variables), keys, succ, inputs, ordered)


def compute_safe_set(g: ExploredGraph) -> list:
    """Boolean flag per state: True iff the state lies on an infinite path.

    Worklist deletion: a state whose out-edges all lead to deleted states is
    deleted; each edge is examined once.
    """
    n = g.n_states
    remaining = [len(s) for s in g.succ]
    preds: list = [[] for _ in range(n)]
    for x, ys in enumerate(g.succ):
        for y in ys:
            preds[y].append(x)
    safe = [True] * n
    work = [x for x in range(n) if remaining[x] == 0]
    for x in work:
        safe[x] = False
    while work:
        y = work.pop()
        for x in preds[y]:
            if safe[x]:
                remaining[x] -= 1
                if remaining[x] == 0:
                    safe[x] = False
                    work.append(x)
    return safe


@dataclass
class Origin:
    """Provenance of a scenario generator."""

    description: str = ""
    components: list = field(default_factory=list)

    def as_dict(self):
        return {"description": self.description, "components": list(self.components)}


class ScenarioGenerator(Monitor):
    """Non-blocking monitor obtained by pruning unsafe states.

    It is itself a :class:`~scengen.monitor.Monitor` (state keys are those of
    the source monitor), so it can be conjoined or re-synthesized. Counting
    and unranking are delegated to lazily-built :class:`CountTables`.
    """

    def __init__(self, graph: ExploredGraph, origin: Origin | None = None, pruned_states: int = 0):
        self.graph = graph
        self.variables = graph.variables
        self.initial_key = graph.keys[0]
        self.origin = origin or Origin()
        self.pruned_states = pruned_states
        self._index = {k: i for i, k in enumerate(graph.keys)}
        self._symbol = {c: i for i, c in enumerate(graph.alphabet)}
        self.tables = CountTables(graph.succ)

    # monitor interface
    def transitions(self, key):
        x = self._index.get(key)
        if x is None:
            return []
        g = self.graph
        return [(g.alphabet[s], g.keys[y]) for s, y in zip(g.inputs[x], g.succ[x])]

    @property
    def n_states(self) -> int:
        return self.graph.n_states

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    def input_alphabet(self) -> list:
        return [Assignment(self.variables, c) for c in self.graph.alphabet]

    def input_space_size(self) -> int:
        return self.graph.input_space_size()

    def is_non_blocking(self) -> bool:
        return all(self.graph.succ)

    # counting and unranking
    def nb_traces(self, h: int) -> int:
        """Number of distinct length-``h`` prefixes of the generator's traces."""
        return self.tables.count(h)

    def trace(self, i: int, h: int) -> TracePrefix:
        """The ``i``-th length-``h`` prefix in lexicographic order."""
        path = self.tables.unrank(i, h)
        g = self.graph
        return TracePrefix(self.variables, [g.alphabet[g.inputs[x][j]] for x, j in path])

    def rank(self, p: TracePrefix) -> int:
        """Inverse of :meth:`trace`."""
        from .errors import InvalidPrefixError

        if tuple(v.name for v in p.variables) != self.variable_names:
            raise InvalidPrefixError("prefix variables do not match the generator's")
        g = self.graph
        choices = []
        x = 0
        for step, codes in enumerate(p.codes):
            s = self._symbol.get(codes)
            j = _find(g.inputs[x], s) if s is not None else -1
            if j < 0:
                raise InvalidPrefixError(
                    f"step {step}: input {Assignment(self.variables, codes)!r} is not "
                    f"admissible in the scenario generator",
                    step=step,
                )
            choices.append(j)
            x = g.succ[x][j]
        return self.tables.rank(choices)

    def __repr__(self):
        return f"ScenarioGenerator(states={self.n_states}, edges={self.n_edges})"


def _find(row, s):
    from bisect import bisect_left

    j = bisect_left(row, s)
    return j if j < len(row) and row[j] == s else -1


def prune(g: ExploredGraph, safe: list) -> ExploredGraph:
    """Keep safe states and the edges between them, compacting indices."""
    new_index = {}
    for x in range(g.n_states):
        if safe[x]:
            new_index[x] = len(new_index)
    keys, succ, inputs = [], [], []
    used = set()
    for x in range(g.n_states):
        if not safe[x]:
            continue
        keys.append(g.keys[x])
        ins, outs = [], []
        for s, y in zip(g.inputs[x], g.succ[x]):
            if safe[y]:
                ins.append(s)
                outs.append(new_index[y])
                used.add(s)
        inputs.append(ins)
        succ.append(outs)
    kept = sorted(used)
    remap = {s: i for i, s in enumerate(kept)}
    inputs = [[remap[s] for s in row] for row in inputs]
    return ExploredGraph(g.variables, keys, succ, inputs, [g.alphabet[s] for s in kept])


def synthesize_sg(monitor: Monitor, origin: Origin | str | None = None, **limits) -> ScenarioGenerator:
    """Explore ``monitor``, compute its safe states and prune the rest.

    Raises :class:`NoTracesError` when the initial state is unsafe.
    """
    return sg_from_graph(explore(monitor, **limits), origin or Origin(repr(monitor)))


def sg_from_graph(g: ExploredGraph, origin: Origin | str | None = None) -> ScenarioGenerator:
    """Synthesis on an already explored graph (see :func:`synthesize_sg`)."""
    safe = compute_safe_set(g)
    if not safe[0]:
        raise NoTracesError("the initial state is unsafe: the monitor entails no trace")
    if isinstance(origin, str):
        origin = Origin(origin)
    kept = prune(g, safe) if not all(safe) else g
    pruned = g.n_states - kept.n_states
    log.debug("synthesized SG: %d states (%d pruned), %d edges", kept.n_states, pruned, kept.n_edges)
    return ScenarioGenerator(kept, origin, pruned_states=pruned)


def incremental_regen(sg: ScenarioGenerator, extra: Monitor, **limits) -> ScenarioGenerator:
    """Further constrain an existing generator: ``Gen(sg ⋈ extra)``."""
    origin = Origin(
        f"({sg.origin.description}) & {extra!r}",
        list(sg.origin.components) + [repr(extra)],
    )
    return synthesize_sg(conjoin(sg, extra), origin, **limits)


def unpruned_path_count(monitor_or_graph, h: int) -> int:
    """Number of length-``h`` computations of a (possibly blocking) monitor."""
    g = monitor_or_graph
    if isinstance(g, Monitor):
        g = explore(g)
    return path_counts(g.succ, [h])[h]
