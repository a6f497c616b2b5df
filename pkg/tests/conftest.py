"""Shared fixtures and independent oracles.

The oracles only use a monitor's ``admissible``/``step`` interface and
networkx; they never touch the library's exploration, safe-set or counting
code, so they can check it.
"""

import random
from pathlib import Path

import networkx as nx
import pytest

from scengen.monitor import VariableDecl, make_explicit_fsm, var

CASES = Path(__file__).resolve().parents[1] / "src" / "scengen" / "casestudies"
DATA = Path(__file__).resolve().parent / "data"

# variable layouts with at most 6 joint values
_LAYOUTS = [(2,), (3,), (4,), (5,), (6,), (2, 2), (2, 3), (3, 2)]


def random_variables(rng: random.Random, prefix="v") -> list:
    sizes = rng.choice(_LAYOUTS)
    return [VariableDecl(f"{prefix}{j}", tuple(f"a{k}" for k in range(n))) for j, n in enumerate(sizes)]


def random_monitor(rng: random.Random, prefix="v", max_states=50, density=None, variables=None):
    """Random partial deterministic FSM with at most ``max_states`` states."""
    variables = variables or random_variables(rng, prefix)
    n_states = rng.randint(1, max_states)
    p = density if density is not None else rng.uniform(0.1, 0.6)
    states = [f"s{k}" for k in range(n_states)]
    inputs = [()]
    for v in variables:
        inputs = [c + (x,) for c in inputs for x in v.domain]
    trans = []
    for s in states:
        for u in inputs:
            if rng.random() < p:
                trans.append((s, u, rng.choice(states)))
    return make_explicit_fsm(variables, states, "s0", trans)


def random_corpus(n, seed, **kw):
    rng = random.Random(seed)
    return [random_monitor(rng, **kw) for _ in range(n)]


def jet_monitor(name="j"):
    """The jet monitor of the recovery-window figure: '-' no-op, 'f' fault, 'r' repair, window 2-3."""
    v = var(name, "-", "f", "r")
    return make_explicit_fsm(
        [v],
        ["ok", "f1", "f2", "f3"],
        "ok",
        [
            ("ok", ["-"], "ok"),
            ("ok", ["f"], "f1"),
            ("f1", ["-"], "f2"),
            ("f2", ["-"], "f3"),
            ("f2", ["r"], "ok"),
            ("f3", ["r"], "ok"),
        ],
    )


# ---------------------------------------------------------------------------
# oracles


def reachable_graph(m) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_node(m.initial_key)
    todo = [m.initial_key]
    while todo:
        x = todo.pop()
        for u in m.admissible(x):
            y = m.step(x, u)
            if y not in g:
                todo.append(y)
            g.add_edge(x, y)
    return g


def oracle_safe_keys(m) -> set:
    """States from which some cycle is reachable."""
    g = reachable_graph(m)
    on_cycle = {x for comp in nx.strongly_connected_components(g) for x in comp
                if len(comp) > 1 or g.has_edge(x, x)}
    safe = set(on_cycle)
    for x in on_cycle:
        safe |= nx.ancestors(g, x)
    return safe


def oracle_prefixes(m, h, keep=None) -> list:
    """Sorted code tuples of all length-``h`` computations (through ``keep`` states only)."""
    out = []

    def rec(x, acc):
        if keep is not None and x not in keep:
            return
        if len(acc) == h:
            out.append(tuple(acc))
            return
        for u in m.admissible(x):
            rec(m.step(x, u), acc + [u.codes])

    rec(m.initial_key, [])
    return sorted(out)


def oracle_safe_prefixes(m, h) -> list:
    return oracle_prefixes(m, h, keep=oracle_safe_keys(m))


def oracle_count(m, h, keep=None) -> int:
    """Path count by memoized DFS (independent of the library's tables)."""
    memo = {}

    def rec(x, k):
        if keep is not None and x not in keep:
            return 0
        if k == 0:
            return 1
        if (x, k) not in memo:
            memo[(x, k)] = sum(rec(m.step(x, u), k - 1) for u in m.admissible(x))
        return memo[(x, k)]

    return rec(m.initial_key, h)


def constraint_nesting(spec) -> list:
    """Scenario pairs (a, b) with the same assumptions where b adds constraints to a."""
    parts = {}
    for n in spec.scenario_names():
        if n:
            terms = set(spec.expand(spec.scenario(n).terms))
            cons = {t for t in terms if spec.monitor(t).is_constraint}
            parts[n] = (frozenset(terms - cons), cons)
    return [
        (a, b)
        for a, (asm_a, con_a) in parts.items()
        for b, (asm_b, con_b) in parts.items()
        if asm_a == asm_b and con_a < con_b
    ]


def sg_prefixes(src, h) -> list:
    return [src.trace(i, h).codes for i in range(src.nb_traces(h))]


@pytest.fixture
def jet():
    return jet_monitor()
