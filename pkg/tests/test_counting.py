import random

import pytest

from scengen.counting import CountTables, memory_limit, path_counts
from scengen.dsl import compile_spec, load
from scengen.errors import IndexOutOfBoundsError, InvalidPrefixError, ResourceLimitError
from scengen.monitor import TracePrefix, UnconstrainedMonitor, VariableDecl, conjoin, var
from scengen.synthesis import synthesize_sg

from conftest import CASES, jet_monitor, oracle_count, oracle_safe_keys, oracle_safe_prefixes, sg_prefixes

# A_FCS at h=20, from the independent memoized-DFS oracle, frozen here
FCS_A_H20 = 50464


def test_ext_base_case_is_one_everywhere():
    t = CountTables([[0, 1], [1], []])
    t.extend(0)
    assert t.ext[0] == [1, 1, 1]
    assert t.count(0) == 1


@pytest.mark.parametrize("m", [1, 2, 3, 6])
def test_unconstrained_counts_m_to_h(m):
    sg = synthesize_sg(UnconstrainedMonitor([VariableDecl("x", tuple(str(k) for k in range(m)))]))
    assert sg.nb_traces(5) == m**5
    assert [sg.nb_traces(h) for h in range(4)] == [m**h for h in range(4)]


def test_unconstrained_six_values_two_steps():
    sg = synthesize_sg(UnconstrainedMonitor([var("x", *"abcdef")]))
    assert sg.nb_traces(2) == 36


def test_two_binary_variables_three_steps():
    sg = synthesize_sg(UnconstrainedMonitor([var("p", "0", "1"), var("q", "0", "1")]))
    assert sg.nb_traces(3) == (2 * 2) ** 3 == 64


def test_jet_counts_fibonacci(jet):
    sg = synthesize_sg(jet)
    expected = [oracle_count(jet, h, oracle_safe_keys(jet)) for h in range(11)]
    assert expected == [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]
    assert [sg.nb_traces(h) for h in range(11)] == expected


def test_fcs_assumptions_count_at_20():
    m = compile_spec(load(CASES / "fcs.mon"), "sg1").monitor()
    sg = synthesize_sg(m)
    assert sg.nb_traces(20) == FCS_A_H20
    assert oracle_count(m, 12, oracle_safe_keys(m)) == sg.nb_traces(12)


def test_first_and_last_trace(jet):
    sg = synthesize_sg(jet)
    h = 7
    n = sg.nb_traces(h)
    all_p = oracle_safe_prefixes(jet, h)
    assert sg.trace(0, h).codes == all_p[0]
    assert sg.trace(n - 1, h).codes == all_p[-1]
    assert sg.trace(0, h).as_dicts() == [{"j": "-"}] * h


def test_full_sorted_list_at_h6(jet):
    sg = synthesize_sg(jet)
    assert sg_prefixes(sg, 6) == oracle_safe_prefixes(jet, 6)
    assert len(sg_prefixes(sg, 6)) == 21


def test_rank_unrank_roundtrip_at_50():
    s = var("s", "-", "f", "r")
    from scengen.templates import make_recovery_window, make_recurrence

    sg = synthesize_sg(conjoin(make_recurrence(s, 15, 20, event="f"), make_recovery_window(s, 3, 5)))
    h = 50
    n = sg.nb_traces(h)
    rng = random.Random(1)
    for _ in range(1000):
        i = rng.randrange(n)
        assert sg.rank(sg.trace(i, h)) == i


def test_out_of_bounds_and_invalid_prefix(jet):
    sg = synthesize_sg(jet)
    with pytest.raises(IndexOutOfBoundsError):
        sg.trace(sg.nb_traces(5), 5)
    with pytest.raises(IndexOutOfBoundsError):
        sg.trace(-1, 5)
    bad = TracePrefix.from_steps(jet.variables, [("r",)])
    with pytest.raises(InvalidPrefixError) as info:
        sg.rank(bad)
    assert info.value.step == 0


def test_rank_rejects_a_pruned_edge():
    from scengen.monitor import make_explicit_fsm

    v = var("x", "a", "b")
    m = make_explicit_fsm([v], ["A", "B", "D"], "A", [("A", ["a"], "B"), ("B", ["a"], "A"), ("B", ["b"], "D")])
    sg = synthesize_sg(m)
    with pytest.raises(InvalidPrefixError) as info:
        sg.rank(TracePrefix.from_steps([v], [("a",), ("b",)]))
    assert info.value.step == 1


def test_row_sum_identity_and_monotone_rows():
    rng = random.Random(2)
    n = 30
    succ = [sorted(rng.sample(range(n), rng.randint(1, 4))) for _ in range(n)]
    t = CountTables(succ)
    t.extend(12)
    for k in range(12):
        for x in range(n):
            row = t.row(x, k)
            assert row[0] == 0
            assert all(a < b for a, b in zip(row, row[1:]))
            assert row[-1] == sum(t.ext[k][y] for y in succ[x]) == t.ext[k + 1][x]


def test_counts_never_decrease_on_non_blocking_graphs():
    sg = synthesize_sg(jet_monitor())
    counts = [sg.nb_traces(h) for h in range(30)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_tables_grow_once_per_horizon(jet):
    sg = synthesize_sg(jet)
    t = sg.tables
    sg.nb_traces(10)
    assert t.columns_built == 11
    for i in range(50):
        sg.trace(i, 10)
    sg.nb_traces(4)
    assert t.columns_built == 11
    sg.nb_traces(12)
    assert t.columns_built == 13


def test_memory_limit_is_enforced(monkeypatch):
    t = CountTables([[0, 0]], memory_limit_bytes=2000)
    with pytest.raises(ResourceLimitError) as info:
        t.count(100)
    assert info.value.limit == 2000
    assert "SCENGEN_MEMORY_LIMIT" in str(info.value)
    monkeypatch.setenv("SCENGEN_MEMORY_LIMIT", "3k")
    assert memory_limit() == 3072
    monkeypatch.setenv("SCENGEN_MEMORY_LIMIT", "2MiB")
    assert memory_limit() == 2 * 2**20
    monkeypatch.delenv("SCENGEN_MEMORY_LIMIT")
    assert memory_limit() == 8 * 2**30


def test_negative_horizon_rejected():
    with pytest.raises(ValueError):
        CountTables([[0]]).extend(-1)


def test_path_counts_match_tables():
    rng = random.Random(5)
    n = 25
    # partial graph: some states have no successor
    succ = [sorted(rng.sample(range(n), rng.randint(0, 3))) for _ in range(n)]
    t = CountTables(succ)
    assert path_counts(succ, [0, 3, 9]) == {h: t.count(h) for h in (0, 3, 9)}
    with pytest.raises(ValueError):
        path_counts(succ, [-1])
