"""The shipped case studies: published input-space sizes, invariants of the
scenario descriptions checked on sampled traces, and grid monotonicity."""

import pytest

from scengen.dsl import check, compile_spec, load
from scengen.errors import NoTracesError
from scengen.experiments import (
    FactorCache,
    amortized_extraction_time,
    case_study_path,
    rows_to_csv,
    run_grid,
    run_scenario,
)
from scengen.product import SGTuple
from scengen.sampling import SamplePolicy, sample_uniform
from scengen.synthesis import synthesize_sg

from conftest import CASES, constraint_nesting

# published input-space size per scenario; ALMA 3 is not encoded
TABLE4_INPUT_SPACE = {
    "fcs": {f"sg{i}": 6 for i in range(1, 8)},
    "bdc": {"sg1": 5, "sg2": 5, "sg3": 25, "sg4": 5, "sg5": 5, "sg6": 5, "sg7": 5,
            "sg8": 25, "sg9": 25, "sg10": 25, "sg11": 25},
    "alma": {"sg1": 1769472, "sg2": 108, "sg4": 108, "sg5": 108, "sg6": 108,
             "sg7": 27, "sg8": 27, "sg9": 27, "sg10": 2916},
}
SLOW = {("alma", "sg9"), ("alma", "sg10")}


def tuple_of(case, name):
    comp = compile_spec(load(CASES / f"{case}.mon"), name)
    return SGTuple([synthesize_sg(f.monitor) for f in comp.factors])


def samples(case, name, h, n=300, seed=0):
    return [p.as_dicts() for _, p in sample_uniform(tuple_of(case, name), SamplePolicy.fixed(h, seed), n)]


@pytest.mark.parametrize("case", ["fcs", "bdc", "alma"])
def test_case_study_file_is_clean(case):
    assert check(case_study_path(case).read_text()) == []
    spec = load(case_study_path(case))
    for name in spec.scenario_names():
        compile_spec(spec, name)


@pytest.fixture(scope="module")
def cache():
    return FactorCache()


def _input_space_params():
    for case, rows in TABLE4_INPUT_SPACE.items():
        for name, size in rows.items():
            marks = [pytest.mark.slow] if (case, name) in SLOW else []
            yield pytest.param(case, name, size, marks=marks, id=f"{case}-{name}")


@pytest.mark.parametrize("case,name,size", list(_input_space_params()))
def test_input_space_matches_table(case, name, size, cache):
    (row,) = run_scenario(case, load(CASES / f"{case}.mon"), name, [10], cache, timing=False)
    assert row.input_space == size


def test_fcs_single_fault_and_repair_windows():
    windows = {"ft": (3, 5), "fs": (5, 7), "fe": (10, 15), "fm": (13, 17)}
    for trace in samples("fcs", "sg1", 80):
        pending = None
        for t, step in enumerate(trace):
            e = step["e"]
            if e in windows:
                # no second sensor can fail while one is faulty
                assert pending is None
                pending = (e, t)
            elif e == "r":
                assert pending is not None
                lo, hi = windows[pending[0]]
                assert lo <= t - pending[1] <= hi
                pending = None
        if pending is not None:
            assert len(trace) - 1 - pending[1] < windows[pending[0]][1]


def test_fcs_fault_recurrence():
    for trace in samples("fcs", "sg2", 80):
        onsets = [t for t, s in enumerate(trace) if s["e"] in ("ft", "fs", "fe", "fm")]
        marks = [-1] + onsets
        assert all(15 <= b - a <= 20 for a, b in zip(onsets, onsets[1:]))
        assert all(b - a <= 20 for a, b in zip(marks, marks[1:]))


def test_bdc_assumptions():
    for trace in samples("bdc", "sg3", 60):
        for v, dmin in (("vi", 6), ("r", 5)):
            steps = [int(s[v]) // 5 for s in trace]
            assert steps[:2] == [0, 0]
            level = 0
            for d in steps:
                level += d
                assert -6 <= level <= 6
            changes = [t for t, d in enumerate(steps) if d]
            assert all(b - a >= dmin for a, b in zip(changes, changes[1:]))


def test_bdc_no_simultaneous_change():
    for trace in samples("bdc", "sg8", 40):
        assert all(s["vi"] == "0" or s["r"] == "0" for s in trace)


def test_bdc_sg11_has_no_traces():
    comp = compile_spec(load(CASES / "bdc.mon"), "sg11")
    with pytest.raises(NoTracesError):
        synthesize_sg(comp.factors[0].monitor)


def test_alma_no_undo_and_jet_outages():
    for trace in samples("alma", "sg1", 50, n=150):
        for ax in ("rx", "ry", "rz"):
            seq = [s[ax] for s in trace]
            assert not any({a, b} == {"neg", "pos"} for a, b in zip(seq, seq[1:]))
        for j in range(1, 17):
            seq = "".join("x" if s[f"j{j}"] == "off" else "." for s in trace)
            runs = [len(r) for r in seq.split(".") if r]
            closed = runs[:-1] if seq.endswith("x") else runs
            assert all(2 <= r <= 3 for r in closed) and all(r <= 3 for r in runs)


def test_alma_constraints_on_jets_and_rotations():
    for trace in samples("alma", "sg5", 40, n=100):
        for s in trace:
            assert all(s[f"j{j}"] == "ok" for j in range(1, 15))
            assert sum(s[f"j{j}"] == "off" for j in (15, 16)) <= 1
            assert sum(s[a] != "hold" for a in ("rx", "ry", "rz")) <= 1


def test_alma_noise_levels_stay_in_range():
    for trace in samples("alma", "sg8", 60):
        for v in ("ny", "nr", "np"):
            level = 0
            for s in trace:
                level += {"dn": -1, "st": 0, "up": 1}[s[v]]
                assert 0 <= level <= 5
        assert all(sum(s[v] != "st" for v in ("ny", "nr", "np")) <= 1 for s in trace)


def test_fcs_constraint_selectivity_ordering():
    spec = load(CASES / "fcs.mon")
    cache = FactorCache()
    sel = {n: run_scenario("fcs", spec, n, [10, 30], cache, timing=False) for n in ("sg2", "sg4")}
    for a, b in zip(sel["sg2"], sel["sg4"]):
        assert b.constraint_selectivity < a.constraint_selectivity < 1


@pytest.mark.parametrize("case", ["fcs", "bdc"])
def test_grid_monotonicity(case):
    hs = [5, 10, 20, 40]
    rows = run_grid(case, horizons=hs, timing=False)
    by = {}
    for r in rows:
        by.setdefault(r.sg, []).append(r.nb_traces)
    for counts in by.values():
        assert all(x <= y for x, y in zip(counts, counts[1:]))
    spec = load(case_study_path(case))
    pairs = constraint_nesting(spec)
    assert pairs
    for a, b in pairs:
        assert all(y <= x for x, y in zip(by[a[2:]], by[b[2:]]))


def test_grid_csv_has_header_and_rows():
    rows = run_grid("fcs", ["1"], horizons=[10], timing=True)
    text = rows_to_csv(rows)
    header, line = text.splitlines()
    assert header.startswith("case,sg,constraints,horizon,status")
    assert rows[0].extraction_time_s > 0 and rows[0].sg_selectivity == 1


def test_amortized_time_rebuilds_tables():
    t = tuple_of("fcs", "sg1")
    t.nb_traces(50)
    before = [f.tables.columns_built for f in t.factors]
    assert amortized_extraction_time(t, 50, n=20) > 0
    assert [f.tables.columns_built for f in t.factors] == before


def test_parallel_grid_matches_serial():
    a = run_grid("bdc", ["1", "4", "8"], horizons=[10, 20], timing=False)
    b = run_grid("bdc", ["1", "4", "8"], horizons=[10, 20], timing=False, workers=2)
    assert [r.as_csv_dict() for r in a] == [r.as_csv_dict() for r in b]
