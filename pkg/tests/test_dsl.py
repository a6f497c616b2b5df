import pytest

from scengen.cli import main
from scengen.dsl import SpecError, check, compile_spec, load, parse, pretty
from scengen.product import SGTuple
from scengen.synthesis import explore, synthesize_sg

from conftest import CASES, DATA, oracle_safe_prefixes, sg_prefixes

MALFORMED = sorted((DATA / "malformed").glob("*.mon"))

MINIMAL = """\
#! scengen-dsl v1
var x in { a, b }
monitor loop fsm {
  state s initial;
  on x=a from s to s;
}
scenario = loop
"""

TWO_FACTORS = """\
var p in { 0, 1 }
var q in { -, f, r }
var w in { lo, hi }
monitor m1 = dwell(p, 2)
monitor m2 = recovery_window(q, 1, 2)
constraint c = max_dwell(p, 3)
monitor m3 fsm over w, p {
  state s initial;
  on w=lo from s to s;
  on w=hi, p=0 from s to s;
}
scenario indep = m1 & m2
scenario shared = m1 & c
scenario chain = m2 & m1 & m3
"""


def test_malformed_corpus_size():
    assert len(MALFORMED) == 30


@pytest.mark.parametrize("path", MALFORMED, ids=lambda p: p.stem)
def test_malformed_file_gives_located_diagnostic(path, capsys):
    diags = check(path.read_text())
    errors = [d for d in diags if d.severity == "error"]
    assert errors
    for d in errors:
        assert d.location.line >= 1 and d.location.column >= 1
        assert d.code.startswith("E")
    assert main(["check", str(path)]) == 1
    err = capsys.readouterr().err
    assert f"{path}:{errors[0].location.line}:" in err


def test_minimal_spec():
    spec = parse(MINIMAL)
    assert [v.name for v in spec.variables] == ["x"]
    comp = compile_spec(spec)
    assert len(comp.factors) == 1
    sg = synthesize_sg(comp.monitor())
    assert [sg.nb_traces(h) for h in range(4)] == [1, 1, 1, 1]


def test_wildcards_expand_in_domain_order():
    spec = parse("var x in { c, a, b }\nmonitor m fsm over x {\n state s initial;\n on * from s to s;\n}\nscenario = m\n")
    m = compile_spec(spec).monitor()
    assert [u["x"] for u in m.admissible(m.initial_key)] == ["c", "a", "b"]


def test_unknown_monitor_diagnostic():
    with pytest.raises(SpecError) as info:
        parse("var x in { a }\nmonitor m = forbid(x, a)\nscenario = m & ghost\n")
    (d,) = info.value.diagnostics
    assert "unknown monitor" in d.message and (d.location.line, d.location.column) == (3, 16)


def test_parse_reports_several_errors():
    diags = check("var x in { a, a }\nmonitor m = nope(x)\nscenario = zz\n")
    assert len([d for d in diags if d.severity == "error"]) >= 3


@pytest.mark.parametrize("text", [MINIMAL, TWO_FACTORS] + [p.read_text() for p in sorted(CASES.glob("*.mon"))])
def test_pretty_print_round_trip(text):
    spec = parse(text)
    again = parse(pretty(spec))
    assert again == spec
    assert pretty(again) == pretty(spec)


def test_independent_templates_are_separate_factors():
    spec = parse(TWO_FACTORS)
    assert len(compile_spec(spec, "indep").factors) == 2
    assert len(compile_spec(spec, "shared").factors) == 1
    # m3 shares p with m1, so only m2 stays apart
    chain = compile_spec(spec, "chain")
    assert sorted(len(f.members) for f in chain.factors) == [1, 2]


def test_factorization_is_sound():
    spec = parse(TWO_FACTORS)
    for name in ("indep", "chain"):
        comp = compile_spec(spec, name)
        tup = SGTuple([synthesize_sg(f.monitor) for f in comp.factors])
        full = comp.monitor()
        for h in range(6):
            assert sorted(sg_prefixes(tup, h)) == oracle_safe_prefixes(full, h)


def test_compile_is_deterministic():
    spec = parse(TWO_FACTORS)
    a = explore(compile_spec(spec, "chain").monitor())
    b = explore(compile_spec(parse(TWO_FACTORS), "chain").monitor())
    assert a.keys == b.keys and a.alphabet == b.alphabet and a.succ == b.succ


def test_constraints_and_assumption_factors():
    comp = compile_spec(parse(TWO_FACTORS), "shared")
    assert comp.constraints == ["c"]
    assert [f.members for f in comp.assumption_factors] == [["m1"]]


def test_fcs_file_contents():
    spec = load(CASES / "fcs.mon")
    assumptions = [m for m in spec.monitors if not m.is_constraint]
    constraints = [m for m in spec.monitors if m.is_constraint]
    assert len(assumptions) == 5 and len(constraints) == 6
    kinds = sorted(m.body.name for m in assumptions)
    assert kinds == ["pending_limit"] + ["recovery_window"] * 4
    windows = {m.name: [a.value.text for a in m.body.args[1:3]] for m in assumptions if m.body.name == "recovery_window"}
    assert windows == {
        "rec_throttle": ["3", "5"],
        "rec_speed": ["5", "7"],
        "rec_ego": ["10", "15"],
        "rec_map": ["13", "17"],
    }
    comp = compile_spec(spec, "sg1")
    assert len(comp.factors) == 1 and comp.factors[0].name == "A_FCS"


def test_alma_assumptions_give_nineteen_factors():
    comp = compile_spec(load(CASES / "alma.mon"), "sg1")
    assert len(comp.factors) == 19
    assert sorted(len(f.variables) for f in comp.factors) == [1] * 19


def test_group_terms_and_labels():
    comp = compile_spec(load(CASES / "bdc.mon"), "sg9")
    assert [f.name for f in comp.factors] == ["A_BDC&c2&c4&c5"]
    comp = compile_spec(load(CASES / "fcs.mon"), "sg4")
    assert comp.factors[0].name == "A_FCS&c1&c2"


def test_unknown_scenario():
    with pytest.raises(SpecError):
        compile_spec(parse(TWO_FACTORS), "missing")
