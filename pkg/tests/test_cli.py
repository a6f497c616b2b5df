import csv
import io
import json
import subprocess
import sys

import pytest

from scengen.cli import main
from scengen.store import load
from scengen.synthesis import synthesize_sg

from conftest import CASES, jet_monitor

JET = """\
var j in { -, f, r }
monitor jet fsm {
  state ok initial; state f1; state f2; state f3;
  on j=- from ok to ok;
  on j=f from ok to f1;
  on j=- from f1 to f2;
  on j=- from f2 to f3;
  on j=r from f2 to ok;
  on j=r from f3 to ok;
}
scenario = jet
"""

UNCONSTRAINED6 = "var x in { a, b, c, d, e, f }\nmonitor u = unconstrained([x])\nscenario = u\n"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def jet_sg(tmp_path, capsys):
    spec = tmp_path / "jet.mon"
    spec.write_text(JET)
    out = tmp_path / "jet.sg"
    code, text, _ = run(capsys, "synth", spec, "-o", out)
    assert code == 0 and "states=4" in text
    return out


def test_count_matches_enumeration(jet_sg, capsys):
    code, out, _ = run(capsys, "count", jet_sg, "1:10")
    assert code == 0
    counts = [int(line.split("\t")[1]) for line in out.splitlines()]
    assert counts == [2, 3, 5, 8, 13, 21, 34, 55, 89, 144]


def test_count_unconstrained_six_values(tmp_path, capsys):
    spec = tmp_path / "u.mon"
    spec.write_text(UNCONSTRAINED6)
    run(capsys, "synth", spec, "-o", tmp_path / "u.sg")
    code, out, _ = run(capsys, "count", tmp_path / "u.sg", "2")
    assert out == "2\t36\n"


def test_extract_record_and_out_of_bounds(jet_sg, capsys):
    code, out, _ = run(capsys, "extract", jet_sg, 3, 4)
    rec = json.loads(out)
    assert code == 0 and rec["index"] == "3" and rec["horizon"] == 4 and len(rec["steps"]) == 4
    assert rec["steps"] == synthesize_sg(jet_monitor()).trace(3, 4).as_dicts()
    code, _, err = run(capsys, "extract", jet_sg, 8, 4)
    assert code == 2 and "error index out of bounds" in err


def test_extract_csv(jet_sg, capsys):
    code, out, _ = run(capsys, "extract", jet_sg, 0, 3, "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "horizon", "j@0", "j@1", "j@2"]
    assert rows[1] == ["0", "3", "-", "-", "-"]


def test_sample_rank_roundtrip(jet_sg, tmp_path, capsys):
    out = tmp_path / "s.jsonl"
    code, _, _ = run(capsys, "sample", jet_sg, "-n", 50, "--horizon", 20, "--seed", 4, "-o", out)
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 50
    code, ranks, _ = run(capsys, "rank", jet_sg, out)
    assert ranks.split() == [json.loads(x)["index"] for x in lines]


def test_sample_is_deterministic_and_workers_agree(jet_sg, capsys):
    _, a, _ = run(capsys, "sample", jet_sg, "-n", 30, "--horizon", 15, "--seed", 9)
    _, b, _ = run(capsys, "sample", jet_sg, "-n", 30, "--horizon", 15, "--seed", 9, "--workers", 2)
    assert a == b


def test_sample_horizon_range_and_policy_errors(jet_sg, capsys):
    code, out, _ = run(capsys, "sample", jet_sg, "-n", 20, "--horizon-range", "1:3", "--seed", 1)
    assert code == 0 and {json.loads(x)["horizon"] for x in out.splitlines()} <= {1, 2, 3}
    code, _, err = run(capsys, "sample", jet_sg, "-n", 5)
    assert code == 1 and "--horizon" in err


def test_enumerate_cursor_resume(jet_sg, tmp_path, capsys):
    cur = tmp_path / "c.json"
    _, full, _ = run(capsys, "enumerate", jet_sg, "--horizon", 7, "--seed", 2)
    _, part1, _ = run(capsys, "enumerate", jet_sg, "--horizon", 7, "--seed", 2, "--limit", 3, "--cursor", cur)
    _, part2, _ = run(capsys, "enumerate", jet_sg, "--horizon", 7, "--seed", 2, "--cursor", cur)
    assert part1 + part2 == full
    assert sorted(int(json.loads(x)["index"]) for x in full.splitlines()) == list(range(34))
    _, again, _ = run(capsys, "enumerate", jet_sg, "--horizon", 7, "--seed", 2, "--cursor", cur)
    assert again == ""


def test_enumerate_workers_agree(jet_sg, capsys):
    _, a, _ = run(capsys, "enumerate", jet_sg, "--horizon", 12, "--seed", 5)
    _, b, _ = run(capsys, "enumerate", jet_sg, "--horizon", 12, "--seed", 5, "--workers", 3)
    assert a == b


def test_enumerate_slices(jet_sg, capsys):
    _, full, _ = run(capsys, "enumerate", jet_sg, "--horizon", 6, "--seed", 1)
    _, a, _ = run(capsys, "enumerate", jet_sg, "--horizon", 6, "--seed", 1, "--stop", 10)
    _, b, _ = run(capsys, "enumerate", jet_sg, "--horizon", 6, "--seed", 1, "--start", 10)
    assert a + b == full


def test_rank_rejects_foreign_prefix(jet_sg, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"index": "0", "horizon": 1, "steps": [{"j": "r"}]}) + "\n")
    code, _, err = run(capsys, "rank", jet_sg, bad)
    assert code == 1 and "not admissible" in err


def test_synth_no_traces_exit_3(capsys):
    code, _, err = run(capsys, "synth", CASES / "bdc.mon", "-s", "sg11")
    assert code == 3 and "no trace" in err.lower()


def test_memory_limit_exit_4(jet_sg, capsys, monkeypatch):
    monkeypatch.setenv("SCENGEN_MEMORY_LIMIT", "1k")
    code, _, err = run(capsys, "count", jet_sg, "300")
    assert code == 4 and "SCENGEN_MEMORY_LIMIT" in err


def test_usage_errors_exit_1(capsys, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["extract"])
    assert info.value.code == 1
    code, _, _ = run(capsys, "count", tmp_path / "missing.sg", "3")
    assert code == 1


def test_check_ok_on_case_studies(capsys):
    for name in ("fcs", "bdc", "alma"):
        code, out, err = run(capsys, "check", CASES / f"{name}.mon")
        assert code == 0 and err == "" and out.endswith("ok\n")


def test_synth_tuple_roundtrip(tmp_path, capsys):
    out = tmp_path / "alma.json"
    code, text, _ = run(capsys, "synth", CASES / "alma.mon", "-s", "sg1", "-o", out, "--tables", 10)
    assert code == 0 and "factors=19" in text
    t = load(out)
    assert len(t) == 19 and t.input_space_size() == 1769472
    _, counted, _ = run(capsys, "count", out, "10")
    assert int(counted.split()[1]) == t.nb_traces(10)


def test_stats_columns(capsys):
    code, out, _ = run(capsys, "stats", CASES / "fcs.mon", "-s", "sg2", "--horizon", "10:30:10", "--no-timing")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["horizon"] for r in rows] == ["10", "20", "30"]
    for r in rows:
        assert float(r["constraint_selectivity"]) < 1
        assert 0 < float(r["sg_selectivity"]) <= 1
        assert r["input_space"] == "6"


def test_walk_report(capsys):
    code, out, _ = run(capsys, "walk", CASES / "fcs.mon", "-s", "sg4", "--horizon", 30, "-n", 500, "--seed", 1)
    fields = dict(line.split("\t") for line in out.splitlines())
    assert code == 0 and fields["walks"] == "500"
    assert 0 < float(fields["deadlock_fraction"]) < 1


def test_grid_csv(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code, _, _ = run(capsys, "grid", "bdc", "--sg", "1,11", "--horizon", "10", "--no-timing", "-o", out)
    rows = list(csv.DictReader(out.open()))
    assert code == 0 and [r["status"] for r in rows] == ["ok", "no-traces"]


def test_console_script_entry_point(tmp_path):
    spec = tmp_path / "u.mon"
    spec.write_text(UNCONSTRAINED6)
    r = subprocess.run([sys.executable, "-m", "scengen.cli", "check", str(spec)], capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "scengen.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "scengen" in r.stdout
