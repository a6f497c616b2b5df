"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 index out of bounds,
3 no traces, 4 resource limit. Traces are written as JSON lines, one
TraceRecord per line::

    {"index": "42", "horizon": 3, "steps": [{"e": "-"}, {"e": "ft"}, {"e": "-"}]}

(the index is a decimal string since it may exceed 64 bits), or as CSV with
one column per variable per step (``<var>@<t>``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .counting import MEMORY_ENV
from .dsl import SpecError, check, compile_spec, load as load_spec
from .errors import NoTracesError, ScengenError
from .experiments import CASE_STUDIES, FactorCache, rows_to_csv, run_grid, run_scenario
from .monitor import TracePrefix
from .product import SGTuple
from .sampling import (
    Cursor,
    IndexPermutation,
    SamplePolicy,
    deadlock_fraction,
    sample_indices,
    split_ranges,
)
from .store import load as load_sg, save as save_sg
from .synthesis import synthesize_sg

log = logging.getLogger("scengen")

CHUNK = 4096


class UsageError(ScengenError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for out-of-bounds
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def parse_horizons(text: str) -> list:
    """``"30"``, ``"10:50"`` (inclusive) or ``"10:100:10"``."""
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"bad horizon {text!r}; use H, LO:HI or LO:HI:STEP") from None
    if len(parts) == 1:
        out = parts
    elif len(parts) in (2, 3):
        step = parts[2] if len(parts) == 3 else 1
        if step < 1:
            raise UsageError("horizon step must be >= 1")
        out = list(range(parts[0], parts[1] + 1, step))
    else:
        raise UsageError(f"bad horizon {text!r}; use H, LO:HI or LO:HI:STEP")
    if not out or min(out) < 0:
        raise UsageError(f"empty or negative horizon range {text!r}")
    return out


def trace_record(index: int, p: TracePrefix) -> dict:
    return {"index": str(index), "horizon": len(p), "steps": p.as_dicts()}


def record_to_prefix(record: dict, variables) -> TracePrefix:
    try:
        steps = record["steps"]
        if "horizon" in record and int(record["horizon"]) != len(steps):
            raise UsageError("record horizon does not match its number of steps")
        return TracePrefix.from_steps(variables, steps)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed trace record: {exc}") from None


class TraceWriter:
    """Streams records as JSON lines or CSV."""

    def __init__(self, out, fmt: str, variables, h_max: int):
        self.out = out
        self.fmt = fmt
        if fmt == "csv":
            names = [v.name for v in variables]
            cols = ["index", "horizon"] + [f"{n}@{t}" for t in range(h_max) for n in names]
            self.csv = csv.writer(out, lineterminator="\n")
            self.csv.writerow(cols)

    def write(self, index: int, p: TracePrefix):
        if self.fmt == "csv":
            row = [str(index), len(p)]
            for step in p.as_dicts():
                row.extend(step.values())
            self.csv.writerow(row)
        else:
            self.out.write(json.dumps(trace_record(index, p)) + "\n")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


# Worker processes load the generator once and extract by (h, index).
_WORKER_SRC = None


def _worker_init(path):
    global _WORKER_SRC
    _WORKER_SRC = load_sg(path)


def _worker_extract(jobs):
    return [(i, _WORKER_SRC.trace(i, h).codes) for h, i in jobs]


def _extract_all(src, path, jobs, workers):
    """Yield ``(index, prefix)`` for ``(h, index)`` jobs, in job order."""
    if workers <= 1 or len(jobs) < 2 * CHUNK:
        for h, i in jobs:
            yield i, src.trace(i, h)
        return
    chunks = [jobs[a:b] for a, b in split_ranges(len(jobs), max(workers, len(jobs) // CHUNK))]
    with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(str(path),)) as ex:
        for part in ex.map(_worker_extract, chunks):
            for i, codes in part:
                yield i, TracePrefix(src.variables, codes)


def _compile(args):
    spec = load_spec(args.spec)
    return compile_spec(spec, args.scenario)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args):
    text = Path(args.spec).read_text(encoding="utf-8")
    diags = check(text)
    for d in diags:
        print(d.format(args.spec), file=sys.stderr)
    if any(d.severity == "error" for d in diags):
        return 1
    print(f"{args.spec}: ok")
    return 0


def cmd_synth(args):
    comp = _compile(args)
    sgs = []
    print(f"scenario: {comp.name or '(default)'}")
    for f in comp.factors:
        try:
            sg = synthesize_sg(f.monitor, f.name)
        except NoTracesError as exc:
            raise NoTracesError(f"factor {f.name!r}: {exc}") from None
        sgs.append(sg)
        print(
            f"factor {f.name}: variables={','.join(v.name for v in f.variables)} "
            f"states={sg.n_states} edges={sg.n_edges} pruned={sg.pruned_states} "
            f"inputs={len(sg.input_alphabet())}"
        )
    src = sgs[0] if len(sgs) == 1 else SGTuple(sgs, [f.name for f in comp.factors])
    if args.tables is not None:
        for sg in sgs:
            sg.tables.extend(args.tables)
    states = sum(s.n_states for s in sgs)
    edges = sum(s.n_edges for s in sgs)
    pruned = sum(s.pruned_states for s in sgs)
    print(f"total: factors={len(sgs)} states={states} edges={edges} pruned={pruned}")
    if args.output:
        save_sg(src, args.output, with_tables=args.tables is not None)
        print(f"written: {args.output}")
    return 0


def cmd_count(args):
    src = load_sg(args.sg)
    for h in parse_horizons(args.horizon):
        print(f"{h}\t{src.nb_traces(h)}")
    return 0


def cmd_extract(args):
    src = load_sg(args.sg)
    p = src.trace(args.index, args.horizon)
    out, close = _open_out(args.output)
    try:
        TraceWriter(out, args.format, src.variables, args.horizon).write(args.index, p)
    finally:
        if close:
            out.close()
    return 0


def _policy(args):
    if (args.horizon is None) == (args.horizon_range is None):
        raise UsageError("give exactly one of --horizon and --horizon-range")
    if args.horizon is not None:
        return SamplePolicy.fixed(args.horizon, args.seed, not args.without_replacement)
    lo_hi = parse_horizons(args.horizon_range)
    return SamplePolicy.horizon_range(lo_hi[0], lo_hi[-1], args.seed, not args.without_replacement)


def cmd_sample(args):
    src = load_sg(args.sg)
    policy = _policy(args)
    jobs = sample_indices(src, policy, args.n)
    out, close = _open_out(args.output)
    try:
        w = TraceWriter(out, args.format, src.variables, max(policy.horizons()))
        for i, p in _extract_all(src, args.sg, jobs, args.workers):
            w.write(i, p)
    finally:
        if close:
            out.close()
    return 0


def cmd_enumerate(args):
    src = load_sg(args.sg)
    n = src.nb_traces(args.horizon)
    cursor = None
    cpath = Path(args.cursor) if args.cursor else None
    if cpath is not None and cpath.exists():
        cursor = Cursor.from_json(cpath.read_text(encoding="utf-8"))
        if cursor.n != n or cursor.h != args.horizon:
            raise UsageError("cursor file belongs to another generator or horizon")
    if cursor is None:
        stop = n if args.stop is None else min(args.stop, n)
        if not 0 <= args.start <= stop:
            raise UsageError(f"bad position range [{args.start}, {stop}) for {n} prefixes")
        cursor = Cursor(seed=args.seed, n=n, h=args.horizon, start=args.start, stop=stop, position=args.start)
    end = cursor.stop if args.limit is None else min(cursor.stop, cursor.position + args.limit)
    perm = IndexPermutation(n, cursor.seed)
    out, close = _open_out(args.output)
    try:
        w = TraceWriter(out, args.format, src.variables, args.horizon)
        pos = cursor.position
        while pos < end:
            upto = min(end, pos + CHUNK * max(1, args.workers))
            jobs = [(args.horizon, perm(q)) for q in range(pos, upto)]
            for i, p in _extract_all(src, args.sg, jobs, args.workers):
                w.write(i, p)
            out.flush()
            pos = cursor.position = upto
            if cpath is not None:
                cpath.write_text(cursor.to_json() + "\n", encoding="utf-8")
    finally:
        if close:
            out.close()
    if cpath is not None:
        cpath.write_text(cursor.to_json() + "\n", encoding="utf-8")
    if cursor.done:
        log.info("enumeration range complete")
    return 0


def cmd_rank(args):
    src = load_sg(args.sg)
    stream = sys.stdin if args.input in (None, "-") else open(args.input, encoding="utf-8")
    try:
        for line in stream:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise UsageError(f"not a JSON trace record: {exc}") from None
            print(src.rank(record_to_prefix(rec, src.variables)))
    finally:
        if stream is not sys.stdin:
            stream.close()
    return 0


def cmd_stats(args):
    spec = load_spec(args.spec)
    rows = run_scenario(
        Path(args.spec).stem, spec, args.scenario, parse_horizons(args.horizon), FactorCache(),
        timing=not args.no_timing,
    )
    sys.stdout.write(rows_to_csv(rows))
    return 0


def cmd_grid(args):
    nums = args.sg.split(",") if args.sg else None
    rows = run_grid(args.case, nums, parse_horizons(args.horizon), timing=not args.no_timing, workers=args.workers)
    out, close = _open_out(args.output)
    try:
        out.write(rows_to_csv(rows))
    finally:
        if close:
            out.close()
    return 0


def cmd_walk(args):
    comp = _compile(args)
    frac, mean = deadlock_fraction([f.monitor for f in comp.factors], args.horizon, args.n, args.seed)
    print(f"walks\t{args.n}")
    print(f"horizon\t{args.horizon}")
    print(f"deadlock_fraction\t{frac:.6f}")
    print(f"mean_deadlock_step\t{'' if mean is None else f'{mean:.3f}'}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="scengen",
        description="Synthesize scenario generators from monitor specifications and "
        "extract, sample or enumerate their bounded-horizon traces.",
        epilog=f"Count tables are capped by ${MEMORY_ENV} (bytes, or with a k/m/g suffix; default 8g).",
    )
    p.add_argument("--version", action="version", version=f"scengen {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def spec_args(sp):
        sp.add_argument("spec", help="monitor specification (.mon)")
        sp.add_argument("-s", "--scenario", help="scenario name (default: the unnamed one)")

    def output_args(sp):
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")

    sp = sub.add_parser("check", help="report diagnostics for a specification")
    sp.add_argument("spec")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("synth", help="synthesize the scenario generator of a scenario")
    spec_args(sp)
    sp.add_argument("-o", "--output", help="SG file (or tuple manifest) to write")
    sp.add_argument("--tables", type=int, metavar="H", help="also store count tables up to horizon H")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("count", help="number of trace prefixes per horizon")
    sp.add_argument("sg")
    sp.add_argument("horizon", help="H, LO:HI or LO:HI:STEP")
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("extract", help="the i-th prefix of length h")
    sp.add_argument("sg")
    sp.add_argument("index", type=int)
    sp.add_argument("horizon", type=int)
    output_args(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("sample", help="uniformly sampled prefixes")
    sp.add_argument("sg")
    sp.add_argument("-n", type=int, required=True, help="number of samples")
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--horizon-range", metavar="LO:HI", help="uniform over all lengths LO..HI")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--without-replacement", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    output_args(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("enumerate", help="every prefix once, in a seeded random order")
    sp.add_argument("sg")
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--start", type=int, default=0, help="first position of the permuted sequence")
    sp.add_argument("--stop", type=int, help="end position (exclusive)")
    sp.add_argument("--limit", type=int, help="emit at most this many prefixes in this run")
    sp.add_argument("--cursor", help="cursor file to resume from and update")
    sp.add_argument("--workers", type=int, default=1)
    output_args(sp)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("rank", help="index of each trace record read from a JSON-lines file")
    sp.add_argument("sg")
    sp.add_argument("input", nargs="?", help="JSON-lines file (default: stdin)")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("stats", help="trace counts, extraction time and selectivities (CSV)")
    spec_args(sp)
    sp.add_argument("--horizon", default="10:100:10", help="H, LO:HI or LO:HI:STEP")
    sp.add_argument("--no-timing", action="store_true", help="skip the (nondeterministic) timing column")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("grid", help="experiment grid of a shipped case study (CSV)")
    sp.add_argument("case", choices=CASE_STUDIES)
    sp.add_argument("--sg", help="comma-separated scenario numbers (default: all)")
    sp.add_argument("--horizon", default="10:100:30", help="H, LO:HI or LO:HI:STEP")
    sp.add_argument("--no-timing", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("walk", help="baseline random walks on the unpruned monitor")
    spec_args(sp)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("-n", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_walk)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SpecError as exc:
        for d in exc.diagnostics:
            print(d.format(exc.filename), file=sys.stderr)
        return 1
    except ScengenError as exc:
        print(f"scengen: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        os._exit(0)
    except OSError as exc:
        print(f"scengen: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
