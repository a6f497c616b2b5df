"""Experiment grid over the shipped case studies.

For each scenario and horizon a row reports the number of traces, the
amortized time of one uniform extraction (table construction included), the
constraint selectivity and the SG selectivity. Factors are synthesized once
per distinct set of member monitors and shared between scenarios, the way a
tuple generator reuses identical sub-generators.
"""

from __future__ import annotations

import csv
import io
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .counting import path_counts
from .dsl import compile_spec, load
from .errors import NoTracesError
from .product import SGTuple
from .synthesis import ScenarioGenerator, explore, sg_from_graph

CASE_STUDIES = ("fcs", "bdc", "alma")
EXTRACTIONS = 1000


def case_study_path(name: str) -> Path:
    """Location of a shipped ``.mon`` file (``fcs``, ``bdc`` or ``alma``)."""
    if name not in CASE_STUDIES:
        raise ValueError(f"unknown case study {name!r}; choose from {', '.join(CASE_STUDIES)}")
    return Path(str(resources.files("scengen") / "casestudies" / f"{name}.mon"))


@dataclass
class ExperimentRow:
    case: str
    sg: str
    constraints: str
    horizon: int
    status: str  # "ok" or "no-traces"
    factors: int
    input_space: int  # values actually read by the (unpruned) monitor, per variable, multiplied
    nb_traces: int | None
    extraction_time_s: float | None
    constraint_selectivity: Fraction | None
    sg_selectivity: Fraction | None
    synthesis_time_s: float | None

    def as_csv_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = f"{float(v):.6g}"
            elif isinstance(v, float):
                v = f"{v:.6g}"
            d[f.name] = "" if v is None else v
        return d


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, [f.name for f in fields(ExperimentRow)], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.as_csv_dict())
    return buf.getvalue()


class FactorCache:
    """Explored graphs and generators per distinct set of member monitors."""

    def __init__(self):
        self.entries: dict = {}

    def get(self, factor):
        """``(graph, sg or None, seconds)`` for a compiled factor."""
        key = tuple(sorted(factor.members))
        hit = self.entries.get(key)
        if hit is None:
            t0 = time.perf_counter()
            g = explore(factor.monitor)
            try:
                sg = sg_from_graph(g, factor.name)
            except NoTracesError:
                sg = None
            hit = (g, sg, time.perf_counter() - t0)
            self.entries[key] = hit
        return hit


def _fresh(sg: ScenarioGenerator) -> ScenarioGenerator:
    return ScenarioGenerator(sg.graph, sg.origin, sg.pruned_states)


def amortized_extraction_time(src, h: int, n: int = EXTRACTIONS, seed: int = 0) -> float:
    """Seconds per uniform extraction at horizon ``h``, table build included.

    ``src`` is a generator or tuple; its count tables are rebuilt from scratch
    so that their cost is spread over the ``n`` extractions.
    """
    if isinstance(src, SGTuple):
        src = SGTuple([_fresh(f) for f in src.factors], src.names)
    else:
        src = _fresh(src)
    rng = random.Random(seed)
    t0 = time.perf_counter()
    total = src.nb_traces(h)
    for _ in range(n):
        src.trace(rng.randrange(total), h)
    return (time.perf_counter() - t0) / n


def scenario_number(name: str | None) -> str:
    if name is None:
        return "default"
    return name[2:] if name.startswith("sg") and name[2:].isdigit() else name


def run_scenario(case: str, spec, name, horizons, cache: FactorCache, timing: bool = True) -> list:
    comp = compile_spec(spec, name)
    graphs, sgs, synth = [], [], 0.0
    for f in comp.factors:
        g, sg, dt = cache.get(f)
        graphs.append(g)
        sgs.append(sg)
        synth += dt
    cons = ",".join(c.removeprefix("c") for c in comp.constraints) or "-"
    base = dict(case=case, sg=scenario_number(name), constraints=cons, factors=len(comp.factors))
    if not timing:
        synth = None
    space = 1
    for g in graphs:
        space *= g.input_space_size()
    if any(sg is None for sg in sgs):
        return [
            ExperimentRow(**base, horizon=h, status="no-traces", input_space=space, nb_traces=0,
                          extraction_time_s=None, constraint_selectivity=None,
                          sg_selectivity=None, synthesis_time_s=synth)
            for h in horizons
        ]
    tup = SGTuple(sgs, [f.name for f in comp.factors])
    base_sgs = []
    for f in comp.assumption_factors:
        _, bsg, _ = cache.get(f)
        base_sgs.append(bsg)
    base_tuple = SGTuple(base_sgs) if base_sgs and all(base_sgs) else None
    unpruned = [path_counts(g.succ, horizons) for g in graphs]
    rows = []
    for h in horizons:
        n = tup.nb_traces(h)
        den = 1
        for t in unpruned:
            den *= t[h]
        cs = Fraction(n, base_tuple.nb_traces(h)) if base_tuple is not None else None
        rows.append(
            ExperimentRow(
                **base,
                horizon=h,
                status="ok",
                input_space=space,
                nb_traces=n,
                extraction_time_s=amortized_extraction_time(tup, h) if timing else None,
                constraint_selectivity=cs,
                sg_selectivity=Fraction(n, den),
                synthesis_time_s=synth,
            )
        )
    return rows


def _scenario_names(spec, sg_numbers):
    names = [n for n in spec.scenario_names() if n is not None]
    if sg_numbers is None:
        return names
    wanted = {f"sg{n}" if str(n).isdigit() else str(n) for n in sg_numbers}
    unknown = wanted - set(names)
    if unknown:
        raise ValueError(f"unknown scenario(s): {', '.join(sorted(unknown))}")
    return [n for n in names if n in wanted]


def _run_one(args):
    case, name, horizons, timing = args
    spec = load(case_study_path(case))
    return run_scenario(case, spec, name, horizons, FactorCache(), timing)


def run_grid(case: str, sg_numbers=None, horizons=(10, 20, 50, 100), *, timing=True, workers=1) -> list:
    """One :class:`ExperimentRow` per (scenario, horizon) of a case study.

    ``sg_numbers`` selects scenarios by number (all named scenarios when
    ``None``). Scenarios without traces yield rows with status ``no-traces``.
    With ``workers > 1`` scenarios run in separate processes (factor reuse is
    then per process and timings compete for the CPU).
    """
    spec = load(case_study_path(case))
    names = _scenario_names(spec, sg_numbers)
    horizons = list(horizons)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = ex.map(_run_one, [(case, n, horizons, timing) for n in names])
            return [r for part in parts for r in part]
    cache = FactorCache()
    rows = []
    for n in names:
        rows.extend(run_scenario(case, spec, n, horizons, cache, timing))
    return rows
