"""Scenario generators: exact counting, unranking and uniform sampling of
bounded-horizon input traces defined by finite-memory monitors."""

from .counting import CountTables
from .dsl import compile_spec, load as load_spec, parse as parse_spec
from .errors import (
    FormatError,
    IndexOutOfBoundsError,
    InvalidPrefixError,
    MonitorContractError,
    MonitorError,
    NoTracesError,
    ResourceLimitError,
    ScengenError,
)
from .monitor import (
    Assignment,
    ConjointMonitor,
    ExplicitMonitor,
    Monitor,
    TracePrefix,
    UnconstrainedMonitor,
    VariableDecl,
    conjoin,
    make_explicit_fsm,
    project,
    var,
)
from .product import SGTuple
from .sampling import (
    Cursor,
    IndexPermutation,
    SamplePolicy,
    baseline_random_walk,
    enumerate_random,
    sample_uniform,
    sg_selectivity,
)
from .synthesis import ScenarioGenerator, compute_safe_set, explore, incremental_regen, synthesize_sg

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ConjointMonitor", "CountTables", "Cursor", "ExplicitMonitor",
    "FormatError", "IndexOutOfBoundsError", "IndexPermutation", "InvalidPrefixError",
    "Monitor", "MonitorContractError", "MonitorError", "NoTracesError",
    "ResourceLimitError", "SGTuple", "SamplePolicy", "ScenarioGenerator", "ScengenError",
    "TracePrefix", "UnconstrainedMonitor", "VariableDecl", "baseline_random_walk",
    "compile_spec", "compute_safe_set", "conjoin", "enumerate_random", "explore",
    "incremental_regen", "load_spec", "make_explicit_fsm", "parse_spec", "project",
    "sample_uniform", "sg_selectivity", "synthesize_sg", "var",
]
