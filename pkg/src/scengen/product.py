"""Scenario generators over independent factors, never materialized.

When monitors share no variables, the generator of their conjunction is the
product of their generators. Counts multiply, and the ``i``-th prefix of the
product is the pointwise pairing of factor prefixes whose indices are the
mixed-radix digits of ``i`` (first factor most significant).

Index order is factor-wise: prefixes are compared on the first factor's whole
projection, then the second's, and so on. This is not the step-by-step
lexicographic order of the materialized conjunction, whose trace indices
therefore differ from the tuple's; the sets of prefixes are equal.
"""

from __future__ import annotations

from .errors import IndexOutOfBoundsError, InvalidPrefixError, MonitorError
from .monitor import TracePrefix, conjoin


def pair_traces(*prefixes: TracePrefix) -> TracePrefix:
    """Pointwise union of equal-length prefixes over disjoint variables."""
    if not prefixes:
        raise MonitorError("nothing to pair")
    h = len(prefixes[0])
    names = set()
    variables = []
    for p in prefixes:
        if len(p) != h:
            raise MonitorError(f"cannot pair prefixes of lengths {h} and {len(p)}")
        for v in p.variables:
            if v.name in names:
                raise MonitorError(f"variable {v.name!r} appears in more than one prefix")
            names.add(v.name)
            variables.append(v)
    steps = [sum((p.codes[t] for p in prefixes), ()) for t in range(h)]
    return TracePrefix(variables, steps)


def split_index(i: int, counts) -> list:
    """Mixed-radix digits of ``i``, most significant first."""
    digits = []
    for c in reversed(counts):
        i, d = divmod(i, c)
        digits.append(d)
    digits.reverse()
    return digits


class SGTuple:
    """Tuple of scenario generators over pairwise-disjoint variables."""

    def __init__(self, factors, names=None):
        factors = list(factors)
        if not factors:
            raise MonitorError("an SG tuple needs at least one factor")
        seen = {}
        for f_i, f in enumerate(factors):
            for v in f.variables:
                if v.name in seen:
                    raise MonitorError(
                        f"variable {v.name!r} is shared by factors {seen[v.name]} and {f_i}"
                    )
                seen[v.name] = f_i
        self.factors = factors
        self.names = list(names) if names else [f"f{i}" for i in range(len(factors))]
        self.variables = tuple(v for f in factors for v in f.variables)
        self._counts: dict = {}

    @property
    def variable_names(self):
        return tuple(v.name for v in self.variables)

    def factor_counts(self, h: int) -> list:
        counts = self._counts.get(h)
        if counts is None:
            counts = [f.nb_traces(h) for f in self.factors]
            self._counts[h] = counts
        return counts

    def nb_traces(self, h: int) -> int:
        n = 1
        for c in self.factor_counts(h):
            n *= c
        return n

    def selectors(self, i: int, h: int) -> list:
        n = self.nb_traces(h)
        if not 0 <= i < n:
            raise IndexOutOfBoundsError(f"error index out of bounds: {i} not in [0, {n})")
        return split_index(i, self.factor_counts(h))

    def trace(self, i: int, h: int) -> TracePrefix:
        sel = self.selectors(i, h)
        return pair_traces(*(f.trace(s, h) for f, s in zip(self.factors, sel)))

    def rank(self, p: TracePrefix) -> int:
        if p.variables != self.variables:
            raise InvalidPrefixError("prefix variables do not match the tuple's")
        h = len(p)
        counts = self.factor_counts(h)
        r = 0
        for f, c in zip(self.factors, counts):
            r = r * c + f.rank(p.project(f.variable_names))
        return r

    def alphabet_size(self) -> int:
        n = 1
        for v in self.variables:
            n *= len(v.domain)
        return n

    def input_space_size(self) -> int:
        n = 1
        for f in self.factors:
            n *= f.input_space_size()
        return n

    @property
    def n_states(self) -> int:
        n = 1
        for f in self.factors:
            n *= f.n_states
        return n

    def materialize(self, **limits):
        """Synthesize the conjoint generator explicitly (for checks on small tuples)."""
        from .synthesis import synthesize_sg

        return synthesize_sg(conjoin(*self.factors), **limits)

    def __len__(self):
        return len(self.factors)

    def __repr__(self):
        return f"SGTuple({len(self.factors)} factors)"
