"""Extension-count tables, exact counting and lexicographic unranking.

For a graph with ordered out-edges, ``ext(x, k)`` is the number of length-``k``
paths from ``x`` (``ext(x, 0) = 1``). Only ``ext`` is stored, one column per
horizon, built once and never recomputed; counts are exact Python ints.
The prefix-sum row ``xi(x, k)[j] = sum(ext(succ[x][e], k) for e < j)``, the
number of paths that start with an edge smaller than the ``j``-th one, is
derived from the column when needed. Storing every row would cost one big
integer per edge and horizon instead of one per state.

Unranking walks from the initial state: at each step it skips whole edges
while the remaining index is at least their extension count, then follows
the edge it stops on.
"""

from __future__ import annotations

import os
import sys
import threading

from .errors import IndexOutOfBoundsError, InvalidPrefixError, ResourceLimitError

DEFAULT_MEMORY_LIMIT = 8 * 2**30
MEMORY_ENV = "SCENGEN_MEMORY_LIMIT"


def memory_limit() -> int:
    raw = os.environ.get(MEMORY_ENV)
    if not raw:
        return DEFAULT_MEMORY_LIMIT
    units = {"k": 2**10, "m": 2**20, "g": 2**30}
    raw = raw.strip().lower().rstrip("ib")
    if raw and raw[-1] in units:
        return int(float(raw[:-1]) * units[raw[-1]])
    return int(raw)


class CountTables:
    """``ext`` tables over a successor-list graph.

    ``h_max`` is ``None`` until the first extension. After :meth:`extend`
    up to ``h``, reads at horizons ``<= h`` are lock-free and never mutate the
    tables; ``columns_built`` counts table growth.
    """

    def __init__(self, succ, memory_limit_bytes: int | None = None, initial: int = 0):
        self.succ = succ
        self.initial = initial
        self.h_max = None
        self.ext: list = []  # ext[k][x]
        self.columns_built = 0
        self.bytes_estimate = 0
        self.memory_limit = memory_limit_bytes
        self._lock = threading.Lock()

    @staticmethod
    def _column_bytes(col) -> int:
        big = max(col, default=0)
        return (sys.getsizeof(big) + 8) * len(col) + 56

    def extend(self, h: int) -> None:
        """Tabulate ``ext`` for every horizon up to ``h``."""
        if h < 0:
            raise ValueError("horizon must be non-negative")
        if self.h_max is not None and h <= self.h_max:
            return
        with self._lock:
            limit = self.memory_limit if self.memory_limit is not None else memory_limit()
            succ = self.succ
            while self.h_max is None or self.h_max < h:
                if self.h_max is None:
                    col = [1] * len(succ)
                else:
                    prev = self.ext[self.h_max]
                    col = [sum(prev[y] for y in ys) for ys in succ]
                cost = self._column_bytes(col)
                if self.bytes_estimate + cost > limit:
                    raise ResourceLimitError(
                        f"count tables would need about {self.bytes_estimate + cost} bytes "
                        f"(limit {limit}); lower the horizon, raise {MEMORY_ENV}, or "
                        f"split the work per horizon",
                        limit=limit,
                        requested=self.bytes_estimate + cost,
                    )
                self.bytes_estimate += cost
                self.ext.append(col)
                self.h_max = 0 if self.h_max is None else self.h_max + 1
                self.columns_built += 1

    def ext_of(self, x: int, k: int) -> int:
        self.extend(k)
        return self.ext[k][x]

    def row(self, x: int, k: int) -> list:
        """Prefix sums of the successors' ``ext`` at ``k``; ``len(succ[x]) + 1`` entries."""
        self.extend(k)
        col = self.ext[k]
        acc, out = 0, [0]
        for y in self.succ[x]:
            acc += col[y]
            out.append(acc)
        return out

    def count(self, h: int) -> int:
        self.extend(h)
        return self.ext[h][self.initial]

    def unrank(self, i: int, h: int) -> list:
        """Edge choices ``(state, edge position)`` of the ``i``-th length-``h`` path."""
        n = self.count(h)
        if not 0 <= i < n:
            raise IndexOutOfBoundsError(f"error index out of bounds: {i} not in [0, {n})")
        succ, ext = self.succ, self.ext
        x, m = self.initial, i
        out = []
        for k in range(h - 1, -1, -1):
            col = ext[k]
            for j, y in enumerate(succ[x]):
                c = col[y]
                if m < c:
                    break
                m -= c
            out.append((x, j))
            x = y
        return out

    def rank(self, choices) -> int:
        """Inverse of :meth:`unrank`, from edge positions along the path."""
        h = len(choices)
        self.extend(h)
        x, r = self.initial, 0
        for step, j in enumerate(choices):
            ys = self.succ[x]
            if not 0 <= j < len(ys):
                raise InvalidPrefixError(f"step {step}: no such edge", step=step)
            col = self.ext[h - step - 1]
            r += sum(col[y] for y in ys[:j])
            x = ys[j]
        return r


def path_counts(succ, horizons, initial: int = 0) -> dict:
    """Length-``h`` path counts from ``initial`` for each ``h`` in ``horizons``.

    Keeps a single column alive, for one-off counts (such as the unpruned
    denominators of selectivity) that never need unranking.
    """
    want = set(horizons)
    if any(h < 0 for h in want):
        raise ValueError("horizon must be non-negative")
    col = [1] * len(succ)
    out = {}
    for k in range(max(want, default=0) + 1):
        if k:
            col = [sum(col[y] for y in ys) for ys in succ]
        if k in want:
            out[k] = col[initial]
    return out
