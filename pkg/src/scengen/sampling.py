"""Sampling, randomized enumeration and the random-walk baseline.

Everything here works on any *source* exposing ``nb_traces(h)``,
``trace(i, h)`` and ``rank(prefix)``: a :class:`ScenarioGenerator` or an
:class:`SGTuple`.

Randomized enumeration visits ``[0, N)`` through a keyed bijection: a
balanced Feistel network on the smallest even number of bits covering ``N``,
with cycle walking to stay inside the range. Round keys and round functions
use the splitmix64 finalizer. The construction is versioned
(``PERMUTATION_VERSION``) so streams stay stable across releases.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import FormatError, NoTracesError, ScengenError
from .monitor import Monitor, TracePrefix

PERMUTATION_VERSION = 1
FEISTEL_ROUNDS = 8
_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = (z + _GOLDEN) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


class IndexPermutation:
    """Keyed pseudorandom bijection of ``[0, n)``."""

    def __init__(self, n: int, seed: int):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.seed = seed & _M64
        bits = max(2, (n - 1).bit_length())
        bits += bits & 1
        self.half = bits // 2
        self.mask = (1 << self.half) - 1
        self._words = (self.half + 63) // 64
        k = self.seed
        keys = []
        for _ in range(FEISTEL_ROUNDS):
            k = _mix64(k)
            keys.append(k)
        self.round_keys = keys

    def _round(self, r: int, x: int) -> int:
        acc = self.round_keys[r]
        while True:
            acc = _mix64(acc ^ (x & _M64))
            x >>= 64
            if not x:
                break
        out = 0
        for w in range(self._words):
            out = (out << 64) | _mix64(acc + w)
        return out & self.mask

    def _encrypt(self, x: int) -> int:
        left, right = x >> self.half, x & self.mask
        for r in range(FEISTEL_ROUNDS):
            left, right = right, left ^ self._round(r, right)
        return (left << self.half) | right

    def __call__(self, pos: int) -> int:
        if not 0 <= pos < self.n:
            raise IndexError(f"position {pos} outside [0, {self.n})")
        y = self._encrypt(pos)
        while y >= self.n:
            y = self._encrypt(y)
        return y

    def __len__(self):
        return self.n


# ---------------------------------------------------------------------------
# uniform sampling


@dataclass
class SamplePolicy:
    """How horizons and indices are drawn.

    ``mode`` is ``"fixed"`` (horizon ``h``) or ``"range"`` (every horizon in
    ``h_lo..h_hi``, weighted by its number of prefixes, so that draws are
    uniform over the union of all prefixes in the range).
    """

    mode: str = "fixed"
    h: int | None = None
    h_lo: int | None = None
    h_hi: int | None = None
    seed: int = 0
    with_replacement: bool = True

    def __post_init__(self):
        if self.mode == "fixed":
            if self.h is None or self.h < 0:
                raise ValueError("fixed-horizon policy needs h >= 0")
        elif self.mode == "range":
            if self.h_lo is None or self.h_hi is None or not 0 <= self.h_lo <= self.h_hi:
                raise ValueError("horizon-range policy needs 0 <= h_lo <= h_hi")
        else:
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @classmethod
    def fixed(cls, h, seed=0, with_replacement=True):
        return cls("fixed", h=h, seed=seed, with_replacement=with_replacement)

    @classmethod
    def horizon_range(cls, h_lo, h_hi, seed=0, with_replacement=True):
        return cls("range", h_lo=h_lo, h_hi=h_hi, seed=seed, with_replacement=with_replacement)

    def horizons(self) -> list:
        if self.mode == "fixed":
            return [self.h]
        return list(range(self.h_lo, self.h_hi + 1))


def sample_indices(src, policy: SamplePolicy, n: int) -> list:
    """Draw ``n`` ``(h, index)`` pairs according to ``policy``."""
    horizons = policy.horizons()
    counts = [src.nb_traces(h) for h in horizons]
    if any(c == 0 for c in counts):
        raise NoTracesError("some horizon of the policy has no trace prefix")
    total = sum(counts)
    rng = random.Random(policy.seed)
    if policy.with_replacement:
        offsets = (rng.randrange(total) for _ in range(n))
    else:
        if n > total:
            raise ScengenError(f"cannot draw {n} distinct prefixes out of {total}")
        perm = IndexPermutation(total, policy.seed)
        offsets = (perm(p) for p in range(n))
    out = []
    for off in offsets:
        for h, c in zip(horizons, counts):
            if off < c:
                out.append((h, off))
                break
            off -= c
    return out


def sample_uniform(src, policy: SamplePolicy, n: int) -> list:
    """``n`` uniformly drawn ``(index, prefix)`` pairs."""
    return [(i, src.trace(i, h)) for h, i in sample_indices(src, policy, n)]


# ---------------------------------------------------------------------------
# randomized enumeration


@dataclass
class Cursor:
    """Resumable position of a randomized enumeration over ``[start, stop)``."""

    seed: int
    n: int
    h: int
    start: int
    stop: int
    position: int
    version: int = PERMUTATION_VERSION

    @property
    def done(self) -> bool:
        return self.position >= self.stop

    def to_json(self) -> str:
        d = asdict(self)
        for k in ("n", "start", "stop", "position"):
            d[k] = str(d[k])
        d["format"] = "scengen-cursor"
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Cursor":
        try:
            d = json.loads(text)
            if d.pop("format", None) != "scengen-cursor":
                raise FormatError("not a scengen cursor record")
            if d.get("version") != PERMUTATION_VERSION:
                raise FormatError(f"unsupported cursor version {d.get('version')!r}")
            for k in ("n", "start", "stop", "position"):
                d[k] = int(d[k])
            return cls(**d)
        except (ValueError, TypeError, KeyError) as exc:
            raise FormatError(f"malformed cursor record: {exc}") from None


def enumerate_random(
    src,
    h: int,
    seed: int,
    start: int = 0,
    stop: int | None = None,
    cursor: Cursor | None = None,
) -> Iterator[tuple]:
    """Yield every prefix of length ``h`` once, in a seeded pseudorandom order.

    ``start``/``stop`` select a slice of the permuted sequence (positions, not
    indices), so disjoint slices given to different workers cover everything
    exactly once. Pass a :class:`Cursor` to resume; it is advanced in place.
    """
    n = src.nb_traces(h)
    if cursor is None:
        stop = n if stop is None else min(stop, n)
        cursor = Cursor(seed=seed, n=n, h=h, start=start, stop=stop, position=start)
    elif cursor.n != n or cursor.h != h:
        raise ScengenError("cursor does not belong to this generator and horizon")
    perm = IndexPermutation(n, cursor.seed)
    while cursor.position < cursor.stop:
        i = perm(cursor.position)
        cursor.position += 1
        yield i, src.trace(i, h)


def split_ranges(n: int, k: int) -> list:
    """``k`` contiguous ``(start, stop)`` ranges covering ``[0, n)``, sizes within 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q, r = divmod(n, k)
    out = []
    lo = 0
    for j in range(k):
        hi = lo + q + (1 if j < r else 0)
        out.append((lo, hi))
        lo = hi
    return out


# ---------------------------------------------------------------------------
# baseline and selectivity


@dataclass
class WalkResult:
    """Outcome of a random walk: a full prefix, or the step where it got stuck."""

    trace: TracePrefix | None
    deadlock_step: int | None = None

    @property
    def deadlocked(self) -> bool:
        return self.deadlock_step is not None


def baseline_random_walk(monitor, h: int, seed=0) -> WalkResult:
    """Markovian walk on the unpruned monitor, uniform over admissible inputs.

    ``monitor`` may also be a sequence of monitors over disjoint variables, in
    which case they are walked jointly (uniform over the product of their
    admissible inputs) without building the conjunction. ``seed`` may be an
    int or a :class:`random.Random`.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    parts = [monitor] if isinstance(monitor, Monitor) else list(monitor)
    keys = [m.initial_key for m in parts]
    steps = []
    for t in range(h):
        codes = ()
        for j, m in enumerate(parts):
            moves = m.transitions(keys[j])
            if not moves:
                return WalkResult(None, t)
            c, keys[j] = moves[rng.randrange(len(moves))]
            codes += tuple(c)
        steps.append(codes)
    variables = tuple(v for m in parts for v in m.variables)
    return WalkResult(TracePrefix(variables, steps))


def _factors(x) -> list:
    return list(x.factors) if hasattr(x, "factors") else [x]


def sg_selectivity(monitor, sg, h: int) -> Fraction:
    """Generator prefixes over unpruned-monitor computations, at horizon ``h``.

    ``monitor`` is the (possibly blocking) monitor or the list of independent
    monitors ``sg``'s factors were synthesized from.
    """
    from .synthesis import unpruned_path_count

    if h < 1:
        raise ValueError("h must be >= 1")
    monitors = [monitor] if isinstance(monitor, Monitor) else list(monitor)
    denom = 1
    for m in monitors:
        denom *= unpruned_path_count(m, h)
    if denom == 0:
        raise ScengenError(f"the monitor has no computation of length {h}")
    num = 1
    for f in _factors(sg):
        num *= f.nb_traces(h)
    return Fraction(num, denom)


def constraint_selectivity(constrained, unconstrained, h: int) -> Fraction:
    den = unconstrained.nb_traces(h)
    if den == 0:
        raise ScengenError(f"no unconstrained prefix of length {h}")
    return Fraction(constrained.nb_traces(h), den)


def graph_random_walk(g, h: int, rng) -> WalkResult:
    """Same walk as :func:`baseline_random_walk`, on an explored graph."""
    x = 0
    steps = []
    succ, inputs, alphabet = g.succ, g.inputs, g.alphabet
    for t in range(h):
        ys = succ[x]
        if not ys:
            return WalkResult(None, t)
        j = rng.randrange(len(ys))
        steps.append(alphabet[inputs[x][j]])
        x = ys[j]
    return WalkResult(TracePrefix(g.variables, steps))


def deadlock_fraction(monitor, h: int, n: int, seed=0) -> tuple:
    """Fraction of ``n`` baseline walks that deadlock, and their mean deadlock step.

    The monitor (or each independent monitor of a list) is explored once and
    the walks run on the explicit graphs.
    """
    from .synthesis import explore

    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    parts = [monitor] if isinstance(monitor, Monitor) else list(monitor)
    graphs = [explore(m) for m in parts]
    stuck = []
    for _ in range(n):
        first = None
        for g in graphs:
            w = graph_random_walk(g, h, rng)
            if w.deadlocked and (first is None or w.deadlock_step < first):
                first = w.deadlock_step
        if first is not None:
            stuck.append(first)
    mean = sum(stuck) / len(stuck) if stuck else None
    return (len(stuck) / n if n else 0.0), mean


def exact_deadlock_probability(g, h: int) -> Fraction:
    """Probability that a baseline walk on graph ``g`` deadlocks before ``h`` steps."""
    alive = {0: Fraction(1)}
    dead = Fraction(0)
    for _ in range(h):
        nxt: dict = {}
        for x, p in alive.items():
            ys = g.succ[x]
            if not ys:
                dead += p
                continue
            q = p / len(ys)
            for y in ys:
                nxt[y] = nxt.get(y, 0) + q
        alive = nxt
    return dead
