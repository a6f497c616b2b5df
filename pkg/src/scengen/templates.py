"""Parametric constraint monitors.

Every template is a small counter machine whose state is a tuple of ints,
packed into a canonical key with :func:`scengen.monitor.pack_ints`. The state
encodings are:

``recovery_window``
    ``(c,)``: ``c = 0`` nominal, otherwise time units since the fault. A fault
    at ``t`` must be repaired at ``t + d`` with ``wmin <= d <= wmax``; only the
    no-op (or values foreign to this monitor) may appear in between. Values
    other than ``noop``/``fault``/``repair`` are treated as no-ops, so several
    recovery monitors can share one event variable. With ``shared_repair`` the
    repair value is also tolerated while nominal (it repairs someone else).
``recurrence`` (and the event-based ``dwell`` / ``max_dwell``)
    ``(started, c)``: ``c`` = time units since the last event (or since the
    start). Consecutive events are ``gmin..gmax`` t.u. apart; the first event
    happens within the first ``gmax`` t.u.
``response_window``
    sorted tuple of ages of pending triggers. A response at distance
    ``amin..amax`` discharges every pending trigger in that range; a trigger
    that reaches ``amax`` undischarged blocks.
``at_most_k``, ``forbid``, event-based ``no_simultaneous_change``
    stateless (one state).
``pending_limit``
    ``(n,)``: number of opened, not yet closed, events.
value-based ``dwell`` / ``max_dwell``
    ``(last value code, run length)``, ``(-1, 0)`` before the first step.
value-based ``no_simultaneous_change``
    previous value codes, ``-1`` before the first step.
``step_bounded``
    ``(t, level)``: ``t`` steps seen (saturating at ``warmup``), ``level`` the
    accumulated offset from nominal, kept inside ``[lo, hi]``.
``run_window``
    ``(run,)``: length of the current run of the watched value.

Event/value sets accept a single value or a list. ``still`` switches the
change-based templates from *levels* (a change is a different value than the
previous step) to *deltas* (a change is any value other than ``still``).
"""

from __future__ import annotations

from .errors import MonitorError
from .monitor import Monitor, VariableDecl, _all_codes, pack_ints, unpack_ints


def _as_list(x):
    if x is None:
        return []
    if isinstance(x, (str, int)):
        return [x]
    return list(x)


def _codes(v: VariableDecl, values) -> frozenset:
    return frozenset(v.code(x) for x in _as_list(values))


def _check_var(v):
    if not isinstance(v, VariableDecl):
        raise MonitorError(f"expected a VariableDecl, got {v!r}")
    return v


def _check_window(lo, hi, what, allow_zero=False):
    floor = 0 if allow_zero else 1
    if not isinstance(lo, int) or lo < floor:
        raise MonitorError(f"{what}: lower bound must be an integer >= {floor}, got {lo!r}")
    if hi is not None and (not isinstance(hi, int) or hi < lo):
        raise MonitorError(f"{what}: window [{lo}, {hi}] is empty or malformed")


class TemplateMonitor(Monitor):
    """Base class: subclasses define ``_start()`` and ``_moves(state)``."""

    template = "template"

    def __init__(self, variables, params=None):
        self.variables = tuple(variables)
        self.params = dict(params or {})
        self.initial_key = pack_ints(self._start())
        self._cache: dict = {}

    def _start(self) -> tuple:
        raise NotImplementedError

    def _moves(self, state):
        raise NotImplementedError

    def transitions(self, key):
        hit = self._cache.get(key)
        if hit is None:
            state = unpack_ints(key)
            hit = sorted((c, pack_ints(s)) for c, s in self._moves(state))
            self._cache[key] = hit
        return hit

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.template}({args})"


class _RecoveryWindow(TemplateMonitor):
    template = "recovery_window"

    def __init__(self, v, wmin, wmax, fault, repair, noop, shared_repair):
        self.v = _check_var(v)
        _check_window(wmin, wmax, "recovery_window")
        if wmax is None:
            raise MonitorError("recovery_window needs a finite upper bound")
        self.wmin, self.wmax = wmin, wmax
        self.fault = _codes(v, fault)
        self.repair = v.code(repair)
        self.noop = v.code(noop)
        if self.repair in self.fault or self.noop in self.fault or self.repair == self.noop:
            raise MonitorError("recovery_window: fault, repair and noop values must differ")
        self.shared_repair = bool(shared_repair)
        super().__init__([v], dict(v=v.name, wmin=wmin, wmax=wmax))

    def _start(self):
        return (0,)

    def _moves(self, state):
        (c,) = state
        for x in range(len(self.v.domain)):
            if c == 0:
                if x in self.fault:
                    yield (x,), (1,)
                elif x != self.repair or self.shared_repair:
                    yield (x,), (0,)
            elif x == self.repair:
                if c >= self.wmin:
                    yield (x,), (0,)
            elif x not in self.fault and c < self.wmax:
                yield (x,), (c + 1,)


def make_recovery_window(v, wmin, wmax, *, fault="f", repair="r", noop="-", shared_repair=False):
    """A fault is always repaired ``wmin..wmax`` time units after it occurs."""
    return _RecoveryWindow(v, wmin, wmax, fault, repair, noop, shared_repair)


class _Gap(TemplateMonitor):
    """Consecutive events are ``gmin..gmax`` steps apart (``gmax=None``: unbounded)."""

    def __init__(self, v, is_event, gmin, gmax, template, params):
        self.v = _check_var(v)
        self.template = template
        _check_window(gmin, gmax, template)
        self.is_event = is_event
        self.gmin, self.gmax = gmin, gmax
        if not any(is_event) or all(is_event):
            raise MonitorError(f"{template}: event set must be a proper non-empty subset")
        super().__init__([v], params)

    def _start(self):
        return (0, 0)

    def _moves(self, state):
        started, c = state
        d = c + 1
        cap = self.gmax if self.gmax is not None else (self.gmin if started else 0)
        for x, ev in enumerate(self.is_event):
            if ev:
                if not started or d >= self.gmin:
                    yield (x,), (1, 0)
            elif self.gmax is None or d < self.gmax:
                yield (x,), (started, min(d, cap))


def make_recurrence(v, pmin, pmax, *, event="f"):
    """The event recurs every ``pmin..pmax`` time units (first one within ``pmax``)."""
    ev = _codes(v, event)
    return _Gap(
        v,
        [x in ev for x in range(len(v.domain))],
        pmin,
        pmax,
        "recurrence",
        dict(v=v.name, pmin=pmin, pmax=pmax),
    )


class _ResponseWindow(TemplateMonitor):
    template = "response_window"

    def __init__(self, vtrig, vresp, amin, amax, trigger, response):
        _check_var(vtrig)
        _check_var(vresp)
        _check_window(amin, amax, "response_window")
        if amax is None:
            raise MonitorError("response_window needs a finite upper bound")
        self.amin, self.amax = amin, amax
        self.trigger = _codes(vtrig, trigger)
        self.response = _codes(vresp, response)
        if not self.trigger or not self.response:
            raise MonitorError("response_window: empty trigger or response set")
        if vtrig.name == vresp.name:
            if vtrig != vresp:
                raise MonitorError("response_window: conflicting declarations of one variable")
            variables = [vtrig]
            self._pos = (0, 0)
        else:
            variables = [vtrig, vresp]
            self._pos = (0, 1)
        self._all = _all_codes(variables)
        super().__init__(
            variables, dict(trigger_var=vtrig.name, response_var=vresp.name, amin=amin, amax=amax)
        )

    def _start(self):
        return ()

    def _moves(self, state):
        pt, pr = self._pos
        for codes in self._all:
            responds = codes[pr] in self.response
            ages = []
            ok = True
            for a in state:
                d = a + 1
                if responds and d >= self.amin:
                    continue
                if d >= self.amax:
                    ok = False
                    break
                ages.append(d)
            if not ok:
                continue
            if codes[pt] in self.trigger:
                ages.append(0)
            yield codes, tuple(sorted(ages))


def make_response_window(vtrig, vresp, amin, amax, *, trigger="f", response="f"):
    """Every trigger is followed by a response ``amin..amax`` time units later."""
    return _ResponseWindow(vtrig, vresp, amin, amax, trigger, response)


class _Stateless(TemplateMonitor):
    def __init__(self, variables, allowed, template, params):
        self.template = template
        self._allowed = [c for c in _all_codes(variables) if allowed(c)]
        super().__init__(variables, params)

    def _start(self):
        return ()

    def _moves(self, state):
        for c in self._allowed:
            yield c, ()


def _distinct(variables):
    variables = [_check_var(v) for v in variables]
    if len({v.name for v in variables}) != len(variables):
        raise MonitorError("variables must be distinct")
    if not variables:
        raise MonitorError("at least one variable is required")
    return variables


def make_at_most_k(variables, k, busy):
    """At most ``k`` of ``variables`` simultaneously take a value in ``busy``."""
    variables = _distinct(variables)
    if not isinstance(k, int) or k < 0:
        raise MonitorError("at_most_k: k must be a non-negative integer")
    busy_codes = [_codes(v, [b for b in _as_list(busy) if b in v.domain]) for v in variables]
    if not any(busy_codes):
        raise MonitorError("at_most_k: no busy value belongs to the variables' domains")
    return _Stateless(
        variables,
        lambda c: sum(x in b for x, b in zip(c, busy_codes)) <= k,
        "at_most_k",
        dict(vars=[v.name for v in variables], k=k),
    )


def make_forbid(v, values):
    """The variable never takes any of ``values``."""
    bad = _codes(_check_var(v), values)
    if len(bad) == len(v.domain):
        raise MonitorError("forbid: every value of the domain would be forbidden")
    return _Stateless([v], lambda c: c[0] not in bad, "forbid", dict(v=v.name))


def make_unconstrained(variables):
    variables = _distinct(variables)
    return _Stateless(variables, lambda c: True, "unconstrained", dict(vars=[v.name for v in variables]))


class _PendingLimit(TemplateMonitor):
    template = "pending_limit"

    def __init__(self, v, k, open_, close):
        self.v = _check_var(v)
        if not isinstance(k, int) or k < 1:
            raise MonitorError("pending_limit: k must be a positive integer")
        self.k = k
        self.open = _codes(v, open_)
        self.close = v.code(close)
        if not self.open or self.close in self.open:
            raise MonitorError("pending_limit: open values must be non-empty and exclude close")
        super().__init__([v], dict(v=v.name, k=k))

    def _start(self):
        return (0,)

    def _moves(self, state):
        (n,) = state
        for x in range(len(self.v.domain)):
            if x in self.open:
                if n < self.k:
                    yield (x,), (n + 1,)
            elif x == self.close:
                if n > 0:
                    yield (x,), (n - 1,)
            else:
                yield (x,), (n,)


def make_pending_limit(v, k, *, open, close):
    """At most ``k`` opened events may be pending; ``close`` only closes a pending one."""
    return _PendingLimit(v, k, open, close)


class _LevelRun(TemplateMonitor):
    def __init__(self, v, lo, hi, template):
        self.v = _check_var(v)
        self.template = template
        self.lo, self.hi = lo, hi
        super().__init__([v], dict(v=v.name, min=lo, max=hi))

    def _start(self):
        return (-1, 0)

    def _moves(self, state):
        last, run = state
        cap = self.hi if self.hi is not None else self.lo
        for x in range(len(self.v.domain)):
            if last < 0:
                yield (x,), (x, min(1, cap))
            elif x == last:
                if self.hi is None or run < self.hi:
                    yield (x,), (x, min(run + 1, cap))
            elif run >= self.lo:
                yield (x,), (x, 1)


def _changes(v, still):
    s = v.code(still)
    return [x != s for x in range(len(v.domain))]


def make_dwell(v, dmin, *, still=None):
    """Each value is held at least ``dmin`` time units.

    With ``still`` the variable carries deltas: changes (values other than
    ``still``) are at least ``dmin`` time units apart.
    """
    _check_window(dmin, None, "dwell")
    if still is None:
        return _LevelRun(v, dmin, None, "dwell")
    return _Gap(v, _changes(v, still), dmin, None, "dwell", dict(v=v.name, dmin=dmin))


def make_max_dwell(v, dmax, *, still=None):
    """The value changes at least every ``dmax`` time units."""
    _check_window(dmax, dmax, "max_dwell")
    if still is None:
        return _LevelRun(v, 1, dmax, "max_dwell")
    return _Gap(v, _changes(v, still), 1, dmax, "max_dwell", dict(v=v.name, dmax=dmax))


def make_change_window(v, dmin, dmax, *, still):
    """Changes of a delta variable are ``dmin..dmax`` time units apart."""
    return _Gap(v, _changes(v, still), dmin, dmax, "change_window", dict(v=v.name, dmin=dmin, dmax=dmax))


class _NoSimultaneousLevels(TemplateMonitor):
    template = "no_simultaneous_change"

    def __init__(self, variables):
        self._all = _all_codes(variables)
        super().__init__(variables, dict(vars=[v.name for v in variables]))

    def _start(self):
        return tuple(-1 for _ in self.variables)

    def _moves(self, state):
        for c in self._all:
            if state[0] < 0 or sum(a != b for a, b in zip(c, state)) <= 1:
                yield c, c


def make_no_simultaneous_change(variables, *, still=None):
    """At most one of ``variables`` changes per time unit."""
    variables = _distinct(variables)
    if still is None:
        return _NoSimultaneousLevels(variables)
    moving = [_changes(v, still) for v in variables]
    return _Stateless(
        variables,
        lambda c: sum(m[x] for x, m in zip(c, moving)) <= 1,
        "no_simultaneous_change",
        dict(vars=[v.name for v in variables]),
    )


class _StepBounded(TemplateMonitor):
    template = "step_bounded"

    def __init__(self, v, lo, hi, deltas, warmup, start):
        self.v = _check_var(v)
        deltas = [int(d) for d in deltas]
        if len(deltas) != len(v.domain):
            raise MonitorError(
                f"step_bounded: {len(deltas)} deltas for a domain of {len(v.domain)} values"
            )
        if 0 not in deltas:
            raise MonitorError("step_bounded: one domain value must be the zero step")
        if not lo <= start <= hi:
            raise MonitorError(f"step_bounded: start {start} outside [{lo}, {hi}]")
        if warmup < 0:
            raise MonitorError("step_bounded: warmup must be >= 0")
        self.deltas, self.lo, self.hi = deltas, lo, hi
        self.warmup, self.start = warmup, start
        super().__init__([v], dict(v=v.name, lo=lo, hi=hi, warmup=warmup))

    def _start(self):
        return (0, self.start)

    def _moves(self, state):
        t, level = state
        nt = min(t + 1, self.warmup)
        for x, d in enumerate(self.deltas):
            if t < self.warmup and d != 0:
                continue
            if self.lo <= level + d <= self.hi:
                yield (x,), (nt, level + d)


def make_step_bounded(v, band=None, deltas=None, *, warmup=0, lo=None, hi=None, start=0):
    """Bounded excursion of a quantized quantity driven by step inputs.

    Each domain value is a step (``deltas`` aligned with the domain order);
    the accumulated level stays in ``[-band, band]`` (or ``[lo, hi]``) and only
    the zero step is allowed during the first ``warmup`` time units.
    """
    if deltas is None:
        raise MonitorError("step_bounded: deltas are required")
    if lo is None and hi is None:
        if band is None or band < 0:
            raise MonitorError("step_bounded: give band >= 0 or lo/hi")
        lo, hi = -band, band
    elif lo is None or hi is None or lo > hi:
        raise MonitorError("step_bounded: lo and hi must both be given with lo <= hi")
    return _StepBounded(v, lo, hi, deltas, warmup, start)


class _RunWindow(TemplateMonitor):
    template = "run_window"

    def __init__(self, v, value, rmin, rmax):
        self.v = _check_var(v)
        _check_window(rmin, rmax, "run_window")
        if rmax is None:
            raise MonitorError("run_window needs a finite upper bound")
        self.value = v.code(value)
        if len(v.domain) < 2:
            raise MonitorError("run_window needs at least two domain values")
        self.rmin, self.rmax = rmin, rmax
        super().__init__([v], dict(v=v.name, rmin=rmin, rmax=rmax))

    def _start(self):
        return (0,)

    def _moves(self, state):
        (run,) = state
        for x in range(len(self.v.domain)):
            if x == self.value:
                if run < self.rmax:
                    yield (x,), (run + 1,)
            elif run == 0 or run >= self.rmin:
                yield (x,), (0,)


def make_run_window(v, value, rmin, rmax):
    """Every maximal run of ``value`` lasts ``rmin..rmax`` time units."""
    return _RunWindow(v, value, rmin, rmax)


# name -> (factory, parameter schema). Kinds: var, vars, int, optint, value,
# values, bool, ints. A default of ``...`` marks a required parameter.
REGISTRY = {
    "recovery_window": (
        make_recovery_window,
        [("v", "var", ...), ("wmin", "int", ...), ("wmax", "int", ...),
         ("fault", "values", "f"), ("repair", "value", "r"), ("noop", "value", "-"),
         ("shared_repair", "bool", False)],
    ),
    "recurrence": (
        make_recurrence,
        [("v", "var", ...), ("pmin", "int", ...), ("pmax", "int", ...), ("event", "values", "f")],
    ),
    "response_window": (
        make_response_window,
        [("vtrig", "var", ...), ("vresp", "var", ...), ("amin", "int", ...), ("amax", "int", ...),
         ("trigger", "values", "f"), ("response", "values", "f")],
    ),
    "at_most_k": (
        make_at_most_k,
        [("variables", "vars", ...), ("k", "int", ...), ("busy", "values", ...)],
    ),
    "pending_limit": (
        make_pending_limit,
        [("v", "var", ...), ("k", "int", ...), ("open", "values", ...), ("close", "value", ...)],
    ),
    "dwell": (make_dwell, [("v", "var", ...), ("dmin", "int", ...), ("still", "value", None)]),
    "max_dwell": (make_max_dwell, [("v", "var", ...), ("dmax", "int", ...), ("still", "value", None)]),
    "change_window": (
        make_change_window,
        [("v", "var", ...), ("dmin", "int", ...), ("dmax", "int", ...), ("still", "value", ...)],
    ),
    "no_simultaneous_change": (
        make_no_simultaneous_change,
        [("variables", "vars", ...), ("still", "value", None)],
    ),
    "step_bounded": (
        make_step_bounded,
        [("v", "var", ...), ("band", "optint", None), ("deltas", "ints", ...),
         ("warmup", "int", 0), ("lo", "optint", None), ("hi", "optint", None), ("start", "int", 0)],
    ),
    "run_window": (
        make_run_window,
        [("v", "var", ...), ("value", "value", ...), ("rmin", "int", ...), ("rmax", "int", ...)],
    ),
    "forbid": (make_forbid, [("v", "var", ...), ("values", "values", ...)]),
    "unconstrained": (make_unconstrained, [("variables", "vars", ...)]),
}
