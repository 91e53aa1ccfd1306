"""Deterministic call-by-value evaluation of unannotated terms.

The machine is substitution based.  Each step re-decomposes the term into
an evaluation context around the unique redex; contexts are

    •  |  • m  |  u •  |  • []  |  d ū • m̄  |  case • of {…}

``abort`` is terminal rather than stepping to itself.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .syntax import (
    Erased,
    UAbort,
    UApp,
    UCase,
    UDCon,
    UIApp,
    UILam,
    ULam,
    URec,
    UTerm,
    alpha_eq,
    is_value,
    subst,
    subst_many,
)

DEFAULT_FUEL = 1_000_000


def default_fuel() -> int:
    raw = os.environ.get("TRELLYS_FUEL")
    if raw:
        try:
            return max(0, int(raw))
        except ValueError:
            pass
    return DEFAULT_FUEL


@dataclass(frozen=True)
class Stepped:
    next: UTerm
    rule: str


@dataclass(frozen=True)
class IsValue:
    pass


@dataclass(frozen=True)
class IsAbort:
    pass


@dataclass(frozen=True)
class Stuck:
    reason: str


StepOutcome = Union[Stepped, IsValue, IsAbort, Stuck]

_ABORT = UAbort()


class _StuckAt(Exception):
    def __init__(self, redex: UTerm, why: str):
        self.redex = redex
        self.why = why


def step(m: UTerm) -> StepOutcome:
    if isinstance(m, UAbort):
        return IsAbort()
    if is_value(m):
        return IsValue()
    try:
        nxt, rule = _reduce(m)
    except _StuckAt as exc:
        from .surface import pretty

        return Stuck(f"{exc.why}: {pretty(exc.redex)}")
    return Stepped(nxt, rule)


def _reduce(m: UTerm) -> tuple[UTerm, str]:
    """Reduce a non-value, non-abort term by one step."""
    match m:
        case UApp(fun=f, arg=a):
            if isinstance(f, UAbort):
                return _ABORT, "sc_abort"
            if not is_value(f):
                f2, rule = _reduce(f)
                return UApp(f2, a), rule
            if isinstance(a, UAbort):
                return _ABORT, "sc_abort"
            if not is_value(a):
                a2, rule = _reduce(a)
                return UApp(f, a2), rule
            if isinstance(f, ULam):
                return subst(f.body, f.name, a), "sc_appbeta"
            if isinstance(f, URec):
                return UApp(subst(f.body, f.name, f), a), "sc_apprec"
            raise _StuckAt(m, "application of a non-function")
        case UIApp(fun=f):
            if isinstance(f, UAbort):
                return _ABORT, "sc_abort"
            if not is_value(f):
                f2, rule = _reduce(f)
                return UIApp(f2), rule
            if isinstance(f, UILam):
                return f.body, "sc_iappbeta"
            if isinstance(f, URec):
                return UIApp(subst(f.body, f.name, f)), "sc_iapprec"
            raise _StuckAt(m, "irrelevant application of a non-function")
        case UDCon(name=d, args=args):
            for k, a in enumerate(args):
                if isinstance(a, Erased) or is_value(a):
                    continue
                if isinstance(a, UAbort):
                    return _ABORT, "sc_abort"
                a2, rule = _reduce(a)
                return UDCon(d, args[:k] + (a2,) + args[k + 1 :]), rule
            raise _StuckAt(m, "constructor with no reducible argument")
        case UCase(scrut=s, branches=brs):
            if isinstance(s, UAbort):
                return _ABORT, "sc_abort"
            if not is_value(s):
                s2, rule = _reduce(s)
                return UCase(s2, brs), rule
            if not isinstance(s, UDCon):
                raise _StuckAt(m, "case on a non-constructor")
            for br in brs:
                if br.con == s.name:
                    vals = [a for a in s.args if not isinstance(a, Erased)]
                    if len(vals) != len(br.vars):
                        raise _StuckAt(m, "pattern arity mismatch")
                    return subst_many(br.body, dict(zip(br.vars, vals))), "sc_casebeta"
            raise _StuckAt(m, f"no branch for constructor {s.name}")
    raise _StuckAt(m, "no evaluation rule applies")


@dataclass(frozen=True)
class RunResult:
    term: UTerm
    outcome: str  # value | abort | out-of-fuel | stuck
    steps: int
    reason: Optional[str] = None


def run(m: UTerm, fuel: Optional[int] = None) -> RunResult:
    """Iterate ``step`` at most ``fuel`` times."""
    if fuel is None:
        fuel = default_fuel()
    steps = 0
    while True:
        out = step(m)
        if isinstance(out, IsValue):
            return RunResult(m, "value", steps)
        if isinstance(out, IsAbort):
            return RunResult(m, "abort", steps)
        if isinstance(out, Stuck):
            return RunResult(m, "stuck", steps, out.reason)
        if steps >= fuel:
            return RunResult(m, "out-of-fuel", steps)
        m = out.next
        steps += 1


def trace(m: UTerm, fuel: Optional[int] = None) -> Iterator[tuple[int, UTerm, str]]:
    """Yield ``(step number, term, rule that produced it)`` along a run."""
    if fuel is None:
        fuel = default_fuel()
    yield 0, m, ""
    for k in range(1, fuel + 1):
        out = step(m)
        if not isinstance(out, Stepped):
            return
        m = out.next
        yield k, m, out.rule


def cbv_join(m: UTerm, n: UTerm, i: int, j: int) -> bool:
    """Do ``m`` and ``n`` meet within ``i`` and ``j`` CBV steps?

    The relation is deterministic and values, ``abort`` and stuck terms
    are terminal, so comparing the two frontiers decides the question.
    """
    return alpha_eq(run(m, i).term, run(n, j).term)
