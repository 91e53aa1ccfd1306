"""CBV parallel reduction as an exact reduct enumerator.

``parallel_reducts(m)`` returns every ``m'`` with ``m ⇝p m'``: any subset
of subterms may take a step at once, including under binders, but a beta
redex only fires when its argument (or scrutinee) is a value.  Variables
count as values.  Results are deduplicated up to alpha-equivalence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .cbv import Stepped, step
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
    alpha_key,
    is_value,
    subst,
    subst_many,
)

MAX_NODES = 40
MAX_REDUCTS = 10_000


class BudgetExceeded(Exception):
    """The term or its reduct set is too large to enumerate."""


_ABORT = UAbort()


def _single_frame_abort(m: UTerm) -> bool:
    """Is ``m`` an evaluation context of depth one around ``abort``?"""
    match m:
        case UApp(fun=UAbort()) | UIApp(fun=UAbort()) | UCase(scrut=UAbort()):
            return True
        case UApp(fun=f, arg=UAbort()):
            return is_value(f)
        case UDCon(args=args):
            for a in args:
                if isinstance(a, Erased) or is_value(a):
                    continue
                return isinstance(a, UAbort)
    return False


class _Enumerator:
    def __init__(self, limit: int):
        self.limit = limit
        self.memo: dict[UTerm, list[UTerm]] = {}

    def reducts(self, m: UTerm) -> list[UTerm]:
        hit = self.memo.get(m)
        if hit is not None:
            return hit
        out: dict[tuple, UTerm] = {}

        def add(t: UTerm) -> None:
            k = alpha_key(t)
            if k not in out:
                out[k] = t
                if len(out) > self.limit:
                    raise BudgetExceeded(f"more than {self.limit} reducts")

        add(m)
        slots = m.slots()
        if slots:
            child_sets = [[None] if c is None else self.reducts(c) for _, c in slots]
            total = 1
            for s in child_sets:
                total *= len(s)
            if total > self.limit * 4:
                raise BudgetExceeded("congruence product too large")
            names = m.binders()
            for combo in itertools.product(*child_sets):
                add(m.rebuild(list(combo), names))
        for t in self.redexes(m):
            add(t)
        if _single_frame_abort(m):
            add(_ABORT)
        result = list(out.values())
        self.memo[m] = result
        return result

    def redexes(self, m: UTerm):
        match m:
            case UApp(fun=ULam(name=x, body=body), arg=a) if is_value(a):
                for b2 in self.reducts(body):
                    for a2 in self.reducts(a):
                        yield subst(b2, x, a2)
            case UApp(fun=URec(name=f, body=u1) as r, arg=a) if is_value(r) and is_value(a):
                for u2 in self.reducts(u1):
                    unrolled = subst(u2, f, r)
                    for a2 in self.reducts(a):
                        yield UApp(unrolled, a2)
            case UIApp(fun=UILam(body=body)):
                yield from self.reducts(body)
            case UIApp(fun=URec(name=f, body=u1) as r) if is_value(r):
                for u2 in self.reducts(u1):
                    yield UIApp(subst(u2, f, r))
            case UCase(scrut=UDCon(name=d, args=args) as s, branches=brs) if is_value(s):
                br = next((b for b in brs if b.con == d), None)
                vals = [a for a in args if not isinstance(a, Erased)]
                if br is None or len(vals) != len(br.vars):
                    return
                choices = [self.reducts(v) for v in vals]
                for body in self.reducts(br.body):
                    for combo in itertools.product(*choices):
                        yield subst_many(body, dict(zip(br.vars, combo)))


def parallel_reducts(m: UTerm, max_nodes: int = MAX_NODES, max_reducts: int = MAX_REDUCTS) -> list[UTerm]:
    """All one-step parallel reducts of ``m`` (``m`` itself included)."""
    if m.size > max_nodes:
        raise BudgetExceeded(f"term has {m.size} nodes, limit {max_nodes}")
    return _Enumerator(max_reducts).reducts(m)


def _successors(m: UTerm) -> list[UTerm]:
    try:
        return parallel_reducts(m)
    except BudgetExceeded:
        # Too big to enumerate: fall back to the CBV step, a sound subset.
        out = step(m)
        return [m, out.next] if isinstance(out, Stepped) else [m]


def reachable(m: UTerm, depth: int) -> dict[tuple, UTerm]:
    """Terms reachable from ``m`` in at most ``depth`` parallel layers."""
    seen = {alpha_key(m): m}
    frontier = [m]
    for _ in range(depth):
        nxt = []
        for t in frontier:
            for r in _successors(t):
                k = alpha_key(r)
                if k not in seen:
                    seen[k] = r
                    nxt.append(r)
        if not nxt:
            break
        frontier = nxt
    return seen


def joinable(m: UTerm, n: UTerm, depth: int) -> bool:
    """Breadth-first search for a common ``⇝p*`` reduct within ``depth`` layers."""
    seen_m = {alpha_key(m): m}
    seen_n = {alpha_key(n): n}
    if seen_m.keys() & seen_n.keys():
        return True
    front_m, front_n = [m], [n]
    for _ in range(depth):
        front_m = _expand(front_m, seen_m)
        if seen_m.keys() & seen_n.keys():
            return True
        front_n = _expand(front_n, seen_n)
        if seen_m.keys() & seen_n.keys():
            return True
        if not front_m and not front_n:
            break
    return False


def _expand(frontier: list[UTerm], seen: dict[tuple, UTerm]) -> list[UTerm]:
    nxt = []
    for t in frontier:
        for r in _successors(t):
            k = alpha_key(r)
            if k not in seen:
                seen[k] = r
                nxt.append(r)
    return nxt


@dataclass(frozen=True)
class DiamondResult:
    holds: bool
    counterexample: Optional[tuple[UTerm, UTerm]] = None

    def __bool__(self) -> bool:
        return self.holds


def diamond_check(m: UTerm) -> DiamondResult:
    """One-step diamond: every pair of reducts shares a common reduct."""
    enum = _Enumerator(MAX_REDUCTS)
    if m.size > MAX_NODES:
        raise BudgetExceeded(f"term has {m.size} nodes, limit {MAX_NODES}")
    firsts = enum.reducts(m)
    keysets = [{alpha_key(t) for t in enum.reducts(r)} for r in firsts]
    for a, b in itertools.combinations_with_replacement(range(len(firsts)), 2):
        if not keysets[a] & keysets[b]:
            return DiamondResult(False, (firsts[a], firsts[b]))
    return DiamondResult(True)
