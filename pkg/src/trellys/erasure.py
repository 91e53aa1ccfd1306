"""Erasure from annotated to unannotated terms.

Type annotations on binders, conversion proofs, irrelevant arguments and
constructor parameters disappear; every equality proof becomes ``join``.
Types themselves survive, so ``|(x:A) -> B| = (x:|A|) -> |B|``.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .syntax import (
    ERASED,
    Abort,
    App,
    Case,
    Conv,
    DCon,
    Entry,
    Eq,
    InjDom,
    InjRng,
    InjTCon,
    Join,
    Lam,
    Pi,
    Rec,
    Star,
    TCon,
    Telescope,
    Term,
    UAbort,
    UApp,
    UBranch,
    UCase,
    UDCon,
    UEq,
    UIApp,
    UILam,
    UJoin,
    ULam,
    UPi,
    URec,
    UStar,
    UTCon,
    UTerm,
    UVar,
    Var,
    relevant_names,
)


def erase(a: Term) -> UTerm:
    match a:
        case Star():
            return UStar()
        case Var(name=x):
            return UVar(x)
        case Rec(name=f, body=body):
            return URec(f, erase(body))
        case Abort():
            return UAbort()
        case Pi(name=x, dom=dom, cod=cod, irrelevant=irr):
            return UPi(x, erase(dom), erase(cod), irr)
        case Lam(name=x, body=body, irrelevant=False):
            return ULam(x, erase(body))
        case Lam(body=body, irrelevant=True):
            return UILam(erase(body))
        case App(fun=f, arg=arg, irrelevant=False):
            return UApp(erase(f), erase(arg))
        case App(fun=f, irrelevant=True):
            return UIApp(erase(f))
        case TCon(name=d, params=ps):
            return UTCon(d, tuple(erase(p) for p in ps))
        case DCon(name=d, args=args):
            return UDCon(d, tuple(ERASED if x.irrelevant else erase(x.expr) for x in args))
        case Case(scrut=s, branches=brs):
            return UCase(
                erase(s),
                tuple(UBranch(br.con, relevant_names(br.tele), erase(br.body)) for br in brs),
            )
        case Eq(lhs=l, rhs=r):
            return UEq(erase(l), erase(r))
        case Join() | InjDom() | InjRng() | InjTCon():
            return UJoin()
        case Conv(subject=s):
            return erase(s)
    raise TypeError(f"not an annotated term: {type(a).__name__}")


def erase_telescope(tele: Telescope) -> Telescope:
    return tuple(
        Entry(e.name, None if e.type is None else erase(e.type), e.irrelevant) for e in tele
    )


def erase_context(ctx: Iterable[tuple[str, Optional[Term]]]) -> tuple[tuple[str, Optional[UTerm]], ...]:
    """Erase every type in a context given as ``(name, type)`` pairs."""
    return tuple((x, None if ty is None else erase(ty)) for x, ty in ctx)
