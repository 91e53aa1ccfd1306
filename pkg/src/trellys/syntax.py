"""Abstract syntax for the annotated and unannotated languages.

Terms are immutable dataclasses built from ordinary names.  Every node
describes its own binding structure through three hooks:

* ``binders()``  the names this node introduces, by position;
* ``slots()``    each child paired with the binder positions in scope;
* ``rebuild()``  a copy with new children and (possibly renamed) binders.

Free variables, capture-avoiding substitution, alpha-equivalence keys and
node counts are written once against those hooks, so the two languages
share a single implementation of the binding discipline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Union

Slot = tuple[tuple[int, ...], Optional["Term"]]


class Term:
    """Base class for every syntax node of either language."""

    annotated = True

    def binders(self) -> tuple[str, ...]:
        return ()

    def slots(self) -> list[Slot]:
        return []

    def rebuild(self, children: Sequence[Optional[Term]], names: Sequence[str]) -> Term:
        return self

    def data(self) -> tuple:
        """Non-binding payload that takes part in alpha-equivalence."""
        return ()

    @cached_property
    def fv(self) -> frozenset[str]:
        names = self.binders()
        out: set[str] = set()
        for bound, child in self.slots():
            if child is None:
                continue
            cfv = child.fv
            if bound:
                cfv = cfv - {names[k] for k in bound}
            out |= cfv
        return frozenset(out)

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for _, c in self.slots() if c is not None)

    def __str__(self) -> str:
        from .surface import pretty

        return pretty(self)


# ---------------------------------------------------------------------------
# shared pieces


@dataclass(frozen=True)
class Entry:
    """One telescope declaration ``(x:A)`` or ``[x:A]``.

    ``type`` may be ``None`` in case-branch patterns whose field types are
    taken from the datatype declaration.
    """

    name: str
    type: Optional[Term]
    irrelevant: bool = False


Telescope = tuple[Entry, ...]


def tele_names(tele: Telescope) -> tuple[str, ...]:
    return tuple(e.name for e in tele)


def relevant_names(tele: Telescope) -> tuple[str, ...]:
    return tuple(e.name for e in tele if not e.irrelevant)


def is_positive(tele: Telescope) -> bool:
    return all(not e.irrelevant for e in tele)


# ---------------------------------------------------------------------------
# annotated language


@dataclass(frozen=True)
class Star(Term):
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str

    @cached_property
    def fv(self) -> frozenset[str]:
        return frozenset((self.name,))

    def data(self) -> tuple:
        return (self.name,)


@dataclass(frozen=True)
class Rec(Term):
    name: str
    type: Term
    body: Term

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((), self.type), ((0,), self.body)]

    def rebuild(self, children, names):
        return Rec(names[0], children[0], children[1])


@dataclass(frozen=True)
class Abort(Term):
    type: Term

    def slots(self):
        return [((), self.type)]

    def rebuild(self, children, names):
        return Abort(children[0])


@dataclass(frozen=True)
class Pi(Term):
    name: str
    dom: Term
    cod: Term
    irrelevant: bool = False

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((), self.dom), ((0,), self.cod)]

    def rebuild(self, children, names):
        return Pi(names[0], children[0], children[1], self.irrelevant)

    def data(self):
        return (self.irrelevant,)


@dataclass(frozen=True)
class Lam(Term):
    name: str
    dom: Term
    body: Term
    irrelevant: bool = False

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((), self.dom), ((0,), self.body)]

    def rebuild(self, children, names):
        return Lam(names[0], children[0], children[1], self.irrelevant)

    def data(self):
        return (self.irrelevant,)


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term
    irrelevant: bool = False

    def slots(self):
        return [((), self.fun), ((), self.arg)]

    def rebuild(self, children, names):
        return App(children[0], children[1], self.irrelevant)

    def data(self):
        return (self.irrelevant,)


@dataclass(frozen=True)
class TCon(Term):
    name: str
    params: tuple[Term, ...] = ()

    def slots(self):
        return [((), p) for p in self.params]

    def rebuild(self, children, names):
        return TCon(self.name, tuple(children))

    def data(self):
        return (self.name, len(self.params))


@dataclass(frozen=True)
class Arg:
    expr: Term
    irrelevant: bool = False


@dataclass(frozen=True)
class DCon(Term):
    name: str
    params: tuple[Term, ...] = ()
    args: tuple[Arg, ...] = ()

    def slots(self):
        return [((), p) for p in self.params] + [((), a.expr) for a in self.args]

    def rebuild(self, children, names):
        k = len(self.params)
        args = tuple(Arg(c, a.irrelevant) for c, a in zip(children[k:], self.args))
        return DCon(self.name, tuple(children[:k]), args)

    def data(self):
        return (self.name, len(self.params), tuple(a.irrelevant for a in self.args))


@dataclass(frozen=True)
class Branch:
    con: str
    tele: Telescope
    body: Term


@dataclass(frozen=True)
class Case(Term):
    scrut: Term
    eq_name: str
    branches: tuple[Branch, ...]
    ret: Optional[Term] = None

    def binders(self):
        names = [self.eq_name]
        for br in self.branches:
            names.extend(tele_names(br.tele))
        return tuple(names)

    def slots(self):
        out: list[Slot] = [((), self.scrut), ((), self.ret)]
        pos = 1
        for br in self.branches:
            own = tuple(range(pos, pos + len(br.tele)))
            for k, e in enumerate(br.tele):
                out.append((own[:k], e.type))
            out.append((own + (0,), br.body))
            pos += len(br.tele)
        return out

    def rebuild(self, children, names):
        it = iter(children)
        scrut, ret = next(it), next(it)
        pos = 1
        branches = []
        for br in self.branches:
            tele = []
            for e in br.tele:
                tele.append(Entry(names[pos], next(it), e.irrelevant))
                pos += 1
            branches.append(Branch(br.con, tuple(tele), next(it)))
        return Case(scrut, names[0], tuple(branches), ret)

    def data(self):
        return (
            self.ret is not None,
            tuple(
                (br.con, tuple((e.irrelevant, e.type is not None) for e in br.tele))
                for br in self.branches
            ),
        )


@dataclass(frozen=True)
class Eq(Term):
    lhs: Term
    rhs: Term

    def slots(self):
        return [((), self.lhs), ((), self.rhs)]

    def rebuild(self, children, names):
        return Eq(children[0], children[1])


DEFAULT_JOIN_STEPS = 100


@dataclass(frozen=True)
class Join(Term):
    lhs: Term
    rhs: Term
    i: int = DEFAULT_JOIN_STEPS
    j: int = DEFAULT_JOIN_STEPS

    def slots(self):
        return [((), self.lhs), ((), self.rhs)]

    def rebuild(self, children, names):
        return Join(children[0], children[1], self.i, self.j)

    def data(self):
        return (self.i, self.j)


@dataclass(frozen=True)
class InjDom(Term):
    proof: Term

    def slots(self):
        return [((), self.proof)]

    def rebuild(self, children, names):
        return InjDom(children[0])


@dataclass(frozen=True)
class InjRng(Term):
    proof: Term
    witness: Term

    def slots(self):
        return [((), self.proof), ((), self.witness)]

    def rebuild(self, children, names):
        return InjRng(children[0], children[1])


@dataclass(frozen=True)
class InjTCon(Term):
    index: int
    proof: Term

    def slots(self):
        return [((), self.proof)]

    def rebuild(self, children, names):
        return InjTCon(self.index, children[0])

    def data(self):
        return (self.index,)


@dataclass(frozen=True)
class ProofValue:
    value: Term


@dataclass(frozen=True)
class ProofAnnot:
    lhs: Term
    rhs: Term


ConvProof = Union[ProofValue, ProofAnnot]


@dataclass(frozen=True)
class Conv(Term):
    """``conv subject at template`` where ``tvars[k]`` marks ``proofs[k]``."""

    subject: Term
    proofs: tuple[ConvProof, ...]
    tvars: tuple[str, ...]
    template: Term

    def binders(self):
        return self.tvars

    def slots(self):
        out: list[Slot] = [((), self.subject)]
        for p in self.proofs:
            if isinstance(p, ProofValue):
                out.append(((), p.value))
            else:
                out.extend((((), p.lhs), ((), p.rhs)))
        out.append((tuple(range(len(self.tvars))), self.template))
        return out

    def rebuild(self, children, names):
        it = iter(children)
        subject = next(it)
        proofs: list[ConvProof] = []
        for p in self.proofs:
            if isinstance(p, ProofValue):
                proofs.append(ProofValue(next(it)))
            else:
                proofs.append(ProofAnnot(next(it), next(it)))
        return Conv(subject, tuple(proofs), tuple(names), next(it))

    def data(self):
        return tuple(isinstance(p, ProofValue) for p in self.proofs)


# ---------------------------------------------------------------------------
# unannotated language


class UTerm(Term):
    annotated = False


@dataclass(frozen=True)
class UStar(UTerm):
    pass


@dataclass(frozen=True)
class UVar(UTerm):
    name: str

    @cached_property
    def fv(self) -> frozenset[str]:
        return frozenset((self.name,))

    def data(self) -> tuple:
        return (self.name,)


@dataclass(frozen=True)
class Erased(UTerm):
    """The ``[]`` placeholder left by an erased irrelevant argument."""


ERASED = Erased()


@dataclass(frozen=True)
class URec(UTerm):
    name: str
    body: UTerm

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((0,), self.body)]

    def rebuild(self, children, names):
        return URec(names[0], children[0])


@dataclass(frozen=True)
class UAbort(UTerm):
    pass


@dataclass(frozen=True)
class UPi(UTerm):
    name: str
    dom: UTerm
    cod: UTerm
    irrelevant: bool = False

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((), self.dom), ((0,), self.cod)]

    def rebuild(self, children, names):
        return UPi(names[0], children[0], children[1], self.irrelevant)

    def data(self):
        return (self.irrelevant,)


@dataclass(frozen=True)
class ULam(UTerm):
    name: str
    body: UTerm

    def binders(self):
        return (self.name,)

    def slots(self):
        return [((0,), self.body)]

    def rebuild(self, children, names):
        return ULam(names[0], children[0])


@dataclass(frozen=True)
class UILam(UTerm):
    body: UTerm

    def slots(self):
        return [((), self.body)]

    def rebuild(self, children, names):
        return UILam(children[0])


@dataclass(frozen=True)
class UApp(UTerm):
    fun: UTerm
    arg: UTerm

    def slots(self):
        return [((), self.fun), ((), self.arg)]

    def rebuild(self, children, names):
        return UApp(children[0], children[1])


@dataclass(frozen=True)
class UIApp(UTerm):
    fun: UTerm

    def slots(self):
        return [((), self.fun)]

    def rebuild(self, children, names):
        return UIApp(children[0])


@dataclass(frozen=True)
class UTCon(UTerm):
    name: str
    params: tuple[UTerm, ...] = ()

    def slots(self):
        return [((), p) for p in self.params]

    def rebuild(self, children, names):
        return UTCon(self.name, tuple(children))

    def data(self):
        return (self.name, len(self.params))


@dataclass(frozen=True)
class UDCon(UTerm):
    name: str
    args: tuple[UTerm, ...] = ()

    def slots(self):
        return [((), a) for a in self.args]

    def rebuild(self, children, names):
        return UDCon(self.name, tuple(children))

    def data(self):
        return (self.name, len(self.args))


@dataclass(frozen=True)
class UBranch:
    con: str
    vars: tuple[str, ...]
    body: UTerm


@dataclass(frozen=True)
class UCase(UTerm):
    scrut: UTerm
    branches: tuple[UBranch, ...]

    def binders(self):
        return tuple(itertools.chain.from_iterable(br.vars for br in self.branches))

    def slots(self):
        out: list[Slot] = [((), self.scrut)]
        pos = 0
        for br in self.branches:
            out.append((tuple(range(pos, pos + len(br.vars))), br.body))
            pos += len(br.vars)
        return out

    def rebuild(self, children, names):
        pos = 0
        branches = []
        for br, body in zip(self.branches, children[1:]):
            branches.append(UBranch(br.con, tuple(names[pos : pos + len(br.vars)]), body))
            pos += len(br.vars)
        return UCase(children[0], tuple(branches))

    def data(self):
        return tuple((br.con, len(br.vars)) for br in self.branches)


@dataclass(frozen=True)
class UEq(UTerm):
    lhs: UTerm
    rhs: UTerm

    def slots(self):
        return [((), self.lhs), ((), self.rhs)]

    def rebuild(self, children, names):
        return UEq(children[0], children[1])


@dataclass(frozen=True)
class UJoin(UTerm):
    pass


AExpr = Term
UExpr = UTerm


# ---------------------------------------------------------------------------
# binding operations


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    """Prime ``base`` until it avoids every name in ``avoid``."""
    avoid = set(avoid)
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def free_vars(e: Term) -> frozenset[str]:
    return e.fv


def var_like(e: Term, name: str) -> Term:
    return Var(name) if e.annotated else UVar(name)


def subst_many(e: Term, mapping: dict[str, Term]) -> Term:
    """Simultaneous capture-avoiding substitution."""
    fv = e.fv
    live = {k: v for k, v in mapping.items() if k in fv}
    if not live:
        return e
    if isinstance(e, (Var, UVar)):
        return live[e.name]
    names = e.binders()
    new_names = list(names)
    renamed: dict[int, Term] = {}
    if names:
        danger: set[str] = set()
        for v in live.values():
            danger |= v.fv
        clash = [k for k, x in enumerate(names) if x in danger]
        if clash:
            avoid = set(danger) | set(fv) | set(names) | set(live)
            for k in clash:
                fresh = fresh_name(names[k], avoid)
                avoid.add(fresh)
                new_names[k] = fresh
                renamed[k] = var_like(e, fresh)
    children: list[Optional[Term]] = []
    for bound, child in e.slots():
        if child is None:
            children.append(None)
            continue
        if not bound:
            children.append(subst_many(child, live))
            continue
        inner = dict(live)
        for k in bound:
            inner.pop(names[k], None)
        for k in bound:
            if k in renamed:
                inner[names[k]] = renamed[k]
        children.append(subst_many(child, inner))
    return e.rebuild(children, new_names)


def subst(e: Term, x: str, v: Term) -> Term:
    """Capture-avoiding ``[v/x]e``; total on both languages."""
    return subst_many(e, {x: v})


def rename_binder(e: Term, old: str, new: str) -> Term:
    return subst(e, old, var_like(e, new))


def alpha_key(e: Term) -> tuple:
    """A hashable key equal for exactly the alpha-equivalent terms.

    Bound occurrences become de Bruijn levels; free ones keep their name.
    """
    return _key(e, {}, 0)


def _key(e: Term, env: dict[str, int], depth: int) -> tuple:
    if isinstance(e, (Var, UVar)):
        lvl = env.get(e.name)
        return ("v", e.name) if lvl is None else ("b", lvl)
    names = e.binders()
    parts: list = [type(e).__name__, e.data()]
    if not names:
        for _, child in e.slots():
            parts.append(None if child is None else _key(child, env, depth))
        return tuple(parts)
    levels = {k: depth + k for k in range(len(names))}
    inner_depth = depth + len(names)
    for bound, child in e.slots():
        if child is None:
            parts.append(None)
            continue
        if bound:
            env2 = dict(env)
            for k in bound:
                env2[names[k]] = levels[k]
            parts.append(_key(child, env2, inner_depth))
        else:
            parts.append(_key(child, env, depth))
    return tuple(parts)


def alpha_eq(a: Term, b: Term) -> bool:
    if a is b:
        return True
    if a.annotated != b.annotated:
        return False
    return alpha_key(a) == alpha_key(b)


def subterms(e: Term) -> Iterator[Term]:
    """Pre-order walk over every node (binders are not tracked)."""
    stack = [e]
    while stack:
        t = stack.pop()
        yield t
        stack.extend(c for _, c in reversed(t.slots()) if c is not None)


# ---------------------------------------------------------------------------
# values and head constructors


def is_value(e: Term) -> bool:
    """Membership in the value grammar; memoised on the node."""
    cache = e.__dict__
    v = cache.get("_is_value")
    if v is None:
        v = cache["_is_value"] = _is_value(e)
    return v


def _is_value(e: Term) -> bool:
    match e:
        case Star() | Var() | Pi() | Lam() | TCon() | Eq() | Join():
            return True
        case InjDom() | InjRng() | InjTCon():
            return True
        case Rec(body=body):
            return is_value(body)
        case DCon(args=args):
            return all(a.irrelevant or is_value(a.expr) for a in args)
        case Conv(subject=subject):
            return is_value(subject)
        case UStar() | UVar() | UPi() | ULam() | UILam() | UTCon() | UEq() | UJoin():
            return True
        case URec(body=body):
            return is_value(body)
        case UDCon(args=args):
            return all(isinstance(a, Erased) or is_value(a) for a in args)
        case _:
            return False


Head = tuple[str, ...]


def head_constructor(e: Term) -> Optional[Head]:
    """``('*',)``, ``('->',)``, ``('[]->',)``, ``('=',)``, ``('D', name)``,
    ``('d', name)`` or ``None`` when the term has no head constructor."""
    match e:
        case UStar() | Star():
            return ("*",)
        case UPi(irrelevant=irr) | Pi(irrelevant=irr):
            return ("[]->",) if irr else ("->",)
        case UTCon(name=n) | TCon(name=n):
            return ("D", n)
        case UDCon(name=n) | DCon(name=n):
            return ("d", n)
        case UEq() | Eq():
            return ("=",)
        case _:
            return None


# ---------------------------------------------------------------------------
# numerals


ZERO = "0"
SUCC = "S"


def nat_literal(n: int, annotated: bool = True) -> Term:
    if annotated:
        out: Term = DCon(ZERO)
        for _ in range(n):
            out = DCon(SUCC, (), (Arg(out),))
        return out
    u: UTerm = UDCon(ZERO)
    for _ in range(n):
        u = UDCon(SUCC, (u,))
    return u


def as_numeral(e: Term) -> Optional[int]:
    n = 0
    while True:
        match e:
            case DCon(name="0", params=(), args=()) | UDCon(name="0", args=()):
                return n
            case DCon(name="S", params=(), args=(Arg(expr=inner, irrelevant=False),)):
                e = inner
            case UDCon(name="S", args=(inner,)) if not isinstance(inner, Erased):
                e = inner
            case _:
                return None
        n += 1
