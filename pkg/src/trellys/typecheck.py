"""The syntax-directed checker for annotated terms.

``infer`` dispatches on the outermost constructor and returns a
``Derivation`` whose ``type`` field is the computed type.  A handful of
forms also accept an expected type (``check``): a bare ``join`` takes its
equation from it, and lambda and case bodies pass it inward so such joins
can sit under binders.

Types are compared by alpha-equivalence of their erasures.  Global value
definitions are visible to ``join``: their erased bodies are substituted
before evaluation, while type comparison never unfolds them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Optional, Sequence

from .cbv import cbv_join, run
from .erasure import erase
from .surface import DataDecl, Definition, Scope, SourceProgram, pretty
from .syntax import (
    Abort,
    App,
    Arg,
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
    ProofValue,
    Rec,
    Star,
    TCon,
    Telescope,
    Term,
    UTerm,
    Var,
    alpha_eq,
    fresh_name,
    is_value,
    subst,
    subst_many,
)

STAR = Star()


class CheckError(Exception):
    """A rejected term, tagged with the typing rule that failed."""

    def __init__(
        self,
        rule: str,
        message: str,
        subject: Any = None,
        expected: Optional[Term] = None,
        actual: Optional[Term] = None,
    ):
        self.rule = rule
        self.message = message
        self.subject = subject
        self.expected = expected
        self.actual = actual
        self.item: Optional[str] = None
        self.line = 0
        self.notes: list[str] = []
        super().__init__(message)

    def __str__(self) -> str:
        lines = [f"{self.rule}: {self.message}"]
        if self.item is not None:
            lines[0] = f"line {self.line}: in {self.item}: " + lines[0]
        if self.subject is not None:
            lines.append(f"  in: {_show(self.subject)}")
        if self.expected is not None:
            lines.append(f"  expected: {_show(self.expected)}")
        if self.actual is not None:
            lines.append(f"  actual: {_show(self.actual)}")
        lines.extend(f"  {n}" for n in self.notes)
        return "\n".join(lines)


def _show(x: Any) -> str:
    if isinstance(x, Term):
        return pretty(x)
    return str(x)


# ---------------------------------------------------------------------------
# contexts and signatures


@dataclass(frozen=True)
class Context:
    """Local variable bindings, innermost last."""

    entries: tuple[tuple[str, Term], ...] = ()

    def extend(self, name: str, ty: Term) -> Context:
        return Context(self.entries + ((name, ty),))

    def lookup(self, name: str) -> Optional[Term]:
        for x, ty in reversed(self.entries):
            if x == name:
                return ty
        return None

    @cached_property
    def names(self) -> frozenset[str]:
        return frozenset(x for x, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def show(self) -> str:
        return ", ".join(f"{x} : {pretty(ty)}" for x, ty in self.entries)


EMPTY = Context()


@dataclass(frozen=True)
class DataInfo:
    name: str
    params: Telescope
    cons: tuple[tuple[str, Telescope], ...]

    def constructor(self, con: str) -> Telescope:
        for c, tele in self.cons:
            if c == con:
                return tele
        raise KeyError(con)

    @property
    def con_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.cons)


@dataclass(frozen=True)
class GlobalDef:
    name: str
    type: Term
    body: Term
    closed: UTerm  # erased body with earlier globals substituted


@dataclass
class Signature:
    """Datatypes and top-level definitions, in declaration order."""

    datatypes: dict[str, DataInfo] = field(default_factory=dict)
    owners: dict[str, str] = field(default_factory=dict)
    globals: dict[str, GlobalDef] = field(default_factory=dict)
    runnables: dict[str, GlobalDef] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)
    scope: Scope = field(default_factory=Scope)

    def copy(self) -> Signature:
        return Signature(
            dict(self.datatypes),
            dict(self.owners),
            dict(self.globals),
            dict(self.runnables),
            list(self.order),
            self.scope.copy(),
        )

    def taken(self, name: str) -> bool:
        return (
            name in self.datatypes
            or name in self.owners
            or name in self.globals
            or name in self.runnables
        )

    def global_names(self) -> frozenset[str]:
        return frozenset(self.globals)

    def close(self, u: UTerm, shadowed: Iterable[str] = ()) -> UTerm:
        """Substitute global definitions for their free names in ``u``."""
        hidden = set(shadowed)
        mapping = {
            x: self.globals[x].closed for x in u.fv if x in self.globals and x not in hidden
        }
        return subst_many(u, mapping) if mapping else u

    def definition(self, name: str) -> Optional[GlobalDef]:
        return self.globals.get(name) or self.runnables.get(name)


# ---------------------------------------------------------------------------
# derivations


@dataclass
class Derivation:
    """One node of a typing derivation.

    For ordinary judgments ``subject`` and ``type`` are terms.  For the
    argument-list judgments (``tl_*``) the subject is a tuple of ``Arg``
    and the type a telescope.
    """

    rule: str
    context: Context
    subject: Any
    type: Any
    children: tuple[Derivation, ...] = ()
    extra: dict = field(default_factory=dict)

    def conclusion(self) -> str:
        ctx = self.context.show()
        lhs = f"{ctx} |- " if ctx else "|- "
        return f"{lhs}{_show_subject(self.subject)} : {_show_type(self.type)}"

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "conclusion": self.conclusion(),
            "children": [c.to_json() for c in self.children],
        }

    def nodes(self):
        yield self
        for c in self.children:
            yield from c.nodes()


def _show_subject(s: Any) -> str:
    if isinstance(s, tuple):
        parts = [f"[{pretty(a.expr)}]" if a.irrelevant else pretty(a.expr) for a in s]
        return "(" + ", ".join(parts) + ")"
    return pretty(s)


def _show_type(t: Any) -> str:
    if isinstance(t, tuple):
        return "".join(
            f"[{e.name} : {pretty(e.type)}]" if e.irrelevant else f"({e.name} : {pretty(e.type)})"
            for e in t
        ) or "()"
    return pretty(t)


# ---------------------------------------------------------------------------
# telescope helpers


def tele_to_pi(tele: Telescope, end: Term = STAR) -> Term:
    out = end
    for e in reversed(tele):
        out = Pi(e.name, e.type, out, e.irrelevant)
    return out


def pi_to_tele(t: Term, n: int) -> Telescope:
    out = []
    for _ in range(n):
        assert isinstance(t, Pi)
        out.append(Entry(t.name, t.dom, t.irrelevant))
        t = t.cod
    return tuple(out)


def instantiate(tele: Telescope, names: Sequence[str], values: Sequence[Term]) -> Telescope:
    """Capture-avoiding ``[values/names]tele``."""
    mapping = dict(zip(names, values))
    if not mapping:
        return tele
    return pi_to_tele(subst_many(tele_to_pi(tele), mapping), len(tele))


def type_eq(a: Term, b: Term) -> bool:
    return alpha_eq(erase(a), erase(b))


# ---------------------------------------------------------------------------
# the checker


class Checker:
    def __init__(self, sig: Signature):
        self.sig = sig

    # -- helpers -----------------------------------------------------------

    def binder(self, ctx: Context, name: str, scope: Iterable[Term]) -> str:
        """A name for a new binding that shadows nothing already in scope."""
        if name not in ctx.names and not self.sig.taken(name):
            return name
        avoid = set(ctx.names) | set(self.sig.globals) | set(self.sig.runnables)
        for t in scope:
            if t is not None:
                avoid |= t.fv
        while True:
            name = fresh_name(name, avoid)
            if not self.sig.taken(name):
                return name
            avoid.add(name)

    def kind(self, ctx: Context, ty: Term, rule: str) -> Derivation:
        d = self.infer(ctx, ty)
        if not isinstance(d.type, Star):
            raise CheckError(rule, "expected a type", ty, STAR, d.type)
        return d

    def check(self, ctx: Context, a: Term, expected: Term, rule: str) -> Derivation:
        match a:
            case Join(lhs=None):
                if not isinstance(expected, Eq):
                    raise CheckError("t_join", "join used where an equation is not expected", a, expected)
                return self.infer(ctx, Join(expected.lhs, expected.rhs, a.i, a.j))
            case Lam(irrelevant=irr) if isinstance(expected, Pi) and expected.irrelevant == irr:
                d = self.lam(ctx, a, expected)
            case Case(ret=None):
                d = self.case(ctx, a, expected)
            case _:
                d = self.infer(ctx, a)
        if not type_eq(d.type, expected):
            raise CheckError(rule, "type mismatch", a, expected, d.type)
        return d

    def join_terms(self, ctx: Context, lhs: Term, rhs: Term) -> tuple[UTerm, UTerm]:
        return (
            self.sig.close(erase(lhs), ctx.names),
            self.sig.close(erase(rhs), ctx.names),
        )

    # -- dispatch ----------------------------------------------------------

    def infer(self, ctx: Context, a: Term) -> Derivation:
        match a:
            case Star():
                return Derivation("t_type", ctx, a, STAR)
            case Var(name=x):
                ty = ctx.lookup(x)
                if ty is None:
                    g = self.sig.globals.get(x)
                    if g is None:
                        hint = " (non-value definitions cannot be referenced)" if x in self.sig.runnables else ""
                        raise CheckError("t_var", f"unbound variable {x}{hint}", a)
                    ty = g.type
                return Derivation("t_var", ctx, a, ty)
            case Pi(name=x, dom=dom, cod=cod, irrelevant=irr):
                rule = "t_ipi" if irr else "t_pi"
                kd = self.kind(ctx, dom, rule)
                x2 = self.binder(ctx, x, [cod])
                kc = self.kind(ctx.extend(x2, dom), subst(cod, x, Var(x2)), rule)
                return Derivation(rule, ctx, a, STAR, (kd, kc), {"name": x2})
            case Lam():
                return self.lam(ctx, a, None)
            case Rec(name=f, type=ty, body=body):
                if not isinstance(ty, Pi):
                    raise CheckError("t_rec", "rec must be annotated with a function type", a, actual=ty)
                if not is_value(body):
                    raise CheckError("t_rec", "the body of rec must be a value", body)
                kd = self.kind(ctx, ty, "t_rec")
                f2 = self.binder(ctx, f, [body])
                db = self.check(ctx.extend(f2, ty), subst(body, f, Var(f2)), ty, "t_rec")
                return Derivation("t_rec", ctx, a, ty, (kd, db), {"name": f2})
            case App(fun=fun, arg=arg, irrelevant=irr):
                return self.app(ctx, a, fun, arg, irr)
            case Abort(type=ty):
                return Derivation("t_abort", ctx, a, ty, (self.kind(ctx, ty, "t_abort"),))
            case Eq(lhs=l, rhs=r):
                return Derivation("t_eq", ctx, a, STAR, (self.infer(ctx, l), self.infer(ctx, r)))
            case Join(lhs=None):
                raise CheckError("t_join", "join needs an equation here: write join : a = b", a)
            case Join(lhs=l, rhs=r, i=i, j=j):
                eq = Eq(l, r)
                ke = self.kind(ctx, eq, "t_join")
                m, n = self.join_terms(ctx, l, r)
                if not cbv_join(m, n, i, j):
                    err = CheckError("t_join", f"the two sides do not meet within {i} and {j} CBV steps", a)
                    err.notes.append(f"left side reaches: {pretty(run(m, i).term)}")
                    err.notes.append(f"right side reaches: {pretty(run(n, j).term)}")
                    raise err
                return Derivation("t_join", ctx, a, eq, (ke,))
            case Conv():
                return self.conv(ctx, a)
            case InjDom(proof=p):
                dp, lpi, rpi = self.pi_equation(ctx, p, "t_injdom")
                return Derivation("t_injdom", ctx, a, Eq(lpi.dom, rpi.dom), (dp,))
            case InjRng(proof=p, witness=v):
                dp, lpi, rpi = self.pi_equation(ctx, p, "t_injrng")
                if not is_value(v):
                    raise CheckError("t_injrng", "the witness must be a value", v)
                dv = self.check(ctx, v, lpi.dom, "t_injrng")
                v2 = dv.subject
                ty = Eq(subst(lpi.cod, lpi.name, v2), subst(rpi.cod, rpi.name, v2))
                return Derivation("t_injrng", ctx, a, ty, (dp, dv))
            case InjTCon(index=k, proof=p):
                dp = self.infer(ctx, p)
                ty = dp.type
                if not (
                    isinstance(ty, Eq)
                    and isinstance(ty.lhs, TCon)
                    and isinstance(ty.rhs, TCon)
                    and ty.lhs.name == ty.rhs.name
                ):
                    raise CheckError(
                        "t_injtcon", "proof must equate two applications of one type constructor", p, actual=ty
                    )
                if not 1 <= k <= len(ty.lhs.params):
                    raise CheckError("t_injtcon", f"index {k} is out of range", a, actual=ty)
                return Derivation(
                    "t_injtcon", ctx, a, Eq(ty.lhs.params[k - 1], ty.rhs.params[k - 1]), (dp,)
                )
            case TCon(name=d, params=ps):
                info = self.sig.datatypes.get(d)
                if info is None:
                    raise CheckError("t_tcon", f"unknown type constructor {d}", a)
                if len(ps) != len(info.params):
                    raise CheckError(
                        "t_tcon", f"{d} expects {len(info.params)} parameters, got {len(ps)}", a
                    )
                dl = self.arg_list(ctx, tuple(Arg(p) for p in ps), info.params, "t_tcon")
                return Derivation("t_tcon", ctx, a, STAR, (dl,))
            case DCon(name=c, params=ps, args=args):
                return self.dcon(ctx, a, c, ps, args)
            case Case():
                return self.case(ctx, a, None)
        raise CheckError("t_syntax", f"not an annotated term: {type(a).__name__}", a)

    # -- individual rules --------------------------------------------------

    def lam(self, ctx: Context, a: Lam, expected: Optional[Pi]) -> Derivation:
        rule = "t_iabs" if a.irrelevant else "t_abs"
        kd = self.kind(ctx, a.dom, rule)
        x2 = self.binder(ctx, a.name, [a.body] + ([expected] if expected is not None else []))
        body = subst(a.body, a.name, Var(x2))
        inner = ctx.extend(x2, a.dom)
        if expected is not None and type_eq(a.dom, expected.dom):
            db = self.check(inner, body, subst(expected.cod, expected.name, Var(x2)), rule)
        else:
            db = self.infer(inner, body)
        if a.irrelevant and x2 in erase(db.subject).fv:
            raise CheckError(rule, f"irrelevant variable {a.name} is used at runtime", a)
        return Derivation(rule, ctx, a, Pi(x2, a.dom, db.type, a.irrelevant), (kd, db), {"name": x2})

    def app(self, ctx: Context, a: Term, fun: Term, arg: Term, irr: bool) -> Derivation:
        rule = "t_iapp" if irr else "t_app"
        if irr and not is_value(arg):
            raise CheckError(rule, "irrelevant argument must be a value", arg)
        df = self.infer(ctx, fun)
        fty = df.type
        if not isinstance(fty, Pi):
            raise CheckError(rule, "applied term does not have a function type", fun, actual=fty)
        if fty.irrelevant != irr:
            want = "an irrelevant" if fty.irrelevant else "a relevant"
            raise CheckError(rule, f"function expects {want} argument", a, actual=fty)
        da = self.check(ctx, arg, fty.dom, rule)
        res = subst(fty.cod, fty.name, da.subject)
        kr = self.kind(ctx, res, rule)
        return Derivation(rule, ctx, a, res, (df, da, kr))

    def pi_equation(self, ctx: Context, p: Term, rule: str) -> tuple[Derivation, Pi, Pi]:
        dp = self.infer(ctx, p)
        ty = dp.type
        if not (
            isinstance(ty, Eq)
            and isinstance(ty.lhs, Pi)
            and isinstance(ty.rhs, Pi)
            and ty.lhs.irrelevant == ty.rhs.irrelevant
        ):
            raise CheckError(rule, "proof must equate two function types of the same relevance", p, actual=ty)
        return dp, ty.lhs, ty.rhs

    def arg_list(self, ctx: Context, args: tuple[Arg, ...], tele: Telescope, rule: str) -> Derivation:
        if len(args) != len(tele):
            raise CheckError(rule, f"expected {len(tele)} arguments, got {len(args)}", args, actual=None)
        return self._arg_list(ctx, args, tele, rule)

    def _arg_list(self, ctx: Context, args: tuple[Arg, ...], tele: Telescope, rule: str) -> Derivation:
        if not args:
            return Derivation("tl_empty", ctx, (), ())
        arg, entry = args[0], tele[0]
        if arg.irrelevant != entry.irrelevant:
            want = "irrelevant" if entry.irrelevant else "relevant"
            raise CheckError(rule, f"argument for {entry.name} must be {want}", arg.expr)
        if arg.irrelevant and not is_value(arg.expr):
            raise CheckError(rule, "irrelevant argument must be a value", arg.expr)
        kt = self.kind(ctx, entry.type, rule)
        dh = self.check(ctx, arg.expr, entry.type, rule)
        rest = instantiate(tele[1:], [entry.name], [dh.subject])
        dt = self._arg_list(ctx, args[1:], rest, rule)
        filled = (Arg(dh.subject, arg.irrelevant),) + dt.subject
        node = "tl_icons" if arg.irrelevant else "tl_cons"
        return Derivation(node, ctx, filled, tele, (dh, kt, dt))

    def dcon(self, ctx: Context, a: Term, c: str, ps, args) -> Derivation:
        owner = self.sig.owners.get(c)
        if owner is None:
            raise CheckError("t_dcon", f"unknown data constructor {c}", a)
        info = self.sig.datatypes[owner]
        if len(ps) != len(info.params):
            raise CheckError(
                "t_dcon", f"{c} expects {len(info.params)} type parameters, got {len(ps)}", a
            )
        dp = self.arg_list(ctx, tuple(Arg(p) for p in ps), info.params, "t_dcon")
        params = tuple(x.expr for x in dp.subject)
        tele = instantiate(info.constructor(c), [e.name for e in info.params], params)
        da = self.arg_list(ctx, tuple(args), tele, "t_dcon")
        return Derivation("t_dcon", ctx, a, TCon(owner, params), (dp, da))

    def conv(self, ctx: Context, a: Conv) -> Derivation:
        erased_template = erase(a.template)
        lhs_map: dict[str, Term] = {}
        rhs_map: dict[str, Term] = {}
        proof_derivs: list[Derivation] = []
        kinds: list[str] = []
        for x, p in zip(a.tvars, a.proofs):
            if isinstance(p, ProofValue):
                v = p.value
                if not is_value(v):
                    raise CheckError("t_conv", "conversion proof must be a value", v)
                dv = self.infer(ctx, v)
                if not isinstance(dv.type, Eq):
                    raise CheckError("t_conv", "conversion proof does not prove an equation", v, actual=dv.type)
                lhs_map[x], rhs_map[x] = dv.type.lhs, dv.type.rhs
                proof_derivs.append(dv)
                kinds.append("value")
            else:
                if x in erased_template.fv:
                    raise CheckError(
                        "t_conv", "an annotation proof may only be used at an erased position", a
                    )
                proof_derivs.append(self.infer(ctx, p.lhs))
                proof_derivs.append(self.infer(ctx, p.rhs))
                lhs_map[x], rhs_map[x] = p.lhs, p.rhs
                kinds.append("annotation")
        source = subst_many(a.template, lhs_map)
        target = subst_many(a.template, rhs_map)
        ds = self.check(ctx, a.subject, source, "t_conv")
        kt = self.kind(ctx, target, "t_conv")
        return Derivation(
            "t_conv",
            ctx,
            a,
            target,
            (ds, *proof_derivs, kt),
            {"proofs": tuple(kinds), "source": source},
        )

    def case(self, ctx: Context, a: Case, expected: Optional[Term]) -> Derivation:
        ds = self.infer(ctx, a.scrut)
        sty = ds.type
        if not isinstance(sty, TCon):
            raise CheckError("t_case", "scrutinee does not have a datatype type", a.scrut, actual=sty)
        info = self.sig.datatypes[sty.name]
        seen = [br.con for br in a.branches]
        missing = [c for c in info.con_names if c not in seen]
        extra = [c for c in seen if c not in info.con_names]
        dups = sorted({c for c in seen if seen.count(c) > 1})
        if missing or extra or dups:
            parts = []
            if missing:
                parts.append("missing " + ", ".join(missing))
            if extra:
                parts.append("not constructors of " + sty.name + ": " + ", ".join(extra))
            if dups:
                parts.append("repeated " + ", ".join(dups))
            raise CheckError("t_case", "branches must cover the constructors exactly: " + "; ".join(parts), a)
        children: list[Derivation] = [ds]
        result = a.ret if a.ret is not None else expected
        ret_kind = self.kind(ctx, a.ret, "t_case") if a.ret is not None else None
        if not a.branches and result is None:
            raise CheckError("t_case", "a case with no branches needs a return type", a)
        param_names = [e.name for e in info.params]
        layouts = []
        for br in a.branches:
            tele = instantiate(info.constructor(br.con), param_names, sty.params)
            if len(br.tele) != len(tele):
                raise CheckError(
                    "t_case", f"pattern for {br.con} binds {len(br.tele)} fields, expected {len(tele)}", a
                )
            names = [e.name for e in br.tele] + [a.eq_name]
            if len(set(names)) != len(names):
                raise CheckError("t_case", f"repeated pattern variable in branch {br.con}", a)
            scope_terms = [br.body] + [e.type for e in br.tele if e.type is not None]
            rest = tele_to_pi(tele)
            ren: dict[str, Term] = {}
            inner = ctx
            fields: list[tuple[str, bool]] = []
            for pe in br.tele:
                assert isinstance(rest, Pi)
                if pe.irrelevant != rest.irrelevant:
                    want = "irrelevant" if rest.irrelevant else "relevant"
                    raise CheckError("t_case", f"pattern variable {pe.name} of {br.con} must be {want}", a)
                new = self.binder(inner, pe.name, scope_terms)
                if pe.type is not None:
                    ann = subst_many(pe.type, ren)
                    if not type_eq(ann, rest.dom):
                        raise CheckError("t_case", f"pattern annotation for {pe.name} disagrees", ann, rest.dom, ann)
                inner = inner.extend(new, rest.dom)
                ren[pe.name] = Var(new)
                fields.append((new, pe.irrelevant))
                rest = subst(rest.cod, rest.name, Var(new))
            y = self.binder(inner, a.eq_name, scope_terms)
            ren[a.eq_name] = Var(y)
            pattern = DCon(br.con, sty.params, tuple(Arg(Var(n), irr) for n, irr in fields))
            inner = inner.extend(y, Eq(ds.subject, pattern))
            body = subst_many(br.body, ren)
            if result is not None:
                db = self.check(inner, body, result, "t_case")
            else:
                db = self.infer(inner, body)
                result = db.type
                local = {n for n, _ in fields} | {y}
                if result.fv & local:
                    raise CheckError(
                        "t_case",
                        "branch type mentions pattern variables; add a return type or convert",
                        br.body,
                        actual=result,
                    )
            if not type_eq(db.type, result):
                raise CheckError("t_case", f"branch {br.con} has a different type", br.body, result, db.type)
            used = erase(db.subject).fv
            for n, irr in fields:
                if irr and n in used:
                    raise CheckError("t_case", f"irrelevant pattern variable {n} is used at runtime", br.body)
            if y in used:
                raise CheckError("t_case", f"equation variable {a.eq_name} is used at runtime", br.body)
            children.append(db)
            layouts.append((br.con, tuple(fields), y))
        assert result is not None
        children.append(ret_kind if ret_kind is not None else self.kind(ctx, result, "t_case"))
        return Derivation(
            "t_case", ctx, a, result, tuple(children), {"branches": tuple(layouts), "ret": a.ret is not None}
        )


# ---------------------------------------------------------------------------
# public operations


def infer(sig: Signature, a: Term, ctx: Context = EMPTY) -> tuple[Term, Derivation]:
    d = Checker(sig).infer(ctx, a)
    return d.type, d


def check(sig: Signature, a: Term, expected: Term, ctx: Context = EMPTY) -> Derivation:
    return Checker(sig).check(ctx, a, expected, "t_check")


def check_conv(sig: Signature, a: Conv, ctx: Context = EMPTY) -> Term:
    return Checker(sig).conv(ctx, a).type


def check_datatype(sig: Signature, decl: DataDecl) -> Signature:
    """Check a declaration and return the extended signature."""
    if sig.taken(decl.name):
        raise CheckError("t_data", f"{decl.name} is already defined", decl.name)
    seen_cons: set[str] = set()
    for con, _ in decl.cons:
        if sig.taken(con) or con in seen_cons or con == decl.name:
            raise CheckError("t_data", f"constructor {con} is already defined", con)
        seen_cons.add(con)
    checker = Checker(sig)
    ctx = EMPTY
    for e in decl.params:
        if e.irrelevant:
            raise CheckError("t_data", f"datatype parameter {e.name} must be relevant", decl.name)
        if e.name in ctx.names:
            raise CheckError("t_data", f"repeated parameter {e.name}", decl.name)
        checker.kind(ctx, e.type, "t_data")
        ctx = ctx.extend(e.name, e.type)
    out = sig.copy()
    out.datatypes[decl.name] = DataInfo(decl.name, decl.params, decl.cons)
    for con, _ in decl.cons:
        out.owners[con] = decl.name
    out.scope.add(decl)
    checker = Checker(out)
    for con, tele in decl.cons:
        inner = ctx
        for e in tele:
            if e.name in inner.names:
                raise CheckError("t_data", f"field {e.name} of {con} shadows an earlier name", con)
            checker.kind(inner, e.type, "t_data")
            inner = inner.extend(e.name, e.type)
    out.order.append(decl.name)
    return out


def check_definition(sig: Signature, item: Definition) -> tuple[Signature, Derivation]:
    if sig.taken(item.name):
        raise CheckError("t_def", f"{item.name} is already defined", item.name)
    checker = Checker(sig)
    checker.kind(EMPTY, item.type, "t_def")
    d = checker.check(EMPTY, item.body, item.type, "t_def")
    out = sig.copy()
    body = d.subject
    entry = GlobalDef(item.name, item.type, body, sig.close(erase(body)))
    if is_value(body):
        out.globals[item.name] = entry
    else:
        out.runnables[item.name] = entry
    out.order.append(item.name)
    return out, d


@dataclass
class CheckedProgram:
    signature: Signature
    derivations: dict[str, Derivation]
    names: list[str]  # definitions of this program, in order


def check_program(source: SourceProgram, sig: Optional[Signature] = None) -> CheckedProgram:
    """Check items in order; the first failure is raised with its location."""
    sig = sig if sig is not None else Signature()
    derivs: dict[str, Derivation] = {}
    names: list[str] = []
    for item in source.items:
        try:
            if isinstance(item, DataDecl):
                sig = check_datatype(sig, item)
            else:
                sig, d = check_definition(sig, item)
                derivs[item.name] = d
                names.append(item.name)
        except CheckError as exc:
            exc.item = item.name
            exc.line = item.line
            raise
    return CheckedProgram(sig, derivs, names)
