"""Typing derivations of the unannotated language and their validator.

``erase_derivation`` maps each annotated rule to its unannotated
counterpart.  ``validate_uderivation`` re-checks every node locally: the
children's conclusions must be exactly the premises the rule demands, and
the side conditions must hold.  Equations proved by ``join`` are accepted
when CBV evaluation meets within a bound or when a bounded parallel
reduction search finds a common reduct.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..cbv import cbv_join
from ..erasure import erase, erase_telescope
from ..parallel import joinable
from ..surface import pretty
from ..syntax import (
    ERASED,
    Entry,
    Erased,
    Telescope,
    UAbort,
    UApp,
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
    alpha_eq,
    is_value,
    subst,
    subst_many,
)
from ..typecheck import Derivation, Signature

UContext = tuple[tuple[str, UTerm], ...]

DEFAULT_CBV_BOUND = 100
DEFAULT_PARALLEL_DEPTH = 4


@dataclass
class UDerivation:
    rule: str
    context: UContext
    subject: Any  # UTerm, or a tuple of UTerm for argument lists
    type: Any  # UTerm, or an erased telescope
    children: tuple[UDerivation, ...] = ()
    extra: dict = field(default_factory=dict)

    def conclusion(self) -> str:
        ctx = ", ".join(f"{x} : {pretty(t)}" for x, t in self.context)
        if isinstance(self.subject, tuple):
            subj = "(" + ", ".join(pretty(m) for m in self.subject) + ")"
            ty = "".join(
                f"[{e.name} : {pretty(e.type)}]" if e.irrelevant else f"({e.name} : {pretty(e.type)})"
                for e in self.type
            ) or "()"
        else:
            subj, ty = pretty(self.subject), pretty(self.type)
        return (f"{ctx} |- " if ctx else "|- ") + f"{subj} : {ty}"

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


# ---------------------------------------------------------------------------
# erasure of derivations


def _erase_ctx(d: Derivation) -> UContext:
    return tuple((x, erase(t)) for x, t in d.context.entries)


def _erase_subject(s: Any) -> Any:
    if isinstance(s, tuple):
        return tuple(ERASED if a.irrelevant else erase(a.expr) for a in s)
    return erase(s)


def _erase_type(t: Any) -> Any:
    if isinstance(t, tuple):
        return erase_telescope(t)
    return erase(t)


def erase_derivation(d: Derivation) -> UDerivation:
    """Map every ``t_*`` node to its ``et_*`` counterpart."""
    ctx = _erase_ctx(d)
    subject = _erase_subject(d.subject)
    ty = _erase_type(d.type)
    rule = d.rule
    if rule == "t_conv":
        kinds = d.extra["proofs"]
        subj_d, rest = d.children[0], list(d.children[1:-1])
        values: list[UDerivation] = []
        tvars: list[str] = []
        for x, kind in zip(d.subject.tvars, kinds):
            if kind == "value":
                values.append(erase_derivation(rest.pop(0)))
                tvars.append(x)
            else:
                rest.pop(0)
                rest.pop(0)
        if not values:
            inner = erase_derivation(subj_d)
            inner.type = ty
            return inner
        children = (erase_derivation(subj_d), *values, erase_derivation(d.children[-1]))
        return UDerivation(
            "et_conv", ctx, subject, ty, children,
            {"template": erase(d.subject.template), "tvars": tuple(tvars)},
        )
    extra: dict = {}
    if rule == "t_case":
        extra = {"branches": d.extra["branches"]}
    elif rule == "t_injtcon":
        extra = {"index": d.subject.index}
    children = tuple(erase_derivation(c) for c in d.children)
    return UDerivation("e" + rule, ctx, subject, ty, children, extra)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Validation:
    ok: bool
    path: tuple[int, ...] = ()
    rule: str = ""
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


class _Invalid(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _need(cond: bool, reason: str) -> None:
    if not cond:
        raise _Invalid(reason)


def _utele_to_pi(tele: Telescope) -> UTerm:
    out: UTerm = UStar()
    for e in reversed(tele):
        out = UPi(e.name, e.type, out, e.irrelevant)
    return out


def _upi_to_tele(t: UTerm, n: int) -> Telescope:
    out = []
    for _ in range(n):
        assert isinstance(t, UPi)
        out.append(Entry(t.name, t.dom, t.irrelevant))
        t = t.cod
    return tuple(out)


def _uinstantiate(tele: Telescope, names, values) -> Telescope:
    mapping = dict(zip(names, values))
    if not mapping or not tele:
        return tele
    return _upi_to_tele(subst_many(_utele_to_pi(tele), mapping), len(tele))


def _tele_eq(a: Telescope, b: Telescope) -> bool:
    return (
        len(a) == len(b)
        and all(x.irrelevant == y.irrelevant for x, y in zip(a, b))
        and alpha_eq(_utele_to_pi(a), _utele_to_pi(b))
    )


class _Validator:
    def __init__(self, sig: Signature, cbv_bound: int, depth: int):
        self.sig = sig
        self.cbv_bound = cbv_bound
        self.depth = depth
        self.data = {
            name: (
                erase_telescope(info.params),
                {c: erase_telescope(t) for c, t in info.cons},
                info.con_names,
            )
            for name, info in sig.datatypes.items()
        }
        self.global_types = {name: erase(g.type) for name, g in sig.globals.items()}

    # -- helpers -------------------------------------------------------------

    def lookup(self, ctx: UContext, x: str) -> Optional[UTerm]:
        for y, t in reversed(ctx):
            if y == x:
                return t
        return self.global_types.get(x)

    def same_ctx(self, child: UDerivation, ctx: UContext, what: str) -> None:
        _need(len(child.context) == len(ctx), f"{what}: context has the wrong length")
        for (x, t), (y, u) in zip(child.context, ctx):
            _need(x == y and alpha_eq(t, u), f"{what}: context entry {y} differs")

    def premise(
        self, child: UDerivation, ctx: UContext, subject: Optional[UTerm], ty: Optional[UTerm], what: str
    ) -> None:
        self.same_ctx(child, ctx, what)
        if subject is not None:
            _need(alpha_eq(child.subject, subject), f"{what}: premise subject differs")
        if ty is not None:
            _need(alpha_eq(child.type, ty), f"{what}: premise type differs")

    def kind_premise(self, child: UDerivation, ctx: UContext, ty: UTerm, what: str) -> None:
        self.premise(child, ctx, ty, UStar(), what)

    def arity(self, d: UDerivation, n: int) -> None:
        _need(len(d.children) == n, f"expected {n} premises, found {len(d.children)}")

    def extended(self, d: UDerivation, child: UDerivation, dom: UTerm) -> str:
        """The name ``child`` binds on top of ``d``'s context."""
        _need(len(child.context) == len(d.context) + 1, "premise must extend the context by one")
        name, ty = child.context[-1]
        self.same_ctx(UDerivation("", child.context[:-1], None, None), d.context, "premise")
        _need(alpha_eq(ty, dom), f"bound variable {name} has the wrong type")
        _need(all(name != x for x, _ in d.context), f"bound variable {name} shadows the context")
        return name

    def closed_join(self, ctx: UContext, m: UTerm, n: UTerm) -> bool:
        local = [x for x, _ in ctx]
        m2, n2 = self.sig.close(m, local), self.sig.close(n, local)
        if cbv_join(m2, n2, self.cbv_bound, self.cbv_bound):
            return True
        return joinable(m2, n2, self.depth)

    # -- traversal -----------------------------------------------------------

    def validate(self, d: UDerivation, path: tuple[int, ...]) -> Validation:
        try:
            self.node(d)
        except _Invalid as exc:
            return Validation(False, path, d.rule, exc.reason)
        for k, c in enumerate(d.children):
            res = self.validate(c, path + (k,))
            if not res:
                return res
        return Validation(True)

    def node(self, d: UDerivation) -> None:
        handler = getattr(self, "rule_" + d.rule, None)
        _need(handler is not None, f"unknown rule {d.rule}")
        handler(d)

    # -- rules ---------------------------------------------------------------

    def rule_et_type(self, d):
        self.arity(d, 0)
        _need(isinstance(d.subject, UStar) and isinstance(d.type, UStar), "conclusion must be * : *")

    def rule_et_var(self, d):
        self.arity(d, 0)
        _need(isinstance(d.subject, UVar), "subject must be a variable")
        ty = self.lookup(d.context, d.subject.name)
        _need(ty is not None, f"{d.subject.name} is not in the context")
        _need(alpha_eq(ty, d.type), "type differs from the context entry")

    def _pi(self, d, irrelevant):
        self.arity(d, 2)
        m = d.subject
        _need(isinstance(m, UPi) and m.irrelevant == irrelevant, "subject must be a function type")
        _need(isinstance(d.type, UStar), "type must be *")
        kd, kc = d.children
        self.kind_premise(kd, d.context, m.dom, "domain")
        z = self.extended(d, kc, m.dom)
        _need(isinstance(kc.type, UStar), "codomain must be a type")
        _need(alpha_eq(UPi(z, m.dom, kc.subject, irrelevant), m), "codomain premise differs")

    def rule_et_pi(self, d):
        self._pi(d, False)

    def rule_et_ipi(self, d):
        self._pi(d, True)

    def rule_et_abs(self, d):
        self.arity(d, 2)
        m, ty = d.subject, d.type
        _need(isinstance(m, ULam), "subject must be a lambda")
        _need(isinstance(ty, UPi) and not ty.irrelevant, "type must be a relevant function type")
        kd, body = d.children
        self.kind_premise(kd, d.context, ty.dom, "domain")
        z = self.extended(d, body, ty.dom)
        _need(alpha_eq(ULam(z, body.subject), m), "body premise differs")
        _need(alpha_eq(UPi(z, ty.dom, body.type, False), ty), "body type differs")

    def rule_et_iabs(self, d):
        self.arity(d, 2)
        m, ty = d.subject, d.type
        _need(isinstance(m, UILam), "subject must be an irrelevant lambda")
        _need(isinstance(ty, UPi) and ty.irrelevant, "type must be an irrelevant function type")
        kd, body = d.children
        self.kind_premise(kd, d.context, ty.dom, "domain")
        z = self.extended(d, body, ty.dom)
        _need(alpha_eq(body.subject, m.body), "body premise differs")
        _need(z not in m.body.fv, "irrelevant variable occurs in the body")
        _need(alpha_eq(UPi(z, ty.dom, body.type, True), ty), "body type differs")

    def rule_et_rec(self, d):
        self.arity(d, 2)
        m, ty = d.subject, d.type
        _need(isinstance(m, URec), "subject must be rec")
        _need(isinstance(ty, UPi), "rec must have a function type")
        _need(is_value(m.body), "rec body must be a value")
        kd, body = d.children
        self.kind_premise(kd, d.context, ty, "annotation")
        g = self.extended(d, body, ty)
        _need(alpha_eq(URec(g, body.subject), m), "body premise differs")
        _need(alpha_eq(body.type, ty), "body type differs")

    def _app(self, d, irrelevant):
        self.arity(d, 3)
        df, da, kr = d.children
        m = d.subject
        if irrelevant:
            _need(isinstance(m, UIApp), "subject must be an irrelevant application")
        else:
            _need(isinstance(m, UApp), "subject must be an application")
        self.premise(df, d.context, m.fun, None, "function")
        fty = df.type
        _need(isinstance(fty, UPi) and fty.irrelevant == irrelevant, "function premise has the wrong type")
        self.premise(da, d.context, None if irrelevant else m.arg, fty.dom, "argument")
        if irrelevant:
            _need(is_value(da.subject), "irrelevant argument must be a value")
        res = subst(fty.cod, fty.name, da.subject)
        self.kind_premise(kr, d.context, res, "result")
        _need(alpha_eq(d.type, res), "result type differs")

    def rule_et_app(self, d):
        self._app(d, False)

    def rule_et_iapp(self, d):
        self._app(d, True)

    def rule_et_abort(self, d):
        self.arity(d, 1)
        _need(isinstance(d.subject, UAbort), "subject must be abort")
        self.kind_premise(d.children[0], d.context, d.type, "type")

    def rule_et_eq(self, d):
        self.arity(d, 2)
        m = d.subject
        _need(isinstance(m, UEq) and isinstance(d.type, UStar), "conclusion must be an equation : *")
        self.premise(d.children[0], d.context, m.lhs, None, "left side")
        self.premise(d.children[1], d.context, m.rhs, None, "right side")

    def rule_et_join(self, d):
        self.arity(d, 1)
        _need(isinstance(d.subject, UJoin), "subject must be join")
        ty = d.type
        _need(isinstance(ty, UEq), "join must prove an equation")
        self.kind_premise(d.children[0], d.context, ty, "equation")
        _need(self.closed_join(d.context, ty.lhs, ty.rhs), "the two sides are not joinable")

    def rule_et_conv(self, d):
        tvars = d.extra["tvars"]
        template = d.extra["template"]
        self.arity(d, len(tvars) + 2)
        subj = d.children[0]
        proofs = d.children[1:-1]
        lhs, rhs = {}, {}
        for x, p in zip(tvars, proofs):
            self.same_ctx(p, d.context, "proof")
            _need(is_value(p.subject), "conversion proof must be a value")
            _need(isinstance(p.type, UEq), "conversion proof must prove an equation")
            lhs[x], rhs[x] = p.type.lhs, p.type.rhs
        self.premise(subj, d.context, d.subject, subst_many(template, lhs), "subject")
        target = subst_many(template, rhs)
        self.kind_premise(d.children[-1], d.context, target, "target")
        _need(alpha_eq(d.type, target), "result type differs")

    def _pi_equation(self, p: UDerivation, ctx) -> tuple[UPi, UPi]:
        self.same_ctx(p, ctx, "proof")
        ty = p.type
        _need(
            isinstance(ty, UEq)
            and isinstance(ty.lhs, UPi)
            and isinstance(ty.rhs, UPi)
            and ty.lhs.irrelevant == ty.rhs.irrelevant,
            "proof must equate two function types",
        )
        return ty.lhs, ty.rhs

    def rule_et_injdom(self, d):
        self.arity(d, 1)
        _need(isinstance(d.subject, UJoin), "subject must be join")
        l, r = self._pi_equation(d.children[0], d.context)
        _need(alpha_eq(d.type, UEq(l.dom, r.dom)), "result type differs")

    def rule_et_injrng(self, d):
        self.arity(d, 2)
        _need(isinstance(d.subject, UJoin), "subject must be join")
        l, r = self._pi_equation(d.children[0], d.context)
        w = d.children[1]
        self.premise(w, d.context, None, l.dom, "witness")
        _need(is_value(w.subject), "witness must be a value")
        want = UEq(subst(l.cod, l.name, w.subject), subst(r.cod, r.name, w.subject))
        _need(alpha_eq(d.type, want), "result type differs")

    def rule_et_injtcon(self, d):
        self.arity(d, 1)
        _need(isinstance(d.subject, UJoin), "subject must be join")
        p = d.children[0]
        self.same_ctx(p, d.context, "proof")
        ty = p.type
        _need(
            isinstance(ty, UEq)
            and isinstance(ty.lhs, UTCon)
            and isinstance(ty.rhs, UTCon)
            and ty.lhs.name == ty.rhs.name,
            "proof must equate two applications of one type constructor",
        )
        k = d.extra["index"]
        _need(1 <= k <= len(ty.lhs.params), "index out of range")
        _need(alpha_eq(d.type, UEq(ty.lhs.params[k - 1], ty.rhs.params[k - 1])), "result type differs")

    def rule_et_tcon(self, d):
        self.arity(d, 1)
        m = d.subject
        _need(isinstance(m, UTCon) and m.name in self.data, "subject must be a declared type constructor")
        _need(isinstance(d.type, UStar), "type must be *")
        params, _, _ = self.data[m.name]
        lst = d.children[0]
        self.same_ctx(lst, d.context, "parameters")
        _need(len(lst.subject) == len(m.params), "parameter count differs")
        _need(all(alpha_eq(a, b) for a, b in zip(lst.subject, m.params)), "parameter premise differs")
        _need(_tele_eq(lst.type, params), "parameter telescope differs")

    def rule_et_dcon(self, d):
        self.arity(d, 2)
        m, ty = d.subject, d.type
        _need(isinstance(m, UDCon) and isinstance(ty, UTCon), "conclusion must be a constructor at its datatype")
        _need(ty.name in self.data, "unknown datatype")
        params, cons, _ = self.data[ty.name]
        _need(m.name in cons, f"{m.name} is not a constructor of {ty.name}")
        plist, alist = d.children
        self.same_ctx(plist, d.context, "parameters")
        _need(len(plist.subject) == len(ty.params), "parameter count differs")
        _need(all(alpha_eq(a, b) for a, b in zip(plist.subject, ty.params)), "parameter premise differs")
        _need(_tele_eq(plist.type, params), "parameter telescope differs")
        tele = _uinstantiate(cons[m.name], [e.name for e in params], ty.params)
        self.same_ctx(alist, d.context, "arguments")
        _need(len(alist.subject) == len(m.args), "argument count differs")
        _need(all(alpha_eq(a, b) for a, b in zip(alist.subject, m.args)), "argument premise differs")
        _need(_tele_eq(alist.type, tele), "argument telescope differs")

    def rule_etl_empty(self, d):
        self.arity(d, 0)
        _need(d.subject == () and d.type == (), "empty list must have the empty telescope")

    def _list(self, d, irrelevant):
        self.arity(d, 3)
        _need(len(d.subject) >= 1 and len(d.type) >= 1, "non-empty list expected")
        head, entry = d.subject[0], d.type[0]
        _need(entry.irrelevant == irrelevant, "relevance differs from the telescope")
        dh, kt, dt = d.children
        if irrelevant:
            _need(isinstance(head, Erased), "irrelevant argument must be erased")
            self.premise(dh, d.context, None, entry.type, "argument")
            _need(is_value(dh.subject), "irrelevant argument must be a value")
        else:
            self.premise(dh, d.context, head, entry.type, "argument")
        self.kind_premise(kt, d.context, entry.type, "argument type")
        self.same_ctx(dt, d.context, "rest")
        _need(len(dt.subject) == len(d.subject) - 1, "rest has the wrong length")
        _need(all(alpha_eq(a, b) for a, b in zip(dt.subject, d.subject[1:])), "rest premise differs")
        rest = _uinstantiate(d.type[1:], [entry.name], [dh.subject])
        _need(_tele_eq(dt.type, rest), "rest telescope differs")

    def rule_etl_cons(self, d):
        self._list(d, False)

    def rule_etl_icons(self, d):
        self._list(d, True)

    def rule_et_case(self, d):
        m = d.subject
        _need(isinstance(m, UCase), "subject must be a case")
        layouts = d.extra["branches"]
        self.arity(d, len(m.branches) + 2)
        ds = d.children[0]
        self.premise(ds, d.context, m.scrut, None, "scrutinee")
        sty = ds.type
        _need(isinstance(sty, UTCon) and sty.name in self.data, "scrutinee must have a datatype type")
        params, cons, order = self.data[sty.name]
        _need(sorted(br.con for br in m.branches) == sorted(order), "branches do not cover the constructors")
        _need(len(layouts) == len(m.branches), "branch layout missing")
        for br, (con, fields, y), db in zip(m.branches, layouts, d.children[1:-1]):
            _need(br.con == con, "branch order differs")
            tele = _uinstantiate(cons[con], [e.name for e in params], sty.params)
            _need(len(tele) == len(fields), "pattern arity differs")
            ctx = d.context
            rest = _utele_to_pi(tele)
            pattern_args = []
            for (name, irr) in fields:
                assert isinstance(rest, UPi)
                _need(rest.irrelevant == irr, "pattern relevance differs")
                ctx = ctx + ((name, rest.dom),)
                pattern_args.append(ERASED if irr else UVar(name))
                rest = subst(rest.cod, rest.name, UVar(name))
            ctx = ctx + ((y, UEq(m.scrut, UDCon(con, tuple(pattern_args)))),)
            self.same_ctx(db, ctx, f"branch {con}")
            relevant = [n for n, irr in fields if not irr]
            _need(len(relevant) == len(br.vars), "pattern variables differ")
            body = subst_many(br.body, {v: UVar(n) for v, n in zip(br.vars, relevant)})
            _need(alpha_eq(db.subject, body), f"branch {con} body differs")
            _need(alpha_eq(db.type, d.type), f"branch {con} type differs")
            hidden = {n for n, irr in fields if irr} | {y}
            _need(not (db.subject.fv & hidden), f"branch {con} uses an erased variable")
        self.kind_premise(d.children[-1], d.context, d.type, "result")


def validate_uderivation(
    d: UDerivation,
    sig: Signature,
    join_fuel: tuple[int, int] = (DEFAULT_CBV_BOUND, DEFAULT_PARALLEL_DEPTH),
) -> Validation:
    """Check every node of ``d``; report the path to the first bad node."""
    v = _Validator(sig, *join_fuel)
    names: set[str] = set(sig.globals)
    for x, t in d.context:
        if not t.fv <= names:
            return Validation(False, (), d.rule, f"context entry {x} is not well scoped")
        names.add(x)
    return v.validate(d, ())
